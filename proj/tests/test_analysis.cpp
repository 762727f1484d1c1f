#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "beamkit/analysis.hpp"
#include "beamkit/dsp.hpp"
#include "beamkit/error.hpp"

using namespace beamkit;
using cd = std::complex<double>;

namespace {

ArrayGeometry test_head() {
    return ArrayGeometry({{0.0, 0.034415, 0.049149},
                          {0.041659, 0.034955, 0.025357},
                          {-0.041659, 0.034955, 0.025357},
                          {0.033401, -0.039804, 0.03},
                          {-0.033401, -0.039804, 0.03}},
                         {}, 0);
}

DesignSpec sphere_spec(double gamma_db, int fir_length, int grid_points,
                       double band_low = 300.0) {
    DesignSpec spec;
    spec.grid = FrequencyGrid::uniform(16000.0, grid_points, band_low, 5000.0);
    spec.directions = direction_grid(5.0, 90.0);
    spec.look = Direction{90.0, 90.0};
    spec.desired = DesignSpec::delta_desired(spec.directions, spec.look);
    spec.gamma_db = gamma_db;
    spec.fir_length = fir_length;
    spec.model = RigidSphereModel{0.06, 1.1, 60, kSpeedOfSound};
    return spec;
}

} // namespace

TEST_CASE("narrowband beampattern is exactly one at the look direction") {
    const ArrayGeometry geom = test_head();
    const DesignSpec spec = sphere_spec(-10.0, 64, 17, 500.0);
    const auto weights = design_broadband(spec, geom);
    const Beampattern bp = beampattern(weights, spec.model, geom, {spec.look});
    for (Eigen::Index f = 0; f < bp.values.rows(); ++f)
        CHECK(std::abs(bp.values(f, 0) - cd(1.0, 0.0)) < 1e-10);
}

TEST_CASE("single mic with unit weight sees unit magnitude everywhere") {
    const ArrayGeometry geom({{0.0, 0.03, 0.0}}, {}, 0);
    std::vector<NarrowbandWeights> weights(3);
    const double freqs[3] = {500.0, 2000.0, 6000.0};
    for (int i = 0; i < 3; ++i) {
        weights[std::size_t(i)].freq_hz = freqs[i];
        weights[std::size_t(i)].w = Eigen::VectorXcd::Constant(1, cd(1.0, 0.0));
    }
    const auto dirs = direction_grid(15.0, 90.0);
    const Beampattern bp = beampattern(weights, FreeFieldModel{}, geom, dirs);
    for (Eigen::Index f = 0; f < bp.values.rows(); ++f)
        for (Eigen::Index m = 0; m < bp.values.cols(); ++m)
            CHECK(std::abs(std::abs(bp.values(f, m)) - 1.0) < 1e-12);
}

TEST_CASE("bp_db definition and floor") {
    Beampattern bp;
    bp.freqs_hz = {1000.0};
    bp.directions = {{0.0, 90.0}, {45.0, 90.0}, {90.0, 90.0}};
    bp.values.resize(1, 3);
    bp.values(0, 0) = cd(1.0, 0.0);
    bp.values(0, 1) = cd(0.0, 0.0);
    bp.values(0, 2) = cd(std::sqrt(0.1), 0.0);
    const Eigen::MatrixXd db = bp_db(bp);
    CHECK(db(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(db(0, 1) == doctest::Approx(-80.0));
    CHECK(db(0, 2) == doctest::Approx(-10.0).epsilon(1e-12));
}

TEST_CASE("delay-and-sum white-noise gain is 10 log10 N at every frequency") {
    const ArrayGeometry geom = test_head();
    const Direction look{90.0, 90.0};
    std::vector<NarrowbandWeights> weights;
    for (double f : {300.0, 1000.0, 4000.0, 7900.0}) {
        const auto sm = steering_matrix(FreeFieldModel{}, geom, {look}, look, f);
        Eigen::VectorXd b(1);
        b << 1.0;
        weights.push_back(solve_narrowband(sm, b, 0.1));
    }
    const WngCurve curve = wng_curve(weights, FreeFieldModel{}, geom, look);
    for (double v : curve.wng_db)
        CHECK(std::abs(v - 10.0 * std::log10(5.0)) < 1e-9);
}

TEST_CASE("narrowband designs respect the WNG floor, FIR stays within 1 dB in band") {
    const ArrayGeometry geom = test_head();
    const DesignSpec spec = sphere_spec(-10.0, 256, 65);
    const auto weights = design_broadband(spec, geom);
    const WngCurve nb = wng_curve(weights, spec.model, geom, spec.look);
    for (double v : nb.wng_db)
        CHECK(v >= spec.gamma_db - 1e-6);

    const FirBeamformer bf = design_fir(spec, geom);
    std::vector<double> in_band;
    for (double f : spec.grid.freqs_hz)
        if (spec.grid.in_band(f))
            in_band.push_back(f);
    const WngCurve fir = wng_curve(bf, spec.model, geom, spec.look, in_band);
    for (double v : fir.wng_db)
        CHECK(v >= spec.gamma_db - 1.0);

    SUBCASE("look-direction response within half a dB of unity in band") {
        const Beampattern bp = beampattern(bf, spec.model, geom, {spec.look}, in_band);
        const Eigen::MatrixXd db = bp_db(bp);
        for (Eigen::Index f = 0; f < db.rows(); ++f)
            CHECK(std::abs(db(f, 0)) < 0.5);
    }
}

TEST_CASE("beampattern is linear in the weights") {
    const ArrayGeometry geom = test_head();
    std::mt19937 rng(5);
    std::normal_distribution<double> g;
    std::vector<NarrowbandWeights> w1(2), w2(2);
    for (int p = 0; p < 2; ++p) {
        w1[std::size_t(p)].freq_hz = w2[std::size_t(p)].freq_hz = 1000.0 * (p + 1);
        w1[std::size_t(p)].w = Eigen::VectorXcd::NullaryExpr(5, [&]() {
            return cd(g(rng), g(rng));
        });
        w2[std::size_t(p)].w = 2.5 * w1[std::size_t(p)].w;
    }
    const auto dirs = direction_grid(30.0, 90.0);
    const Beampattern a = beampattern(w1, FreeFieldModel{}, geom, dirs);
    const Beampattern b = beampattern(w2, FreeFieldModel{}, geom, dirs);
    CHECK((b.values - 2.5 * a.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("real taps give conjugate-symmetric channel responses") {
    std::mt19937 rng(8);
    std::normal_distribution<double> g;
    std::vector<double> taps(19);
    for (auto& v : taps)
        v = g(rng);
    for (double omega : {0.4, 1.3, 2.9}) {
        const cd pos = dsp::dtft(taps, omega);
        const cd neg = dsp::dtft(taps, -omega);
        CHECK(std::abs(neg - std::conj(pos)) < 1e-12);
    }
}

TEST_CASE("free-field WNG never exceeds the microphone count") {
    const ArrayGeometry geom = test_head();
    std::mt19937 rng(12);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<NarrowbandWeights> w(1);
        w[0].freq_hz = 200.0 + 7600.0 * std::uniform_real_distribution<double>()(rng);
        w[0].w = Eigen::VectorXcd::NullaryExpr(5, [&]() { return cd(g(rng), g(rng)); });
        const WngCurve curve = wng_curve(w, FreeFieldModel{}, geom, {90.0, 90.0});
        CHECK(curve.wng_db[0] <= 10.0 * std::log10(5.0) + 1e-9);
    }
}

TEST_CASE("csv exports") {
    const ArrayGeometry geom = test_head();
    const DesignSpec spec = sphere_spec(-10.0, 64, 17, 500.0);
    const auto weights = design_broadband(spec, geom);
    const auto dirs = direction_grid(45.0, 90.0);

    SUBCASE("beampattern csv round trips through a parser") {
        const Beampattern bp = beampattern(weights, spec.model, geom, dirs);
        const Eigen::MatrixXd want = bp_db(bp);
        const std::string path = "bp_test.csv";
        write_beampattern_csv(path, bp);
        std::ifstream in(path);
        REQUIRE(in.good());
        std::string header;
        std::getline(in, header);
        CHECK(header.rfind("freq_hz,", 0) == 0);
        std::size_t row = 0;
        std::string line;
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string cell;
            std::getline(ss, cell, ',');
            CHECK(std::abs(std::stod(cell) - bp.freqs_hz[row]) < 1e-9);
            for (Eigen::Index m = 0; m < want.cols(); ++m) {
                std::getline(ss, cell, ',');
                CHECK(std::abs(std::stod(cell) - want(static_cast<Eigen::Index>(row), m)) <
                      1e-9 * std::max(1.0, std::abs(want(static_cast<Eigen::Index>(row), m))));
            }
            ++row;
        }
        CHECK(row == bp.freqs_hz.size());
        std::remove(path.c_str());
    }
    SUBCASE("wng csv layout") {
        const WngCurve curve = wng_curve(weights, spec.model, geom, spec.look);
        const std::string path = "wng_test.csv";
        write_wng_csv(path, curve);
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        CHECK(header == "freq_hz,wng_db");
        std::size_t rows = 0;
        std::string line;
        while (std::getline(in, line))
            if (!line.empty())
                ++rows;
        CHECK(rows == curve.freqs_hz.size());
        std::remove(path.c_str());
    }
}
