#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "beamkit/design.hpp"
#include "beamkit/error.hpp"
#include "oracles.hpp"

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

struct RandomInstance {
    SteeringMatrix sm;
    Eigen::VectorXd desired;
    double gamma = 0.1;
};

RandomInstance random_instance(std::mt19937& rng) {
    std::uniform_int_distribution<int> pick_n(2, 4), pick_m(1, 9);
    std::uniform_real_distribution<double> coord(-0.06, 0.06), az(0.0, 355.0),
        polar(20.0, 160.0), freq(200.0, 7000.0), level(0.0, 0.8);
    const int n = pick_n(rng), m = pick_m(rng);
    std::vector<Eigen::Vector3d> mics;
    for (int i = 0; i < n; ++i)
        mics.push_back({coord(rng), coord(rng), coord(rng)});
    const ArrayGeometry geom(mics, {}, 0);
    std::vector<Direction> dirs;
    for (int i = 0; i < m; ++i)
        dirs.push_back({az(rng), polar(rng)});
    const std::size_t look = std::uniform_int_distribution<std::size_t>(0, dirs.size() - 1)(rng);
    RandomInstance inst;
    inst.sm = steering_matrix(FreeFieldModel{}, geom, dirs, dirs[look], freq(rng));
    inst.desired = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < m; ++i)
        inst.desired(i) = level(rng);
    inst.desired(static_cast<Eigen::Index>(look)) = 1.0;
    // anywhere between strongly active and inactive WNG constraints
    const double max_wng_db = 10.0 * std::log10(inst.sm.look_vector.squaredNorm());
    inst.gamma = std::pow(10.0, std::uniform_real_distribution<double>(
                                    -25.0, max_wng_db - 0.05)(rng) /
                                    10.0);
    return inst;
}

} // namespace

TEST_CASE("single-direction design collapses to delay-and-sum") {
    const ArrayGeometry geom = test_head();
    const Direction look{90.0, 90.0};
    const auto sm = steering_matrix(FreeFieldModel{}, geom, {look}, look, 2000.0);
    Eigen::VectorXd b(1);
    b << 1.0;
    for (double gamma_db : {-10.0, 0.0, 6.9}) {
        const auto nb = solve_narrowband(sm, b, std::pow(10.0, gamma_db / 10.0));
        const Eigen::VectorXcd das = sm.look_vector.conjugate() / 5.0;
        CHECK((nb.w - das).norm() < 1e-10);
        CHECK(nb.residual < 1e-16);
        CHECK(nb.wng_linear == doctest::Approx(5.0).epsilon(1e-10));
        CHECK(nb.lambda == 0.0);
    }
}

TEST_CASE("infeasible WNG bound names the achievable maximum") {
    const ArrayGeometry geom = test_head();
    const auto dirs = direction_grid(15.0, 90.0);
    const auto sm = steering_matrix(FreeFieldModel{}, geom, dirs, {90.0, 90.0}, 1000.0);
    const Eigen::VectorXd b = DesignSpec::delta_desired(dirs, {90.0, 90.0});
    const double too_much = std::pow(10.0, (10.0 * std::log10(5.0) + 0.1) / 10.0);
    CHECK_THROWS_WITH_AS(solve_narrowband(sm, b, too_much), doctest::Contains("6.9897"), Error);
    try {
        solve_narrowband(sm, b, too_much);
        FAIL("expected infeasibility");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::infeasible);
    }
}

TEST_CASE("empty direction set is rejected") {
    const ArrayGeometry geom = test_head();
    CHECK_THROWS_AS(steering_matrix(FreeFieldModel{}, geom, {}, {90.0, 90.0}, 1000.0), Error);
}

TEST_CASE("solver matches the dense ridge-grid oracle on a fixed instance") {
    // N=3, M=7 free-field instance at 2 kHz
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> coord(-0.05, 0.05);
    std::vector<Eigen::Vector3d> mics;
    for (int i = 0; i < 3; ++i)
        mics.push_back({coord(rng), coord(rng), coord(rng)});
    const ArrayGeometry geom(mics, {}, 0);
    const auto dirs = direction_grid(30.0, 90.0); // 7 directions
    const Direction look = dirs[3];
    const auto sm = steering_matrix(FreeFieldModel{}, geom, dirs, look, 2000.0);
    const Eigen::VectorXd b = DesignSpec::delta_desired(dirs, look);
    const double gamma = std::pow(10.0, -10.0 / 10.0);
    const auto nb = solve_narrowband(sm, b, gamma);
    const double oracle = oracles::wng_grid_best_objective(sm.response, sm.look_vector, b, gamma);
    CHECK(nb.residual <= oracle + 1e-6 * std::max(1.0, oracle));
    CHECK(std::abs(nb.residual - oracle) <= 1e-3 * std::max(1.0, oracle));
}

TEST_CASE("solver constraints and optimality on random instances") {
    std::mt19937 rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const RandomInstance inst = random_instance(rng);
        const auto nb = solve_narrowband(inst.sm, inst.desired, inst.gamma);
        const cd resp = (inst.sm.look_vector.transpose() * nb.w).value();
        CHECK(std::abs(resp - cd(1.0, 0.0)) <= 1e-8);
        const double budget = 1.0 / inst.gamma;
        CHECK(nb.w.squaredNorm() <= budget * (1.0 + 1e-8));
        CHECK(nb.wng_linear >= inst.gamma * (1.0 - 1e-6));
        // complementarity: either interior (lambda 0) or the budget is spent
        CHECK(nb.lambda * (budget - nb.w.squaredNorm()) <= 1e-6 * budget);
        const double oracle = oracles::wng_grid_best_objective(
            inst.sm.response, inst.sm.look_vector, inst.desired, inst.gamma, 2000);
        CHECK(nb.residual <= oracle + 1e-6 * std::max(1.0, oracle));
    }
}

TEST_CASE("zeroed rows behave like removed directions") {
    const ArrayGeometry geom = test_head();
    const auto dirs = direction_grid(30.0, 90.0);
    const Direction look = dirs[3];
    const auto sm = steering_matrix(FreeFieldModel{}, geom, dirs, look, 1500.0);
    const Eigen::VectorXd b = DesignSpec::delta_desired(dirs, look);

    SteeringMatrix zeroed = sm;
    for (Eigen::Index m = 0; m < zeroed.response.rows(); ++m)
        if (b(m) == 0.0)
            zeroed.response.row(m).setZero();
    SteeringMatrix only_look;
    only_look.freq_hz = sm.freq_hz;
    only_look.response = sm.response.row(3);
    only_look.look_vector = sm.look_vector;
    Eigen::VectorXd b1(1);
    b1 << 1.0;

    const double gamma = 0.1;
    const auto wa = solve_narrowband(zeroed, b, gamma);
    const auto wb = solve_narrowband(only_look, b1, gamma);
    CHECK((wa.w - wb.w).norm() < 1e-9);
}

TEST_CASE("broadband design") {
    const ArrayGeometry geom = test_head();
    DesignSpec spec;
    spec.grid = FrequencyGrid::uniform(16000.0, 33, 300.0, 5000.0);
    spec.directions = direction_grid(15.0, 90.0);
    spec.look = Direction{90.0, 90.0};
    spec.desired = DesignSpec::delta_desired(spec.directions, spec.look);
    spec.gamma_db = -10.0;
    spec.fir_length = 128;
    spec.model = FreeFieldModel{};

    const auto weights = design_broadband(spec, geom);
    REQUIRE(weights.size() == 33);
    SUBCASE("per-frequency WNG meets the bound exactly") {
        for (const auto& nb : weights)
            CHECK(10.0 * std::log10(nb.wng_linear) >= spec.gamma_db - 1e-6);
    }
    SUBCASE("looser bound fits at least as well everywhere") {
        DesignSpec loose = spec;
        loose.gamma_db = -20.0;
        const auto loose_weights = design_broadband(loose, geom);
        for (std::size_t p = 0; p < weights.size(); ++p)
            CHECK(weights[p].residual >= loose_weights[p].residual - 1e-12);
    }
    SUBCASE("infeasible bound aborts with the frequency index") {
        DesignSpec bad = spec;
        bad.gamma_db = 10.0 * std::log10(5.0) + 0.5;
        CHECK_THROWS_WITH_AS(design_broadband(bad, geom), doctest::Contains("index 0"), Error);
    }
}

TEST_CASE("fir approximation") {
    SUBCASE("identity: realizable targets recover the taps") {
        std::mt19937 rng(17);
        std::normal_distribution<double> g;
        const int length = 16;
        std::vector<double> taps(length);
        for (auto& v : taps)
            v = g(rng);
        const auto grid = FrequencyGrid::uniform(16000.0, 17, 500.0, 7000.0);
        const double tau = (length - 1) / 2.0;
        std::vector<NarrowbandWeights> weights(grid.size());
        for (std::size_t p = 0; p < grid.size(); ++p) {
            const double omega = 2.0 * M_PI * grid.freqs_hz[p] / 16000.0;
            cd resp(0.0, 0.0);
            for (int l = 0; l < length; ++l)
                resp += taps[std::size_t(l)] * std::exp(cd(0.0, -omega * l));
            weights[p].freq_hz = grid.freqs_hz[p];
            weights[p].w = Eigen::VectorXcd::Constant(1, resp * std::exp(cd(0.0, omega * tau)));
        }
        const FirBeamformer bf = fir_approximation(weights, length, grid);
        REQUIRE(bf.length() == length);
        for (int l = 0; l < length; ++l)
            CHECK(std::abs(bf.taps(0, l) - taps[std::size_t(l)]) < 1e-9);
    }
    SUBCASE("zero targets give zero taps") {
        const auto grid = FrequencyGrid::uniform(16000.0, 9, 1000.0, 7000.0);
        std::vector<NarrowbandWeights> weights(grid.size());
        for (std::size_t p = 0; p < grid.size(); ++p) {
            weights[p].freq_hz = grid.freqs_hz[p];
            weights[p].w = Eigen::VectorXcd::Zero(2);
        }
        const FirBeamformer bf = fir_approximation(weights, 32, grid);
        CHECK(bf.taps.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("linear in the narrowband targets") {
        std::mt19937 rng(23);
        std::normal_distribution<double> g;
        const auto grid = FrequencyGrid::uniform(16000.0, 25, 500.0, 7000.0);
        std::vector<NarrowbandWeights> wa(grid.size()), wb(grid.size()), wc(grid.size());
        for (std::size_t p = 0; p < grid.size(); ++p) {
            wa[p].freq_hz = wb[p].freq_hz = wc[p].freq_hz = grid.freqs_hz[p];
            wa[p].w = Eigen::VectorXcd(1);
            wb[p].w = Eigen::VectorXcd(1);
            wa[p].w(0) = cd(g(rng), g(rng));
            wb[p].w(0) = cd(g(rng), g(rng));
            wc[p].w = 2.0 * wa[p].w + 3.0 * wb[p].w;
        }
        const auto fa = fir_approximation(wa, 48, grid);
        const auto fb = fir_approximation(wb, 48, grid);
        const auto fc = fir_approximation(wc, 48, grid);
        CHECK((fc.taps - (2.0 * fa.taps + 3.0 * fb.taps)).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("long filters stay on a centered support the grid can determine") {
        const auto grid = FrequencyGrid::uniform(16000.0, 17, 500.0, 7000.0);
        std::vector<NarrowbandWeights> weights(grid.size());
        for (std::size_t p = 0; p < grid.size(); ++p) {
            weights[p].freq_hz = grid.freqs_hz[p];
            weights[p].w = Eigen::VectorXcd::Constant(1, cd(1.0, 0.0));
        }
        const FirBeamformer bf = fir_approximation(weights, 128, grid);
        // support is 2*(P-1) = 32 taps centered at (L-1)/2
        for (int l = 0; l < 48; ++l)
            CHECK(bf.taps(0, l) == 0.0);
        for (int l = 80; l < 128; ++l)
            CHECK(bf.taps(0, l) == 0.0);
        CHECK(bf.taps.row(0).segment(48, 32).cwiseAbs().maxCoeff() > 0.0);
    }
}

TEST_CASE("desk-scale sphere design realizes its targets within half a dB") {
    const ArrayGeometry geom = test_head();
    DesignSpec spec;
    spec.grid = FrequencyGrid::uniform(16000.0, 65, 300.0, 5000.0);
    spec.directions = direction_grid(5.0, 90.0);
    spec.look = Direction{90.0, 90.0};
    spec.desired = DesignSpec::delta_desired(spec.directions, spec.look);
    spec.gamma_db = -10.0;
    spec.fir_length = 256;
    spec.model = RigidSphereModel{0.06, 1.1, 60, kSpeedOfSound};

    const auto weights = design_broadband(spec, geom);
    const FirBeamformer bf = fir_approximation(weights, spec.fir_length, spec.grid);
    for (std::size_t p = 0; p < weights.size(); ++p) {
        const double f = spec.grid.freqs_hz[p];
        if (!spec.grid.in_band(f))
            continue;
        const double omega = 2.0 * M_PI * f / 16000.0;
        for (int n = 0; n < bf.channels(); ++n) {
            cd realized(0.0, 0.0);
            for (int l = 0; l < bf.length(); ++l)
                realized += bf.taps(n, l) * std::exp(cd(0.0, -omega * l));
            const cd target =
                weights[p].w(n) * std::exp(cd(0.0, -omega * bf.group_delay_samples));
            if (std::abs(target) > 1e-3)
                CHECK(std::abs(20.0 * std::log10(std::abs(realized) / std::abs(target))) < 0.5);
        }
    }
}

TEST_CASE("single-frequency broadband design reduces to the narrowband solve") {
    const ArrayGeometry geom = test_head();
    DesignSpec spec;
    spec.grid.sample_rate_hz = 16000.0;
    spec.grid.freqs_hz = {2000.0};
    spec.grid.band_low_hz = spec.grid.band_high_hz = 2000.0;
    spec.directions = direction_grid(15.0, 90.0);
    spec.look = Direction{90.0, 90.0};
    spec.desired = DesignSpec::delta_desired(spec.directions, spec.look);
    spec.gamma_db = -10.0;
    spec.fir_length = 16;
    spec.model = FreeFieldModel{};
    const auto weights = design_broadband(spec, geom);
    REQUIRE(weights.size() == 1);
    const auto sm = steering_matrix(spec.model, geom, spec.directions, spec.look, 2000.0);
    const auto nb = solve_narrowband(sm, spec.desired, spec.gamma_linear());
    CHECK((weights[0].w - nb.w).norm() == 0.0);
}

TEST_CASE("design output does not depend on the worker thread count") {
    const ArrayGeometry geom = test_head();
    DesignSpec spec;
    spec.grid = FrequencyGrid::uniform(16000.0, 33, 300.0, 5000.0);
    spec.directions = direction_grid(15.0, 90.0);
    spec.look = Direction{90.0, 90.0};
    spec.desired = DesignSpec::delta_desired(spec.directions, spec.look);
    spec.gamma_db = -10.0;
    spec.fir_length = 64;
    spec.model = RigidSphereModel{};

    setenv("BEAMKIT_THREADS", "1", 1);
    const FirBeamformer serial = design_fir(spec, geom);
    setenv("BEAMKIT_THREADS", "4", 1);
    const FirBeamformer parallel = design_fir(spec, geom);
    unsetenv("BEAMKIT_THREADS");
    CHECK((serial.taps - parallel.taps).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("too-short filters report the fit error instead of failing") {
    const ArrayGeometry geom = test_head();
    DesignSpec spec;
    spec.grid = FrequencyGrid::uniform(16000.0, 65, 300.0, 5000.0);
    spec.directions = direction_grid(15.0, 90.0);
    spec.look = Direction{90.0, 90.0};
    spec.desired = DesignSpec::delta_desired(spec.directions, spec.look);
    spec.gamma_db = -10.0;
    spec.fir_length = 8; // far too short for a superdirective response
    spec.model = FreeFieldModel{};
    const FirBeamformer bf = design_fir(spec, geom);
    CHECK(bf.length() == 8);
    CHECK(bf.fit_error_db > -40.0); // the misfit is visible in the metadata
    CHECK(bf.taps.allFinite());
}

TEST_CASE("beamformer file round trip") {
    std::mt19937 rng(31);
    std::normal_distribution<double> g;
    FirBeamformer bf;
    bf.taps = Eigen::MatrixXd::NullaryExpr(3, 24, [&]() { return g(rng); });
    bf.sample_rate_hz = 16000.0;
    bf.group_delay_samples = 11.5;
    bf.response_delay_samples = 7.5;
    bf.fit_error_db = -45.0;
    bf.spec_digest = "test";
    const std::string path = "bf_roundtrip.json";
    bf.save(path);
    const FirBeamformer back = FirBeamformer::load(path);
    CHECK((back.taps - bf.taps).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.group_delay_samples == bf.group_delay_samples);
    CHECK(back.response_delay_samples == bf.response_delay_samples);
    CHECK(back.spec_digest == bf.spec_digest);
    std::remove(path.c_str());
}
