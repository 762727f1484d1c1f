#include <doctest.h>

#include <cstdio>
#include <random>

#include "beamkit/error.hpp"
#include "beamkit/spatial.hpp"

using namespace beamkit;

TEST_CASE("unit propagation vector matches the axis conventions") {
    CHECK(unit_propagation_vector({90.0, 90.0}).isApprox(Eigen::Vector3d(0, 1, 0), 1e-14));
    CHECK(unit_propagation_vector({0.0, 90.0}).isApprox(Eigen::Vector3d(1, 0, 0), 1e-14));
    CHECK(unit_propagation_vector({90.0, 0.0}).isApprox(Eigen::Vector3d(0, 0, 1), 1e-14));
}

TEST_CASE("unit propagation vector has unit norm everywhere") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> az(0.0, 360.0), polar(0.0, 180.0);
    for (int i = 0; i < 500; ++i) {
        const Direction d{az(rng), polar(rng)};
        CHECK(std::abs(unit_propagation_vector(d).norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("direction validation rejects out-of-range angles") {
    CHECK_THROWS_AS(validate(Direction{360.0, 90.0}), Error);
    CHECK_THROWS_AS(validate(Direction{-1.0, 90.0}), Error);
    CHECK_THROWS_AS(validate(Direction{0.0, 181.0}), Error);
    CHECK_NOTHROW(validate(Direction{0.0, 0.0}));
}

TEST_CASE("direction grids") {
    SUBCASE("step 45 over [0,180]") {
        const auto grid = direction_grid(45.0, 90.0);
        REQUIRE(grid.size() == 5);
        CHECK(grid[0].azimuth_deg == doctest::Approx(0.0));
        CHECK(grid[1].azimuth_deg == doctest::Approx(45.0));
        CHECK(grid[4].azimuth_deg == doctest::Approx(180.0));
    }
    SUBCASE("step 180 over [0,180]") {
        CHECK(direction_grid(180.0, 90.0).size() == 2);
    }
    SUBCASE("step 5 at polar 56.4 over [0,355]") {
        const auto grid = direction_grid(5.0, 56.4, 0.0, 355.0);
        CHECK(grid.size() == 72);
        for (const auto& d : grid)
            CHECK(d.elevation_polar_deg == doctest::Approx(56.4));
    }
    SUBCASE("strictly increasing, no duplicates") {
        const auto grid = direction_grid(5.0, 90.0);
        for (std::size_t i = 1; i < grid.size(); ++i)
            CHECK(grid[i].azimuth_deg > grid[i - 1].azimuth_deg);
    }
    SUBCASE("bad steps") {
        CHECK_THROWS_AS(direction_grid(0.0, 90.0), Error);
        CHECK_THROWS_AS(direction_grid(-5.0, 90.0), Error);
        CHECK_THROWS_AS(direction_grid(7.0, 90.0), Error); // 7 does not divide 180
    }
}

TEST_CASE("geometry invariants") {
    const std::vector<Eigen::Vector3d> mics{{0, 0, 0}, {0.05, 0, 0}};
    CHECK_NOTHROW(ArrayGeometry(mics, {}, 0));
    CHECK_THROWS_AS(ArrayGeometry({}, {}, 0), Error);
    CHECK_THROWS_AS(ArrayGeometry(mics, {}, 2), Error);
    CHECK_THROWS_AS(ArrayGeometry({{0, 0, 0}, {0, 0, 0}}, {}, 0), Error);
    CHECK_THROWS_AS(ArrayGeometry({{0, 0, 0}, {0, 0, 5e-10}}, {}, 0), Error);
}

TEST_CASE("geometry file round trip and validation") {
    const std::string path = "geom_roundtrip.json";
    const ArrayGeometry geom({{0.01, 0.02, 0.03}, {-0.01, 0.0, 0.05}}, {"a", "b"}, 1);
    geom.save(path);
    const ArrayGeometry back = ArrayGeometry::load(path);
    REQUIRE(back.mic_count() == 2);
    CHECK(back.mic(0).isApprox(geom.mic(0), 1e-15));
    CHECK(back.mic(1).isApprox(geom.mic(1), 1e-15));
    CHECK(back.reference_mic() == 1);
    CHECK(back.label(0) == "a");
    std::remove(path.c_str());

    SUBCASE("rejects non-finite coordinates") {
        const std::string bad = "geom_bad.json";
        FILE* f = std::fopen(bad.c_str(), "w");
        std::fputs("{\"mics\": [[0, 0, 1e999]], \"reference_mic\": 0}", f);
        std::fclose(f);
        CHECK_THROWS_AS(ArrayGeometry::load(bad), Error);
        std::remove(bad.c_str());
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(ArrayGeometry::load("no_such_geometry.json"), Error);
    }
}

TEST_CASE("frequency grid") {
    const auto grid = FrequencyGrid::uniform(16000.0, 129, 300.0, 5000.0);
    REQUIRE(grid.size() == 129);
    CHECK(grid.freqs_hz.front() > 0.0);
    CHECK(grid.freqs_hz.back() == doctest::Approx(8000.0));
    CHECK(grid.in_band(1000.0));
    CHECK(!grid.in_band(100.0));

    FrequencyGrid bad = grid;
    bad.freqs_hz[5] = bad.freqs_hz[4];
    CHECK_THROWS_AS(bad.validate(), Error);

    bad = grid;
    bad.band_high_hz = 9000.0;
    CHECK_THROWS_AS(bad.validate(), Error);

    bad = grid;
    bad.freqs_hz.back() = 8100.0;
    CHECK_THROWS_AS(bad.validate(), Error);
}
