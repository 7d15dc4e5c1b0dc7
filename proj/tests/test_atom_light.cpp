#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ionsense/atom_light.hpp"
#include "ionsense/errors.hpp"

using namespace ionsense;

TEST_SUITE("atom_light") {

TEST_CASE("scattering rate at the reference operating point") {
    LaserConfig laser;
    CHECK(scattering_rate(laser) == doctest::Approx(15238311.0329).epsilon(1e-9));
    CHECK(scattering_rate_limit(laser) == doctest::Approx(61575216.0104).epsilon(1e-9));
}

TEST_CASE("scattering rate properties") {
    LaserConfig laser;
    SUBCASE("even in the detuning") {
        LaserConfig flipped = laser;
        flipped.detuning_hz = -laser.detuning_hz;
        CHECK(scattering_rate(flipped) == doctest::Approx(scattering_rate(laser)).epsilon(1e-15));
    }
    SUBCASE("monotone in s and bounded by the asymptote") {
        double prev = 0.0;
        for (double s : {0.1, 0.5, 1.0, 5.0, 50.0, 5000.0}) {
            laser.saturation = s;
            const double rate = scattering_rate(laser);
            CHECK(rate > prev);
            CHECK(rate < scattering_rate_limit(laser));
            prev = rate;
        }
        laser.saturation = 1e12;
        CHECK(scattering_rate(laser) ==
              doctest::Approx(scattering_rate_limit(laser)).epsilon(1e-9));
    }
    SUBCASE("zero saturation scatters nothing") {
        laser.saturation = 0.0;
        CHECK(scattering_rate(laser) == 0.0);
    }
}

TEST_CASE("light pressure force") {
    LaserConfig laser;
    const double rate = scattering_rate(laser);
    const double force = light_pressure_force_zn(rate, laser.wavelength_nm);
    CHECK(force == doctest::Approx(27.326148).epsilon(1e-6));
    // force per scattered photon is hbar k
    CHECK(force / rate == doctest::Approx(1.7932530841515777e-6).epsilon(1e-9));
    CHECK(light_pressure_force_limit_zn(laser) == doctest::Approx(110.419946).epsilon(1e-6));
}

TEST_CASE("saturation inversion round trips") {
    LaserConfig laser;
    for (double s : {0.05, 0.3, 1.0, 4.0, 18.0}) {
        laser.saturation = s;
        const double rate = scattering_rate(laser);
        CHECK(saturation_for_rate(rate, laser) == doctest::Approx(s).epsilon(1e-10));
        const double force = light_pressure_force_zn(rate, laser.wavelength_nm);
        CHECK(saturation_for_force(force, laser) == doctest::Approx(s).epsilon(1e-10));
    }
    CHECK(saturation_for_force(0.0, laser) == 0.0);
    CHECK(saturation_for_force(95.0, laser) == doctest::Approx(18.734018).epsilon(1e-6));
}

TEST_CASE("rates and forces at or beyond the asymptote are unreachable") {
    LaserConfig laser;
    CHECK_THROWS_AS(saturation_for_rate(scattering_rate_limit(laser), laser), InvalidInput);
    CHECK_THROWS_AS(saturation_for_rate(2.0 * scattering_rate_limit(laser), laser), InvalidInput);
    CHECK_THROWS_AS(saturation_for_force(light_pressure_force_limit_zn(laser), laser), InvalidInput);
    CHECK_THROWS_AS(saturation_for_rate(-1.0, laser), InvalidInput);
}

TEST_CASE("detected photon budget") {
    LaserConfig laser;
    DetectionChain chain;
    CHECK(chain.total() == doctest::Approx(0.042 * 0.35 * 0.51).epsilon(1e-12));
    const double n = detected_photon_number(scattering_rate(laser), chain, 20.0);
    CHECK(n == doctest::Approx(2284832.36).epsilon(1e-6));
    chain.splitter_fraction = 0.5;
    CHECK(detected_photon_number(scattering_rate(laser), chain, 20.0) ==
          doctest::Approx(n / 2.0).epsilon(1e-12));
}

TEST_CASE("detection chain validation") {
    DetectionChain chain;
    CHECK_NOTHROW(chain.validate());
    chain.camera_qe = 0.0;
    CHECK_THROWS_AS(chain.validate(), InvalidInput);
    chain.camera_qe = 1.0;
    CHECK_NOTHROW(chain.validate());
    chain.optics_transmission = 1.2;
    CHECK_THROWS_AS(chain.validate(), InvalidInput);
}

TEST_CASE("laser validation") {
    LaserConfig laser;
    laser.linewidth_hz = 0.0;
    CHECK_THROWS_AS(laser.validate(), InvalidInput);
    laser = LaserConfig{};
    laser.saturation = -0.1;
    CHECK_THROWS_AS(laser.validate(), InvalidInput);
    laser = LaserConfig{};
    laser.wavelength_nm = -369.5;
    CHECK_THROWS_AS(laser.validate(), InvalidInput);
}

static std::vector<SaturationSample> synthetic_scan(const LaserConfig& line, double p_sat,
                                                    double scale, double noise_rel,
                                                    std::uint64_t seed) {
    const double dterm = std::pow(2.0 * line.detuning_hz / line.linewidth_hz, 2);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_rel);
    std::vector<SaturationSample> scan;
    const int n = 12;
    for (int i = 0; i < n; ++i) {
        const double p = p_sat * 0.05 * std::pow(20.0 / 0.05, i / double(n - 1));
        const double s = p / p_sat;
        double counts = scale * s / (1.0 + s + dterm);
        if (noise_rel > 0.0) counts *= 1.0 + noise(rng);
        scan.push_back({p, counts});
    }
    return scan;
}

TEST_CASE("saturation curve fit recovers exact synthetic parameters") {
    LaserConfig line;
    const auto scan = synthetic_scan(line, 3.7, 1.0e6, 0.0, 0);
    const SaturationFit fit = fit_saturation_curve(scan, line);
    CHECK(fit.saturation_power == doctest::Approx(3.7).epsilon(1e-8));
    CHECK(fit.scale == doctest::Approx(1.0e6).epsilon(1e-8));
}

TEST_CASE("saturation curve fit tolerates measurement noise") {
    LaserConfig line;
    // a 12-point scan with 1% multiplicative noise leaves ~2% scatter on the
    // fitted saturation power; 8% is a 4-sigma allowance for this one seed
    const auto scan = synthetic_scan(line, 3.7, 1.0e6, 0.01, 42);
    const SaturationFit fit = fit_saturation_curve(scan, line);
    CHECK(fit.saturation_power == doctest::Approx(3.7).epsilon(0.08));
}

TEST_CASE("saturation scan input validation") {
    LaserConfig line;
    std::vector<SaturationSample> scan = {{1.0, 10.0}, {2.0, 18.0}};
    CHECK_THROWS_AS(fit_saturation_curve(scan, line), InvalidInput);
    scan = {{1.0, 10.0}, {1.0, 10.5}, {1.0, 9.5}};
    CHECK_THROWS_AS(fit_saturation_curve(scan, line), InvalidInput);
    scan = {{1.0, 10.0}, {-2.0, 18.0}, {3.0, 25.0}};
    CHECK_THROWS_AS(fit_saturation_curve(scan, line), InvalidInput);
    scan = {{1.0, 10.0}, {2.0, -18.0}, {3.0, 25.0}};
    CHECK_THROWS_AS(fit_saturation_curve(scan, line), InvalidInput);
}

} // TEST_SUITE
