#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ionsense/errors.hpp"
#include "ionsense/force_pipeline.hpp"

using namespace ionsense;

namespace {

DisplacementSample sample(double t, double x, double y, double z, ChopState chop,
                          double sigma = 1.0) {
    DisplacementSample s;
    s.time_s = t;
    s.position_nm = {x, y, z};
    s.sigma_fit_nm = {sigma, sigma, sigma};
    s.chop = chop;
    return s;
}

// OFF frames follow a pure linear drift; ON frames add a constant offset.
std::vector<DisplacementSample> chopped_linear(int n_on, double slope_nm_per_s, double on_offset) {
    std::vector<DisplacementSample> out;
    for (int i = 0; i < 2 * n_on + 1; ++i) {
        const double t = 10.0 * i;
        const double base = slope_nm_per_s * t;
        if (i % 2 == 1) {
            out.push_back(sample(t, 0.0, base + on_offset, 0.0, ChopState::force_on));
        } else {
            out.push_back(sample(t, 0.0, base, 0.0, ChopState::force_off));
        }
    }
    return out;
}

SpringConstants reference_springs() {
    SpringConstants k;
    k.k_zn_per_nm = {29.22, 7.29, 7.83};
    k.strong_axis = 0;
    k.weak_axes_bracketed = true;
    k.weak_bracket_zn_per_nm = {7.29, 7.83};
    return k;
}

} // namespace

TEST_SUITE("force_pipeline") {

TEST_CASE("drift correction removes affine drift exactly") {
    const auto samples = chopped_linear(5, 0.37, 12.0);
    const DriftCorrection corr = drift_correct(samples);
    CHECK(corr.n_on == 5);
    CHECK(corr.n_off == 6);
    REQUIRE(corr.differentials.size() == 5);
    for (const auto& d : corr.differentials) {
        CHECK(d.position_nm[1] == doctest::Approx(12.0).epsilon(1e-12));
    }
    CHECK(corr.mean_differential_nm[1] == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(corr.differential_scatter_nm[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
    CHECK(corr.sigma_interp_nm[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
    // interpolating halfway between equal-error OFF frames halves the variance
    CHECK(corr.sigma_drift_fit_nm[1] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
    CHECK(corr.sigma_fit_nm[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("interpolation error is read off interior reference frames") {
    // OFF positions 0, 4, 0: the middle frame sits 4 away from its
    // neighbours' midpoint, so the per-ON interpolation error is half that
    std::vector<DisplacementSample> samples = {
        sample(0.0, 0.0, 0.0, 0.0, ChopState::force_off),
        sample(1.0, 0.0, 12.0, 0.0, ChopState::force_on),
        sample(2.0, 0.0, 4.0, 0.0, ChopState::force_off),
        sample(3.0, 0.0, 12.0, 0.0, ChopState::force_on),
        sample(4.0, 0.0, 0.0, 0.0, ChopState::force_off),
    };
    const DriftCorrection corr = drift_correct(samples);
    CHECK(corr.sigma_interp_nm[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(corr.sigma_interp_nm[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("unbracketed ON frames are dropped") {
    std::vector<DisplacementSample> samples = {
        sample(0.0, 0.0, 5.0, 0.0, ChopState::force_on), // before any OFF: no bracket
        sample(1.0, 0.0, 0.0, 0.0, ChopState::force_off),
        sample(2.0, 0.0, 5.0, 0.0, ChopState::force_on),
        sample(3.0, 0.0, 0.0, 0.0, ChopState::force_off),
        sample(4.0, 0.0, 0.0, 0.0, ChopState::force_off),
    };
    const DriftCorrection corr = drift_correct(samples);
    CHECK(corr.differentials.size() == 1);
    CHECK(corr.mean_differential_nm[1] == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("drift correction input validation") {
    SUBCASE("needs at least three OFF references and says so") {
        std::vector<DisplacementSample> samples = {
            sample(0.0, 0.0, 0.0, 0.0, ChopState::force_off),
            sample(1.0, 0.0, 5.0, 0.0, ChopState::force_on),
            sample(2.0, 0.0, 0.0, 0.0, ChopState::force_off),
        };
        bool threw = false;
        try {
            drift_correct(samples);
        } catch (const DataError& e) {
            threw = true;
            CHECK(std::string(e.what()).find("force-off") != std::string::npos);
        }
        CHECK(threw);
    }
    SUBCASE("needs at least one ON frame") {
        std::vector<DisplacementSample> samples = {
            sample(0.0, 0.0, 0.0, 0.0, ChopState::force_off),
            sample(1.0, 0.0, 0.0, 0.0, ChopState::force_off),
            sample(2.0, 0.0, 0.0, 0.0, ChopState::force_off),
        };
        CHECK_THROWS_AS(drift_correct(samples), DataError);
    }
    SUBCASE("times must be strictly increasing") {
        auto samples = chopped_linear(3, 0.0, 5.0);
        samples[2].time_s = samples[1].time_s;
        CHECK_THROWS_AS(drift_correct(samples), InvalidInput);
    }
}

TEST_CASE("missing axes propagate as NaN without poisoning the others") {
    auto samples = chopped_linear(3, 0.1, 12.0);
    for (auto& s : samples) s.position_nm[2] = std::numeric_limits<double>::quiet_NaN();
    const DriftCorrection corr = drift_correct(samples);
    CHECK(corr.mean_differential_nm[1] == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(std::isnan(corr.mean_differential_nm[2]));
    CHECK(corr.mean_differential_nm[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("error budget quadrature") {
    const ErrorBudget budget = ErrorBudget::combine({1.1, 1.1, 14.3}, {1.1, 1.0, 14.3},
                                                    {2.4, 9.9, 12.7});
    CHECK(budget.sigma_ion_nm[0] == doctest::Approx(2.8600699).epsilon(1e-6));
    CHECK(budget.sigma_ion_nm[1] == doctest::Approx(10.0109940).epsilon(1e-6));
    CHECK(budget.sigma_ion_nm[2] == doctest::Approx(23.8803266).epsilon(1e-6));
    CHECK_THROWS_AS(ErrorBudget::combine({-1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}),
                    InvalidInput);
}

TEST_CASE("force from displacement") {
    const SpringConstants springs = reference_springs();
    SUBCASE("strong axis carries no systematic bracket") {
        const ForceEstimate f = force_from_displacement(-3.25, 0.5, springs, 0);
        CHECK(f.force_zn == doctest::Approx(29.22 * -3.25).epsilon(1e-12));
        CHECK(f.stat_error_zn == doctest::Approx(29.22 * 0.5).epsilon(1e-12));
        CHECK_FALSE(f.systematic_bracket_zn.has_value());
    }
    SUBCASE("weak axis brackets span the principal-axis ambiguity") {
        const ForceEstimate f = force_from_displacement(12.0, 0.5, springs, 1);
        REQUIRE(f.systematic_bracket_zn.has_value());
        CHECK(f.systematic_bracket_zn->first == doctest::Approx(7.29 * 12.0).epsilon(1e-12));
        CHECK(f.systematic_bracket_zn->second == doctest::Approx(7.83 * 12.0).epsilon(1e-12));
    }
    SUBCASE("bracket stays ordered for negative displacements") {
        const ForceEstimate f = force_from_displacement(-12.0, 0.5, springs, 2);
        REQUIRE(f.systematic_bracket_zn.has_value());
        CHECK(f.systematic_bracket_zn->first <= f.systematic_bracket_zn->second);
        CHECK(f.systematic_bracket_zn->first == doctest::Approx(7.83 * -12.0).epsilon(1e-12));
    }
}

TEST_CASE("sensitivity from the reference error budget") {
    const ErrorBudget budget = ErrorBudget::combine({1.1, 1.1, 14.3}, {1.1, 1.0, 14.3},
                                                    {2.4, 9.9, 12.7});
    const SensitivityReport s = sensitivity(budget, reference_springs(), 20.0);
    CHECK(s.axes[0].value_zn_per_sqrt_hz == doctest::Approx(373.74196).epsilon(1e-6));
    CHECK_FALSE(s.axes[0].bracketed);
    CHECK(s.axes[1].bracketed);
    CHECK(s.axes[1].lo == doctest::Approx(326.37713).epsilon(1e-6));
    CHECK(s.axes[1].hi == doctest::Approx(350.55322).epsilon(1e-6));
    CHECK(s.axes[2].lo == doctest::Approx(778.54333).epsilon(1e-6));
    CHECK(s.axes[2].hi == doctest::Approx(836.21321).epsilon(1e-6));
    CHECK(s.integration_time_s == 20.0);
}

TEST_CASE("noiseless end-to-end analysis recovers an injected displacement exactly") {
    Scene scene = Scene::make(OpticsConfig{}, 1.0e5);
    scene.optics.defocus_offset_nm = 287.147224;
    scene.geometry = beam_geometry(scene.optics);
    CameraConfig camera;
    camera.exposure_s = 20.0;
    ChopSchedule schedule;
    schedule.n_cycles = 6;
    schedule.applied_displacement_nm = {0.0, 12.0, 0.0};
    DriftModel drift;
    drift.linear_nm_per_hour = {30.0, 30.0, 30.0};

    const FrameSeries series =
        simulate_chopped_series(scene, camera, drift, schedule, 77, 1, true);

    AnalysisOptions options;
    DefocusCalibration calib;
    calib.waist_w0_nm = scene.geometry.waist_w0_nm;
    calib.rayleigh_range_nm = scene.geometry.rayleigh_range_nm;
    calib.operating_offset_nm = scene.optics.defocus_offset_nm;
    options.defocus = calib;
    options.threads = 2;

    const SpringConstants springs = reference_springs();
    const AnalysisReport report = analyze_series(series, springs, options);
    CHECK(report.n_frames == 13);
    CHECK(report.n_fit_failures == 0);
    CHECK(std::abs(report.axes[1].mean_differential_nm - 12.0) < 1e-5);
    CHECK(std::abs(report.axes[0].mean_differential_nm) < 1e-5);
    CHECK(std::abs(report.axes[2].mean_differential_nm) < 0.05);
    CHECK(report.axes[1].force.force_zn == doctest::Approx(7.29 * 12.0).epsilon(1e-5));
    CHECK(report.axes[1].applied_displacement_nm == doctest::Approx(12.0));
    REQUIRE(report.axes[1].force.systematic_bracket_zn.has_value());
    CHECK(report.axes[1].sensitivity.bracketed);
}

TEST_CASE("displacement samples recover z through a defocus calibration") {
    DefocusCalibration calib;
    const BeamGeometry g = beam_geometry(OpticsConfig{});
    calib.waist_w0_nm = g.waist_w0_nm;
    calib.rayleigh_range_nm = g.rayleigh_range_nm;
    calib.operating_offset_nm = g.rayleigh_range_nm;

    GaussFit2D fit;
    fit.cx_nm = 3.0;
    fit.cy_nm = -4.0;
    fit.cx_error_nm = 0.1;
    fit.cy_error_nm = 0.1;
    // spot width at 40 nm past the operating point
    const double z_true = g.rayleigh_range_nm + 40.0;
    fit.sigma_x_nm = spot_width_at(z_true, g) / 2.0;
    fit.sigma_y_nm = fit.sigma_x_nm;
    fit.sigma_x_error_nm = 0.5;
    fit.sigma_y_error_nm = 0.5;
    // the width error is propagated from the covariance (pixel units),
    // parameters ordered flux, cx, cy, sx, sy, offset
    fit.covariance = Eigen::MatrixXd::Zero(6, 6);
    fit.covariance(3, 3) = std::pow(0.5 / 40.0, 2);
    fit.covariance(4, 4) = std::pow(0.5 / 40.0, 2);
    fit.object_pixel_nm = 40.0;
    fit.converged = true;

    SeriesFitEntry entry;
    entry.frame_index = 0;
    entry.timestamp_s = 10.0;
    entry.chop = ChopState::force_on;
    entry.fit = fit;

    const std::vector<SeriesFitEntry> entries = {entry};
    SUBCASE("with calibration") {
        const auto samples = displacement_samples(entries, calib);
        REQUIRE(samples.size() == 1);
        CHECK(samples[0].position_nm[0] == doctest::Approx(3.0));
        CHECK(samples[0].position_nm[1] == doctest::Approx(-4.0));
        CHECK(samples[0].position_nm[2] == doctest::Approx(40.0).epsilon(1e-6));
        CHECK(samples[0].sigma_fit_nm[2] > 0.0);
    }
    SUBCASE("without calibration the z axis is absent") {
        const auto samples = displacement_samples(entries, std::nullopt);
        REQUIRE(samples.size() == 1);
        CHECK(std::isnan(samples[0].position_nm[2]));
        CHECK(samples[0].position_nm[0] == doctest::Approx(3.0));
    }
}

} // TEST_SUITE
