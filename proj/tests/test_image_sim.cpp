#include <doctest.h>

#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "ionsense/errors.hpp"
#include "ionsense/image_sim.hpp"

using namespace ionsense;

namespace {

Scene focus_scene(double photons) { return Scene::make(OpticsConfig{}, photons); }

double pixel_sum(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0);
}

} // namespace

TEST_SUITE("image_sim") {

TEST_CASE("expected image integrates to the contained photon number") {
    const Scene scene = focus_scene(1.0e5);
    CameraConfig camera;
    SUBCASE("no background") {}
    SUBCASE("flat background") { camera.background_rate = 0.5; }

    const ExpectedImage img = expected_image(scene, camera);
    const double bg_total =
        camera.background_rate * camera.exposure_s * camera.roi_width * camera.roi_height;
    CHECK(pixel_sum(img.values) - bg_total ==
          doctest::Approx(scene.expected_photons * img.contained_fraction).epsilon(1e-12));
    CHECK(img.contained_fraction > 0.999);
    CHECK_FALSE(img.truncation_warning);
}

TEST_CASE("centered scene renders a symmetric spot") {
    const Scene scene = focus_scene(5.0e4);
    const CameraConfig camera;
    const ExpectedImage img = expected_image(scene, camera);
    for (int y = 0; y < camera.roi_height; ++y) {
        for (int x = 0; x < camera.roi_width / 2; ++x) {
            const double a = img.values[static_cast<std::size_t>(y) * camera.roi_width + x];
            const double b = img.values[static_cast<std::size_t>(y) * camera.roi_width +
                                        (camera.roi_width - 1 - x)];
            CHECK(a == doctest::Approx(b).epsilon(1e-12));
        }
    }
}

TEST_CASE("ion displacement moves the expected centroid by the same amount") {
    CameraConfig camera;
    const double pixel_nm = camera.object_pixel_nm(OpticsConfig{}.magnification);
    Scene scene = focus_scene(1.0e5);
    scene.ion_position_nm[0] = 2.0 * pixel_nm;

    const ExpectedImage img = expected_image(scene, camera);
    double m = 0.0, mx = 0.0;
    for (int y = 0; y < camera.roi_height; ++y) {
        for (int x = 0; x < camera.roi_width; ++x) {
            const double v = img.values[static_cast<std::size_t>(y) * camera.roi_width + x];
            m += v;
            mx += v * x;
        }
    }
    CHECK(mx / m == doctest::Approx((camera.roi_width - 1) / 2.0 + 2.0).epsilon(1e-9));
}

TEST_CASE("defocus broadens the rendered spot") {
    CameraConfig camera;
    Scene scene = focus_scene(1.0e5);
    const double peak_focus = expected_image(scene, camera).values[16 * 32 + 16];
    scene.optics.defocus_offset_nm = beam_geometry(scene.optics).rayleigh_range_nm;
    const double peak_defocus = expected_image(scene, camera).values[16 * 32 + 16];
    CHECK(peak_defocus < peak_focus);
    // area doubles at z_R, so the peak drops to about half
    CHECK(peak_defocus / peak_focus == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("a spot near the ROI edge is flagged truncated") {
    CameraConfig camera;
    Scene scene = focus_scene(1.0e5);
    scene.ion_position_nm[0] = 15.5 * camera.object_pixel_nm(scene.optics.magnification);
    const ExpectedImage img = expected_image(scene, camera);
    CHECK(img.contained_fraction < 0.99);
    CHECK(img.truncation_warning);
    CHECK(render_frame(scene, camera, 1).meta.truncation_warning);
}

TEST_CASE("rendering is deterministic in seed and frame index") {
    const Scene scene = focus_scene(2.0e4);
    const CameraConfig camera;
    const Frame a = render_frame(scene, camera, 11, 3);
    const Frame b = render_frame(scene, camera, 11, 3);
    CHECK(a.pixels == b.pixels);
    const Frame c = render_frame(scene, camera, 11, 4);
    CHECK(a.pixels != c.pixels);
    const Frame d = render_frame(scene, camera, 12, 3);
    CHECK(a.pixels != d.pixels);
}

TEST_CASE("sampled counts are integers with the right total") {
    const Scene scene = focus_scene(1.0e5);
    const CameraConfig camera;
    const Frame f = render_frame(scene, camera, 5);
    for (double p : f.pixels) CHECK(p == std::floor(p));
    // total photon count fluctuates as sqrt(N)
    CHECK(std::abs(pixel_sum(f.pixels) - 1.0e5) < 5.0 * std::sqrt(1.0e5));
}

TEST_CASE("multiplicative excess noise doubles the variance") {
    Scene scene = focus_scene(0.0);
    CameraConfig camera;
    camera.background_rate = 50.0; // lambda = 1000 per pixel
    camera.em_gain_model = EmGainModel::multiplicative_excess;

    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    for (std::uint64_t i = 0; i < 40; ++i) {
        const Frame f = render_frame(scene, camera, 7, i);
        for (double p : f.pixels) {
            sum += p;
            sum2 += p * p;
            n += 1;
            // the surrogate doubles Poisson draws, so counts are even
            CHECK(std::fmod(p, 2.0) == 0.0);
        }
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(mean == doctest::Approx(1000.0).epsilon(0.01));
    CHECK(var / mean == doctest::Approx(2.0).epsilon(0.08));
}

TEST_CASE("drift model: linear ramp plus random walk") {
    DriftModel drift;
    SUBCASE("zero rates give zero offsets") {
        const std::vector<double> times = {0.0, 10.0, 20.0};
        const auto offsets = simulate_drift(drift, times);
        REQUIRE(offsets.size() == 3);
        for (const auto& o : offsets) {
            CHECK(o[0] == 0.0);
            CHECK(o[1] == 0.0);
            CHECK(o[2] == 0.0);
        }
    }
    SUBCASE("linear term integrates exactly") {
        drift.linear_nm_per_hour = {3600.0, -1800.0, 0.0};
        const std::vector<double> times = {100.0, 250.0};
        const auto offsets = simulate_drift(drift, times);
        CHECK(offsets[0][0] == doctest::Approx(100.0).epsilon(1e-12));
        CHECK(offsets[1][0] == doctest::Approx(250.0).epsilon(1e-12));
        CHECK(offsets[1][1] == doctest::Approx(-125.0).epsilon(1e-12));
        CHECK(offsets[0][2] == 0.0);
    }
    SUBCASE("random walk increments carry the configured variance") {
        drift.random_walk_nm_per_sqrt_hour = {60.0, 0.0, 0.0}; // 1 nm per sqrt(s)
        std::vector<double> times(4000);
        for (std::size_t i = 0; i < times.size(); ++i) times[i] = static_cast<double>(i + 1);
        const auto offsets = simulate_drift(drift, times);
        double var = 0.0;
        for (std::size_t i = 1; i < offsets.size(); ++i) {
            const double inc = offsets[i][0] - offsets[i - 1][0];
            var += inc * inc;
        }
        var /= static_cast<double>(offsets.size() - 1);
        CHECK(var == doctest::Approx(1.0).epsilon(0.12));
        // the untouched axes stay at zero
        CHECK(offsets.back()[1] == 0.0);
    }
    SUBCASE("axes are independent streams") {
        drift.random_walk_nm_per_sqrt_hour = {60.0, 60.0, 60.0};
        const std::vector<double> times = {30.0, 60.0, 90.0};
        const auto offsets = simulate_drift(drift, times);
        CHECK(offsets[0][0] != offsets[0][1]);
        CHECK(offsets[0][1] != offsets[0][2]);
    }
    SUBCASE("same seed reproduces the trace") {
        drift.random_walk_nm_per_sqrt_hour = {60.0, 60.0, 60.0};
        drift.seed = 123;
        const std::vector<double> times = {30.0, 60.0};
        CHECK(simulate_drift(drift, times) == simulate_drift(drift, times));
    }
}

TEST_CASE("drift time validation") {
    DriftModel drift;
    std::vector<double> bad = {10.0, 10.0};
    CHECK_THROWS_AS(simulate_drift(drift, bad), InvalidInput);
    bad = {20.0, 10.0};
    CHECK_THROWS_AS(simulate_drift(drift, bad), InvalidInput);
    bad = {-1.0, 10.0};
    CHECK_THROWS_AS(simulate_drift(drift, bad), InvalidInput);
    drift.random_walk_nm_per_sqrt_hour[0] = -1.0;
    std::vector<double> ok = {1.0, 2.0};
    CHECK_THROWS_AS(simulate_drift(drift, ok), InvalidInput);
}

TEST_CASE("chopped series layout") {
    const Scene scene = focus_scene(5.0e4);
    CameraConfig camera;
    camera.exposure_s = 2.0;
    ChopSchedule schedule;
    schedule.integration_time_s = 2.0;
    schedule.n_cycles = 4;
    schedule.applied_displacement_nm = {0.0, 12.0, 0.0};

    const FrameSeries series = simulate_chopped_series(scene, camera, DriftModel{}, schedule, 3);
    REQUIRE(series.frames.size() == 9);
    for (std::size_t i = 0; i < series.frames.size(); ++i) {
        const Frame& f = series.frames[i];
        CHECK(f.meta.chop == (i % 2 == 1 ? ChopState::force_on : ChopState::force_off));
        CHECK(f.meta.timestamp_s == doctest::Approx((i + 0.5) * 2.0).epsilon(1e-12));
        CHECK(f.meta.frame_index == i);
    }
    CHECK(series.frames.front().meta.chop == ChopState::force_off);
    CHECK(series.frames.back().meta.chop == ChopState::force_off);
    CHECK(series.master_seed == 3);
}

TEST_CASE("applied displacement acts only while the force is on") {
    Scene scene = focus_scene(5.0e4);
    const CameraConfig camera;
    ChopSchedule schedule;
    schedule.n_cycles = 2;
    schedule.applied_displacement_nm = {0.0, 12.0, 0.0};

    const FrameSeries series =
        simulate_chopped_series(scene, camera, DriftModel{}, schedule, 3, 1, true);
    const Frame off_ref = render_expected_frame(scene, camera);
    Scene displaced = scene;
    displaced.ion_position_nm[1] += 12.0;
    const Frame on_ref = render_expected_frame(displaced, camera);

    CHECK(series.frames[0].pixels == off_ref.pixels);
    CHECK(series.frames[1].pixels == on_ref.pixels);
    CHECK(series.frames[2].pixels == off_ref.pixels);
    CHECK(series.noiseless);
}

TEST_CASE("parallel rendering reproduces the serial series") {
    const Scene scene = focus_scene(3.0e4);
    const CameraConfig camera;
    ChopSchedule schedule;
    schedule.n_cycles = 5;
    DriftModel drift;
    drift.linear_nm_per_hour = {40.0, 0.0, 0.0};
    drift.random_walk_nm_per_sqrt_hour = {20.0, 20.0, 20.0};

    const FrameSeries serial = simulate_chopped_series(scene, camera, drift, schedule, 17, 1);
    const FrameSeries parallel = simulate_chopped_series(scene, camera, drift, schedule, 17, 4);
    REQUIRE(serial.frames.size() == parallel.frames.size());
    for (std::size_t i = 0; i < serial.frames.size(); ++i) {
        CHECK(serial.frames[i].pixels == parallel.frames[i].pixels);
    }
}

TEST_CASE("series rendering is deterministic in the master seed") {
    const Scene scene = focus_scene(3.0e4);
    const CameraConfig camera;
    ChopSchedule schedule;
    schedule.n_cycles = 2;
    const FrameSeries a = simulate_chopped_series(scene, camera, DriftModel{}, schedule, 9);
    const FrameSeries b = simulate_chopped_series(scene, camera, DriftModel{}, schedule, 9);
    const FrameSeries c = simulate_chopped_series(scene, camera, DriftModel{}, schedule, 10);
    for (std::size_t i = 0; i < a.frames.size(); ++i) {
        CHECK(a.frames[i].pixels == b.frames[i].pixels);
    }
    CHECK(a.frames[0].pixels != c.frames[0].pixels);
}

TEST_CASE("schedule and camera validation") {
    ChopSchedule schedule;
    schedule.n_cycles = 1;
    CHECK_THROWS_AS(schedule.validate(), InvalidInput);
    schedule = ChopSchedule{};
    schedule.integration_time_s = 0.0;
    CHECK_THROWS_AS(schedule.validate(), InvalidInput);

    CameraConfig camera;
    camera.roi_width = 4;
    CHECK_THROWS_AS(camera.validate(), InvalidInput);
    camera = CameraConfig{};
    camera.exposure_s = -1.0;
    CHECK_THROWS_AS(camera.validate(), InvalidInput);
}

} // TEST_SUITE
