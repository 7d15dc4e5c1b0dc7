#include "ionsense/image_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "ionsense/errors.hpp"
#include "ionsense/parallel.hpp"
#include "ionsense/rng.hpp"

namespace ionsense {

double CameraConfig::object_pixel_nm(double magnification) const {
    if (!(magnification > 0.0)) throw InvalidInput("magnification must be > 0");
    return pixel_pitch_image_um * 1e3 / magnification;
}

void CameraConfig::validate() const {
    if (!(pixel_pitch_image_um > 0.0)) throw InvalidInput("pixel pitch must be > 0 um");
    if (roi_width < 8 || roi_height < 8) throw InvalidInput("ROI must be at least 8x8 pixels");
    if (!(exposure_s > 0.0)) throw InvalidInput("exposure must be > 0 s");
    if (!(background_rate >= 0.0)) throw InvalidInput("background rate must be >= 0");
}

Scene Scene::make(const OpticsConfig& optics, double expected_photons) {
    Scene s;
    s.optics = optics;
    s.geometry = beam_geometry(optics);
    s.expected_photons = expected_photons;
    return s;
}

void Scene::validate() const {
    optics.validate();
    if (!(expected_photons >= 0.0)) throw InvalidInput("expected photon number must be >= 0");
    if (!(geometry.waist_w0_nm > 0.0) || !(geometry.rayleigh_range_nm > 0.0)) {
        throw InvalidInput("scene geometry must have positive waist and Rayleigh range");
    }
    for (double c : ion_position_nm) {
        if (!std::isfinite(c)) throw InvalidInput("ion position must be finite");
    }
}

namespace {

// Exact integral of a unit Gaussian over pixel i: the erf antiderivative
// evaluated at the pixel edges.
inline double pixel_integral(int i, double center_px, double sigma_px) {
    const double inv = 1.0 / (std::sqrt(2.0) * sigma_px);
    const double lo = (static_cast<double>(i) - 0.5 - center_px) * inv;
    const double hi = (static_cast<double>(i) + 0.5 - center_px) * inv;
    return 0.5 * (std::erf(hi) - std::erf(lo));
}

// Fraction of the 1D marginal falling inside [lo_edge, hi_edge].
inline double contained_1d(double lo_edge, double hi_edge, double center_px, double sigma_px) {
    const double inv = 1.0 / (std::sqrt(2.0) * sigma_px);
    return 0.5 * (std::erf((hi_edge - center_px) * inv) - std::erf((lo_edge - center_px) * inv));
}

} // namespace

ExpectedImage expected_image(const Scene& scene, const CameraConfig& camera) {
    scene.validate();
    camera.validate();

    const double pixel_nm = camera.object_pixel_nm(scene.optics.magnification);
    const double defocus = scene.optics.defocus_offset_nm + scene.ion_position_nm[2];
    const double sigma_nm = spot_width_at(defocus, scene.geometry) / 2.0;
    const double sigma_px = sigma_nm / pixel_nm;

    const int w = camera.roi_width;
    const int h = camera.roi_height;
    const double cx = (w - 1) / 2.0 + scene.ion_position_nm[0] / pixel_nm;
    const double cy = (h - 1) / 2.0 + scene.ion_position_nm[1] / pixel_nm;

    std::vector<double> ex(w), ey(h);
    for (int i = 0; i < w; ++i) ex[i] = pixel_integral(i, cx, sigma_px);
    for (int j = 0; j < h; ++j) ey[j] = pixel_integral(j, cy, sigma_px);

    const double bg = camera.background_rate * camera.exposure_s;

    ExpectedImage out;
    out.width = w;
    out.height = h;
    out.values.resize(static_cast<std::size_t>(w) * h);
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) {
            out.values[static_cast<std::size_t>(j) * w + i] = bg + scene.expected_photons * ex[i] * ey[j];
        }
    }
    out.contained_fraction = contained_1d(-0.5, w - 0.5, cx, sigma_px) *
                             contained_1d(-0.5, h - 0.5, cy, sigma_px);
    out.truncation_warning = out.contained_fraction < 0.99;
    return out;
}

namespace {

constexpr double uint32_ceiling = 4294967295.0;

Frame frame_from_values(const Scene& scene, const CameraConfig& camera, std::vector<double> values,
                        bool truncation) {
    Frame f;
    f.width = camera.roi_width;
    f.height = camera.roi_height;
    f.pixels = std::move(values);
    f.meta.exposure_s = camera.exposure_s;
    f.meta.object_pixel_nm = camera.object_pixel_nm(scene.optics.magnification);
    f.meta.truncation_warning = truncation;
    return f;
}

} // namespace

Frame render_expected_frame(const Scene& scene, const CameraConfig& camera) {
    ExpectedImage img = expected_image(scene, camera);
    Frame f = frame_from_values(scene, camera, std::move(img.values), img.truncation_warning);
    f.meta.provenance = "expected";
    return f;
}

Frame render_frame(const Scene& scene, const CameraConfig& camera, std::uint64_t seed,
                   std::uint64_t frame_index) {
    ExpectedImage img = expected_image(scene, camera);

    std::mt19937_64 rng = make_engine(seed, frame_index);
    const bool excess = camera.em_gain_model == EmGainModel::multiplicative_excess;

    std::vector<double> counts(img.values.size(), 0.0);
    bool saturated = false;
    for (std::size_t i = 0; i < img.values.size(); ++i) {
        double lambda = img.values[i];
        if (lambda < 0.0) lambda = 0.0;
        double c = 0.0;
        if (lambda > 0.0) {
            if (excess) {
                // variance-doubling surrogate for EM-register noise:
                // mean lambda, variance 2 lambda
                std::poisson_distribution<long long> dist(lambda / 2.0);
                c = 2.0 * static_cast<double>(dist(rng));
            } else {
                std::poisson_distribution<long long> dist(lambda);
                c = static_cast<double>(dist(rng));
            }
        }
        if (c > uint32_ceiling) {
            c = uint32_ceiling;
            saturated = true;
        }
        counts[i] = c;
    }

    Frame f = frame_from_values(scene, camera, std::move(counts), img.truncation_warning);
    f.meta.master_seed = seed;
    f.meta.frame_index = frame_index;
    f.meta.saturated = saturated;
    f.meta.provenance = "poisson";
    return f;
}

std::vector<std::array<double, 3>> simulate_drift(const DriftModel& drift,
                                                  std::span<const double> times_s) {
    for (double r : drift.random_walk_nm_per_sqrt_hour) {
        if (!(r >= 0.0)) throw InvalidInput("random walk scale must be >= 0");
    }
    for (std::size_t i = 0; i < times_s.size(); ++i) {
        if (!(times_s[i] >= 0.0)) throw InvalidInput("drift times must be >= 0");
        if (i > 0 && !(times_s[i] > times_s[i - 1])) {
            throw InvalidInput("drift times must be strictly increasing");
        }
    }

    std::vector<std::array<double, 3>> out(times_s.size());
    for (int axis = 0; axis < 3; ++axis) {
        std::mt19937_64 rng = make_engine(drift.seed, static_cast<std::uint64_t>(axis));
        std::normal_distribution<double> gauss(0.0, 1.0);
        const double lin = drift.linear_nm_per_hour[axis] / 3600.0;      // nm/s
        const double rw = drift.random_walk_nm_per_sqrt_hour[axis] / 60.0; // nm/sqrt(s)
        double walk = 0.0;
        double t_prev = 0.0;
        for (std::size_t i = 0; i < times_s.size(); ++i) {
            const double dt = times_s[i] - t_prev;
            if (rw > 0.0 && dt > 0.0) walk += rw * std::sqrt(dt) * gauss(rng);
            t_prev = times_s[i];
            out[i][axis] = lin * times_s[i] + walk;
        }
    }
    return out;
}

void ChopSchedule::validate() const {
    if (!(integration_time_s > 0.0)) throw InvalidInput("integration time must be > 0 s");
    if (n_cycles < 2) throw InvalidInput("chopped acquisition needs at least 2 cycles");
    for (double d : applied_displacement_nm) {
        if (!std::isfinite(d)) throw InvalidInput("applied displacement must be finite");
    }
}

FrameSeries simulate_chopped_series(const Scene& base, const CameraConfig& camera,
                                    const DriftModel& drift, const ChopSchedule& schedule,
                                    std::uint64_t seed, int threads, bool noiseless) {
    base.validate();
    camera.validate();
    schedule.validate();

    const int n_frames = 2 * schedule.n_cycles + 1;
    const double T = schedule.integration_time_s;

    std::vector<double> centers(n_frames);
    for (int i = 0; i < n_frames; ++i) centers[i] = i * T + T / 2.0;

    DriftModel drift_used = drift;
    drift_used.seed = derive_seed(seed, 0x0d51f7ull); // sub-stream for the drift walk
    const auto offsets = simulate_drift(drift_used, centers);

    FrameSeries series;
    series.frames.resize(n_frames);
    series.schedule = schedule;
    series.camera = camera;
    series.base_scene = base;
    series.drift = drift_used;
    series.master_seed = seed;
    series.noiseless = noiseless;

    parallel_for(static_cast<std::size_t>(n_frames), threads, [&](std::size_t i) {
        const bool on = (i % 2) == 1; // frames alternate OFF, ON, OFF, ...
        Scene scene = base;
        for (int a = 0; a < 3; ++a) {
            scene.ion_position_nm[a] += offsets[i][a];
            if (on) scene.ion_position_nm[a] += schedule.applied_displacement_nm[a];
        }
        Frame f = noiseless ? render_expected_frame(scene, camera)
                            : render_frame(scene, camera, seed, i);
        f.meta.timestamp_s = centers[i];
        f.meta.chop = on ? ChopState::force_on : ChopState::force_off;
        f.meta.master_seed = seed;
        f.meta.frame_index = i;
        series.frames[static_cast<std::size_t>(i)] = std::move(f);
    });

    return series;
}

} // namespace ionsense
