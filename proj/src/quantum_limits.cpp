#include "ionsense/quantum_limits.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <vector>

#include "ionsense/errors.hpp"
#include "ionsense/parallel.hpp"
#include "ionsense/rng.hpp"

namespace ionsense {

namespace {
constexpr double nan_v = std::numeric_limits<double>::quiet_NaN();
}

CentroidLimit centroid_limit(const BeamGeometry& geom, double n_photons) {
    if (!(n_photons > 0.0)) throw InvalidInput("photon number must be > 0");
    if (!(geom.waist_w0_nm > 0.0)) throw InvalidInput("beam waist must be > 0 nm");
    CentroidLimit out;
    out.n_photons = n_photons;
    out.working_nm = geom.waist_w0_nm / std::sqrt(n_photons);
    out.cramer_rao_nm = out.working_nm / 2.0; // sigma_psf = w0/2, exactly half
    return out;
}

double width_relative_limit(double n_photons) {
    if (!(n_photons > 0.0)) throw InvalidInput("photon number must be > 0");
    return 1.0 / std::sqrt(2.0 * n_photons);
}

FocusLimitSet focus_limit(const OpticsConfig& optics, double n_photons) {
    optics.validate();
    if (!(n_photons > 0.0)) throw InvalidInput("photon number must be > 0");
    const double lambda = optics.wavelength_nm;
    const double na = optics.numerical_aperture;
    const double rootn = std::sqrt(n_photons);
    const BeamGeometry geom = beam_geometry(optics);

    FocusLimitSet out;
    out.n_photons = n_photons;
    // (a) depth-of-focus form: 2 lambda / (pi NA^2 sqrt(N)) = 2 z_R / sqrt(N)
    out.direct_formula_nm = 2.0 * lambda / (constants::pi * na * na * rootn);
    // (b) single-aperture-power form: 2 lambda / (NA sqrt(N)); (b)/(a) = pi NA
    out.stated_formula_nm = 2.0 * lambda / (na * rootn);
    // (c) width shot noise through the steepest slope, averaging the two
    // transverse widths:
    //   dz = [w(z_R) / sqrt(2N)] / [dw/dz at z_R] / sqrt(2) = z_R / sqrt(N)
    {
        const double w_at_zr = spot_width_at(geom.rayleigh_range_nm, geom);
        const double dw = w_at_zr * width_relative_limit(n_photons);
        out.slope_chain_nm = dw / width_slope_at(geom.rayleigh_range_nm, geom) / std::sqrt(2.0);
    }
    return out;
}

LimitReport limit_sensitivities(const SpringConstants& springs, const CentroidLimit& limit,
                                double integration_time_s,
                                const std::optional<MeasuredSensitivities>& measured) {
    if (!(integration_time_s > 0.0)) throw InvalidInput("integration time must be > 0 s");
    LimitReport out;
    out.centroid = limit;
    out.integration_time_s = integration_time_s;
    out.attack_rate_nm_per_sqrt_hz = limit.working_nm * std::sqrt(integration_time_s);

    for (int a = 0; a < 3; ++a) {
        AxisSensitivity& s = out.limit_sensitivity[a];
        s.value_zn_per_sqrt_hz = springs.k_zn_per_nm[a] * out.attack_rate_nm_per_sqrt_hz;
        const auto [lo, hi] = springs.bracket(a);
        s.lo = lo * out.attack_rate_nm_per_sqrt_hz;
        s.hi = hi * out.attack_rate_nm_per_sqrt_hz;
        s.bracketed = lo != hi;
        if (measured) {
            const double mid = (s.lo + s.hi) / 2.0;
            out.ratio_vs_measured[a] = mid > 0.0 ? measured->s_zn_per_sqrt_hz[a] / mid : 0.0;
        }
    }
    return out;
}

namespace {

double bootstrap_std_err(const std::vector<double>& values, std::uint64_t seed) {
    // standard error of the sample std via bootstrap resampling
    constexpr int resamples = 200;
    const std::size_t n = values.size();
    std::mt19937_64 rng(derive_seed(seed, 0xB007ull));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> stds;
    stds.reserve(resamples);
    for (int r = 0; r < resamples; ++r) {
        double s = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = values[pick(rng)];
            s += v;
            ss += v * v;
        }
        const double m = s / static_cast<double>(n);
        const double var = std::max(ss / static_cast<double>(n) - m * m, 0.0);
        stds.push_back(std::sqrt(var * static_cast<double>(n) / static_cast<double>(n - 1)));
    }
    double m = 0.0;
    for (double v : stds) m += v;
    m /= resamples;
    double var = 0.0;
    for (double v : stds) var += (v - m) * (v - m);
    return std::sqrt(var / (resamples - 1));
}

double sample_std(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double m = 0.0;
    for (double x : v) m += x;
    m /= n;
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / (n - 1.0));
}

} // namespace

OracleResult monte_carlo_localization(const Scene& scene, const CameraConfig& camera,
                                      int trials, std::uint64_t seed,
                                      const FitConfig& fit, int threads) {
    if (trials < 100) throw InvalidInput("the localization oracle needs at least 100 trials");
    scene.validate();
    camera.validate();

    const double defocus = scene.optics.defocus_offset_nm + scene.ion_position_nm[2];
    const bool z_leg = std::abs(defocus) > 1e-9;
    DefocusCalibration calib;
    if (z_leg) {
        calib.waist_w0_nm = scene.geometry.waist_w0_nm;
        calib.rayleigh_range_nm = scene.geometry.rayleigh_range_nm;
        calib.operating_offset_nm = defocus;
    }

    std::vector<double> cx(trials, nan_v), cy(trials, nan_v);
    std::vector<double> rsx(trials, nan_v), rsy(trials, nan_v);
    std::vector<double> zs(trials, nan_v);
    std::atomic<int> failures{0};

    parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
        Frame frame = render_frame(scene, camera, derive_seed(seed, t), t);
        try {
            const GaussFit2D g = fit_gaussian_2d(frame, fit);
            if (!g.converged) {
                failures.fetch_add(1);
                return;
            }
            cx[t] = g.cx_nm;
            cy[t] = g.cy_nm;
            rsx[t] = g.sigma_x_nm;
            rsy[t] = g.sigma_y_nm;
            if (z_leg) {
                const ZEstimate ze = width_to_z(g.width_w_nm(), g.width_w_error_nm(), calib);
                zs[t] = ze.z_nm;
            }
        } catch (const Error&) {
            failures.fetch_add(1);
        }
    });

    const int nfail = failures.load();
    if (static_cast<double>(nfail) > 0.01 * trials) {
        throw DataError("localization oracle unreliable: more than 1% of fits failed");
    }

    std::vector<double> cx_ok, cy_ok, sx_ok, sy_ok, z_ok;
    for (int t = 0; t < trials; ++t) {
        if (std::isfinite(cx[t])) {
            cx_ok.push_back(cx[t]);
            cy_ok.push_back(cy[t]);
            sx_ok.push_back(rsx[t]);
            sy_ok.push_back(rsy[t]);
            if (z_leg && std::isfinite(zs[t])) z_ok.push_back(zs[t]);
        }
    }

    OracleResult out;
    out.trials = trials;
    out.fit_failures = nfail;

    // pooled x/y centroid scatter
    const double std_cx = sample_std(cx_ok);
    const double std_cy = sample_std(cy_ok);
    out.centroid_std_nm = std::sqrt((std_cx * std_cx + std_cy * std_cy) / 2.0);
    const double err_cx = bootstrap_std_err(cx_ok, derive_seed(seed, 1));
    const double err_cy = bootstrap_std_err(cy_ok, derive_seed(seed, 2));
    out.centroid_std_err_nm = std::sqrt((err_cx * err_cx + err_cy * err_cy) / 2.0);

    // per-axis relative width scatter, pooled
    const double mean_sx = [&] {
        double m = 0.0;
        for (double v : sx_ok) m += v;
        return m / static_cast<double>(sx_ok.size());
    }();
    const double mean_sy = [&] {
        double m = 0.0;
        for (double v : sy_ok) m += v;
        return m / static_cast<double>(sy_ok.size());
    }();
    const double rel_x = sample_std(sx_ok) / mean_sx;
    const double rel_y = sample_std(sy_ok) / mean_sy;
    out.width_rel_std = std::sqrt((rel_x * rel_x + rel_y * rel_y) / 2.0);
    const double werr_x = bootstrap_std_err(sx_ok, derive_seed(seed, 3)) / mean_sx;
    const double werr_y = bootstrap_std_err(sy_ok, derive_seed(seed, 4)) / mean_sy;
    out.width_rel_std_err = std::sqrt((werr_x * werr_x + werr_y * werr_y) / 2.0);

    if (z_leg && z_ok.size() >= 100) {
        out.z_std_nm = sample_std(z_ok);
        out.z_std_err_nm = bootstrap_std_err(z_ok, derive_seed(seed, 5));
    } else {
        out.z_std_nm = nan_v;
        out.z_std_err_nm = nan_v;
    }
    return out;
}

} // namespace ionsense
