#include "ionsense/force_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ionsense/errors.hpp"

namespace ionsense {

namespace {

constexpr double nan_v = std::numeric_limits<double>::quiet_NaN();

double rms(const std::vector<double>& v) {
    if (v.empty()) return nan_v;
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return nan_v;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return nan_v;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

} // namespace

std::vector<DisplacementSample> displacement_samples(std::span<const SeriesFitEntry> entries,
                                                     const std::optional<DefocusCalibration>& calib) {
    std::vector<DisplacementSample> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
        if (!e.fit) continue;
        const GaussFit2D& fit = *e.fit;
        DisplacementSample s;
        s.time_s = e.timestamp_s;
        s.chop = e.chop;
        s.position_nm = {fit.cx_nm, fit.cy_nm, nan_v};
        s.sigma_fit_nm = {fit.cx_error_nm, fit.cy_error_nm, nan_v};
        if (calib) {
            try {
                const ZEstimate ze = width_to_z(fit.width_w_nm(), fit.width_w_error_nm(), *calib);
                s.position_nm[2] = ze.z_nm - calib->operating_offset_nm;
                s.sigma_fit_nm[2] = ze.z_error_nm;
            } catch (const Error&) {
                // width out of model: this frame contributes no z sample
            }
        }
        out.push_back(s);
    }
    return out;
}

DriftCorrection drift_correct(std::span<const DisplacementSample> samples) {
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (!(samples[i].time_s > samples[i - 1].time_s)) {
            throw InvalidInput("displacement samples must be strictly ordered in time");
        }
    }

    std::vector<std::size_t> off_idx, on_idx;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        (samples[i].chop == ChopState::force_off ? off_idx : on_idx).push_back(i);
    }
    if (off_idx.size() < 3) {
        throw DataError("drift correction requires at least 3 force-off reference frames");
    }
    if (on_idx.empty()) {
        throw DataError("drift correction requires at least one force-on frame");
    }

    DriftCorrection out;
    out.n_off = off_idx.size();

    std::array<std::vector<double>, 3> diffs, fit_sigmas, drift_sigmas;

    for (std::size_t on : on_idx) {
        // flanking OFF references in time
        std::size_t prev = off_idx.size(), next = off_idx.size();
        for (std::size_t k = 0; k < off_idx.size(); ++k) {
            if (off_idx[k] < on) prev = k;
            if (off_idx[k] > on) {
                next = k;
                break;
            }
        }
        if (prev == off_idx.size() || next == off_idx.size()) continue; // unbracketed ON

        const DisplacementSample& s_on = samples[on];
        const DisplacementSample& s0 = samples[off_idx[prev]];
        const DisplacementSample& s1 = samples[off_idx[next]];
        const double alpha = (s_on.time_s - s0.time_s) / (s1.time_s - s0.time_s);

        DisplacementSample d;
        d.time_s = s_on.time_s;
        d.chop = ChopState::force_on;
        for (int a = 0; a < 3; ++a) {
            const double interp = (1.0 - alpha) * s0.position_nm[a] + alpha * s1.position_nm[a];
            d.position_nm[a] = s_on.position_nm[a] - interp;
            const double drift_var = (1.0 - alpha) * (1.0 - alpha) * s0.sigma_fit_nm[a] * s0.sigma_fit_nm[a] +
                                     alpha * alpha * s1.sigma_fit_nm[a] * s1.sigma_fit_nm[a];
            d.sigma_fit_nm[a] = s_on.sigma_fit_nm[a];
            diffs[a].push_back(d.position_nm[a]);
            fit_sigmas[a].push_back(s_on.sigma_fit_nm[a]);
            drift_sigmas[a].push_back(std::sqrt(drift_var));
        }
        out.differentials.push_back(d);
    }

    if (out.differentials.empty()) {
        throw DataError("no force-on frame is bracketed by force-off references");
    }
    out.n_on = out.differentials.size();

    // drift-interpolation error: interior OFF deviation from the line through
    // its OFF neighbours, halved and averaged
    std::array<std::vector<double>, 3> interior_dev;
    for (std::size_t k = 1; k + 1 < off_idx.size(); ++k) {
        const DisplacementSample& sm = samples[off_idx[k - 1]];
        const DisplacementSample& sc = samples[off_idx[k]];
        const DisplacementSample& sp = samples[off_idx[k + 1]];
        const double alpha = (sc.time_s - sm.time_s) / (sp.time_s - sm.time_s);
        for (int a = 0; a < 3; ++a) {
            const double interp = (1.0 - alpha) * sm.position_nm[a] + alpha * sp.position_nm[a];
            interior_dev[a].push_back(std::abs(sc.position_nm[a] - interp) / 2.0);
        }
    }

    for (int a = 0; a < 3; ++a) {
        out.mean_differential_nm[a] = mean(diffs[a]);
        out.differential_scatter_nm[a] = sample_std(diffs[a]);
        out.sigma_fit_nm[a] = rms(fit_sigmas[a]);
        out.sigma_drift_fit_nm[a] = rms(drift_sigmas[a]);
        out.sigma_interp_nm[a] = interior_dev[a].empty() ? 0.0 : mean(interior_dev[a]);
    }
    return out;
}

ErrorBudget ErrorBudget::combine(const std::array<double, 3>& fit,
                                 const std::array<double, 3>& drift_fit,
                                 const std::array<double, 3>& interp) {
    ErrorBudget out;
    out.sigma_fit_nm = fit;
    out.sigma_drift_fit_nm = drift_fit;
    out.sigma_interp_nm = interp;
    for (int a = 0; a < 3; ++a) {
        const double f = fit[a], d = drift_fit[a], i = interp[a];
        if (f < 0.0 || d < 0.0 || i < 0.0) {
            throw InvalidInput("error budget components must be >= 0");
        }
        out.sigma_ion_nm[a] = std::sqrt(f * f + d * d + i * i);
    }
    return out;
}

ErrorBudget error_budget(const DriftCorrection& correction) {
    ErrorBudget out;
    out.sigma_fit_nm = correction.sigma_fit_nm;
    out.sigma_drift_fit_nm = correction.sigma_drift_fit_nm;
    out.sigma_interp_nm = correction.sigma_interp_nm;
    for (int a = 0; a < 3; ++a) {
        const double f = out.sigma_fit_nm[a], d = out.sigma_drift_fit_nm[a], i = out.sigma_interp_nm[a];
        out.sigma_ion_nm[a] = std::sqrt(f * f + d * d + i * i);
    }
    return out;
}

ForceEstimate force_from_displacement(double displacement_nm, double sigma_nm,
                                      const SpringConstants& springs, int axis) {
    if (axis < 0 || axis > 2) throw InvalidInput("axis must be 0, 1 or 2");
    ForceEstimate out;
    out.axis = axis;
    const double k = springs.k_zn_per_nm[axis];
    out.force_zn = k * displacement_nm;
    out.stat_error_zn = k * std::abs(sigma_nm);
    const auto [lo, hi] = springs.bracket(axis);
    if (lo != hi) {
        const double a = lo * displacement_nm;
        const double b = hi * displacement_nm;
        out.systematic_bracket_zn = std::make_pair(std::min(a, b), std::max(a, b));
    }
    return out;
}

SensitivityReport sensitivity(const ErrorBudget& budget, const SpringConstants& springs,
                              double integration_time_s) {
    if (!(integration_time_s > 0.0)) throw InvalidInput("integration time must be > 0 s");
    SensitivityReport out;
    out.integration_time_s = integration_time_s;
    const double sqrt_t = std::sqrt(integration_time_s);
    for (int a = 0; a < 3; ++a) {
        const double sig = budget.sigma_ion_nm[a];
        AxisSensitivity& s = out.axes[a];
        s.value_zn_per_sqrt_hz = springs.k_zn_per_nm[a] * sig * sqrt_t;
        const auto [lo, hi] = springs.bracket(a);
        s.lo = lo * sig * sqrt_t;
        s.hi = hi * sig * sqrt_t;
        s.bracketed = lo != hi;
    }
    return out;
}

AnalysisReport analyze_series(const FrameSeries& series, const SpringConstants& springs,
                              const AnalysisOptions& options) {
    AnalysisReport report;
    report.springs = springs;
    report.n_frames = series.frames.size();

    const auto entries = fit_series(series, options.fit, options.threads);
    for (const auto& e : entries) {
        if (!e.error.empty()) {
            ++report.n_fit_failures;
            report.fit_errors.push_back("frame " + std::to_string(e.frame_index) + ": " + e.error);
        }
    }

    const auto samples = displacement_samples(entries, options.defocus);
    report.correction = drift_correct(samples);
    report.budget = error_budget(report.correction);

    const auto sens = sensitivity(report.budget, springs, series.schedule.integration_time_s);
    for (int a = 0; a < 3; ++a) {
        AxisResult& ax = report.axes[a];
        ax.mean_differential_nm = report.correction.mean_differential_nm[a];
        ax.sigma_ion_nm = report.budget.sigma_ion_nm[a];
        ax.force = force_from_displacement(ax.mean_differential_nm, ax.sigma_ion_nm, springs, a);
        ax.sensitivity = sens.axes[a];
        ax.applied_displacement_nm = series.schedule.applied_displacement_nm[a];
    }
    return report;
}

} // namespace ionsense
