#include "ionsense/reports.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace ionsense {

namespace {

nlohmann::json axis_array(const std::array<double, 3>& v) {
    return nlohmann::json::array({v[0], v[1], v[2]});
}

nlohmann::json sensitivity_json(const AxisSensitivity& s) {
    nlohmann::json j;
    j["value_zn_per_sqrt_hz"] = s.value_zn_per_sqrt_hz;
    if (s.bracketed) {
        j["bracket_lo"] = s.lo;
        j["bracket_hi"] = s.hi;
    }
    return j;
}

} // namespace

std::string analysis_report_to_json(const AnalysisReport& report) {
    nlohmann::json j;
    const char* names[3] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) {
        const AxisResult& ax = report.axes[a];
        nlohmann::json ja;
        ja["mean_differential_nm"] = ax.mean_differential_nm;
        ja["sigma_ion_nm"] = ax.sigma_ion_nm;
        ja["force_zn"] = ax.force.force_zn;
        ja["force_stat_error_zn"] = ax.force.stat_error_zn;
        if (ax.force.systematic_bracket_zn) {
            ja["force_bracket_lo_zn"] = ax.force.systematic_bracket_zn->first;
            ja["force_bracket_hi_zn"] = ax.force.systematic_bracket_zn->second;
        }
        ja["sensitivity"] = sensitivity_json(ax.sensitivity);
        if (ax.applied_displacement_nm != 0.0)
            ja["applied_displacement_nm"] = ax.applied_displacement_nm;
        j["axes"][names[a]] = ja;
    }
    j["budget"]["sigma_fit_nm"] = axis_array(report.budget.sigma_fit_nm);
    j["budget"]["sigma_drift_fit_nm"] = axis_array(report.budget.sigma_drift_fit_nm);
    j["budget"]["sigma_interp_nm"] = axis_array(report.budget.sigma_interp_nm);
    j["budget"]["sigma_ion_nm"] = axis_array(report.budget.sigma_ion_nm);
    j["drift"]["n_on"] = report.correction.n_on;
    j["drift"]["n_off"] = report.correction.n_off;
    j["drift"]["differential_scatter_nm"] = axis_array(report.correction.differential_scatter_nm);
    j["springs"]["k_zn_per_nm"] = axis_array(report.springs.k_zn_per_nm);
    j["springs"]["weak_axes_bracketed"] = report.springs.weak_axes_bracketed;
    j["n_frames"] = report.n_frames;
    j["n_fit_failures"] = report.n_fit_failures;
    if (!report.fit_errors.empty()) j["fit_errors"] = report.fit_errors;
    return j.dump(2);
}

std::string limit_report_to_json(const LimitReport& report) {
    nlohmann::json j;
    j["n_photons"] = report.centroid.n_photons;
    j["centroid_working_nm"] = report.centroid.working_nm;
    j["centroid_cramer_rao_nm"] = report.centroid.cramer_rao_nm;
    j["integration_time_s"] = report.integration_time_s;
    j["attack_rate_nm_per_sqrt_hz"] = report.attack_rate_nm_per_sqrt_hz;
    const char* names[3] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a)
        j["limit_sensitivity"][names[a]] = sensitivity_json(report.limit_sensitivity[a]);
    for (int a = 0; a < 3; ++a) {
        if (report.ratio_vs_measured[a] > 0)
            j["ratio_vs_measured"][names[a]] = report.ratio_vs_measured[a];
    }
    return j.dump(2);
}

std::string format_analysis_report(const AnalysisReport& report) {
    std::ostringstream os;
    const char* names[3] = {"x", "y", "z"};
    os << "frames: " << report.n_frames << ", fit failures: " << report.n_fit_failures
       << ", on/off: " << report.correction.n_on << "/" << report.correction.n_off << "\n";
    os << std::left << std::setw(6) << "axis" << std::right << std::setw(14) << "dx (nm)"
       << std::setw(14) << "sigma (nm)" << std::setw(14) << "F (zN)" << std::setw(14)
       << "stat (zN)" << std::setw(24) << "bracket (zN)" << std::setw(18) << "S (zN/rtHz)"
       << "\n";
    for (int a = 0; a < 3; ++a) {
        const AxisResult& ax = report.axes[a];
        os << std::left << std::setw(6) << names[a] << std::right << std::fixed
           << std::setprecision(3);
        if (std::isfinite(ax.mean_differential_nm)) {
            os << std::setw(14) << ax.mean_differential_nm << std::setw(14) << ax.sigma_ion_nm
               << std::setw(14) << ax.force.force_zn << std::setw(14) << ax.force.stat_error_zn;
            if (ax.force.systematic_bracket_zn) {
                std::ostringstream b;
                b << std::fixed << std::setprecision(3) << "["
                  << ax.force.systematic_bracket_zn->first << ", "
                  << ax.force.systematic_bracket_zn->second << "]";
                os << std::setw(24) << b.str();
            } else {
                os << std::setw(24) << "-";
            }
            if (ax.sensitivity.bracketed) {
                std::ostringstream s;
                s << std::fixed << std::setprecision(1) << "[" << ax.sensitivity.lo << ", "
                  << ax.sensitivity.hi << "]";
                os << std::setw(18) << s.str();
            } else {
                os << std::setw(18) << ax.sensitivity.value_zn_per_sqrt_hz;
            }
        } else {
            os << std::setw(14) << "-" << std::setw(14) << "-" << std::setw(14) << "-"
               << std::setw(14) << "-" << std::setw(24) << "-" << std::setw(18) << "-";
        }
        os.unsetf(std::ios::fixed);
        os << "\n";
    }
    return os.str();
}

} // namespace ionsense
