#include "ionsense/atom_light.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ionsense/errors.hpp"
#include "ionsense/least_squares.hpp"
#include "ionsense/phys_core.hpp"

namespace ionsense {

void LaserConfig::validate() const {
    if (!(wavelength_nm > 0.0)) throw InvalidInput("laser wavelength must be > 0 nm");
    if (!(linewidth_hz > 0.0)) throw InvalidInput("transition linewidth must be > 0 Hz");
    if (!(saturation >= 0.0)) throw InvalidInput("saturation parameter must be >= 0");
    if (!std::isfinite(detuning_hz)) throw InvalidInput("detuning must be finite");
}

double DetectionChain::total() const {
    return collection_efficiency * camera_qe * optics_transmission * splitter_fraction;
}

void DetectionChain::validate() const {
    auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
    if (!in_unit(collection_efficiency)) throw InvalidInput("collection_efficiency must be in (0, 1]");
    if (!in_unit(camera_qe)) throw InvalidInput("camera_qe must be in (0, 1]");
    if (!in_unit(optics_transmission)) throw InvalidInput("optics_transmission must be in (0, 1]");
    if (!in_unit(splitter_fraction)) throw InvalidInput("splitter_fraction must be in (0, 1]");
}

namespace {

// Lorentzian saturation denominator term (2 delta / Gamma)^2; detuning and
// linewidth enter as a ratio, so /2pi factors cancel.
double detuning_term(const LaserConfig& laser) {
    const double d = 2.0 * laser.detuning_hz / laser.linewidth_hz;
    return d * d;
}

double half_gamma_angular(const LaserConfig& laser) {
    return constants::pi * laser.linewidth_hz; // Gamma_angular / 2 = 2 pi Gamma_Hz / 2
}

} // namespace

double scattering_rate(const LaserConfig& laser) {
    laser.validate();
    const double s = laser.saturation;
    return half_gamma_angular(laser) * s / (1.0 + s + detuning_term(laser));
}

double scattering_rate_limit(const LaserConfig& laser) {
    laser.validate();
    return half_gamma_angular(laser);
}

double light_pressure_force_zn(double scattering_rate_hz, double wavelength_nm) {
    if (!(scattering_rate_hz >= 0.0)) throw InvalidInput("scattering rate must be >= 0");
    if (!(wavelength_nm > 0.0)) throw InvalidInput("wavelength must be > 0 nm");
    const double k = 2.0 * constants::pi / (wavelength_nm * 1e-9); // photon momentum / hbar
    return scattering_rate_hz * constants::hbar * k * 1e21;
}

double light_pressure_force_limit_zn(const LaserConfig& laser) {
    return light_pressure_force_zn(scattering_rate_limit(laser), laser.wavelength_nm);
}

double saturation_for_rate(double scattering_rate_hz, const LaserConfig& laser) {
    laser.validate();
    if (!(scattering_rate_hz >= 0.0)) throw InvalidInput("target scattering rate must be >= 0");
    if (scattering_rate_hz == 0.0) return 0.0;
    const double limit = half_gamma_angular(laser);
    if (scattering_rate_hz >= limit) {
        throw InvalidInput("target scattering rate is at or above the Gamma/2 asymptote");
    }
    return scattering_rate_hz * (1.0 + detuning_term(laser)) / (limit - scattering_rate_hz);
}

double saturation_for_force(double force_zn, const LaserConfig& laser) {
    laser.validate();
    if (!(force_zn >= 0.0)) throw InvalidInput("target light force must be >= 0");
    if (force_zn == 0.0) return 0.0;
    // guard in force units so rounding through the rate division cannot
    // sneak a value at the asymptote past the rate-space check
    if (force_zn >= light_pressure_force_limit_zn(laser)) {
        throw InvalidInput("target light force is at or beyond the saturation asymptote");
    }
    const double hbar_k_zn = light_pressure_force_zn(1.0, laser.wavelength_nm);
    return saturation_for_rate(force_zn / hbar_k_zn, laser);
}

double detected_photon_number(double scattering_rate_hz, const DetectionChain& chain, double exposure_s) {
    chain.validate();
    if (!(scattering_rate_hz >= 0.0)) throw InvalidInput("scattering rate must be >= 0");
    if (!(exposure_s > 0.0)) throw InvalidInput("exposure must be > 0 s");
    return scattering_rate_hz * chain.total() * exposure_s;
}

namespace {

// counts(P) = scale * (P/P0) / (1 + P/P0 + dterm), parameters (P0, scale).
class SaturationProblem final : public LeastSquaresProblem {
public:
    SaturationProblem(std::span<const SaturationSample> samples, double dterm)
        : samples_(samples), dterm_(dterm) {}

    int residual_count() const override { return static_cast<int>(samples_.size()); }
    int parameter_count() const override { return 2; }

    void evaluate(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const override {
        const double p0 = p[0];
        const double scale = p[1];
        for (int i = 0; i < residual_count(); ++i) {
            if (p0 <= 0.0) { // infeasible; reject the step
                r[i] = std::numeric_limits<double>::infinity();
                if (jac) jac->row(i).setZero();
                continue;
            }
            const double s = samples_[i].power / p0;
            const double den = 1.0 + s + dterm_;
            const double model = scale * s / den;
            r[i] = samples_[i].counts - model;
            if (jac) {
                // d model / d p0 via s = P/p0: dmodel/ds * (-s/p0)
                const double dmodel_ds = scale * (1.0 + dterm_) / (den * den);
                (*jac)(i, 0) = dmodel_ds * (-s / p0);
                (*jac)(i, 1) = s / den;
            }
        }
    }

private:
    std::span<const SaturationSample> samples_;
    double dterm_;
};

} // namespace

SaturationFit fit_saturation_curve(std::span<const SaturationSample> samples, const LaserConfig& line) {
    line.validate();
    if (samples.size() < 3) throw InvalidInput("saturation fit needs at least 3 samples");
    double pmin = samples[0].power, pmax = samples[0].power;
    double cmax = 0.0;
    for (const auto& s : samples) {
        if (!(s.power > 0.0)) throw InvalidInput("saturation scan powers must be > 0");
        if (!(s.counts >= 0.0) || !std::isfinite(s.counts)) {
            throw InvalidInput("saturation scan counts must be finite and >= 0");
        }
        pmin = std::min(pmin, s.power);
        pmax = std::max(pmax, s.power);
        cmax = std::max(cmax, s.counts);
    }
    if (pmin == pmax) throw InvalidInput("saturation fit needs at least two distinct powers");
    if (cmax <= 0.0) throw FitError("saturation fit: all counts are zero");

    const double dterm = 2.0 * line.detuning_hz / line.linewidth_hz *
                         (2.0 * line.detuning_hz / line.linewidth_hz);
    SaturationProblem problem(samples, dterm);

    Eigen::VectorXd p0(2);
    p0[0] = std::sqrt(pmin * pmax); // geometric mid-scan power
    p0[1] = cmax * (1.0 + dterm);
    LmOptions opts;
    const LmResult res = levenberg_marquardt(problem, p0, opts);
    if (!res.converged) throw FitError("saturation fit did not converge");
    if (!(res.params[0] > 1e-9 * pmin) || !(res.params[1] > 0.0)) {
        throw FitError("saturation fit collapsed to a degenerate solution");
    }
    SaturationFit out;
    out.saturation_power = res.params[0];
    out.scale = res.params[1];
    out.residual_norm = std::sqrt(res.chi2);
    out.iterations = res.iterations;
    return out;
}

} // namespace ionsense
