#pragma once

#include <span>
#include <vector>

namespace ionsense {

/// Near-resonant driving field on a closed two-level cycling transition.
struct LaserConfig {
    double wavelength_nm = 369.5;  // transition wavelength
    double detuning_hz = -14.0e6;  // delta / 2 pi, signed
    double linewidth_hz = 19.6e6;  // natural linewidth Gamma / 2 pi
    double saturation = 1.0;       // on-resonance saturation parameter s

    void validate() const;
};

/// Multiplicative photon-detection chain between ion and camera counts.
struct DetectionChain {
    double collection_efficiency = 0.042; // solid angle of the objective
    double camera_qe = 0.35;              // sensor quantum efficiency
    double optics_transmission = 0.51;    // lenses, windows, filters
    double splitter_fraction = 1.0;       // share of light sent to this camera arm

    double total() const;
    void validate() const;
};

/// Steady-state photon scattering rate of a saturated two-level atom,
///   gamma = (Gamma/2) s / (1 + s + (2 delta / Gamma)^2),  photons/s,
/// with Gamma and delta as angular frequencies.
double scattering_rate(const LaserConfig& laser);

/// Scattering rate in the fully saturated limit, Gamma/2 in photons/s.
double scattering_rate_limit(const LaserConfig& laser);

/// Mean radiation-pressure force of the absorbed photon stream,
///   F = gamma * hbar * k,  returned in zN.
double light_pressure_force_zn(double scattering_rate_hz, double wavelength_nm);

/// Largest reachable light force for this transition, hbar k Gamma/2 in zN.
double light_pressure_force_limit_zn(const LaserConfig& laser);

/// On-resonance saturation parameter required to scatter at rate gamma_t:
///   s = gamma_t (1 + (2 delta/Gamma)^2) / (Gamma/2 - gamma_t).
/// The target must sit strictly below the Gamma/2 asymptote.
double saturation_for_rate(double scattering_rate_hz, const LaserConfig& laser);

/// Saturation parameter required to exert a target light force, inverting
/// light_pressure_force_zn through the scattering rate. Zero force maps to
/// s = 0; forces at or above the asymptotic maximum are unreachable.
double saturation_for_force(double force_zn, const LaserConfig& laser);

/// Photons detected in an exposure: gamma * chain.total() * exposure.
double detected_photon_number(double scattering_rate_hz, const DetectionChain& chain, double exposure_s);

/// One point of a saturation (power-broadening) scan. `power` is in units
/// proportional to s; `counts` is any quantity proportional to gamma.
struct SaturationSample {
    double power = 0;
    double counts = 0;
};

struct SaturationFit {
    double saturation_power = 0; // power at which s = 1
    double scale = 0;            // counts at full saturation (asymptote)
    double residual_norm = 0;
    int iterations = 0;
};

/// Least-squares fit of counts = scale * (P/P_sat) / (1 + P/P_sat + (2 delta/Gamma)^2)
/// over a power scan; `line` supplies detuning and linewidth. Needs at least
/// three samples spanning at least two distinct powers.
SaturationFit fit_saturation_curve(std::span<const SaturationSample> samples, const LaserConfig& line);

} // namespace ionsense
