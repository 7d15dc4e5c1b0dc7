#pragma once

#include <array>
#include <utility>

namespace ionsense {

/// CODATA 2018 values, SI.
namespace constants {
inline constexpr double hbar = 1.054571817e-34;              // J s
inline constexpr double elementary_charge = 1.602176634e-19; // C
inline constexpr double epsilon0 = 8.8541878128e-12;         // F / m
inline constexpr double atomic_mass_unit = 1.66053906660e-27; // kg
inline constexpr double pi = 3.14159265358979323846;
} // namespace constants

struct IonSpecies {
    double mass_amu = 173.938867; // isotopic mass, u

    double mass_kg() const { return mass_amu * constants::atomic_mass_unit; }

    static IonSpecies yb174() { return IonSpecies{}; }
};

/// Harmonic pseudopotential along three principal axes.
/// Axis order is (x, y, z): x is the in-plane axis with the stiffest
/// confinement, z is the optical (imaging) axis. When the orientation of
/// the two weak principal axes relative to the image plane is unknown,
/// axis_ambiguous = true and weak-axis results carry a min/max bracket.
struct TrapConfig {
    std::array<double, 3> secular_freq_hz{1.601e6, 8.00e5, 8.29e5}; // nu_x, nu_y, nu_z
    bool axis_ambiguous = true;

    void validate() const;
};

/// Per-axis spring constants k = m (2 pi nu)^2 in zN/nm (= 1e-12 N/m * 1e-3... i.e. 1 zN/nm = 1e-12 N/m).
struct SpringConstants {
    std::array<double, 3> k_zn_per_nm{};
    int strong_axis = 0;                                  // index of the stiffest axis
    bool weak_axes_bracketed = false;                     // true when orientation is ambiguous
    std::pair<double, double> weak_bracket_zn_per_nm{0, 0}; // (min, max) over the two weak axes

    /// Bracket applicable to axis i: degenerate (k, k) for the strong axis
    /// or when no ambiguity is declared.
    std::pair<double, double> bracket(int axis) const;
};

/// k_i = m (2 pi nu_i)^2 for each axis. Requires every frequency > 0; when
/// the config declares axis ambiguity the stiffest axis must be unique.
SpringConstants spring_constants(const IonSpecies& ion, const TrapConfig& trap);

/// Spring constant for a single mode, zN/nm.
double spring_constant_zn_per_nm(const IonSpecies& ion, double frequency_hz);

/// Hooke's law: F = k x. Displacement in nm, force in zN.
double hooke_force_zn(double k_zn_per_nm, double displacement_nm);

/// Displacement produced by a force: x = F / k.
double hooke_displacement_nm(double k_zn_per_nm, double force_zn);

struct InferredSpring {
    double k_zn_per_nm = 0;
    double frequency_hz = 0; // secular frequency implied by k and the ion mass
};

/// Inverts a measured (force, displacement) pair into a spring constant and
/// the secular frequency it implies. Displacement must be nonzero.
InferredSpring infer_spring_constant(double force_zn, double displacement_nm, const IonSpecies& ion);

/// Equilibrium separation of two identical ions sharing a harmonic mode of
/// frequency nu (Coulomb repulsion vs. restoring force):
///   l = (e^2 / (8 pi^3 epsilon0 m nu^2))^(1/3), returned in um.
double two_ion_separation_um(const IonSpecies& ion, double frequency_hz);

} // namespace ionsense
