#include "ionsense/phys_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ionsense/errors.hpp"

namespace ionsense {

namespace {

// 1 N/m = 1e9 zN / 1e9 nm, so k in SI N/m equals 1e-(21-9-9)... directly:
// 1 zN/nm = 1e-21 N / 1e-9 m = 1e-12 N/m.
constexpr double zn_per_nm_from_si = 1e12;

} // namespace

void TrapConfig::validate() const {
    for (int i = 0; i < 3; ++i) {
        if (!(secular_freq_hz[i] > 0.0)) {
            throw InvalidInput("trap secular frequency on axis " + std::to_string(i) +
                               " must be > 0 Hz");
        }
    }
}

std::pair<double, double> SpringConstants::bracket(int axis) const {
    if (weak_axes_bracketed && axis != strong_axis) return weak_bracket_zn_per_nm;
    return {k_zn_per_nm[axis], k_zn_per_nm[axis]};
}

double spring_constant_zn_per_nm(const IonSpecies& ion, double frequency_hz) {
    if (!(frequency_hz > 0.0)) throw InvalidInput("secular frequency must be > 0 Hz");
    if (!(ion.mass_amu > 0.0)) throw InvalidInput("ion mass must be > 0 u");
    const double omega = 2.0 * constants::pi * frequency_hz;
    return ion.mass_kg() * omega * omega * zn_per_nm_from_si;
}

SpringConstants spring_constants(const IonSpecies& ion, const TrapConfig& trap) {
    trap.validate();
    SpringConstants out;
    for (int i = 0; i < 3; ++i) {
        out.k_zn_per_nm[i] = spring_constant_zn_per_nm(ion, trap.secular_freq_hz[i]);
    }
    const auto strongest = std::max_element(trap.secular_freq_hz.begin(), trap.secular_freq_hz.end());
    out.strong_axis = static_cast<int>(strongest - trap.secular_freq_hz.begin());
    if (trap.axis_ambiguous) {
        // The weak-axis bracket only makes sense when the stiff axis is
        // unambiguously identified.
        const int count_max = static_cast<int>(
            std::count(trap.secular_freq_hz.begin(), trap.secular_freq_hz.end(), *strongest));
        if (count_max != 1) {
            throw InvalidInput("axis-ambiguous trap needs a unique strongest secular frequency");
        }
        double lo = 0, hi = 0;
        bool first = true;
        for (int i = 0; i < 3; ++i) {
            if (i == out.strong_axis) continue;
            const double k = out.k_zn_per_nm[i];
            lo = first ? k : std::min(lo, k);
            hi = first ? k : std::max(hi, k);
            first = false;
        }
        out.weak_axes_bracketed = true;
        out.weak_bracket_zn_per_nm = {lo, hi};
    }
    return out;
}

double hooke_force_zn(double k_zn_per_nm, double displacement_nm) {
    if (!(k_zn_per_nm > 0.0)) throw InvalidInput("spring constant must be > 0");
    return k_zn_per_nm * displacement_nm;
}

double hooke_displacement_nm(double k_zn_per_nm, double force_zn) {
    if (!(k_zn_per_nm > 0.0)) throw InvalidInput("spring constant must be > 0");
    return force_zn / k_zn_per_nm;
}

InferredSpring infer_spring_constant(double force_zn, double displacement_nm, const IonSpecies& ion) {
    if (displacement_nm == 0.0 || !std::isfinite(displacement_nm)) {
        throw InvalidInput("cannot infer a spring constant from zero displacement");
    }
    const double k = force_zn / displacement_nm;
    if (!(k > 0.0)) throw InvalidInput("force/displacement pair implies a non-positive spring constant");
    InferredSpring out;
    out.k_zn_per_nm = k;
    out.frequency_hz = std::sqrt(k / zn_per_nm_from_si / ion.mass_kg()) / (2.0 * constants::pi);
    return out;
}

double two_ion_separation_um(const IonSpecies& ion, double frequency_hz) {
    if (!(frequency_hz > 0.0)) throw InvalidInput("shared-mode frequency must be > 0 Hz");
    const double e = constants::elementary_charge;
    const double pi = constants::pi;
    const double cube = e * e /
        (8.0 * pi * pi * pi * constants::epsilon0 * ion.mass_kg() * frequency_hz * frequency_hz);
    return std::cbrt(cube) * 1e6;
}

} // namespace ionsense
