#include <doctest.h>

#include <cmath>

#include "ionsense/errors.hpp"
#include "ionsense/phys_core.hpp"

using namespace ionsense;

TEST_SUITE("phys_core") {

TEST_CASE("spring constants from the default trap") {
    const SpringConstants k = spring_constants(IonSpecies::yb174(), TrapConfig{});
    CHECK(k.k_zn_per_nm[0] == doctest::Approx(29.2272621).epsilon(1e-6));
    CHECK(k.k_zn_per_nm[1] == doctest::Approx(7.2976906).epsilon(1e-6));
    CHECK(k.k_zn_per_nm[2] == doctest::Approx(7.8363628).epsilon(1e-6));
    CHECK(k.strong_axis == 0);
    CHECK(k.weak_axes_bracketed);
    CHECK(k.weak_bracket_zn_per_nm.first == doctest::Approx(7.2976906).epsilon(1e-6));
    CHECK(k.weak_bracket_zn_per_nm.second == doctest::Approx(7.8363628).epsilon(1e-6));
}

TEST_CASE("bracket is degenerate on the strong axis and shared by the weak ones") {
    const SpringConstants k = spring_constants(IonSpecies::yb174(), TrapConfig{});
    CHECK(k.bracket(0).first == k.k_zn_per_nm[0]);
    CHECK(k.bracket(0).second == k.k_zn_per_nm[0]);
    CHECK(k.bracket(1) == k.weak_bracket_zn_per_nm);
    CHECK(k.bracket(2) == k.weak_bracket_zn_per_nm);
}

TEST_CASE("no bracket without declared ambiguity") {
    TrapConfig trap;
    trap.axis_ambiguous = false;
    const SpringConstants k = spring_constants(IonSpecies::yb174(), trap);
    CHECK_FALSE(k.weak_axes_bracketed);
    CHECK(k.bracket(1).first == k.k_zn_per_nm[1]);
    CHECK(k.bracket(1).second == k.k_zn_per_nm[1]);
}

TEST_CASE("ambiguity needs a unique stiffest axis") {
    TrapConfig trap;
    trap.secular_freq_hz = {8.0e5, 8.0e5, 8.0e5};
    trap.axis_ambiguous = true;
    CHECK_THROWS_AS(spring_constants(IonSpecies::yb174(), trap), InvalidInput);
    trap.axis_ambiguous = false;
    CHECK_NOTHROW(spring_constants(IonSpecies::yb174(), trap));
}

TEST_CASE("frequencies must be positive") {
    TrapConfig trap;
    trap.secular_freq_hz[1] = 0.0;
    CHECK_THROWS_AS(trap.validate(), InvalidInput);
    trap.secular_freq_hz[1] = -5.0e5;
    CHECK_THROWS_AS(spring_constants(IonSpecies::yb174(), trap), InvalidInput);
}

TEST_CASE("single-mode spring constant and quadratic frequency scaling") {
    const IonSpecies ion = IonSpecies::yb174();
    CHECK(spring_constant_zn_per_nm(ion, 635.0e3) == doctest::Approx(4.5978301).epsilon(1e-6));
    CHECK(spring_constant_zn_per_nm(ion, 643.0e3) == doctest::Approx(4.7144107).epsilon(1e-6));
    const double k1 = spring_constant_zn_per_nm(ion, 4.0e5);
    const double k2 = spring_constant_zn_per_nm(ion, 8.0e5);
    CHECK(k2 / k1 == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("hooke's law round trip") {
    const double k = 7.29;
    const double x = -13.7;
    const double f = hooke_force_zn(k, x);
    CHECK(f == doctest::Approx(k * x).epsilon(1e-12));
    CHECK(hooke_displacement_nm(k, f) == doctest::Approx(x).epsilon(1e-12));
    CHECK_THROWS_AS(hooke_force_zn(0.0, 1.0), InvalidInput);
    CHECK_THROWS_AS(hooke_displacement_nm(-1.0, 1.0), InvalidInput);
}

TEST_CASE("spring constant inferred from a force/displacement pair") {
    const IonSpecies ion = IonSpecies::yb174();
    const double k = spring_constant_zn_per_nm(ion, 635.0e3);
    const double dx = hooke_displacement_nm(k, 95.0);
    CHECK(dx == doctest::Approx(20.6619204).epsilon(1e-6));
    const InferredSpring inf = infer_spring_constant(95.0, dx, ion);
    CHECK(inf.k_zn_per_nm == doctest::Approx(k).epsilon(1e-12));
    CHECK(inf.frequency_hz == doctest::Approx(635.0e3).epsilon(1e-12));
    CHECK_THROWS_AS(infer_spring_constant(95.0, 0.0, ion), InvalidInput);
}

TEST_CASE("two-ion separation") {
    const IonSpecies ion = IonSpecies::yb174();
    CHECK(two_ion_separation_um(ion, 643.0e3) == doctest::Approx(4.6084505).epsilon(1e-6));
    CHECK(two_ion_separation_um(ion, 1.0e6) == doctest::Approx(3.4331721).epsilon(1e-6));
    const double l1 = two_ion_separation_um(ion, 643.0e3);
    const double l2 = two_ion_separation_um(ion, 2.0 * 643.0e3);
    CHECK(l1 / l2 == doctest::Approx(std::pow(2.0, 2.0 / 3.0)).epsilon(1e-12));
    CHECK_THROWS_AS(two_ion_separation_um(ion, 0.0), InvalidInput);
}

TEST_CASE("ion mass") {
    CHECK(IonSpecies::yb174().mass_kg() ==
          doctest::Approx(173.938867 * 1.66053906660e-27).epsilon(1e-12));
}

} // TEST_SUITE
