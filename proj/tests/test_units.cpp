#include <doctest.h>

#include <cmath>

#include "ionchain/constants.hpp"
#include "ionchain/errors.hpp"
#include "ionchain/species_registry.hpp"
#include "ionchain/units.hpp"

using namespace ionchain;

namespace {
const IonSpecies kCa = make_species("Ca40", 40.0, 1);
}

TEST_CASE("species validation") {
    CHECK_THROWS_AS(make_species("bad", -1.0, 1), DomainError);
    CHECK_THROWS_AS(make_species("bad", 40.0, 0), DomainError);
    CHECK(kCa.mass_kg() == doctest::Approx(40.0 * 1.66053906660e-27).epsilon(1e-15));
}

TEST_CASE("amu to kg round trip is identity") {
    for (double amu : {1.0, 9.012, 40.0, 170.936}) {
        const IonSpecies s = make_species("x", amu, 1);
        const double back = s.mass_kg() / constants::kAtomicMassUnit;
        CHECK(std::abs(back - amu) / amu < 1e-12);
    }
}

TEST_CASE("frequency conversion applies 2pi exactly once") {
    const Frequency f = Frequency::from_khz(2.95, 0.13);
    CHECK(f.rad_per_s == doctest::Approx(2.0 * constants::kPi * 2950.0).epsilon(1e-15));
    CHECK(f.khz() == doctest::Approx(2.95).epsilon(1e-15));
    CHECK(f.sigma_khz() == doctest::Approx(0.13).epsilon(1e-15));
    CHECK_THROWS_AS(Frequency::from_khz(0.0), DomainError);
    CHECK_THROWS_AS(Frequency::from_khz(-2.95), DomainError);
    CHECK_THROWS_AS(Frequency::from_khz(2.95, -0.1), DomainError);
}

TEST_CASE("length validation") {
    CHECK(Length::from_um(24.1, 0.2).meters == doctest::Approx(24.1e-6).epsilon(1e-15));
    CHECK_THROWS_AS(Length::from_m(std::numeric_limits<double>::infinity()), DomainError);
    CHECK_THROWS_AS(Length::from_um(1.0, -1.0), DomainError);
}

TEST_CASE("length scale of the benchmark trap") {
    // Direct evaluation with CODATA 2018 constants, frozen from an
    // independent high-precision evaluation.
    const Length l = length_scale(kCa, Frequency::from_khz(2.95));
    CHECK(l.um() == doctest::Approx(216.23024747533).epsilon(1e-9));

    SUBCASE("doubling the frequency scales by 2^(-2/3)") {
        const Length l2 = length_scale(kCa, Frequency::from_khz(5.90));
        CHECK(l2.meters / l.meters == doctest::Approx(std::pow(2.0, -2.0 / 3.0)).epsilon(1e-12));
    }
    SUBCASE("relative uncertainty is 2/3 of the frequency's") {
        const Length lu = length_scale(kCa, Frequency::from_khz(2.95, 0.13));
        CHECK(lu.relative_sigma() ==
              doctest::Approx((2.0 / 3.0) * (0.13 / 2.95)).epsilon(1e-12));
        CHECK(lu.relative_sigma() == doctest::Approx(0.029378531).epsilon(1e-6));
    }
    SUBCASE("non-positive frequency is rejected") {
        CHECK_THROWS_AS(length_scale(kCa, Frequency{0.0, 0.0}), DomainError);
    }
}

TEST_CASE("length scale monotonicity") {
    const Frequency f1 = Frequency::from_khz(2.95);
    const Frequency f2 = Frequency::from_khz(3.10);
    CHECK(length_scale(kCa, f2).meters < length_scale(kCa, f1).meters);

    const IonSpecies heavier = make_species("heavy", 60.0, 1);
    CHECK(length_scale(heavier, f1).meters < length_scale(kCa, f1).meters);

    const IonSpecies doubly = make_species("Ca40_2plus", 40.0, 2);
    CHECK(length_scale(doubly, f1).meters ==
          doctest::Approx(length_scale(kCa, f1).meters * std::pow(4.0, 1.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("length scale round-trips to the frequency") {
    for (double khz : {0.5, 2.95, 17.0, 440.0}) {
        const Frequency f = Frequency::from_khz(khz);
        const Frequency back = axial_frequency_from_scale(kCa, length_scale(kCa, f));
        CHECK(std::abs(back.rad_per_s - f.rad_per_s) / f.rad_per_s < 1e-12);
    }
}

TEST_CASE("species registry") {
    SpeciesRegistry registry;
    CHECK(registry.contains("Ca40"));
    CHECK(registry.get("Ca40").mass_amu == 40.0);
    CHECK(registry.get("Ca40").charge_e == 1);
    CHECK_THROWS_AS(registry.get("Unobtainium"), DomainError);

    SUBCASE("loads a config file") {
        const std::string path = "species_test.cfg";
        {
            std::FILE* f = std::fopen(path.c_str(), "w");
            std::fputs("# test registry\nBe9 9.012 1\nSr88 87.906 2  # doubly charged\n", f);
            std::fclose(f);
        }
        registry.load_file(path);
        CHECK(registry.contains("Be9"));
        CHECK(registry.get("Sr88").charge_e == 2);
        CHECK(registry.contains("Ca40"));
        std::remove(path.c_str());
    }
    SUBCASE("missing file is an error") {
        CHECK_THROWS_AS(registry.load_file("does_not_exist.cfg"), DomainError);
    }
}
