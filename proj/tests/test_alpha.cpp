#include <cmath>
#include <vector>

#include "doctest.h"
#include "kinv/alpha.hpp"

using namespace kinv;

namespace {

std::vector<double> bound_samples() {
    std::vector<double> samples;
    samples.push_back(0.0);
    for (int s = -1; s <= 1; s += 2)
        for (int k = 0; k < 2500; ++k)
            samples.push_back(s * std::pow(10.0, -8.0 + 14.0 * k / 2499.0)); // 1e-8..1e6
    for (int k = 0; k < 5000; ++k) samples.push_back(-10.0 + 20.0 * k / 4999.0);
    return samples;
}

} // namespace

TEST_CASE("softabs pins value and slope at the origin") {
    AlphaSpec a = AlphaSpec::make(AlphaFamily::softabs, 1.0);
    AlphaValue v = alpha_eval(a, 0.0);
    CHECK(v.a == 0.0);
    CHECK(v.da == 0.0);
    CHECK(v.dda == 1.0);
}

TEST_CASE("zero family is identically zero") {
    AlphaSpec a = AlphaSpec::zero();
    CHECK(a.C1 == 0.0);
    CHECK(a.C2 == 0.0);
    for (double u : {0.0, -3.2, 1e5}) {
        AlphaValue v = alpha_eval(a, u);
        CHECK(v.a == 0.0);
        CHECK(v.da == 0.0);
        CHECK(v.dda == 0.0);
    }
}

TEST_CASE("softabs(2) at u=1 matches the closed form") {
    AlphaSpec a = AlphaSpec::make(AlphaFamily::softabs, 2.0);
    AlphaValue v = alpha_eval(a, 1.0);
    // 2(sqrt(2)-1), 2/sqrt(2), 2/2^(3/2)
    CHECK(v.a == doctest::Approx(0.8284271247461903).epsilon(1e-14));
    CHECK(v.da == doctest::Approx(1.4142135623730951).epsilon(1e-14));
    CHECK(v.dda == doctest::Approx(0.7071067811865476).epsilon(1e-14));

    // Cross-check the closed forms against central differences.
    const double h = 1e-6;
    double fd1 = (alpha_value(a, 1.0 + h) - alpha_value(a, 1.0 - h)) / (2.0 * h);
    double fd2 = (alpha_derivative(a, 1.0 + h) - alpha_derivative(a, 1.0 - h)) / (2.0 * h);
    CHECK(v.da == doctest::Approx(fd1).epsilon(1e-9));
    CHECK(v.dda == doctest::Approx(fd2).epsilon(1e-9));
}

TEST_CASE("growth and derivative bounds hold on 10^4 samples") {
    const double slack = 1.0 + 1e-9;
    std::vector<AlphaSpec> families = {
        AlphaSpec::zero(),
        AlphaSpec::make(AlphaFamily::softabs, 1.0),
        AlphaSpec::make(AlphaFamily::softabs, 0.37),
        AlphaSpec::make(AlphaFamily::cubic_saturating, 1.0),
        AlphaSpec::make(AlphaFamily::cubic_saturating, 2.5),
    };
    auto samples = bound_samples();
    CHECK(samples.size() >= 10000);
    for (const AlphaSpec& a : families) {
        CAPTURE(family_name(a.family));
        AlphaValue origin = alpha_eval(a, 0.0);
        CHECK(origin.a == 0.0);
        CHECK(origin.da == 0.0);
        double worst_growth = 0.0, worst_da = 0.0, worst_dda = 0.0;
        for (double u : samples) {
            AlphaValue v = alpha_eval(a, u);
            if (u != 0.0) worst_growth = std::max(worst_growth, std::fabs(v.a) / std::fabs(u));
            worst_da = std::max(worst_da, std::fabs(v.da));
            worst_dda = std::max(worst_dda, std::fabs(v.dda));
        }
        CHECK(worst_growth <= a.C1 * slack);
        CHECK(worst_da <= a.C1 * slack);
        CHECK(worst_dda <= a.C2 * slack);
    }
}

TEST_CASE("derivatives match central differences to 1e-6 relative") {
    std::vector<AlphaSpec> families = {
        AlphaSpec::zero(),
        AlphaSpec::make(AlphaFamily::softabs, 1.0),
        AlphaSpec::make(AlphaFamily::cubic_saturating, 1.5),
    };
    const double h = 1e-5;
    for (const AlphaSpec& a : families) {
        CAPTURE(family_name(a.family));
        double worst = 0.0;
        for (int k = 0; k < 1000; ++k) {
            double u = -10.0 + 20.0 * k / 999.0;
            AlphaValue v = alpha_eval(a, u);
            double fd1 = (alpha_value(a, u + h) - alpha_value(a, u - h)) / (2.0 * h);
            double fd2 = (alpha_derivative(a, u + h) - alpha_derivative(a, u - h)) / (2.0 * h);
            worst = std::max(worst, std::fabs(fd1 - v.da) / std::max(1.0, std::fabs(v.da)));
            worst = std::max(worst, std::fabs(fd2 - v.dda) / std::max(1.0, std::fabs(v.dda)));
        }
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("cubic family caps its slope at 9c/8") {
    AlphaSpec a = AlphaSpec::make(AlphaFamily::cubic_saturating, 1.0);
    CHECK(a.C1 == doctest::Approx(1.125));
    // The slope maximum sits at u = sqrt(3).
    double at_max = alpha_derivative(a, std::sqrt(3.0));
    CHECK(at_max == doctest::Approx(1.125).epsilon(1e-12));
    CHECK(at_max <= a.C1 * (1.0 + 1e-12));
}

TEST_CASE("bad scales are rejected") {
    CHECK_THROWS_AS(AlphaSpec::make(AlphaFamily::softabs, 0.0), ConfigError);
    CHECK_THROWS_AS(AlphaSpec::make("nope", 1.0), ConfigError);
}
