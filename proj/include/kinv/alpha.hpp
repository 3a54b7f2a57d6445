#pragma once

#include <string>

#include "kinv/common.hpp"

namespace kinv {

/// Built-in nonlinearity families. All satisfy a(0) = 0, a'(0) = 0,
/// |a(u)| <= C1 |u|, |a'| <= C1, |a''| <= C2 with the certified constants
/// stored in AlphaSpec.
enum class AlphaFamily { zero, softabs, cubic_saturating };

struct AlphaSpec {
    AlphaFamily family = AlphaFamily::zero;
    double c = 0.0;  // scale, > 0 for non-zero families
    double C1 = 0.0; // bound on |a(u)|/|u| and |a'(u)|
    double C2 = 0.0; // bound on |a''(u)|

    bool is_zero() const { return family == AlphaFamily::zero; }

    static AlphaSpec zero();
    static AlphaSpec make(AlphaFamily family, double c);
    static AlphaSpec make(const std::string& family_name, double c);
};

std::string family_name(AlphaFamily family);

/// Value and first two derivatives at u.
struct AlphaValue {
    double a;
    double da;
    double dda;
};

AlphaValue alpha_eval(const AlphaSpec& spec, double u);

/// Just a(u); the solvers' inner loops use this form.
double alpha_value(const AlphaSpec& spec, double u);
double alpha_derivative(const AlphaSpec& spec, double u);

} // namespace kinv
