#include "kinv/alpha.hpp"

#include <cmath>

namespace kinv {

AlphaSpec AlphaSpec::zero() { return AlphaSpec{}; }

AlphaSpec AlphaSpec::make(AlphaFamily family, double c) {
    AlphaSpec s;
    s.family = family;
    if (family == AlphaFamily::zero) return s;
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("alpha scale c must be positive");
    s.c = c;
    switch (family) {
    case AlphaFamily::softabs:
        // a(u) = c (sqrt(1+u^2) - 1): |a| <= c|u|, |a'| < c, |a''| <= c
        // with the curvature maximum attained at u = 0.
        s.C1 = c;
        s.C2 = c;
        break;
    case AlphaFamily::cubic_saturating:
        // a(u) = c u^3 / (1+u^2): sup |a'| = 9c/8 at u = sqrt(3),
        // sup |a''| = c (3 + 2 sqrt(2)) / 4 at u = sqrt(2) - 1.
        s.C1 = 1.125 * c;
        s.C2 = c * (3.0 + 2.0 * std::sqrt(2.0)) / 4.0 * (1.0 + 1e-12);
        break;
    default:
        break;
    }
    return s;
}

AlphaSpec AlphaSpec::make(const std::string& family_name, double c) {
    if (family_name == "zero") return zero();
    if (family_name == "softabs") return make(AlphaFamily::softabs, c);
    if (family_name == "cubic_saturating") return make(AlphaFamily::cubic_saturating, c);
    throw ConfigError("unknown alpha family '" + family_name + "'");
}

std::string family_name(AlphaFamily family) {
    switch (family) {
    case AlphaFamily::zero: return "zero";
    case AlphaFamily::softabs: return "softabs";
    case AlphaFamily::cubic_saturating: return "cubic_saturating";
    }
    return "?";
}

AlphaValue alpha_eval(const AlphaSpec& spec, double u) {
    switch (spec.family) {
    case AlphaFamily::zero:
        return {0.0, 0.0, 0.0};
    case AlphaFamily::softabs: {
        double r = std::sqrt(1.0 + u * u);
        return {spec.c * (r - 1.0), spec.c * u / r, spec.c / (r * r * r)};
    }
    case AlphaFamily::cubic_saturating: {
        double s = 1.0 + u * u;
        double a = spec.c * u * u * u / s;
        double da = spec.c * u * u * (3.0 + u * u) / (s * s);
        double dda = 2.0 * spec.c * u * (3.0 - u * u) / (s * s * s);
        return {a, da, dda};
    }
    }
    return {0.0, 0.0, 0.0};
}

double alpha_value(const AlphaSpec& spec, double u) {
    switch (spec.family) {
    case AlphaFamily::zero:
        return 0.0;
    case AlphaFamily::softabs:
        return spec.c * (std::sqrt(1.0 + u * u) - 1.0);
    case AlphaFamily::cubic_saturating:
        return spec.c * u * u * u / (1.0 + u * u);
    }
    return 0.0;
}

double alpha_derivative(const AlphaSpec& spec, double u) {
    switch (spec.family) {
    case AlphaFamily::zero:
        return 0.0;
    case AlphaFamily::softabs:
        return spec.c * u / std::sqrt(1.0 + u * u);
    case AlphaFamily::cubic_saturating: {
        double s = 1.0 + u * u;
        return spec.c * u * u * (3.0 + u * u) / (s * s);
    }
    }
    return 0.0;
}

} // namespace kinv
