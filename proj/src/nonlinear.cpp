#include "kinv/nonlinear.hpp"

#include <cmath>

namespace kinv {

namespace {

// Inner scalar of one separable term:
//   int_0^T int_{GxV} q2(x',v') integrand(x',v',t') dx' dv' dt'
// with trapezoid weights in time, cell/ordinate weights in (x, v).
// Fixed summation order keeps the reduction bitwise deterministic.
template <typename Integrand>
double term_scalar(const PhaseGrid& g, const GridFunction2& q2, Integrand&& f) {
    double acc = 0.0;
    for (int k = 0; k <= g.Nt; ++k) {
        double wt = (k == 0 || k == g.Nt) ? 0.5 * g.dt : g.dt;
        double level = 0.0;
        for (int i = 0; i < g.Nx; ++i)
            for (int j = 0; j < g.Nv; ++j)
                level += g.dx * g.v_weights[j] * q2.at(i, j) * f(k, i, j);
        acc += wt * level;
    }
    return acc;
}

GridFunction3 broadcast_terms(const ProblemSpec& spec, const std::vector<double>& scalars) {
    const PhaseGrid& g = spec.grid;
    GridFunction3 out(g);
    auto dst = out.data();
    for (size_t term = 0; term < spec.Q.size(); ++term) {
        auto q1 = spec.Q[term].q1.data();
        double s = scalars[term];
        for (size_t n = 0; n < dst.size(); ++n) dst[n] += s * q1[n];
    }
    return out;
}

} // namespace

GridFunction3 apply_S(const GridFunction3& u, const ProblemSpec& spec) {
    const PhaseGrid& g = spec.grid;
    if (!u.grid().same_shape(g)) throw ConfigError("apply_S: field does not match the grid");
    if (spec.Q.empty() || spec.alpha.is_zero()) return GridFunction3(g);
    std::vector<double> scalars(spec.Q.size());
    for (size_t term = 0; term < spec.Q.size(); ++term)
        scalars[term] = term_scalar(g, spec.Q[term].q2, [&](int k, int i, int j) {
            return alpha_value(spec.alpha, u.at(k, i, j));
        });
    return broadcast_terms(spec, scalars);
}

GridFunction3 apply_S_derivative(const GridFunction3& u, const GridFunction3& du,
                                 const ProblemSpec& spec) {
    const PhaseGrid& g = spec.grid;
    if (!u.grid().same_shape(g) || !du.grid().same_shape(g))
        throw ConfigError("apply_S_derivative: field does not match the grid");
    if (spec.Q.empty() || spec.alpha.is_zero()) return GridFunction3(g);
    std::vector<double> scalars(spec.Q.size());
    for (size_t term = 0; term < spec.Q.size(); ++term)
        scalars[term] = term_scalar(g, spec.Q[term].q2, [&](int k, int i, int j) {
            return alpha_derivative(spec.alpha, u.at(k, i, j)) * du.at(k, i, j);
        });
    return broadcast_terms(spec, scalars);
}

namespace detail {

NonlinearForwardResult picard_solve(const ProblemSpec& spec, const GridFunction3& base_source,
                                    const GridFunction3* deriv_base, bool zero_data) {
    const PhaseGrid& g = spec.grid;
    TransportInput in;
    in.grid = &g;
    in.J = spec.J ? &*spec.J : nullptr;
    in.source = &base_source;
    in.mu = (!zero_data && !spec.mu.zero) ? &spec.mu : nullptr;
    in.phi = (!zero_data && spec.phi) ? &*spec.phi : nullptr;

    NonlinearForwardResult result{integrate_transport(in), {}};
    PicardReport& rep = result.picard;

    if (spec.Q.empty() || spec.alpha.is_zero()) {
        // S vanishes identically: the first iterate is already the fixed
        // point, bitwise equal to the plain linear solve.
        rep.iterations = 1;
        rep.residual_history.push_back(0.0);
        rep.converged = true;
        return result;
    }

    GridFunction3 shifted(g);
    int rising = 0;
    for (int m = 1; m <= spec.solver.max_picard; ++m) {
        GridFunction3 S_m = deriv_base == nullptr
                                ? apply_S(result.u, spec)
                                : apply_S_derivative(*deriv_base, result.u, spec);
        shifted = lin_comb(base_source, 1.0, S_m, -1.0);
        in.source = &shifted;
        GridFunction3 next = integrate_transport(in);
        double r = sup_diff(next, result.u);
        rep.iterations = m;
        if (!rep.residual_history.empty()) {
            double prev = rep.residual_history.back();
            if (prev > 0.0) rep.contraction_ratios.push_back(r / prev);
            rising = r > prev ? rising + 1 : 0;
        }
        rep.residual_history.push_back(r);
        result.u = std::move(next);
        if (r <= spec.solver.picard_tol) {
            rep.converged = true;
            break;
        }
        if (rising >= 3)
            throw PicardDivergenceError(
                "Picard iteration diverged: residual grew for 3 consecutive iterations "
                "(reached " +
                std::to_string(r) + "); the production kernel violates the smallness condition");
    }
    result.u.ensure_finite("nonlinear forward solution");
    return result;
}

} // namespace detail

NonlinearForwardResult solve_nonlinear_forward(const ProblemSpec& spec,
                                               const GridFunction3& F_field) {
    if (!F_field.grid().same_shape(spec.grid))
        throw ConfigError("F field does not match the problem grid");
    GridFunction3 base = F_field;
    if (spec.Sigma && spec.u0) base = lin_comb(F_field, 1.0, hadamard(*spec.Sigma, *spec.u0), -1.0);
    return detail::picard_solve(spec, base, nullptr, false);
}

} // namespace kinv
