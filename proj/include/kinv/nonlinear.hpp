#pragma once

#include "kinv/forward.hpp"

namespace kinv {

/// Picard iteration history for the globally coupled direct problem.
struct PicardReport {
    int iterations = 0;
    std::vector<double> residual_history;   // sup |u^{m+1} - u^m| per iteration
    std::vector<double> contraction_ratios; // successive residual quotients
    bool converged = false;
};

/// Global production term: for each separable kernel term the space-time
/// integral of q2 * alpha(u) collapses to one scalar (trapezoid in time,
/// midpoint in space and velocity), broadcast against q1(x,v,t).
GridFunction3 apply_S(const GridFunction3& u, const ProblemSpec& spec);

/// Directional derivative of apply_S at u: same quadrature with integrand
/// alpha'(u) * du.
GridFunction3 apply_S_derivative(const GridFunction3& u, const GridFunction3& du,
                                 const ProblemSpec& spec);

struct NonlinearForwardResult {
    GridFunction3 u;
    PicardReport picard;
};

/// Direct problem with the nonlinear term: Picard iteration over the
/// whole space-time field, u^{m+1} = linear_solve(F - S(u^m)). The
/// iteration is global because S integrates u over all of [0, T].
/// Throws PicardDivergenceError after three consecutive residual
/// increases; returns converged = false when max_picard is exhausted.
NonlinearForwardResult solve_nonlinear_forward(const ProblemSpec& spec,
                                               const GridFunction3& F_field);

namespace detail {

/// Shared Picard driver. Solves
///   u_t + (v,grad)u + S*(u) = int J u dv' + base_source
/// with S*(u) = apply_S(u) when deriv_base == nullptr, else the frozen
/// linearized term apply_S_derivative(*deriv_base, u). Boundary/initial
/// data are taken from the spec unless zero_data is set (linearized
/// solves always run with zero data).
NonlinearForwardResult picard_solve(const ProblemSpec& spec, const GridFunction3& base_source,
                                    const GridFunction3* deriv_base, bool zero_data);

} // namespace detail

} // namespace kinv
