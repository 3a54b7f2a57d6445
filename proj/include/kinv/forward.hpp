#pragma once

#include "kinv/problem.hpp"

namespace kinv {

/// Weighted velocity quadrature of one scattering row:
/// sum_j w_j J_j u_j.
double scattering_integral(std::span<const double> u_slice, std::span<const double> J_row,
                           std::span<const double> weights);

/// One implicit upwind step for a single ordinate:
///   (u_new - u_prev)/dt + v D_upwind(u_new) = source,
/// swept in the downwind direction (bidiagonal forward substitution) with
/// the inflow ghost value prescribed. Unconditionally stable in dt.
void advect_step(std::span<const double> u_prev, double v, double dt, double dx,
                 double inflow_value, std::span<const double> source, std::span<double> out);

/// Low-level transport integration: time loop over
///   u_t + (v,grad)u = int_V J u dv' + source
/// with explicit scattering/source at the old level and implicit upwind
/// advection. Absorption and nonlinear terms enter through `source`.
struct TransportInput {
    const PhaseGrid* grid = nullptr;
    const JTensor* J = nullptr;          // optional
    const GridFunction3* source = nullptr; // required; level k drives step k -> k+1
    const BoundaryData* mu = nullptr;    // optional, zero inflow when absent
    const GridFunction2* phi = nullptr;  // optional, zero initial data when absent
};
GridFunction3 integrate_transport(const TransportInput& in);

struct LinearForwardResult {
    GridFunction3 u;
    GridFunction3 source_used; // the F field the solve consumed
    double apriori_ratio = 0.0;
    double residual_sup = 0.0; // discrete-operator residual of u
};

/// Direct problem with S = 0: absorption acts on the fixed u0, so the
/// whole right-hand side F - Sigma*u0 is a known source.
LinearForwardResult solve_linear_forward(const ProblemSpec& spec, const GridFunction3& F_field);

/// Re-apply the discrete operator to u and return the residual field
/// (level 0 holds u(0) - phi). The solver output satisfies
/// sup |residual| <= 1e-10 by construction.
GridFunction3 linear_residual(const ProblemSpec& spec, const GridFunction3& u,
                              const GridFunction3& F_field);

/// Ratio of the solution energy to the data energy entering the discrete
/// stability estimate: ||u||_H over
/// ||F||_W + ||phi||_h + ||mu||_W + meas(V)(sup|Sigma| + ||u0||_H).
double apriori_ratio(const ProblemSpec& spec, const GridFunction3& u,
                     const GridFunction3& F_field);

} // namespace kinv
