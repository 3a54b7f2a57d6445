#include "kinv/forward.hpp"

#include <cmath>

#include "kinv/parallel.hpp"

namespace kinv {

double scattering_integral(std::span<const double> u_slice, std::span<const double> J_row,
                           std::span<const double> weights) {
    double acc = 0.0;
    for (size_t j = 0; j < u_slice.size(); ++j) acc += weights[j] * J_row[j] * u_slice[j];
    return acc;
}

void advect_step(std::span<const double> u_prev, double v, double dt, double dx,
                 double inflow_value, std::span<const double> source, std::span<double> out) {
    const int nx = static_cast<int>(u_prev.size());
    const double c = std::fabs(v) * dt / dx;
    const double denom = 1.0 + c;
    if (v > 0.0) {
        double up = inflow_value;
        for (int i = 0; i < nx; ++i) {
            out[i] = (u_prev[i] + dt * source[i] + c * up) / denom;
            up = out[i];
        }
    } else {
        double up = inflow_value;
        for (int i = nx - 1; i >= 0; --i) {
            out[i] = (u_prev[i] + dt * source[i] + c * up) / denom;
            up = out[i];
        }
    }
}

GridFunction3 integrate_transport(const TransportInput& in) {
    const PhaseGrid& g = *in.grid;
    GridFunction3 u(g);

    if (in.phi != nullptr)
        for (int i = 0; i < g.Nx; ++i)
            for (int j = 0; j < g.Nv; ++j) u.at(0, i, j) = in.phi->at(i, j);

    std::vector<double> rhs(static_cast<size_t>(g.Nx) * g.Nv);

    for (int k = 0; k < g.Nt; ++k) {
        // Explicit part at level k: given source plus the scattering
        // integral of the old solution. Fixed summation order over v'.
        for (int i = 0; i < g.Nx; ++i)
            for (int j = 0; j < g.Nv; ++j) {
                double s = in.source->at(k, i, j);
                if (in.J != nullptr) {
                    double acc = 0.0;
                    for (int jp = 0; jp < g.Nv; ++jp)
                        acc += g.v_weights[jp] * in.J->at(k, i, j, jp) * u.at(k, i, jp);
                    s += acc;
                }
                rhs[static_cast<size_t>(i) * g.Nv + j] = s;
            }

        // Implicit upwind sweep, one independent bidiagonal solve per
        // ordinate. Writes are disjoint across ordinates, so the sweep
        // may run concurrently; the grain keeps desk-size grids inline
        // where thread spawns would dominate the sweep itself.
        int grain = std::max(1, 8192 / std::max(1, g.Nx));
        parallel_for(
            g.Nv,
            [&](int jb, int je) {
                std::vector<double> lprev(static_cast<size_t>(g.Nx));
                std::vector<double> lsrc(static_cast<size_t>(g.Nx));
                std::vector<double> lout(static_cast<size_t>(g.Nx));
                for (int j = jb; j < je; ++j) {
                    for (int i = 0; i < g.Nx; ++i) {
                        lprev[i] = u.at(k, i, j);
                        lsrc[i] = rhs[static_cast<size_t>(i) * g.Nv + j];
                    }
                    double inflow = in.mu != nullptr ? in.mu->at(k + 1, j) : 0.0;
                    advect_step(lprev, g.v_nodes[j], g.dt, g.dx, inflow, lsrc, lout);
                    for (int i = 0; i < g.Nx; ++i) u.at(k + 1, i, j) = lout[i];
                }
            },
            grain);

        double level_sup = 0.0;
        for (int i = 0; i < g.Nx; ++i)
            for (int j = 0; j < g.Nv; ++j)
                level_sup = std::max(level_sup, std::fabs(u.at(k + 1, i, j)));
        if (level_sup > 1e12)
            throw SolverError("transport solution blow-up: sup exceeded 1e12 at t = " +
                              std::to_string((k + 1) * g.dt));
    }
    return u;
}

namespace {

// Effective source of the modified equation: F minus the absorption term
// Sigma*u0 (u0 is fixed, so the product is data, not an operator on u).
GridFunction3 effective_source(const ProblemSpec& spec, const GridFunction3& F_field) {
    if (spec.Sigma && spec.u0) {
        GridFunction3 out = hadamard(*spec.Sigma, *spec.u0);
        return lin_comb(F_field, 1.0, out, -1.0);
    }
    return F_field;
}

} // namespace

GridFunction3 linear_residual(const ProblemSpec& spec, const GridFunction3& u,
                              const GridFunction3& F_field) {
    const PhaseGrid& g = spec.grid;
    GridFunction3 res(g);
    GridFunction3 src = effective_source(spec, F_field);

    for (int i = 0; i < g.Nx; ++i)
        for (int j = 0; j < g.Nv; ++j)
            res.at(0, i, j) = u.at(0, i, j) - (spec.phi ? spec.phi->at(i, j) : 0.0);

    for (int k = 0; k < g.Nt; ++k)
        for (int j = 0; j < g.Nv; ++j) {
            double v = g.v_nodes[j];
            for (int i = 0; i < g.Nx; ++i) {
                double dt_term = (u.at(k + 1, i, j) - u.at(k, i, j)) / g.dt;
                double ghost;
                if (v > 0.0)
                    ghost = (i > 0) ? u.at(k + 1, i - 1, j) : spec.mu.at(k + 1, j);
                else
                    ghost = (i < g.Nx - 1) ? u.at(k + 1, i + 1, j) : spec.mu.at(k + 1, j);
                double stream = (v > 0.0) ? v * (u.at(k + 1, i, j) - ghost) / g.dx
                                          : v * (ghost - u.at(k + 1, i, j)) / g.dx;
                double rhs = src.at(k, i, j);
                if (spec.J) {
                    double acc = 0.0;
                    for (int jp = 0; jp < g.Nv; ++jp)
                        acc += g.v_weights[jp] * spec.J->at(k, i, j, jp) * u.at(k, i, jp);
                    rhs += acc;
                }
                res.at(k + 1, i, j) = dt_term + stream - rhs;
            }
        }
    return res;
}

double apriori_ratio(const ProblemSpec& spec, const GridFunction3& u,
                     const GridFunction3& F_field) {
    const PhaseGrid& g = spec.grid;
    NormReport un = norms(u);

    NormReport fn = norms(F_field);
    double f_w = fn.w_inf_t;

    double phi_h = spec.phi ? h_inf_slice(*spec.phi) : 0.0;
    double mu_w = spec.mu.sup() + spec.mu.sup_dt(g.dt);

    double meas = g.measure_v();
    double sigma_sup = spec.Sigma ? sup_norm(*spec.Sigma) : 0.0;
    double u0_h = spec.u0 ? norms(*spec.u0).h_inf : 0.0;

    double denom = f_w + phi_h + mu_w + meas * (sigma_sup + u0_h);
    if (denom == 0.0) return 0.0;
    return un.h_inf / denom;
}

LinearForwardResult solve_linear_forward(const ProblemSpec& spec, const GridFunction3& F_field) {
    if (!F_field.grid().same_shape(spec.grid))
        throw ConfigError("F field does not match the problem grid");
    GridFunction3 src = effective_source(spec, F_field);

    TransportInput in;
    in.grid = &spec.grid;
    in.J = spec.J ? &*spec.J : nullptr;
    in.source = &src;
    in.mu = spec.mu.zero ? nullptr : &spec.mu;
    in.phi = spec.phi ? &*spec.phi : nullptr;

    LinearForwardResult result{integrate_transport(in), F_field, 0.0, 0.0};
    result.u.ensure_finite("forward solution");
    result.residual_sup = sup_norm(linear_residual(spec, result.u, F_field));
    result.apriori_ratio = apriori_ratio(spec, result.u, F_field);
    return result;
}

} // namespace kinv
