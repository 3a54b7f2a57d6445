#include "kinv/inverse.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>

#include "kinv/parallel.hpp"

namespace kinv {

namespace {

void require_inverse_mode(const ProblemSpec& spec) {
    if (spec.mode == Mode::forward)
        throw ConfigError("this operation requires an inverse-mode problem");
    if (!spec.has_g) throw ConfigError("inverse operations require the factorization weight g");
}

ControlKind kind_of(const ProblemSpec& spec) {
    return spec.mode == Mode::inverse_absorption ? ControlKind::absorption : ControlKind::source;
}

void check_g_floor(const ProblemSpec& spec) {
    for (double v : spec.g_T.data())
        if (std::fabs(v) < spec.solver.g0)
            throw ConfigError("|g(x,v,T)| falls below the g0 threshold; the control scaling is undefined");
}

GridFunction2 divide_by_gT(const GridFunction2& chi, const ProblemSpec& spec) {
    check_g_floor(spec);
    GridFunction2 out(spec.grid);
    const PhaseGrid& g = spec.grid;
    for (int i = 0; i < g.Nx; ++i)
        for (int j = 0; j < g.Nv; ++j) out.at(i, j) = chi.at(i, j) / spec.g_T.at(i, j);
    return out;
}

} // namespace

GridFunction3 control_to_coefficient(const ControlVariable& control, const ProblemSpec& spec) {
    require_inverse_mode(spec);
    check_g_floor(spec);
    const PhaseGrid& g = spec.grid;
    GridFunction3 out(g);
    for (int k = 0; k <= g.Nt; ++k)
        for (int i = 0; i < g.Nx; ++i)
            for (int j = 0; j < g.Nv; ++j)
                out.at(k, i, j) =
                    control.chi.at(i, j) * spec.g_field->at(k, i, j) / spec.g_T.at(i, j);
    return out;
}

MapResult forward_map_M(const ControlVariable& control, const ProblemSpec& spec) {
    require_inverse_mode(spec);
    const PhaseGrid& g = spec.grid;
    GridFunction3 coeff = control_to_coefficient(control, spec);

    GridFunction3 base(g);
    if (control.kind == ControlKind::source) {
        // F = chi g / g(T); the known absorption Sigma u0 stays a source.
        base = std::move(coeff);
        if (spec.Sigma && spec.u0)
            base = lin_comb(base, 1.0, hadamard(*spec.Sigma, *spec.u0), -1.0);
    } else {
        // Sigma = chi g / g(T) acting on the fixed u0; F is known data.
        if (spec.u0)
            base = spec.F_known ? lin_comb(*spec.F_known, 1.0, hadamard(coeff, *spec.u0), -1.0)
                                : scaled(hadamard(coeff, *spec.u0), -1.0);
        else if (spec.F_known)
            base = *spec.F_known;
    }

    NonlinearForwardResult fwd = detail::picard_solve(spec, base, nullptr, true);
    if (!fwd.picard.converged)
        throw SolverError("forward map: Picard did not reach tolerance within max_picard");
    return {final_slice(fwd.u), std::move(fwd.u), std::move(fwd.picard)};
}

GridFunction2 forward_map_M_paperform(const ControlVariable& control, const ProblemSpec& spec) {
    if (control.kind != ControlKind::source)
        throw ConfigError("the final-time identity diagnostic is defined for the source kind");
    if (!spec.Sigma || !spec.u0)
        throw ConfigError("the final-time identity diagnostic needs nonzero Sigma and u0");

    MapResult m = forward_map_M(control, spec);
    const PhaseGrid& g = spec.grid;
    const GridFunction3& u = m.state;

    GridFunction2 ut_T = final_slice(time_derivative(u));
    GridFunction2 stream_T = final_slice(streaming_derivative(u));
    GridFunction2 S_T = final_slice(apply_S(u, spec));

    GridFunction2 out(g);
    for (int i = 0; i < g.Nx; ++i)
        for (int j = 0; j < g.Nv; ++j) {
            double scat = 0.0;
            if (spec.J)
                for (int jp = 0; jp < g.Nv; ++jp)
                    scat += g.v_weights[jp] * spec.J->at(g.Nt, i, j, jp) * u.at(g.Nt, i, jp);
            double braced = control.chi.at(i, j) - ut_T.at(i, j) - stream_T.at(i, j) -
                            S_T.at(i, j) + scat;
            double denom = spec.Sigma->at(g.Nt, i, j) * spec.u0->at(g.Nt, i, j);
            if (std::fabs(denom) < spec.solver.u_min)
                throw ConfigError("Sigma(x,v,T) u0(x,v,T) falls below the threshold; "
                                  "the final-time identity is not evaluable");
            out.at(i, j) = braced * m.final.at(i, j) / denom;
        }
    return out;
}

GridFunction2 jacobian_apply(const ControlVariable& control, const GridFunction2& d_chi,
                             const GridFunction3& u_base, const ProblemSpec& spec) {
    require_inverse_mode(spec);
    const PhaseGrid& g = spec.grid;
    GridFunction3 r(g);
    for (int k = 0; k <= g.Nt; ++k)
        for (int i = 0; i < g.Nx; ++i)
            for (int j = 0; j < g.Nv; ++j) {
                double w = d_chi.at(i, j) * spec.g_field->at(k, i, j) / spec.g_T.at(i, j);
                if (control.kind == ControlKind::absorption)
                    w = spec.u0 ? -w * spec.u0->at(k, i, j) : 0.0;
                r.at(k, i, j) = w;
            }
    NonlinearForwardResult lin = detail::picard_solve(spec, r, &u_base, true);
    if (!lin.picard.converged)
        throw SolverError("jacobian apply: linearized Picard did not reach tolerance");
    return final_slice(lin.u);
}

// --- inner linear solvers ----------------------------------------------------

namespace {

using Matvec = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

Eigen::VectorXd to_vec(const GridFunction2& f) {
    Eigen::VectorXd v(f.data().size());
    for (size_t n = 0; n < f.data().size(); ++n) v[static_cast<Eigen::Index>(n)] = f.data()[n];
    return v;
}

GridFunction2 from_vec(const Eigen::VectorXd& v, const PhaseGrid& grid) {
    GridFunction2 f(grid);
    for (Eigen::Index n = 0; n < v.size(); ++n) f.data()[static_cast<size_t>(n)] = v[n];
    return f;
}

// Restarted GMRES with Givens rotations; matrix-free and deterministic.
int gmres_solve(const Matvec& matvec, const Eigen::VectorXd& b, Eigen::VectorXd& x, int restart,
                int max_iter, double tol, double& final_rel) {
    const Eigen::Index n = b.size();
    double bnorm = b.norm();
    x = Eigen::VectorXd::Zero(n);
    if (bnorm == 0.0) {
        final_rel = 0.0;
        return 0;
    }
    restart = std::max(1, std::min<int>(restart, static_cast<int>(n)));
    int total = 0;
    double last_cycle_rel = std::numeric_limits<double>::infinity();
    int stalled_cycles = 0;

    while (total < max_iter) {
        Eigen::VectorXd r = b - matvec(x);
        ++total;
        double beta = r.norm();
        final_rel = beta / bnorm;
        if (final_rel <= tol) return total;
        if (final_rel >= 0.999 * last_cycle_rel) {
            if (++stalled_cycles >= 2)
                throw SolverError("Jacobian solve failure: GMRES stagnated at relative residual " +
                                  std::to_string(final_rel));
        } else {
            stalled_cycles = 0;
        }
        last_cycle_rel = final_rel;

        Eigen::MatrixXd V(n, restart + 1);
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(restart + 1, restart);
        Eigen::VectorXd cs(restart), sn(restart), gvec = Eigen::VectorXd::Zero(restart + 1);
        V.col(0) = r / beta;
        gvec[0] = beta;
        int j = 0;
        for (; j < restart && total < max_iter; ++j, ++total) {
            Eigen::VectorXd w = matvec(V.col(j));
            for (int i = 0; i <= j; ++i) {
                H(i, j) = V.col(i).dot(w);
                w -= H(i, j) * V.col(i);
            }
            H(j + 1, j) = w.norm();
            bool breakdown = H(j + 1, j) < 1e-300;
            if (!breakdown) V.col(j + 1) = w / H(j + 1, j);
            for (int i = 0; i < j; ++i) {
                double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
                H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
                H(i, j) = t;
            }
            double denom = std::hypot(H(j, j), H(j + 1, j));
            cs[j] = denom == 0.0 ? 1.0 : H(j, j) / denom;
            sn[j] = denom == 0.0 ? 0.0 : H(j + 1, j) / denom;
            H(j, j) = denom;
            H(j + 1, j) = 0.0;
            gvec[j + 1] = -sn[j] * gvec[j];
            gvec[j] = cs[j] * gvec[j];
            double rel = std::fabs(gvec[j + 1]) / bnorm;
            if (rel <= tol || breakdown) {
                ++j;
                break;
            }
        }
        Eigen::VectorXd y =
            H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(gvec.head(j));
        x += V.leftCols(j) * y;
    }
    Eigen::VectorXd r = b - matvec(x);
    final_rel = r.norm() / bnorm;
    if (final_rel > tol)
        throw SolverError("Jacobian solve failure: GMRES exhausted " + std::to_string(max_iter) +
                          " iterations at relative residual " + std::to_string(final_rel));
    return total;
}

struct JacobianSolver {
    const ProblemSpec& spec;
    ControlKind kind;

    // One Newton step: solve dM[dchi] = rhs at the base state.
    GridFunction2 solve(const GridFunction2& chi, const GridFunction3& u_base,
                        const GridFunction2& rhs, JacobianSolveStat& stat) const {
        const PhaseGrid& g = spec.grid;
        const int n = g.size2();
        ControlVariable base{chi, kind};
        if (n <= spec.solver.jacobian_dense_threshold)
            return solve_dense(base, u_base, rhs, stat);
        return solve_gmres(base, u_base, rhs, stat);
    }

    GridFunction2 solve_dense(const ControlVariable& base, const GridFunction3& u_base,
                              const GridFunction2& rhs, JacobianSolveStat& stat) const {
        const PhaseGrid& g = spec.grid;
        const int n = g.size2();
        Eigen::MatrixXd A(n, n);
        parallel_for(n, [&](int cb, int ce) {
            for (int col = cb; col < ce; ++col) {
                GridFunction2 e(g);
                e.data()[static_cast<size_t>(col)] = 1.0;
                GridFunction2 out = jacobian_apply(base, e, u_base, spec);
                for (int row = 0; row < n; ++row)
                    A(row, col) = out.data()[static_cast<size_t>(row)];
            }
        });
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
        double rc = lu.rcond();
        double cond = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
        if (!(rc > 1e-14))
            throw SolverError("Jacobian solve failure: dense system is numerically singular "
                              "(rcond estimate " + std::to_string(rc) + ")");
        Eigen::VectorXd b = to_vec(rhs);
        Eigen::VectorXd x = lu.solve(b);
        stat.method = "dense";
        stat.iterations = 1;
        stat.residual = (A * x - b).lpNorm<Eigen::Infinity>();
        stat.condition = cond;
        return from_vec(x, g);
    }

    GridFunction2 solve_gmres(const ControlVariable& base, const GridFunction3& u_base,
                              const GridFunction2& rhs, JacobianSolveStat& stat) const {
        const PhaseGrid& g = spec.grid;
        Matvec mv = [&](const Eigen::VectorXd& x) {
            GridFunction2 xin = from_vec(x, g);
            return to_vec(jacobian_apply(base, xin, u_base, spec));
        };
        Eigen::VectorXd b = to_vec(rhs);
        Eigen::VectorXd x;
        double rel = 0.0;
        int iters = gmres_solve(mv, b, x, spec.solver.gmres_restart, spec.solver.gmres_max_iter,
                                spec.solver.gmres_tol, rel);
        stat.method = "gmres";
        stat.iterations = iters;
        stat.residual = rel;
        stat.condition = 0.0;
        return from_vec(x, g);
    }
};

} // namespace

InverseResult solve_inverse(const ProblemSpec& spec, const GridFunction2& psi) {
    require_inverse_mode(spec);
    {
        auto violations = validate_problem(spec);
        std::string hard;
        for (const Violation& v : violations)
            if (v.hard) hard += "\n  [" + v.code + "] " + v.message;
        if (!hard.empty()) throw ConfigError("inverse problem hypotheses violated:" + hard);
    }
    if (!psi.grid().same_shape(spec.grid))
        throw ConfigError("psi does not match the problem grid");

    const ControlKind kind = kind_of(spec);
    const SolverParams& prm = spec.solver;

    GridFunction2 chi =
        kind == ControlKind::absorption ? spec.chi_prior : GridFunction2(spec.grid, 0.0);
    MapResult cur = forward_map_M({chi, kind}, spec);
    double rn = sup_diff(cur.final, psi);

    NewtonReport rep;
    rep.newton_tol = prm.newton_tol;
    rep.initial_residual = rn;

    JacobianSolver jac{spec, kind};

    while (rn > prm.newton_tol && rep.iterations < prm.max_newton) {
        GridFunction2 rhs = lin_comb(psi, 1.0, cur.final, -1.0);
        JacobianSolveStat stat;
        GridFunction2 dchi = jac.solve(chi, cur.state, rhs, stat);
        rep.jacobian_solve_stats.push_back(stat);
        rep.step_norms.push_back(sup_norm(dchi));

        double lambda = 1.0;
        bool accepted = false;
        GridFunction2 chi_trial(spec.grid);
        MapResult trial;
        double rt = 0.0;
        while (lambda >= std::pow(2.0, -10)) {
            chi_trial = lin_comb(chi, 1.0, dchi, lambda);
            bool eval_ok = true;
            try {
                trial = forward_map_M({chi_trial, kind}, spec);
            } catch (const SolverError&) {
                eval_ok = false;
            }
            if (eval_ok) {
                rt = sup_diff(trial.final, psi);
                if (!prm.newton_damping || rt < rn) {
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if (!accepted)
            throw SolverError(
                "Newton line search failed: no damping factor >= 2^-10 reduces the residual; "
                "the data lies outside the local convergence basin - reduce psi magnitude");

        chi = std::move(chi_trial);
        cur = std::move(trial);
        rn = rt;
        rep.damping_factors.push_back(lambda);
        rep.residual_history.push_back(rn);
        ++rep.iterations;
    }
    rep.converged = rn <= prm.newton_tol;

    InverseResult result{divide_by_gT(chi, spec), std::move(chi), std::move(cur.state),
                         std::move(rep)};
    return result;
}

StabilityResult stability_estimate(const ProblemSpec& spec,
                                   const std::vector<GridFunction2>& psi_family) {
    require_inverse_mode(spec);
    if (!spec.alpha.is_zero())
        throw ConfigError("the stability estimate is defined for the zero alpha family");

    StabilityResult out;
    for (const GridFunction2& psi : psi_family) {
        StabilityMember m;
        m.psi_norm = h_inf_slice(psi);
        if (sup_norm(psi) == 0.0) {
            m.ratio = 0.0;
            m.solved = true;
        } else {
            try {
                InverseResult inv = solve_inverse(spec, psi);
                if (!inv.report.converged) throw SolverError("inverse solve did not converge");
                m.f_norm = sup_norm(inv.control);
                m.ratio = m.psi_norm > 0.0 ? m.f_norm / m.psi_norm : 0.0;
                m.solved = true;
            } catch (const Error& e) {
                log_info(std::string("stability member skipped: ") + e.what());
                m.solved = false;
                ++out.skipped;
            }
        }
        if (m.solved) out.c_bar = std::max(out.c_bar, m.ratio);
        out.members.push_back(m);
    }
    return out;
}

} // namespace kinv
