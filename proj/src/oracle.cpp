#include "kinv/oracle.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "kinv/parallel.hpp"

namespace kinv {

DenseSystem assemble_dense(const ProblemSpec& spec) {
    if (!spec.alpha.is_zero())
        throw ConfigError("dense assembly requires the zero alpha family (the map must be affine)");
    const PhaseGrid& g = spec.grid;
    const int n = g.size2();
    const ControlKind kind =
        spec.mode == Mode::inverse_absorption ? ControlKind::absorption : ControlKind::source;

    DenseSystem sys;
    sys.n = n;
    sys.matrix.assign(static_cast<size_t>(n) * n, 0.0);

    GridFunction2 zero(g);
    sys.offset = forward_map_M({zero, kind}, spec).final;

    parallel_for(n, [&](int cb, int ce) {
        for (int col = cb; col < ce; ++col) {
            GridFunction2 e(g);
            e.data()[static_cast<size_t>(col)] = 1.0;
            GridFunction2 out = forward_map_M({e, kind}, spec).final;
            for (int row = 0; row < n; ++row)
                sys.matrix[static_cast<size_t>(row) * n + col] =
                    out.data()[static_cast<size_t>(row)] - sys.offset.data()[static_cast<size_t>(row)];
        }
    });

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(
        sys.matrix.data(), n, n);
    if (n <= 512) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
        double smin = svd.singularValues()(n - 1);
        double smax = svd.singularValues()(0);
        sys.condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    } else {
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
        double rc = lu.rcond();
        sys.condition = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
    }
    return sys;
}

GridFunction2 oracle_inverse(const ProblemSpec& spec, const DenseSystem& dense,
                             const GridFunction2& psi) {
    const PhaseGrid& g = spec.grid;
    if (dense.n != g.size2()) throw ConfigError("dense system does not match the grid");
    if (!(dense.condition < 1e12))
        throw SolverError("discrete inverse problem is ill-conditioned at this resolution "
                          "(condition estimate " + std::to_string(dense.condition) + ")");

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(
        dense.matrix.data(), dense.n, dense.n);
    Eigen::VectorXd b(dense.n);
    for (int r = 0; r < dense.n; ++r)
        b[r] = psi.data()[static_cast<size_t>(r)] - dense.offset.data()[static_cast<size_t>(r)];
    Eigen::VectorXd chi_vec = Eigen::PartialPivLU<Eigen::MatrixXd>(A).solve(b);

    GridFunction2 chi(g);
    for (int r = 0; r < dense.n; ++r) chi.data()[static_cast<size_t>(r)] = chi_vec[r];
    // Undo the control scaling chi = f g(T) (or sigma g(T)).
    GridFunction2 out(g);
    for (int i = 0; i < g.Nx; ++i)
        for (int j = 0; j < g.Nv; ++j) out.at(i, j) = chi.at(i, j) / spec.g_T.at(i, j);
    return out;
}

GridFunction2 oracle_inverse(const ProblemSpec& spec, const GridFunction2& psi) {
    return oracle_inverse(spec, assemble_dense(spec), psi);
}

// --- manufactured solutions --------------------------------------------------

namespace {

constexpr double kMmsJ0 = 0.2;      // case 2 scattering level
constexpr double kMmsAlphaC = 0.5;  // case 3 softabs scale

// Geometry shared by the catalog: L = 1, bands +-[1,2], T = 1, so the
// velocity measure is 2 and u* = t sin(pi x) vanishes on both inflow
// faces and at t = 0.
ProblemConfig mms_base() {
    ProblemConfig cfg;
    cfg.geometry = {1.0, 1.0, 2.0, 1.0};
    cfg.Nx = 8;
    cfg.Nv = 4;
    cfg.Nt = 8;
    cfg.mode = Mode::forward;
    return cfg;
}

Expression parse_expr(const std::string& s) { return Expression::parse(s); }

// Composite Simpson over [0,1]^2 of (1 + 0.2 x) * alpha(t sin(pi x)),
// times the velocity measure 2 (the kernel factor is v-independent).
double simpson2(int panels) {
    const int n = 2 * panels;
    const double h = 1.0 / n;
    AlphaSpec alpha = AlphaSpec::make(AlphaFamily::softabs, kMmsAlphaC);
    auto w1 = [n](int i) { return (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0); };
    double acc = 0.0;
    for (int it = 0; it <= n; ++it) {
        double t = it * h;
        double row = 0.0;
        for (int ix = 0; ix <= n; ++ix) {
            double x = ix * h;
            row += w1(ix) * (1.0 + 0.2 * x) * alpha_value(alpha, t * std::sin(std::numbers::pi * x));
        }
        acc += w1(it) * row;
    }
    return acc * h * h / 9.0 * 2.0;
}

} // namespace

double mms3_production_scalar(int panels) { return simpson2(panels); }

MmsCase mms_case(int id) {
    MmsCase c;
    c.id = id;
    c.config = mms_base();
    switch (id) {
    case 1: {
        c.description = "advection only, u* = t sin(pi x)";
        c.exact_u = parse_expr("t*sin(pi*x)");
        c.forcing = parse_expr("sin(pi*x) + v*t*pi*cos(pi*x)");
        c.config.F = c.forcing;
        break;
    }
    case 2: {
        c.description = "constant scattering kernel, u* = t sin(pi x)";
        c.exact_u = parse_expr("t*sin(pi*x)");
        c.config.J = Expression::constant(kMmsJ0);
        // The velocity integral of the v-independent u* is exactly
        // j0 * meas(V) * u* = 0.4 u*.
        c.forcing = parse_expr("sin(pi*x) + v*t*pi*cos(pi*x) - 0.4*t*sin(pi*x)");
        c.config.F = c.forcing;
        break;
    }
    case 3: {
        c.description = "softabs production term, forcing from Simpson quadrature";
        c.exact_u = parse_expr("t*sin(pi*x)");
        c.config.alpha = AlphaSpec::make(AlphaFamily::softabs, kMmsAlphaC);
        QTermConfig q;
        q.q1 = parse_expr("0.3*(1+0.5*t)");
        q.q2 = parse_expr("1+0.2*x");
        c.config.Q.push_back(q);
        double scalar = simpson2(512);
        Expression s_term = Expression::binary('*', Expression::constant(scalar), q.q1);
        c.forcing = Expression::binary('+', parse_expr("sin(pi*x) + v*t*pi*cos(pi*x)"), s_term);
        c.config.F = c.forcing;
        break;
    }
    case 4: {
        c.description = "constant steady state, exactly representable";
        c.exact_u = Expression::constant(0.7);
        c.forcing = Expression::constant(0.0);
        c.config.phi = Expression::constant(0.7);
        c.config.mu = Expression::constant(0.7);
        break;
    }
    default:
        throw ConfigError("unknown manufactured-solution case " + std::to_string(id));
    }
    c.config.exact_u = c.exact_u;
    return c;
}

std::vector<GridFunction2> make_stability_family(const PhaseGrid& grid, int count, uint32_t seed) {
    std::mt19937 rng(seed);
    auto unit = [&rng] { return (rng() >> 8) * (1.0 / 16777216.0); };
    std::vector<GridFunction2> family;
    family.reserve(static_cast<size_t>(count));
    const double L = grid.geom.L;
    const double v1 = grid.geom.v1;
    for (int m = 0; m < count; ++m) {
        GridFunction2 psi(grid);
        if (m > 0) { // member 0 stays identically zero
            double a[3], b[3];
            for (int k = 0; k < 3; ++k) {
                a[k] = 2.0 * unit() - 1.0;
                b[k] = 2.0 * unit() - 1.0;
            }
            for (int i = 0; i < grid.Nx; ++i)
                for (int j = 0; j < grid.Nv; ++j) {
                    double x = grid.x_centers[i];
                    double v = grid.v_nodes[j];
                    double s = 0.0;
                    for (int k = 0; k < 3; ++k)
                        s += a[k] * std::sin((k + 1) * std::numbers::pi * x / L) *
                             (1.0 + 0.5 * b[k] * v / v1);
                    psi.at(i, j) = 0.05 * s;
                }
        }
        family.push_back(std::move(psi));
    }
    return family;
}

std::vector<ConvergenceRow> convergence_study(int case_id, int refinements) {
    if (refinements < 2) throw ConfigError("convergence study needs at least 2 refinements");
    MmsCase c = mms_case(case_id);

    std::vector<ConvergenceRow> rows;
    for (int level = 0; level <= refinements; ++level) {
        int nx = c.config.Nx << level;
        int nt = c.config.Nt << level;
        ProblemSpec spec = materialize(c.config, nx, c.config.Nv, nt);
        GridFunction3 F = spec.F_known ? *spec.F_known : GridFunction3(spec.grid);
        NonlinearForwardResult run = solve_nonlinear_forward(spec, F);
        GridFunction3 exact = sample_xt(c.exact_u, spec.grid);
        ConvergenceRow row;
        row.h = spec.grid.dx;
        row.error = sup_diff(run.u, exact);
        if (!rows.empty()) {
            double prev = rows.back().error;
            if (prev > 1e-13 && row.error > 1e-13) {
                row.order = std::log2(prev / row.error);
                row.order_na = false;
            }
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace kinv
