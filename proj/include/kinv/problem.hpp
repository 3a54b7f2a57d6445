#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kinv/alpha.hpp"
#include "kinv/expression.hpp"
#include "kinv/fields.hpp"

namespace kinv {

enum class Mode { forward, inverse_source, inverse_absorption };

std::string mode_name(Mode mode);
Mode mode_from_name(const std::string& name);

/// One separable scattering-production term q1(x,v,t) * q2(x',v').
/// q2 is an expression in (x, v) read as the primed point.
struct QTermConfig {
    Expression q1;
    Expression q2;
};

/// A field given either as an expression or as a binary dump on disk.
struct FieldSource {
    Expression expr;
    std::filesystem::path file; // non-empty wins over expr
    bool from_file() const { return !file.empty(); }
};

struct SolverParams {
    double picard_tol = 1e-10;
    int max_picard = 50;
    double newton_tol = 1e-10;
    int max_newton = 25;
    bool newton_damping = true;
    double g0 = 1e-8;    // lower bound required of |g(.,.,T)|
    double u_min = 1e-8; // lower bound required of |u0(.,.,T)| in absorption mode
    int jacobian_dense_threshold = 4096;
    int gmres_restart = 50;
    int gmres_max_iter = 2000;
    double gmres_tol = 1e-10;
};

/// Symbolic problem description, mirroring the JSON config schema.
struct ProblemConfig {
    Geometry geometry;
    int Nx = 0, Nv = 0, Nt = 0;
    Mode mode = Mode::forward;

    Expression Sigma;          // absorption coefficient; in absorption mode the prior
    bool sigma_is_product = false; // true when given as "sigma_g": Sigma = expr * g
    Expression J;              // scattering kernel over (x, v, t, vp)
    std::vector<QTermConfig> Q;
    AlphaSpec alpha;
    Expression g;              // factorization weight
    bool has_g = false;
    Expression h;              // additive known source (forward only)
    FieldSource u0;
    std::optional<Expression> F; // known source (forward / absorption modes)
    std::optional<Expression> f; // stationary factor, F = f*g (forward / absorption)
    Expression mu;             // inflow data over (x, v, t); x bound to the inflow face
    Expression phi;            // initial data over (x, v)
    std::optional<FieldSource> psi;
    std::optional<Expression> exact_u; // optional reference solution for error reports

    SolverParams solver;
    bool strict = false;
    std::filesystem::path base_dir; // directory file references resolve against
};

/// Scattering kernel sampled on the grid, values [t][x][v][v'].
struct JTensor {
    int nt1 = 0, nx = 0, nv = 0;
    std::vector<double> values;
    double at(int k, int i, int j, int jp) const {
        return values[((static_cast<size_t>(k) * nx + i) * nv + j) * nv + jp];
    }
    double& at(int k, int i, int j, int jp) {
        return values[((static_cast<size_t>(k) * nx + i) * nv + j) * nv + jp];
    }
    double sup() const;
};

/// Inflow boundary data sampled at the ghost faces, values [t][ordinate].
struct BoundaryData {
    int levels = 0, nv = 0;
    bool zero = true;
    std::vector<double> values;
    double at(int k, int j) const {
        return zero ? 0.0 : values[static_cast<size_t>(k) * nv + j];
    }
    double sup() const;
    double sup_dt(double dt) const;
};

struct QTerm {
    GridFunction3 q1;
    GridFunction2 q2;
};

/// Fully materialized problem: every coefficient sampled on the grid.
/// Identically-zero coefficients stay unmaterialized (nullopt) and the
/// solvers skip the corresponding terms.
struct ProblemSpec {
    PhaseGrid grid;
    Mode mode = Mode::forward;
    AlphaSpec alpha;
    SolverParams solver;
    bool strict = false;

    std::optional<GridFunction3> Sigma; // known coefficient (forward, source modes)
    std::optional<GridFunction3> u0;
    std::optional<GridFunction3> g_field;
    GridFunction2 g_T;    // g at the final level (valid when has_g)
    bool has_g = false;
    std::optional<GridFunction3> F_known; // (F | f*g) + h, zero-field when absent
    std::optional<JTensor> J;
    std::vector<QTerm> Q;
    BoundaryData mu;
    std::optional<GridFunction2> phi;
    std::optional<GridFunction2> psi;
    GridFunction2 chi_prior; // absorption mode Newton start, zero otherwise

    ProblemConfig config; // symbolic origin, kept for serialization/refinement

    bool nonlinear_active() const { return !alpha.is_zero() && !Q.empty(); }
};

struct Violation {
    std::string code;
    std::string message;
    bool hard = false; // blocks inverse runs
};

ProblemConfig parse_config(const std::string& json_text,
                           const std::filesystem::path& base_dir = {});
std::string serialize_config(const ProblemConfig& config);

/// Sample every coefficient of `config` on its grid (or on an explicitly
/// overridden resolution, used by refinement studies).
ProblemSpec materialize(const ProblemConfig& config);
ProblemSpec materialize(const ProblemConfig& config, int Nx, int Nv, int Nt);

/// Hypothesis checks: g lower bound, psi trace on the inflow set,
/// data compatibility, flight time, zero-data requirements of the inverse
/// reduction, the u0 lower bound in absorption mode, and the explicit
/// scattering step restriction. Violations are returned, never thrown.
std::vector<Violation> validate_problem(const ProblemSpec& spec);

/// Load + materialize + validate. With "strict": true any violation is
/// escalated to ConfigError.
ProblemSpec load_problem(const std::filesystem::path& path);
ProblemSpec problem_from_json(const std::string& json_text,
                              const std::filesystem::path& base_dir = {});

// Expression sampling helpers.
GridFunction3 sample_xt(const Expression& e, const PhaseGrid& grid);
GridFunction2 sample_xv(const Expression& e, const PhaseGrid& grid);

} // namespace kinv
