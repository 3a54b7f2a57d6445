#include "kinv/problem.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace kinv {

using nlohmann::json;

std::string mode_name(Mode mode) {
    switch (mode) {
    case Mode::forward: return "forward";
    case Mode::inverse_source: return "inverse_source";
    case Mode::inverse_absorption: return "inverse_absorption";
    }
    return "?";
}

Mode mode_from_name(const std::string& name) {
    if (name == "forward") return Mode::forward;
    if (name == "inverse_source") return Mode::inverse_source;
    if (name == "inverse_absorption") return Mode::inverse_absorption;
    throw ConfigError("unknown mode '" + name + "'");
}

double JTensor::sup() const {
    double m = 0.0;
    for (double v : values) {
        double a = std::fabs(v);
        if (a > m) m = a;
    }
    return m;
}

double BoundaryData::sup() const {
    if (zero) return 0.0;
    double m = 0.0;
    for (double v : values) {
        double a = std::fabs(v);
        if (a > m) m = a;
    }
    return m;
}

double BoundaryData::sup_dt(double dt) const {
    if (zero || levels < 2) return 0.0;
    double m = 0.0;
    for (int k = 0; k + 1 < levels; ++k)
        for (int j = 0; j < nv; ++j) {
            double d = std::fabs(at(k + 1, j) - at(k, j)) / dt;
            if (d > m) m = d;
        }
    return m;
}

GridFunction3 sample_xt(const Expression& e, const PhaseGrid& grid) {
    GridFunction3 out(grid);
    for (int k = 0; k <= grid.Nt; ++k) {
        double t = k * grid.dt;
        for (int i = 0; i < grid.Nx; ++i)
            for (int j = 0; j < grid.Nv; ++j)
                out.at(k, i, j) = e.eval(Bindings::xvt(grid.x_centers[i], grid.v_nodes[j], t));
    }
    out.ensure_finite("sampled coefficient");
    return out;
}

GridFunction2 sample_xv(const Expression& e, const PhaseGrid& grid) {
    GridFunction2 out(grid);
    for (int i = 0; i < grid.Nx; ++i)
        for (int j = 0; j < grid.Nv; ++j)
            out.at(i, j) = e.eval(Bindings::xv(grid.x_centers[i], grid.v_nodes[j]));
    out.ensure_finite("sampled slice");
    return out;
}

// --- JSON parsing ----------------------------------------------------------

namespace {

const json& require_key(const json& obj, const std::string& key, const std::string& context) {
    if (!obj.contains(key)) throw ConfigError(context.empty() ? key + " required"
                                                              : context + "." + key + " required");
    return obj.at(key);
}

double require_number(const json& obj, const std::string& key, const std::string& context) {
    const json& v = require_key(obj, key, context);
    if (!v.is_number()) throw ConfigError(context + "." + key + " must be a number");
    return v.get<double>();
}

int require_int(const json& obj, const std::string& key, const std::string& context) {
    const json& v = require_key(obj, key, context);
    if (!v.is_number_integer()) throw ConfigError(context + "." + key + " must be an integer");
    return v.get<int>();
}

Expression expr_of(const json& v, const std::string& what) {
    if (!v.is_string()) throw ConfigError(what + " must be an expression string");
    try {
        return Expression::parse(v.get<std::string>());
    } catch (const ExprParseError& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

Expression expr_or_zero(const json& obj, const std::string& key, const std::string& context) {
    if (!obj.contains(key)) return Expression::constant(0.0);
    return expr_of(obj.at(key), context + "." + key);
}

FieldSource field_source_of(const json& v, const std::string& what,
                            const std::filesystem::path& base_dir) {
    FieldSource fs;
    if (v.is_string()) {
        fs.expr = expr_of(v, what);
        return fs;
    }
    if (v.is_object() && v.contains("file")) {
        std::filesystem::path p = v.at("file").get<std::string>();
        fs.file = p.is_absolute() ? p : base_dir / p;
        return fs;
    }
    throw ConfigError(what + " must be an expression string or {\"file\": path}");
}

} // namespace

ProblemConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config must be a JSON object");

    ProblemConfig cfg;
    cfg.base_dir = base_dir;

    const json& geo = require_key(root, "geometry", "");
    cfg.geometry.L = require_number(geo, "L", "geometry");
    cfg.geometry.v0 = require_number(geo, "v0", "geometry");
    cfg.geometry.v1 = require_number(geo, "v1", "geometry");
    cfg.geometry.T = require_number(geo, "T", "geometry");

    const json& grid = require_key(root, "grid", "");
    cfg.Nx = require_int(grid, "Nx", "grid");
    cfg.Nv = require_int(grid, "Nv", "grid");
    cfg.Nt = require_int(grid, "Nt", "grid");

    cfg.mode = mode_from_name(require_key(root, "mode", "").get<std::string>());

    json coeff = root.value("coefficients", json::object());
    if (!coeff.is_object()) throw ConfigError("coefficients must be an object");

    if (coeff.contains("Sigma") && coeff.contains("sigma_g"))
        throw ConfigError("give either coefficients.Sigma or coefficients.sigma_g, not both");
    if (coeff.contains("sigma_g")) {
        cfg.Sigma = expr_of(coeff.at("sigma_g"), "coefficients.sigma_g");
        cfg.sigma_is_product = true;
    } else {
        cfg.Sigma = expr_or_zero(coeff, "Sigma", "coefficients");
    }
    cfg.J = expr_or_zero(coeff, "J", "coefficients");
    if (coeff.contains("Q")) {
        const json& q = coeff.at("Q");
        if (!q.is_array()) throw ConfigError("coefficients.Q must be an array of {q1, q2}");
        for (const json& term : q) {
            QTermConfig qt;
            qt.q1 = expr_of(require_key(term, "q1", "coefficients.Q[]"), "coefficients.Q[].q1");
            qt.q2 = expr_of(require_key(term, "q2", "coefficients.Q[]"), "coefficients.Q[].q2");
            cfg.Q.push_back(std::move(qt));
        }
    }
    if (coeff.contains("alpha")) {
        const json& a = coeff.at("alpha");
        std::string fam = require_key(a, "family", "coefficients.alpha").get<std::string>();
        double c = a.value("c", 1.0);
        cfg.alpha = AlphaSpec::make(fam, c);
    } else {
        cfg.alpha = AlphaSpec::zero();
    }
    if (coeff.contains("g")) {
        cfg.g = expr_of(coeff.at("g"), "coefficients.g");
        cfg.has_g = true;
    }
    cfg.h = expr_or_zero(coeff, "h", "coefficients");
    if (coeff.contains("u0"))
        cfg.u0 = field_source_of(coeff.at("u0"), "coefficients.u0", base_dir);
    else
        cfg.u0.expr = Expression::constant(0.0);
    if (coeff.contains("F") && coeff.contains("f"))
        throw ConfigError("give either coefficients.F or coefficients.f, not both");
    if (coeff.contains("F")) cfg.F = expr_of(coeff.at("F"), "coefficients.F");
    if (coeff.contains("f")) cfg.f = expr_of(coeff.at("f"), "coefficients.f");
    if (cfg.mode == Mode::inverse_source && (cfg.F || cfg.f))
        throw ConfigError("coefficients.F/f must not be given in inverse_source mode (the source is the unknown)");
    if (cfg.f && !cfg.has_g)
        throw ConfigError("coefficients.f requires coefficients.g (F = f*g)");
    cfg.mu = expr_or_zero(coeff, "mu", "coefficients");
    cfg.phi = expr_or_zero(coeff, "phi", "coefficients");

    if (root.contains("data")) {
        const json& data = root.at("data");
        if (data.contains("psi"))
            cfg.psi = field_source_of(data.at("psi"), "data.psi", base_dir);
        if (data.contains("exact_u"))
            cfg.exact_u = expr_of(data.at("exact_u"), "data.exact_u");
    }
    if (cfg.mode != Mode::forward) {
        if (!cfg.psi) throw ConfigError("psi required (data.psi) in inverse modes");
        if (!cfg.has_g) throw ConfigError("coefficients.g required in inverse modes");
    }

    json solver = root.value("solver", json::object());
    cfg.solver.picard_tol = solver.value("picard_tol", cfg.solver.picard_tol);
    cfg.solver.max_picard = solver.value("max_picard", cfg.solver.max_picard);
    cfg.solver.newton_tol = solver.value("newton_tol", cfg.solver.newton_tol);
    cfg.solver.max_newton = solver.value("max_newton", cfg.solver.max_newton);
    cfg.solver.newton_damping = solver.value("newton_damping", cfg.solver.newton_damping);
    cfg.solver.g0 = solver.value("g0", cfg.solver.g0);
    cfg.solver.u_min = solver.value("u_min", cfg.solver.u_min);
    cfg.solver.jacobian_dense_threshold =
        solver.value("jacobian_dense_threshold", cfg.solver.jacobian_dense_threshold);
    cfg.solver.gmres_restart = solver.value("gmres_restart", cfg.solver.gmres_restart);
    cfg.solver.gmres_max_iter = solver.value("gmres_max_iter", cfg.solver.gmres_max_iter);
    cfg.solver.gmres_tol = solver.value("gmres_tol", cfg.solver.gmres_tol);

    cfg.strict = root.value("strict", false);
    return cfg;
}

std::string serialize_config(const ProblemConfig& cfg) {
    json root;
    root["geometry"] = {{"L", cfg.geometry.L},
                        {"v0", cfg.geometry.v0},
                        {"v1", cfg.geometry.v1},
                        {"T", cfg.geometry.T}};
    root["grid"] = {{"Nx", cfg.Nx}, {"Nv", cfg.Nv}, {"Nt", cfg.Nt}};
    root["mode"] = mode_name(cfg.mode);

    json coeff = json::object();
    if (!cfg.Sigma.is_zero_constant())
        coeff[cfg.sigma_is_product ? "sigma_g" : "Sigma"] = cfg.Sigma.str();
    if (!cfg.J.is_zero_constant()) coeff["J"] = cfg.J.str();
    if (!cfg.Q.empty()) {
        json q = json::array();
        for (const QTermConfig& term : cfg.Q)
            q.push_back({{"q1", term.q1.str()}, {"q2", term.q2.str()}});
        coeff["Q"] = q;
    }
    if (!cfg.alpha.is_zero())
        coeff["alpha"] = {{"family", family_name(cfg.alpha.family)}, {"c", cfg.alpha.c}};
    if (cfg.has_g) coeff["g"] = cfg.g.str();
    if (!cfg.h.is_zero_constant()) coeff["h"] = cfg.h.str();
    if (cfg.u0.from_file())
        coeff["u0"] = {{"file", cfg.u0.file.string()}};
    else if (!cfg.u0.expr.is_zero_constant())
        coeff["u0"] = cfg.u0.expr.str();
    if (cfg.F) coeff["F"] = cfg.F->str();
    if (cfg.f) coeff["f"] = cfg.f->str();
    if (!cfg.mu.is_zero_constant()) coeff["mu"] = cfg.mu.str();
    if (!cfg.phi.is_zero_constant()) coeff["phi"] = cfg.phi.str();
    root["coefficients"] = coeff;

    json data = json::object();
    if (cfg.psi) {
        if (cfg.psi->from_file())
            data["psi"] = {{"file", cfg.psi->file.string()}};
        else
            data["psi"] = cfg.psi->expr.str();
    }
    if (cfg.exact_u) data["exact_u"] = cfg.exact_u->str();
    if (!data.empty()) root["data"] = data;

    root["solver"] = {{"picard_tol", cfg.solver.picard_tol},
                      {"max_picard", cfg.solver.max_picard},
                      {"newton_tol", cfg.solver.newton_tol},
                      {"max_newton", cfg.solver.max_newton},
                      {"newton_damping", cfg.solver.newton_damping},
                      {"g0", cfg.solver.g0},
                      {"u_min", cfg.solver.u_min},
                      {"jacobian_dense_threshold", cfg.solver.jacobian_dense_threshold},
                      {"gmres_restart", cfg.solver.gmres_restart},
                      {"gmres_max_iter", cfg.solver.gmres_max_iter},
                      {"gmres_tol", cfg.solver.gmres_tol}};
    root["strict"] = cfg.strict;
    return root.dump(2);
}

// --- materialization --------------------------------------------------------

namespace {

GridFunction3 sample_u0(const FieldSource& src, const PhaseGrid& grid) {
    if (src.from_file()) return load_field(src.file, grid);
    return sample_xt(src.expr, grid);
}

GridFunction2 sample_psi(const FieldSource& src, const PhaseGrid& grid) {
    if (src.from_file()) return load_slice(src.file, grid);
    return sample_xv(src.expr, grid);
}

JTensor sample_J(const Expression& e, const PhaseGrid& grid) {
    JTensor J;
    J.nt1 = grid.Nt + 1;
    J.nx = grid.Nx;
    J.nv = grid.Nv;
    J.values.resize(static_cast<size_t>(J.nt1) * J.nx * J.nv * J.nv);
    for (int k = 0; k <= grid.Nt; ++k) {
        double t = k * grid.dt;
        for (int i = 0; i < grid.Nx; ++i)
            for (int j = 0; j < grid.Nv; ++j)
                for (int jp = 0; jp < grid.Nv; ++jp) {
                    Bindings b = Bindings::xvt(grid.x_centers[i], grid.v_nodes[j], t);
                    b.vp = grid.v_nodes[jp];
                    double val = e.eval(b);
                    if (!std::isfinite(val))
                        throw ConfigError("sampled J contains a non-finite entry");
                    J.at(k, i, j, jp) = val;
                }
    }
    return J;
}

BoundaryData sample_mu(const Expression& e, const PhaseGrid& grid) {
    BoundaryData mu;
    mu.levels = grid.Nt + 1;
    mu.nv = grid.Nv;
    if (e.is_zero_constant()) return mu;
    mu.zero = false;
    mu.values.resize(static_cast<size_t>(mu.levels) * mu.nv);
    for (int k = 0; k <= grid.Nt; ++k) {
        double t = k * grid.dt;
        for (int j = 0; j < grid.Nv; ++j) {
            double xb = grid.v_nodes[j] > 0.0 ? 0.0 : grid.geom.L;
            mu.values[static_cast<size_t>(k) * grid.Nv + j] =
                e.eval(Bindings::xvt(xb, grid.v_nodes[j], t));
        }
    }
    return mu;
}

} // namespace

ProblemSpec materialize(const ProblemConfig& config, int Nx, int Nv, int Nt) {
    ProblemSpec spec;
    spec.config = config;
    spec.grid = build_grid(config.geometry, Nx, Nv, Nt);
    spec.mode = config.mode;
    spec.alpha = config.alpha;
    spec.solver = config.solver;
    spec.strict = config.strict;

    const PhaseGrid& grid = spec.grid;

    if (config.has_g) {
        spec.g_field = sample_xt(config.g, grid);
        spec.g_T = final_slice(*spec.g_field);
        spec.has_g = true;
    }

    // Sigma: a known coefficient except in absorption mode, where the
    // config entry (if any) seeds the Newton control.
    if (config.mode == Mode::inverse_absorption) {
        spec.chi_prior = GridFunction2(grid, 0.0);
        if (!config.Sigma.is_zero_constant()) {
            if (config.sigma_is_product) {
                GridFunction2 sig = sample_xv(config.Sigma, grid);
                for (int i = 0; i < grid.Nx; ++i)
                    for (int j = 0; j < grid.Nv; ++j)
                        spec.chi_prior.at(i, j) = sig.at(i, j) * spec.g_T.at(i, j);
            } else {
                GridFunction3 sig = sample_xt(config.Sigma, grid);
                spec.chi_prior = final_slice(sig);
            }
        }
    } else if (!config.Sigma.is_zero_constant()) {
        if (config.sigma_is_product) {
            if (!config.has_g) throw ConfigError("coefficients.sigma_g requires coefficients.g");
            GridFunction2 sig = sample_xv(config.Sigma, grid);
            GridFunction3 field(grid);
            for (int k = 0; k <= grid.Nt; ++k)
                for (int i = 0; i < grid.Nx; ++i)
                    for (int j = 0; j < grid.Nv; ++j)
                        field.at(k, i, j) = sig.at(i, j) * spec.g_field->at(k, i, j);
            spec.Sigma = std::move(field);
        } else {
            spec.Sigma = sample_xt(config.Sigma, grid);
        }
    }

    if (!(config.u0.from_file() ? false : config.u0.expr.is_zero_constant()))
        spec.u0 = sample_u0(config.u0, grid);

    // Known source: (F | f*g) + h.
    {
        std::optional<GridFunction3> base;
        if (config.F)
            base = sample_xt(*config.F, grid);
        else if (config.f) {
            GridFunction2 fs = sample_xv(*config.f, grid);
            GridFunction3 field(grid);
            for (int k = 0; k <= grid.Nt; ++k)
                for (int i = 0; i < grid.Nx; ++i)
                    for (int j = 0; j < grid.Nv; ++j)
                        field.at(k, i, j) = fs.at(i, j) * spec.g_field->at(k, i, j);
            base = std::move(field);
        }
        if (!config.h.is_zero_constant()) {
            GridFunction3 hf = sample_xt(config.h, grid);
            base = base ? lin_comb(*base, 1.0, hf, 1.0) : std::move(hf);
        }
        spec.F_known = std::move(base);
    }

    if (!config.J.is_zero_constant()) spec.J = sample_J(config.J, grid);

    for (const QTermConfig& term : config.Q) {
        QTerm qt;
        qt.q1 = sample_xt(term.q1, grid);
        qt.q2 = sample_xv(term.q2, grid);
        spec.Q.push_back(std::move(qt));
    }

    spec.mu = sample_mu(config.mu, grid);
    if (!config.phi.is_zero_constant()) spec.phi = sample_xv(config.phi, grid);
    if (config.psi) spec.psi = sample_psi(*config.psi, grid);

    return spec;
}

ProblemSpec materialize(const ProblemConfig& config) {
    return materialize(config, config.Nx, config.Nv, config.Nt);
}

// --- validation --------------------------------------------------------------

std::vector<Violation> validate_problem(const ProblemSpec& spec) {
    std::vector<Violation> out;
    const PhaseGrid& grid = spec.grid;
    bool inverse = spec.mode != Mode::forward;

    if (!grid.flight_flag)
        out.push_back({"flight_time",
                       "slab transit time L/v0 is not below T (L/v0 = " +
                           std::to_string(grid.geom.L / grid.geom.v0) + ", T = " +
                           std::to_string(grid.geom.T) + ")",
                       false});

    if (spec.has_g && inverse) {
        double gmin = std::numeric_limits<double>::infinity();
        for (double v : spec.g_T.data()) gmin = std::min(gmin, std::fabs(v));
        if (gmin < spec.solver.g0)
            out.push_back({"g_lower_bound",
                           "|g(x,v,T)| drops to " + std::to_string(gmin) +
                               ", below the g0 threshold " + std::to_string(spec.solver.g0),
                           true});
    }

    if (inverse && spec.psi) {
        double trace = 0.0;
        for (double v : trace_inflow(*spec.psi)) trace = std::max(trace, std::fabs(v));
        if (trace > 1e-12)
            out.push_back({"psi_gamma_minus",
                           "psi nonzero on gamma_minus (inflow-cell sup " + std::to_string(trace) + ")",
                           false});
    }

    if (spec.mode == Mode::forward) {
        // Compatibility of the initial and inflow data at the corners of
        // the inflow boundary, evaluated from the expressions at the true
        // boundary points.
        double worst = 0.0;
        for (int j = 0; j < grid.Nv; ++j) {
            double xb = grid.v_nodes[j] > 0.0 ? 0.0 : grid.geom.L;
            Bindings b = Bindings::xvt(xb, grid.v_nodes[j], 0.0);
            double phi_b = spec.config.phi.eval(b);
            double mu_b = spec.config.mu.eval(b);
            worst = std::max(worst, std::fabs(phi_b - mu_b));
        }
        if (worst > 1e-12)
            out.push_back({"compatibility",
                           "compatibility phi = mu(.,0) fails on gamma_minus (gap " +
                               std::to_string(worst) + ")",
                           false});
    }

    if (inverse) {
        double bad = spec.mu.sup();
        if (spec.phi) bad = std::max(bad, sup_norm(*spec.phi));
        if (!spec.config.h.is_zero_constant()) bad = std::max(bad, 1.0);
        if (bad > 1e-12)
            out.push_back({"inverse_nonzero_data",
                           "inverse modes require mu = 0, phi = 0 and h = 0",
                           true});
    }

    if (spec.mode == Mode::inverse_absorption) {
        if (!spec.u0) {
            out.push_back({"u0_lower_bound", "absorption mode requires a nonzero u0", true});
        } else {
            double umin = std::numeric_limits<double>::infinity();
            for (int i = 0; i < grid.Nx; ++i)
                for (int j = 0; j < grid.Nv; ++j)
                    umin = std::min(umin, std::fabs(spec.u0->at(grid.Nt, i, j)));
            if (umin < spec.solver.u_min)
                out.push_back({"u0_lower_bound",
                               "|u0(x,v,T)| drops to " + std::to_string(umin) +
                                   ", below the u_min threshold " + std::to_string(spec.solver.u_min),
                               true});
        }
    }

    if (spec.J) {
        double restriction = grid.dt * spec.J->sup() * grid.measure_v();
        if (restriction >= 1.0)
            out.push_back({"scattering_step",
                           "explicit scattering restriction dt*sup|J|*meas(V) = " +
                               std::to_string(restriction) + " >= 1; refine dt",
                           false});
    }

    return out;
}

// --- loading -----------------------------------------------------------------

ProblemSpec problem_from_json(const std::string& json_text,
                              const std::filesystem::path& base_dir) {
    ProblemConfig cfg = parse_config(json_text, base_dir);
    ProblemSpec spec = materialize(cfg);
    auto violations = validate_problem(spec);
    for (const Violation& v : violations)
        log_info("validation: [" + v.code + "] " + v.message);
    if (spec.strict && !violations.empty()) {
        std::string msg = "strict mode: validation failed:";
        for (const Violation& v : violations) msg += "\n  [" + v.code + "] " + v.message;
        throw ConfigError(msg);
    }
    return spec;
}

ProblemSpec load_problem(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return problem_from_json(buf.str(), path.parent_path());
}

} // namespace kinv
