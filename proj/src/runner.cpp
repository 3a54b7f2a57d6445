#include "kinv/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "kinv/nonlinear.hpp"
#include "kinv/oracle.hpp"
#include "kinv/parallel.hpp"

namespace kinv {

using nlohmann::json;

namespace {

json picard_json(const PicardReport& rep) {
    return json{{"iterations", rep.iterations},
                {"residual_history", rep.residual_history},
                {"contraction_ratios", rep.contraction_ratios},
                {"converged", rep.converged}};
}

json norms_json(const NormReport& n) {
    return json{{"sup", n.sup},         {"l2", n.l2},
                {"sup_dt", n.sup_dt},   {"sup_stream", n.sup_stream},
                {"trace_sup", n.trace_sup}, {"h_inf", n.h_inf},
                {"w_inf_t", n.w_inf_t}};
}

json newton_json(const NewtonReport& rep) {
    json stats = json::array();
    for (const JacobianSolveStat& s : rep.jacobian_solve_stats)
        stats.push_back({{"method", s.method},
                         {"iterations", s.iterations},
                         {"residual", s.residual},
                         {"condition", s.condition}});
    return json{{"iterations", rep.iterations},
                {"initial_residual", rep.initial_residual},
                {"residual_history", rep.residual_history},
                {"step_norms", rep.step_norms},
                {"damping_factors", rep.damping_factors},
                {"jacobian_solve_stats", stats},
                {"converged", rep.converged},
                {"newton_tol", rep.newton_tol}};
}

json solver_json(const SolverParams& s) {
    return json{{"picard_tol", s.picard_tol},
                {"max_picard", s.max_picard},
                {"newton_tol", s.newton_tol},
                {"max_newton", s.max_newton},
                {"newton_damping", s.newton_damping},
                {"g0", s.g0},
                {"u_min", s.u_min},
                {"jacobian_dense_threshold", s.jacobian_dense_threshold},
                {"gmres_restart", s.gmres_restart},
                {"gmres_max_iter", s.gmres_max_iter},
                {"gmres_tol", s.gmres_tol}};
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
}

ProblemSpec load_with_options(const std::filesystem::path& config, const RunOptions& opts,
                              std::vector<Violation>* violations_out = nullptr) {
    std::ifstream in(config);
    if (!in) throw IoError("cannot open config: " + config.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ProblemConfig cfg = parse_config(text, config.parent_path());
    if (opts.strict_override) cfg.strict = opts.strict;
    ProblemSpec spec = materialize(cfg);
    auto violations = validate_problem(spec);
    for (const Violation& v : violations) {
        std::fprintf(stderr, "validation: [%s] %s\n", v.code.c_str(), v.message.c_str());
    }
    if (violations_out != nullptr) *violations_out = violations;
    if (spec.strict && !violations.empty()) {
        std::string msg = "strict mode: validation failed:";
        for (const Violation& v : violations) msg += "\n  [" + v.code + "] " + v.message;
        throw ConfigError(msg);
    }
    return spec;
}

template <typename Body>
RunManifest run_guarded(const std::string& command, const std::filesystem::path& config,
                        const std::filesystem::path& out, const RunOptions& opts, Body&& body) {
    RunManifest manifest;
    manifest.command = command;
    manifest.config_path = config.string();
    manifest.output_dir = out.string();
    auto start = std::chrono::steady_clock::now();
    try {
        std::error_code ec;
        std::filesystem::create_directories(out, ec);
        if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
        set_max_threads(opts.threads);
        body(manifest);
    } catch (const ConfigError& e) {
        manifest.exit_status = "validation_failed";
        manifest.exit_code = 2;
        manifest.message = e.what();
        log_error(e.what());
    } catch (const SolverError& e) {
        manifest.exit_status = "solver_failed";
        manifest.exit_code = 3;
        manifest.message = e.what();
        log_error(e.what());
    } catch (const IoError& e) {
        manifest.exit_status = "io_failed";
        manifest.exit_code = 4;
        manifest.message = e.what();
        log_error(e.what());
    }
    manifest.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    try {
        write_manifest(out, manifest);
    } catch (const Error& e) {
        log_error(std::string("manifest write failed: ") + e.what());
        if (manifest.exit_code == 0) {
            manifest.exit_code = 4;
            manifest.exit_status = "io_failed";
        }
    }
    return manifest;
}

} // namespace

void write_manifest(const std::filesystem::path& out, const RunManifest& manifest) {
    json j{{"command", manifest.command},
           {"config_path", manifest.config_path},
           {"output_dir", manifest.output_dir},
           {"wall_time", manifest.wall_time},
           {"artifacts", manifest.artifacts},
           {"exit_status", manifest.exit_status},
           {"exit_code", manifest.exit_code}};
    if (!manifest.message.empty()) j["message"] = manifest.message;
    write_json_file(out / "manifest.json", j);
}

RunManifest run_forward(const std::filesystem::path& config, const std::filesystem::path& out,
                        const RunOptions& opts) {
    return run_guarded("forward", config, out, opts, [&](RunManifest& manifest) {
        ProblemSpec spec = load_with_options(config, opts);
        if (spec.mode != Mode::forward)
            throw ConfigError("forward command requires mode \"forward\"");

        GridFunction3 F = spec.F_known ? *spec.F_known : GridFunction3(spec.grid);
        NonlinearForwardResult result = solve_nonlinear_forward(spec, F);
        if (!result.picard.converged)
            throw SolverError("Picard iteration did not converge within max_picard");

        // Residual of the discrete operator with the converged production
        // term folded into the source.
        GridFunction3 F_eff = F;
        if (spec.nonlinear_active())
            F_eff = lin_comb(F, 1.0, apply_S(result.u, spec), -1.0);
        double residual_sup = sup_norm(linear_residual(spec, result.u, F_eff));
        double ratio = apriori_ratio(spec, result.u, F);

        dump_field(out / "u.bin", result.u);
        manifest.artifacts.push_back("u.bin");

        write_json_file(out / "norms.json", norms_json(norms(result.u)));
        manifest.artifacts.push_back("norms.json");

        json rep{{"apriori_ratio", ratio},
                 {"residual_sup", residual_sup},
                 {"picard", picard_json(result.picard)},
                 {"solver", solver_json(spec.solver)}};
        if (spec.config.exact_u) {
            GridFunction3 exact = sample_xt(*spec.config.exact_u, spec.grid);
            rep["error_vs_exact"] = sup_diff(result.u, exact);
        }
        write_json_file(out / "forward_report.json", rep);
        manifest.artifacts.push_back("forward_report.json");
    });
}

RunManifest run_inverse(const std::filesystem::path& config, const std::filesystem::path& out,
                        const RunOptions& opts) {
    return run_guarded("inverse", config, out, opts, [&](RunManifest& manifest) {
        ProblemSpec spec = load_with_options(config, opts);
        if (spec.mode == Mode::forward)
            throw ConfigError("inverse command requires an inverse mode config");
        if (!spec.psi) throw ConfigError("psi required");

        InverseResult result = solve_inverse(spec, *spec.psi);

        write_slice_csv(out / "control.csv", result.control);
        manifest.artifacts.push_back("control.csv");
        dump_slice(out / "control.bin", result.control);
        manifest.artifacts.push_back("control.bin");
        dump_field(out / "state.bin", result.state);
        manifest.artifacts.push_back("state.bin");
        write_json_file(out / "newton_report.json", newton_json(result.report));
        manifest.artifacts.push_back("newton_report.json");

        {
            std::FILE* f = std::fopen((out / "residual_history.csv").string().c_str(), "w");
            if (f == nullptr) throw IoError("cannot open residual_history.csv");
            std::fprintf(f, "iteration,residual,step_norm,damping\n");
            std::fprintf(f, "0,%.17g,,\n", result.report.initial_residual);
            for (size_t k = 0; k < result.report.residual_history.size(); ++k)
                std::fprintf(f, "%zu,%.17g,%.17g,%.17g\n", k + 1,
                             result.report.residual_history[k], result.report.step_norms[k],
                             result.report.damping_factors[k]);
            std::fclose(f);
            manifest.artifacts.push_back("residual_history.csv");
        }

        if (!result.report.converged)
            throw SolverError("Newton did not reach tolerance within max_newton");
    });
}

// --- verification suites -----------------------------------------------------

namespace {

struct AlphaBatteryRow {
    std::string family;
    double c = 0.0;
    double worst_growth = 0.0;  // max |a(u)| / (C1 |u|)
    double worst_da = 0.0;      // max |a'(u)| / C1
    double worst_dda = 0.0;     // max |a''(u)| / C2
    double fd_rel_err = 0.0;    // worst central-difference mismatch
    bool zero_at_origin = false;
    bool pass = false;
};

AlphaBatteryRow alpha_battery(const AlphaSpec& spec) {
    AlphaBatteryRow row;
    row.family = family_name(spec.family);
    row.c = spec.c;

    AlphaValue origin = alpha_eval(spec, 0.0);
    row.zero_at_origin = origin.a == 0.0 && origin.da == 0.0;

    std::vector<double> samples;
    samples.push_back(0.0);
    for (int s = -1; s <= 1; s += 2)
        for (int k = 0; k < 2500; ++k) {
            double mag = std::pow(10.0, -8.0 + 14.0 * k / 2499.0); // 1e-8 .. 1e6
            samples.push_back(s * mag);
        }
    for (int k = 0; k < 5000; ++k) samples.push_back(-10.0 + 20.0 * k / 4999.0);

    for (double u : samples) {
        AlphaValue a = alpha_eval(spec, u);
        if (spec.C1 > 0.0 && u != 0.0)
            row.worst_growth = std::max(row.worst_growth, std::fabs(a.a) / (spec.C1 * std::fabs(u)));
        if (spec.C1 > 0.0) row.worst_da = std::max(row.worst_da, std::fabs(a.da) / spec.C1);
        if (spec.C2 > 0.0) row.worst_dda = std::max(row.worst_dda, std::fabs(a.dda) / spec.C2);
    }

    const double h = 1e-5;
    for (int k = 0; k < 1000; ++k) {
        double u = -10.0 + 20.0 * k / 999.0;
        AlphaValue a = alpha_eval(spec, u);
        double fd1 = (alpha_value(spec, u + h) - alpha_value(spec, u - h)) / (2.0 * h);
        double fd2 = (alpha_derivative(spec, u + h) - alpha_derivative(spec, u - h)) / (2.0 * h);
        row.fd_rel_err = std::max(row.fd_rel_err, std::fabs(fd1 - a.da) / std::max(1.0, std::fabs(a.da)));
        row.fd_rel_err = std::max(row.fd_rel_err, std::fabs(fd2 - a.dda) / std::max(1.0, std::fabs(a.dda)));
    }

    const double slack = 1.0 + 1e-9;
    row.pass = row.zero_at_origin && row.worst_growth <= slack && row.worst_da <= slack &&
               row.worst_dda <= slack && row.fd_rel_err <= 1e-6;
    return row;
}

Expression reference_control(const Geometry& geom) {
    // 0.1 sin(pi x / L): smooth, vanishing at both walls.
    Expression arg = Expression::binary(
        '*', Expression::constant(std::numbers::pi / geom.L), Expression::variable(ExprVar::x));
    return Expression::binary('*', Expression::constant(0.1),
                              Expression::unary(ExprFunc::sin, arg));
}

} // namespace

RunManifest run_verify(const std::string& suite, const std::filesystem::path& config,
                       const std::filesystem::path& out, const RunOptions& opts) {
    return run_guarded("verify:" + suite, config, out, opts, [&](RunManifest& manifest) {
        if (suite == "alpha") {
            ProblemSpec spec = load_with_options(config, opts);
            std::vector<AlphaSpec> specs;
            if (!spec.alpha.is_zero()) specs.push_back(spec.alpha);
            specs.push_back(AlphaSpec::zero());
            specs.push_back(AlphaSpec::make(AlphaFamily::softabs, 1.0));
            specs.push_back(AlphaSpec::make(AlphaFamily::cubic_saturating, 1.0));

            bool all_pass = true;
            std::FILE* f = std::fopen((out / "alpha_report.csv").string().c_str(), "w");
            if (f == nullptr) throw IoError("cannot open alpha_report.csv");
            std::fprintf(f, "family,c,growth_margin,da_margin,dda_margin,fd_rel_err,pass\n");
            for (const AlphaSpec& a : specs) {
                AlphaBatteryRow row = alpha_battery(a);
                all_pass = all_pass && row.pass;
                std::fprintf(f, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", row.family.c_str(), row.c,
                             row.worst_growth, row.worst_da, row.worst_dda, row.fd_rel_err,
                             row.pass ? 1 : 0);
            }
            std::fclose(f);
            manifest.artifacts.push_back("alpha_report.csv");
            write_json_file(out / "summary.json", json{{"suite", "alpha"}, {"pass", all_pass}});
            manifest.artifacts.push_back("summary.json");
            if (!all_pass) throw SolverError("alpha condition suite failed");
        } else if (suite == "oracle") {
            ProblemSpec spec = load_with_options(config, opts);
            DenseSystem dense = assemble_dense(spec);
            GridFunction2 psi = spec.psi
                                    ? *spec.psi
                                    : forward_map_M({sample_xv(reference_control(spec.grid.geom),
                                                               spec.grid),
                                                     spec.mode == Mode::inverse_absorption
                                                         ? ControlKind::absorption
                                                         : ControlKind::source},
                                                    spec)
                                          .final;
            GridFunction2 newton = solve_inverse(spec, psi).control;
            GridFunction2 direct = oracle_inverse(spec, dense, psi);
            double gap = sup_diff(newton, direct);
            bool pass = gap <= 1e-8;

            dump_matrix(out / "dense_matrix.bin", dense.n, dense.n, dense.matrix);
            manifest.artifacts.push_back("dense_matrix.bin");
            write_json_file(out / "summary.json",
                            json{{"suite", "oracle"},
                                 {"max_discrepancy", gap},
                                 {"condition", dense.condition},
                                 {"pass", pass}});
            manifest.artifacts.push_back("summary.json");
            std::fprintf(stderr, "oracle suite: max discrepancy %.3e, condition %.3e\n", gap,
                         dense.condition);
            if (!pass) throw SolverError("oracle equivalence failed: discrepancy above 1e-8");
        } else if (suite == "mms") {
            bool all_pass = true;
            json orders_json = json::object();
            for (int id = 1; id <= 4; ++id) {
                auto rows = convergence_study(id, 3);
                std::string name = "mms_case" + std::to_string(id) + ".csv";
                std::FILE* f = std::fopen((out / name).string().c_str(), "w");
                if (f == nullptr) throw IoError("cannot open " + name);
                std::fprintf(f, "h,error,order\n");
                json orders = json::array();
                for (const ConvergenceRow& row : rows) {
                    if (row.order_na)
                        std::fprintf(f, "%.17g,%.17g,na\n", row.h, row.error);
                    else
                        std::fprintf(f, "%.17g,%.17g,%.17g\n", row.h, row.error, row.order);
                    if (!row.order_na) orders.push_back(row.order);
                }
                std::fclose(f);
                manifest.artifacts.push_back(name);
                orders_json["case" + std::to_string(id)] = orders;
                if (id <= 3)
                    for (const ConvergenceRow& row : rows)
                        if (!row.order_na && (row.order < 0.7 || row.order > 1.3)) all_pass = false;
            }
            write_json_file(out / "summary.json",
                            json{{"suite", "mms"}, {"orders", orders_json}, {"pass", all_pass}});
            manifest.artifacts.push_back("summary.json");
            if (!all_pass) throw SolverError("manufactured-solution orders fell outside [0.7, 1.3]");
        } else if (suite == "stability") {
            ProblemSpec spec = load_with_options(config, opts);
            auto family = make_stability_family(spec.grid, 20, 42u);
            StabilityResult st = stability_estimate(spec, family);

            std::FILE* f = std::fopen((out / "stability.csv").string().c_str(), "w");
            if (f == nullptr) throw IoError("cannot open stability.csv");
            std::fprintf(f, "member,psi_norm,f_norm,ratio,solved\n");
            for (size_t m = 0; m < st.members.size(); ++m)
                std::fprintf(f, "%zu,%.17g,%.17g,%.17g,%d\n", m, st.members[m].psi_norm,
                             st.members[m].f_norm, st.members[m].ratio,
                             st.members[m].solved ? 1 : 0);
            std::fclose(f);
            manifest.artifacts.push_back("stability.csv");

            bool pass = std::isfinite(st.c_bar) && st.c_bar > 0.0;
            write_json_file(out / "summary.json", json{{"suite", "stability"},
                                                       {"c_bar", st.c_bar},
                                                       {"skipped", st.skipped},
                                                       {"pass", pass}});
            manifest.artifacts.push_back("summary.json");
            if (!pass) throw SolverError("stability estimate failed to produce a finite constant");
        } else {
            throw ConfigError("unknown verify suite '" + suite +
                              "' (expected mms|oracle|stability|alpha)");
        }
    });
}

} // namespace kinv
