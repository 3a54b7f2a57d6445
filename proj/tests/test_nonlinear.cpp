#include <cmath>
#include <random>

#include "doctest.h"
#include "kinv/nonlinear.hpp"

using namespace kinv;

namespace {

ProblemSpec nl_spec(const std::string& coefficients, int nx = 6, int nv = 4, int nt = 6,
                    const std::string& solver = "{}") {
    std::string cfg = std::string("{\"geometry\": {\"L\":1.0,\"v0\":1.0,\"v1\":2.0,\"T\":1.0}, ") +
                      "\"grid\": {\"Nx\": " + std::to_string(nx) + ", \"Nv\": " +
                      std::to_string(nv) + ", \"Nt\": " + std::to_string(nt) +
                      "}, \"mode\": \"forward\", \"coefficients\": " + coefficients +
                      ", \"solver\": " + solver + "}";
    return problem_from_json(cfg);
}

GridFunction3 random_field(const PhaseGrid& g, std::mt19937& rng, double scale = 1.0) {
    GridFunction3 u(g);
    for (double& v : u.data()) v = scale * (2.0 * ((rng() >> 8) * (1.0 / 16777216.0)) - 1.0);
    return u;
}

// Naive quadruple-loop evaluation of the production term, kept separate
// from the library's collapsed form.
GridFunction3 naive_S(const GridFunction3& u, const ProblemSpec& spec) {
    const PhaseGrid& g = spec.grid;
    GridFunction3 out(g);
    for (int k = 0; k <= g.Nt; ++k)
        for (int i = 0; i < g.Nx; ++i)
            for (int j = 0; j < g.Nv; ++j) {
                double acc = 0.0;
                for (const QTerm& term : spec.Q) {
                    double inner = 0.0;
                    for (int kp = 0; kp <= g.Nt; ++kp) {
                        double wt = (kp == 0 || kp == g.Nt) ? 0.5 * g.dt : g.dt;
                        for (int ip = 0; ip < g.Nx; ++ip)
                            for (int jp = 0; jp < g.Nv; ++jp)
                                inner += wt * g.dx * g.v_weights[jp] * term.q2.at(ip, jp) *
                                         alpha_value(spec.alpha, u.at(kp, ip, jp));
                    }
                    acc += term.q1.at(k, i, j) * inner;
                }
                out.at(k, i, j) = acc;
            }
    return out;
}

} // namespace

TEST_CASE("production term vanishes without a kernel or with zero alpha") {
    std::mt19937 rng(31u);
    ProblemSpec no_q = nl_spec(R"JS({"alpha": {"family": "softabs", "c": 1.0}})JS");
    GridFunction3 u = random_field(no_q.grid, rng);
    CHECK(sup_norm(apply_S(u, no_q)) == 0.0);

    ProblemSpec zero_alpha =
        nl_spec(R"JS({"Q": [{"q1": "1", "q2": "1"}]})JS"); // alpha defaults to zero
    CHECK(sup_norm(apply_S(u, zero_alpha)) == 0.0);
    CHECK(sup_norm(apply_S(GridFunction3(no_q.grid), no_q)) == 0.0); // S(0) = 0
}

TEST_CASE("constant field: production equals alpha(c) times the phase-space volume") {
    ProblemSpec spec = nl_spec(
        R"JS({"alpha": {"family": "softabs", "c": 0.8}, "Q": [{"q1": "1", "q2": "1"}]})JS");
    const double c = 0.6;
    GridFunction3 u(spec.grid, c);
    GridFunction3 S = apply_S(u, spec);
    // L * 2(v1-v0) * T = 1 * 2 * 1 = 2.
    double expected = alpha_value(spec.alpha, c) * 2.0;
    for (double v : S.data()) CHECK(v == doctest::Approx(expected).epsilon(1e-13));

    GridFunction3 oracle = naive_S(u, spec);
    CHECK(sup_diff(S, oracle) <= 1e-12);
}

TEST_CASE("collapsed evaluation matches the quadruple loop on random fields") {
    ProblemSpec spec = nl_spec(
        R"JS({"alpha": {"family": "cubic_saturating", "c": 0.5},
              "Q": [{"q1": "0.4*(1+0.3*t)", "q2": "1+0.2*x"},
                    {"q1": "0.2*x", "q2": "abs(v)"}]})JS",
        4, 4, 4);
    std::mt19937 rng(32u);
    for (int trial = 0; trial < 3; ++trial) {
        GridFunction3 u = random_field(spec.grid, rng, 2.0);
        CHECK(sup_diff(apply_S(u, spec), naive_S(u, spec)) <= 1e-12);
    }
}

TEST_CASE("directional derivative of the production term") {
    ProblemSpec spec = nl_spec(
        R"JS({"alpha": {"family": "softabs", "c": 1.0},
              "Q": [{"q1": "0.3*(1+0.5*t)", "q2": "1+0.2*x"}]})JS");
    std::mt19937 rng(33u);
    GridFunction3 u = random_field(spec.grid, rng);
    GridFunction3 du = random_field(spec.grid, rng);

    CHECK(sup_norm(apply_S_derivative(u, GridFunction3(spec.grid), spec)) == 0.0);

    ProblemSpec zero_alpha = nl_spec(R"JS({"Q": [{"q1": "1", "q2": "1"}]})JS");
    CHECK(sup_norm(apply_S_derivative(u, du, zero_alpha)) == 0.0);

    // First-order decay of the linearization error over several decades.
    GridFunction3 Sd = apply_S_derivative(u, du, spec);
    std::vector<double> errs;
    std::vector<double> eps = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
    for (double e : eps) {
        GridFunction3 fd = lin_comb(apply_S(lin_comb(u, 1.0, du, e), spec), 1.0 / e,
                                    apply_S(u, spec), -1.0 / e);
        errs.push_back(sup_diff(fd, Sd));
    }
    double n = static_cast<double>(eps.size());
    double sx = 0.0, sy = 0.0, sxy = 0.0, sxx = 0.0;
    for (size_t k = 0; k < eps.size(); ++k) {
        double lx = std::log(eps[k]), ly = std::log(errs[k]);
        sx += lx;
        sy += ly;
        sxy += lx * ly;
        sxx += lx * lx;
    }
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope >= 0.7);
    CHECK(slope <= 1.3);
}

TEST_CASE("Lipschitz bound of the production term") {
    ProblemSpec spec = nl_spec(
        R"JS({"alpha": {"family": "softabs", "c": 0.7},
              "Q": [{"q1": "0.5", "q2": "0.8"}]})JS");
    std::mt19937 rng(34u);
    // C1 * sup|Q| * L * 2(v1-v0) * T
    double bound = spec.alpha.C1 * 0.5 * 0.8 * 1.0 * 2.0 * 1.0;
    for (int trial = 0; trial < 10; ++trial) {
        GridFunction3 u = random_field(spec.grid, rng, 3.0);
        GridFunction3 w = random_field(spec.grid, rng, 3.0);
        double lhs = sup_diff(apply_S(u, spec), apply_S(w, spec));
        CHECK(lhs <= bound * sup_diff(u, w) * (1.0 + 1e-12));
    }
}

TEST_CASE("without a production term Picard returns the linear solve bitwise") {
    ProblemSpec spec = nl_spec(R"JS({"Sigma": "0.2", "u0": "1", "mu": "0", "phi": "0"})JS");
    GridFunction3 F = sample_xt(Expression::parse("sin(pi*x)*(1+t)"), spec.grid);
    LinearForwardResult lin = solve_linear_forward(spec, F);
    NonlinearForwardResult nl = solve_nonlinear_forward(spec, F);
    CHECK(nl.picard.iterations == 1);
    CHECK(nl.picard.converged);
    REQUIRE(nl.picard.residual_history.size() == 1);
    CHECK(nl.picard.residual_history[0] == 0.0);
    CHECK(std::equal(lin.u.data().begin(), lin.u.data().end(), nl.u.data().begin()));
}

TEST_CASE("small kernels contract geometrically") {
    // C1 * sup|Q| * meas = 1 * 0.1 * 2 = 0.2 < 1/2.
    ProblemSpec spec = nl_spec(
        R"JS({"alpha": {"family": "softabs", "c": 1.0},
              "Q": [{"q1": "0.1", "q2": "1"}]})JS",
        6, 4, 6, R"JS({"picard_tol": 1e-12})JS");
    GridFunction3 F = sample_xt(Expression::parse("sin(pi*x)*(1+0.5*t)"), spec.grid);
    NonlinearForwardResult r = solve_nonlinear_forward(spec, F);
    CHECK(r.picard.converged);
    REQUIRE(r.picard.contraction_ratios.size() >= 2);
    for (double ratio : r.picard.contraction_ratios) CHECK(ratio < 1.0);
    // Roughly constant ratios (geometric convergence): spread below 10x.
    double lo = 1.0, hi = 0.0;
    for (double ratio : r.picard.contraction_ratios) {
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    CHECK(hi / std::max(lo, 1e-3) < 10.0);

    // Fixed-point consistency: one more linear solve with the converged
    // production source reproduces the iterate within tolerance.
    GridFunction3 base = lin_comb(F, 1.0, apply_S(r.u, spec), -1.0);
    LinearForwardResult again = solve_linear_forward(spec, base);
    CHECK(sup_diff(again.u, r.u) <= spec.solver.picard_tol);
}

TEST_CASE("a kernel scaled by 1e3 raises the divergence error") {
    ProblemSpec spec = nl_spec(
        R"JS({"alpha": {"family": "softabs", "c": 1.0},
              "Q": [{"q1": "100", "q2": "1"}]})JS",
        6, 4, 6);
    GridFunction3 F = sample_xt(Expression::parse("sin(pi*x)*(1+0.5*t)"), spec.grid);
    CHECK_THROWS_AS(solve_nonlinear_forward(spec, F), PicardDivergenceError);
}
