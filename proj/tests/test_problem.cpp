#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "kinv/problem.hpp"

using namespace kinv;

namespace {

std::string minimal_forward() {
    return R"JS({
      "geometry": {"L": 1.0, "v0": 1.0, "v1": 2.0, "T": 2.0},
      "grid": {"Nx": 4, "Nv": 4, "Nt": 4},
      "mode": "forward"
    })JS";
}

std::string inverse_base(const std::string& extra_coeff = "", const std::string& psi = "\"0\"") {
    return R"JS({
      "geometry": {"L": 1.0, "v0": 1.0, "v1": 2.0, "T": 1.0},
      "grid": {"Nx": 4, "Nv": 4, "Nt": 4},
      "mode": "inverse_source",
      "coefficients": {"g": "exp(-t)")JS" +
           extra_coeff + R"JS(},
      "data": {"psi": )JS" + psi + R"JS(}
    })JS";
}

bool has_code(const std::vector<Violation>& vs, const std::string& code) {
    for (const Violation& v : vs)
        if (v.code == code) return true;
    return false;
}

} // namespace

TEST_CASE("minimal forward config materializes with zero coefficients") {
    ProblemSpec spec = problem_from_json(minimal_forward());
    CHECK(spec.mode == Mode::forward);
    CHECK(spec.grid.Nx == 4);
    CHECK_FALSE(spec.Sigma.has_value());
    CHECK_FALSE(spec.u0.has_value());
    CHECK_FALSE(spec.F_known.has_value());
    CHECK_FALSE(spec.J.has_value());
    CHECK(spec.Q.empty());
    CHECK(spec.mu.zero);
    CHECK(spec.alpha.is_zero());
}

TEST_CASE("schema errors name the offending key") {
    CHECK_THROWS_WITH_AS(problem_from_json(R"JS({"geometry": {"L":1,"v0":1,"v1":2,"T":1}})JS"),
                         doctest::Contains("grid"), ConfigError);
    CHECK_THROWS_WITH_AS(problem_from_json(R"JS({"grid": {"Nx":4,"Nv":4,"Nt":4}})JS"),
                         doctest::Contains("geometry"), ConfigError);
    std::string no_L = R"JS({
      "geometry": {"v0": 1.0, "v1": 2.0, "T": 1.0},
      "grid": {"Nx": 4, "Nv": 4, "Nt": 4}, "mode": "forward"})JS";
    CHECK_THROWS_WITH_AS(problem_from_json(no_L), doctest::Contains("geometry.L"), ConfigError);
    CHECK_THROWS_AS(problem_from_json("{not json"), ConfigError);
}

TEST_CASE("inverse modes demand psi and g") {
    std::string no_psi = R"JS({
      "geometry": {"L": 1.0, "v0": 1.0, "v1": 2.0, "T": 1.0},
      "grid": {"Nx": 4, "Nv": 4, "Nt": 4},
      "mode": "inverse_source",
      "coefficients": {"g": "1"}
    })JS";
    CHECK_THROWS_WITH_AS(problem_from_json(no_psi), doctest::Contains("psi required"), ConfigError);

    std::string no_g = R"JS({
      "geometry": {"L": 1.0, "v0": 1.0, "v1": 2.0, "T": 1.0},
      "grid": {"Nx": 4, "Nv": 4, "Nt": 4},
      "mode": "inverse_source",
      "data": {"psi": "0"}
    })JS";
    CHECK_THROWS_WITH_AS(problem_from_json(no_g), doctest::Contains("g required"), ConfigError);
}

TEST_CASE("the unknown source may not be configured away") {
    std::string with_f = R"JS({
      "geometry": {"L": 1.0, "v0": 1.0, "v1": 2.0, "T": 1.0},
      "grid": {"Nx": 4, "Nv": 4, "Nt": 4},
      "mode": "inverse_source",
      "coefficients": {"g": "1", "f": "x"},
      "data": {"psi": "0"}
    })JS";
    CHECK_THROWS_AS(problem_from_json(with_f), ConfigError);
}

TEST_CASE("g lower bound is checked at the final time") {
    // g = exp(-t) at T=1 stays near 0.37, far above the default g0.
    ProblemSpec spec = problem_from_json(inverse_base());
    auto violations = validate_problem(spec);
    CHECK_FALSE(has_code(violations, "g_lower_bound"));
    for (const Violation& v : violations) CHECK_FALSE(v.hard);
}

TEST_CASE("psi must vanish on the inflow set") {
    ProblemSpec spec = problem_from_json(inverse_base("", "\"x\""));
    auto violations = validate_problem(spec);
    CHECK(has_code(violations, "psi_gamma_minus"));
}

TEST_CASE("forward compatibility of initial and inflow data") {
    std::string bad = R"JS({
      "geometry": {"L": 1.0, "v0": 1.0, "v1": 2.0, "T": 1.0},
      "grid": {"Nx": 4, "Nv": 4, "Nt": 4},
      "mode": "forward",
      "coefficients": {"phi": "1", "mu": "0"}
    })JS";
    auto violations = validate_problem(problem_from_json(bad));
    CHECK(has_code(violations, "compatibility"));

    std::string good = R"JS({
      "geometry": {"L": 1.0, "v0": 1.0, "v1": 2.0, "T": 1.0},
      "grid": {"Nx": 4, "Nv": 4, "Nt": 4},
      "mode": "forward",
      "coefficients": {"phi": "1", "mu": "1"}
    })JS";
    auto ok = validate_problem(problem_from_json(good));
    CHECK_FALSE(has_code(ok, "compatibility"));
}

TEST_CASE("inverse runs require the zero-data reduction") {
    ProblemSpec spec = problem_from_json(inverse_base(", \"mu\": \"1\", \"phi\": \"1\""));
    auto violations = validate_problem(spec);
    REQUIRE(has_code(violations, "inverse_nonzero_data"));
    for (const Violation& v : violations)
        if (v.code == "inverse_nonzero_data") CHECK(v.hard);
}

TEST_CASE("absorption mode needs a bounded-away-from-zero u0 at T") {
    std::string cfg = R"JS({
      "geometry": {"L": 1.0, "v0": 1.0, "v1": 2.0, "T": 1.0},
      "grid": {"Nx": 4, "Nv": 4, "Nt": 4},
      "mode": "inverse_absorption",
      "coefficients": {"g": "1", "u0": "x"},
      "data": {"psi": "0"}
    })JS";
    // u0 = x clears the default 1e-8 threshold; a raised threshold trips.
    ProblemSpec spec = problem_from_json(cfg);
    CHECK_FALSE(has_code(validate_problem(spec), "u0_lower_bound"));
    spec.solver.u_min = 0.5;
    CHECK(has_code(validate_problem(spec), "u0_lower_bound"));
}

TEST_CASE("strict mode escalates violations") {
    std::string strict_cfg = R"JS({
      "geometry": {"L": 1.0, "v0": 1.0, "v1": 2.0, "T": 1.0},
      "grid": {"Nx": 4, "Nv": 4, "Nt": 4},
      "mode": "forward",
      "coefficients": {"phi": "1", "mu": "0"},
      "strict": true
    })JS";
    CHECK_THROWS_AS(problem_from_json(strict_cfg), ConfigError);
}

TEST_CASE("scattering step restriction is reported") {
    std::string cfg = R"JS({
      "geometry": {"L": 1.0, "v0": 1.0, "v1": 2.0, "T": 1.0},
      "grid": {"Nx": 4, "Nv": 4, "Nt": 2},
      "mode": "forward",
      "coefficients": {"J": "2"}
    })JS";
    // dt * sup|J| * meas(V) = 0.5 * 2 * 2 = 2 >= 1.
    auto violations = validate_problem(problem_from_json(cfg));
    CHECK(has_code(violations, "scattering_step"));
}

TEST_CASE("config round trip: load, serialize, load") {
    std::string cfg = R"JS({
      "geometry": {"L": 2.0, "v0": 0.5, "v1": 1.5, "T": 1.0},
      "grid": {"Nx": 6, "Nv": 4, "Nt": 8},
      "mode": "inverse_source",
      "coefficients": {
        "Sigma": "0.3+0.1*x",
        "J": "0.05*(1+0.1*vp)",
        "Q": [{"q1": "0.1*(1+0.5*t)", "q2": "1+0.2*x"}],
        "alpha": {"family": "softabs", "c": 0.1},
        "g": "exp(-0.3*t)",
        "u0": "1+0.1*x"
      },
      "data": {"psi": "0"},
      "solver": {"picard_tol": 1e-12, "newton_tol": 1e-11}
    })JS";
    ProblemConfig first = parse_config(cfg);
    std::string serialized = serialize_config(first);
    ProblemConfig second = parse_config(serialized);
    CHECK(serialize_config(second) == serialized);

    ProblemSpec a = materialize(first);
    ProblemSpec b = materialize(second);
    REQUIRE(a.Sigma.has_value());
    REQUIRE(b.Sigma.has_value());
    CHECK(std::equal(a.Sigma->data().begin(), a.Sigma->data().end(), b.Sigma->data().begin()));
    REQUIRE(a.J.has_value());
    CHECK(std::equal(a.J->values.begin(), a.J->values.end(), b.J->values.begin()));
    CHECK(a.solver.picard_tol == b.solver.picard_tol);
    CHECK(a.alpha.C1 == b.alpha.C1);
}

TEST_CASE("kernel sampling binds the primed velocity") {
    std::string cfg = R"JS({
      "geometry": {"L": 1.0, "v0": 1.0, "v1": 2.0, "T": 1.0},
      "grid": {"Nx": 2, "Nv": 4, "Nt": 2},
      "mode": "forward",
      "coefficients": {"J": "x*vp"}
    })JS";
    ProblemSpec spec = problem_from_json(cfg);
    REQUIRE(spec.J.has_value());
    const PhaseGrid& g = spec.grid;
    for (int jp = 0; jp < g.Nv; ++jp)
        CHECK(spec.J->at(1, 1, 0, jp) ==
              doctest::Approx(g.x_centers[1] * g.v_nodes[jp]).epsilon(1e-14));
}

TEST_CASE("fields can come from dump files, resolved against the config dir") {
    auto dir = std::filesystem::temp_directory_path() / "kinv_problem_test";
    std::filesystem::create_directories(dir);
    PhaseGrid g = build_grid(Geometry{1.0, 1.0, 2.0, 1.0}, 4, 4, 4);
    GridFunction2 psi(g);
    for (int i = 0; i < g.Nx; ++i)
        for (int j = 0; j < g.Nv; ++j) psi.at(i, j) = 0.01 * i - 0.02 * j;
    dump_slice(dir / "psi.bin", psi);

    GridFunction3 u0(g, 0.25);
    dump_field(dir / "u0.bin", u0);

    std::string cfg = R"JS({
      "geometry": {"L": 1.0, "v0": 1.0, "v1": 2.0, "T": 1.0},
      "grid": {"Nx": 4, "Nv": 4, "Nt": 4},
      "mode": "inverse_source",
      "coefficients": {"g": "1", "u0": {"file": "u0.bin"}},
      "data": {"psi": {"file": "psi.bin"}}
    })JS";
    std::ofstream(dir / "problem.json") << cfg;
    ProblemSpec spec = load_problem(dir / "problem.json");
    REQUIRE(spec.psi.has_value());
    CHECK(std::equal(psi.data().begin(), psi.data().end(), spec.psi->data().begin()));
    REQUIRE(spec.u0.has_value());
    CHECK(spec.u0->at(2, 1, 1) == 0.25);
}

TEST_CASE("absorption prior seeds the control") {
    std::string cfg = R"JS({
      "geometry": {"L": 1.0, "v0": 1.0, "v1": 2.0, "T": 1.0},
      "grid": {"Nx": 4, "Nv": 4, "Nt": 4},
      "mode": "inverse_absorption",
      "coefficients": {"g": "exp(-t)", "sigma_g": "0.2", "u0": "1"},
      "data": {"psi": "0"}
    })JS";
    ProblemSpec spec = problem_from_json(cfg);
    // chi prior = sigma * g(T) = 0.2 e^{-1}
    for (double v : spec.chi_prior.data())
        CHECK(v == doctest::Approx(0.2 * std::exp(-1.0)).epsilon(1e-14));
}
