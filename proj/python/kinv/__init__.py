"""Forward and inverse solvers for the modified kinetic transport equation.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface.
"""

from ._kinv import (  # noqa: F401
    AlphaSpec,
    Expression,
    Geometry,
    KinvConfigError,
    KinvIoError,
    KinvSolverError,
    NewtonReport,
    NormReport,
    PhaseGrid,
    PicardReport,
    ProblemSpec,
    RunManifest,
    Violation,
    alpha_eval,
    apply_S,
    build_grid,
    characteristic_foot,
    convergence_study,
    forward_map,
    inflow_set,
    load_problem,
    norms,
    oracle_inverse,
    problem_from_json,
    run_forward,
    run_inverse,
    run_verify,
    sample_xt,
    sample_xv,
    set_max_threads,
    solve_forward,
    solve_inverse,
    validate_problem,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
