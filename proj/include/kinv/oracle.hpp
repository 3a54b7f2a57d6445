#pragma once

#include "kinv/inverse.hpp"

namespace kinv {

/// Dense representation of the affine control-to-data map (zero alpha
/// family): flatten(M(chi)) = matrix * flatten(chi) + flatten(offset).
/// Assembled column by column from full forward solves, independently of
/// the Newton machinery, so the two inversion paths can be compared.
struct DenseSystem {
    int n = 0;
    std::vector<double> matrix; // row-major n x n
    GridFunction2 offset;       // M(0)
    double condition = 0.0;

    double at(int row, int col) const { return matrix[static_cast<size_t>(row) * n + col]; }
};

/// Column j := M(e_j) - M(0), offset := M(0). Rejects nonlinear alpha.
DenseSystem assemble_dense(const ProblemSpec& spec);

/// Direct factorization solve of matrix * chi = psi - offset; returns
/// chi / g(.,.,T). Throws when the condition estimate exceeds 1e12.
GridFunction2 oracle_inverse(const ProblemSpec& spec, const DenseSystem& dense,
                             const GridFunction2& psi);
GridFunction2 oracle_inverse(const ProblemSpec& spec, const GridFunction2& psi);

/// A manufactured-solution case: the config carries the forcing that
/// makes `exact_u` satisfy the discrete-limit equation.
struct MmsCase {
    int id = 0;
    std::string description;
    ProblemConfig config;
    Expression exact_u;
    Expression forcing; // the exact control driving the case
};

/// Catalog:
///   1 pure advection, u* = t sin(pi x / L)
///   2 adds a constant scattering kernel (velocity integral analytic)
///   3 adds the softabs production term; its space-time integral is
///     evaluated by high-resolution Simpson quadrature
///   4 constant steady state, exactly representable
MmsCase mms_case(int id);

/// Quadrature scalar used by case 3 at a given panel resolution
/// (exposed so tests can check the refinement stability of the oracle).
double mms3_production_scalar(int panels);

struct ConvergenceRow {
    double h = 0.0;
    double error = 0.0;
    double order = 0.0;
    bool order_na = true; // first row, or errors at machine precision
};

/// Run the case at refinements joint (Nx, Nt) doublings from the base
/// resolution in its config; observed order = log2(e_k / e_{k+1}).
std::vector<ConvergenceRow> convergence_study(int case_id, int refinements);

/// Deterministic family of smooth overdetermination slices for the
/// stability study: member 0 is identically zero, the rest combine the
/// first three wall-vanishing modes with seeded coefficients. The
/// generator maps raw engine words itself, so the family is identical on
/// every platform and thread count.
std::vector<GridFunction2> make_stability_family(const PhaseGrid& grid, int count, uint32_t seed);

} // namespace kinv
