#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "kinv/geometry.hpp"

namespace kinv {

/// Real field on G x V x [0,T], stored [time][space][velocity].
class GridFunction3 {
public:
    GridFunction3() = default;
    explicit GridFunction3(const PhaseGrid& grid, double fill = 0.0)
        : grid_(grid), values_(static_cast<size_t>(grid.size3()), fill) {}
    GridFunction3(const PhaseGrid& grid, std::vector<double> values);

    const PhaseGrid& grid() const { return grid_; }
    double at(int k, int i, int j) const { return values_[grid_.idx3(k, i, j)]; }
    double& at(int k, int i, int j) { return values_[grid_.idx3(k, i, j)]; }
    std::span<const double> data() const { return values_; }
    std::span<double> data() { return values_; }
    bool empty() const { return values_.empty(); }

    /// Throws ConfigError on any NaN/inf entry.
    void ensure_finite(const char* what = "field") const;

private:
    PhaseGrid grid_;
    std::vector<double> values_;
};

/// Real field on G x V (a slice such as psi, f, sigma, chi), stored
/// [space][velocity]. Flattened index i*Nv + j is the column order used
/// by the dense solvers.
class GridFunction2 {
public:
    GridFunction2() = default;
    explicit GridFunction2(const PhaseGrid& grid, double fill = 0.0)
        : grid_(grid), values_(static_cast<size_t>(grid.size2()), fill) {}
    GridFunction2(const PhaseGrid& grid, std::vector<double> values);

    const PhaseGrid& grid() const { return grid_; }
    double at(int i, int j) const { return values_[grid_.idx2(i, j)]; }
    double& at(int i, int j) { return values_[grid_.idx2(i, j)]; }
    std::span<const double> data() const { return values_; }
    std::span<double> data() { return values_; }
    bool empty() const { return values_.empty(); }

    void ensure_finite(const char* what = "slice") const;

private:
    PhaseGrid grid_;
    std::vector<double> values_;
};

/// Discrete norms of a space-time field. h_inf and w_inf_t combine the
/// other components by summation.
struct NormReport {
    double sup = 0.0;
    double l2 = 0.0;
    double sup_dt = 0.0;
    double sup_stream = 0.0;
    double trace_sup = 0.0;
    double h_inf = 0.0;   // sup + sup_dt + sup_stream + trace_sup
    double w_inf_t = 0.0; // sup + sup_dt
};

double sup_norm(const GridFunction3& u);
double sup_norm(const GridFunction2& u);
double sup_diff(const GridFunction3& a, const GridFunction3& b);
double sup_diff(const GridFunction2& a, const GridFunction2& b);

/// Quadrature-weighted L2 norms (dx * velocity weight * trapezoidal dt).
/// Diagnostics only; the solver contracts are stated in sup norms.
double l2_norm(const GridFunction3& u);
double l2_norm(const GridFunction2& u);

/// Forward differences in time, backward at the last level. Exact on
/// fields affine in t.
GridFunction3 time_derivative(const GridFunction3& u);

/// v times the upwind one-sided spatial difference (direction from the
/// sign of v); boundary cells fall back to the interior-sided difference.
/// Matches the solver stencil, and is exact on fields affine in x.
GridFunction3 streaming_derivative(const GridFunction3& u);
GridFunction2 streaming_derivative(const GridFunction2& u);

/// Inflow-boundary trace: per time level and ordinate, the value in the
/// boundary-adjacent cell on the side returned by inflow_set.
struct InflowTrace {
    int levels = 0;
    int nv = 0;
    std::vector<double> values; // [level][ordinate]
    double at(int k, int j) const { return values[static_cast<size_t>(k) * nv + j]; }
};
InflowTrace trace_inflow(const GridFunction3& u);
std::vector<double> trace_inflow(const GridFunction2& u); // one value per ordinate

NormReport norms(const GridFunction3& u);

/// sup + streaming sup + trace sup of a slice, the norm used for the
/// overdetermination data psi.
double h_inf_slice(const GridFunction2& u);

GridFunction2 final_slice(const GridFunction3& u);

// Elementwise helpers (value semantics).
GridFunction3 lin_comb(const GridFunction3& a, double ca, const GridFunction3& b, double cb);
GridFunction2 lin_comb(const GridFunction2& a, double ca, const GridFunction2& b, double cb);
GridFunction3 hadamard(const GridFunction3& a, const GridFunction3& b);
GridFunction3 scaled(const GridFunction3& a, double c);
GridFunction2 scaled(const GridFunction2& a, double c);

// --- binary field dumps -------------------------------------------------
//
// Format: one ASCII header line "TIVP1 <dim0> <dim1> ..." followed by the
// payload as little-endian IEEE-754 doubles in row-major order. Fields on
// G x V x [0,T] use dims (Nt+1, Nx, Nv); slices use (Nx, Nv); matrices use
// (rows, cols).

void dump_field(const std::filesystem::path& path, const GridFunction3& u);
void dump_slice(const std::filesystem::path& path, const GridFunction2& u);
void dump_matrix(const std::filesystem::path& path, int rows, int cols,
                 std::span<const double> data);

GridFunction3 load_field(const std::filesystem::path& path, const PhaseGrid& grid);
GridFunction2 load_slice(const std::filesystem::path& path, const PhaseGrid& grid);

/// CSV rows (x, v, value) with a header line.
void write_slice_csv(const std::filesystem::path& path, const GridFunction2& u);

} // namespace kinv
