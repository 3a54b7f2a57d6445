#pragma once

#include <vector>

#include "kinv/common.hpp"

namespace kinv {

/// Slab phase-space geometry: spatial domain (0, L), speeds in the two
/// bands [-v1, -v0] and [v0, v1], time horizon (0, T).
struct Geometry {
    double L = 1.0;
    double v0 = 1.0;
    double v1 = 2.0;
    double T = 1.0;

    /// Throws ConfigError unless 0 < v0 <= v1, L > 0, T > 0.
    void validate() const;

    /// Slab transit time L/v0 below the horizon T. The smallness constant
    /// the theory wants here is not quantified, so downstream code only
    /// warns when this is false.
    bool flight_time_ok() const { return L / v0 < T; }
};

enum class BoundarySide { left, right };

/// One inflow face of the phase boundary: the ordinate enters the slab
/// through `side`.
struct InflowFace {
    BoundarySide side;
    int ordinate;
};

/// Discretization of G x V x [0,T]: Nx cell centers, Nv velocity
/// ordinates (midpoint rule per band, negative band first, ascending),
/// Nt uniform time steps. Immutable after build_grid.
struct PhaseGrid {
    Geometry geom;
    int Nx = 0;
    int Nv = 0;
    int Nt = 0;
    double dx = 0.0;
    double dt = 0.0;
    std::vector<double> x_centers; // size Nx
    std::vector<double> v_nodes;   // size Nv, strictly increasing, no zeros
    std::vector<double> v_weights; // size Nv, positive, sums to 2(v1-v0)
    bool flight_flag = false;      // L/v0 < T

    double measure_v() const; // sum of v_weights
    int size2() const { return Nx * Nv; }
    int size3() const { return (Nt + 1) * Nx * Nv; }
    int idx2(int i, int j) const { return i * Nv + j; }
    int idx3(int k, int i, int j) const { return (k * Nx + i) * Nv + j; }
    bool same_shape(const PhaseGrid& o) const {
        return Nx == o.Nx && Nv == o.Nv && Nt == o.Nt;
    }
};

/// Build the grid. Requires Nx >= 2, Nv >= 2 and even, Nt >= 1, and a
/// velocity band of positive width so the midpoint weights are positive.
PhaseGrid build_grid(const Geometry& geom, int Nx, int Nv, int Nt);

/// Inflow faces: ordinates moving right enter at x = 0, ordinates moving
/// left enter at x = L. Exactly one entry per ordinate.
std::vector<InflowFace> inflow_set(const PhaseGrid& grid);

struct FootResult {
    double x;
    bool left_domain;
};

/// Trace the characteristic through (x, v) backwards over dt. The flag is
/// set when the foot lies outside the slab, i.e. the characteristic
/// entered through the inflow boundary within dt.
FootResult characteristic_foot(const Geometry& geom, double x, double v, double dt);

} // namespace kinv
