#include "kinv/geometry.hpp"

#include <cmath>

namespace kinv {

void Geometry::validate() const {
    if (!(v0 > 0.0)) throw ConfigError("v0 must be positive");
    if (!(v1 >= v0)) throw ConfigError("v1 must satisfy v1 >= v0");
    if (!(L > 0.0)) throw ConfigError("L must be positive");
    if (!(T > 0.0)) throw ConfigError("T must be positive");
    if (!std::isfinite(L) || !std::isfinite(v0) || !std::isfinite(v1) || !std::isfinite(T))
        throw ConfigError("geometry parameters must be finite");
}

double PhaseGrid::measure_v() const {
    double s = 0.0;
    for (double w : v_weights) s += w;
    return s;
}

PhaseGrid build_grid(const Geometry& geom, int Nx, int Nv, int Nt) {
    geom.validate();
    if (Nx < 2) throw ConfigError("Nx must be >= 2");
    if (Nv < 2 || Nv % 2 != 0) throw ConfigError("Nv must be even and >= 2");
    if (Nt < 1) throw ConfigError("Nt must be >= 1");
    if (!(geom.v1 > geom.v0))
        throw ConfigError("velocity band must have positive width (v1 > v0)");

    PhaseGrid g;
    g.geom = geom;
    g.Nx = Nx;
    g.Nv = Nv;
    g.Nt = Nt;
    g.dx = geom.L / Nx;
    g.dt = geom.T / Nt;
    g.x_centers.resize(Nx);
    for (int i = 0; i < Nx; ++i) g.x_centers[i] = (i + 0.5) * g.dx;

    int per_band = Nv / 2;
    double band = (geom.v1 - geom.v0) / per_band;
    g.v_nodes.resize(Nv);
    g.v_weights.assign(Nv, band);
    // Negative band [-v1, -v0] ascending, then positive band [v0, v1].
    for (int j = 0; j < per_band; ++j) g.v_nodes[j] = -geom.v1 + (j + 0.5) * band;
    for (int j = 0; j < per_band; ++j) g.v_nodes[per_band + j] = geom.v0 + (j + 0.5) * band;

    g.flight_flag = geom.flight_time_ok();
    if (!g.flight_flag)
        log_info("flight-time condition L/v0 < T does not hold (L/v0 = " +
                 std::to_string(geom.L / geom.v0) + ", T = " + std::to_string(geom.T) + ")");
    return g;
}

std::vector<InflowFace> inflow_set(const PhaseGrid& grid) {
    std::vector<InflowFace> faces;
    faces.reserve(static_cast<size_t>(grid.Nv));
    for (int j = 0; j < grid.Nv; ++j) {
        // At x = 0 the outward normal is -1, so (v, n) < 0 iff v > 0.
        BoundarySide side = grid.v_nodes[j] > 0.0 ? BoundarySide::left : BoundarySide::right;
        faces.push_back({side, j});
    }
    return faces;
}

FootResult characteristic_foot(const Geometry& geom, double x, double v, double dt) {
    double foot = x - v * dt;
    bool left = foot < 0.0 || foot > geom.L;
    // Landing exactly on the upstream face after a positive flight time
    // counts as having entered through it.
    if (dt > 0.0) {
        if (v > 0.0 && foot <= 0.0) left = true;
        if (v < 0.0 && foot >= geom.L) left = true;
    }
    return {foot, left};
}

} // namespace kinv
