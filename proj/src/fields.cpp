#include "kinv/fields.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace kinv {

namespace {

void check_finite(std::span<const double> values, const char* what) {
    for (double v : values)
        if (!std::isfinite(v)) throw ConfigError(std::string(what) + " contains a non-finite entry");
}

double sup_of(std::span<const double> values) {
    double m = 0.0;
    for (double v : values) {
        double a = std::fabs(v);
        if (a > m) m = a;
    }
    return m;
}

} // namespace

GridFunction3::GridFunction3(const PhaseGrid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != static_cast<size_t>(grid.size3()))
        throw ConfigError("field shape mismatch: expected (Nt+1) x Nx x Nv values");
    ensure_finite();
}

void GridFunction3::ensure_finite(const char* what) const { check_finite(values_, what); }

GridFunction2::GridFunction2(const PhaseGrid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != static_cast<size_t>(grid.size2()))
        throw ConfigError("slice shape mismatch: expected Nx x Nv values");
    ensure_finite();
}

void GridFunction2::ensure_finite(const char* what) const { check_finite(values_, what); }

double sup_norm(const GridFunction3& u) { return sup_of(u.data()); }
double sup_norm(const GridFunction2& u) { return sup_of(u.data()); }

double sup_diff(const GridFunction3& a, const GridFunction3& b) {
    double m = 0.0;
    auto da = a.data(), db = b.data();
    for (size_t n = 0; n < da.size(); ++n) {
        double d = std::fabs(da[n] - db[n]);
        if (d > m) m = d;
    }
    return m;
}

double sup_diff(const GridFunction2& a, const GridFunction2& b) {
    double m = 0.0;
    auto da = a.data(), db = b.data();
    for (size_t n = 0; n < da.size(); ++n) {
        double d = std::fabs(da[n] - db[n]);
        if (d > m) m = d;
    }
    return m;
}

double l2_norm(const GridFunction3& u) {
    const PhaseGrid& g = u.grid();
    double acc = 0.0;
    for (int k = 0; k <= g.Nt; ++k) {
        double wt = (k == 0 || k == g.Nt) ? 0.5 * g.dt : g.dt;
        for (int i = 0; i < g.Nx; ++i)
            for (int j = 0; j < g.Nv; ++j) {
                double v = u.at(k, i, j);
                acc += wt * g.dx * g.v_weights[j] * v * v;
            }
    }
    return std::sqrt(acc);
}

double l2_norm(const GridFunction2& u) {
    const PhaseGrid& g = u.grid();
    double acc = 0.0;
    for (int i = 0; i < g.Nx; ++i)
        for (int j = 0; j < g.Nv; ++j) {
            double v = u.at(i, j);
            acc += g.dx * g.v_weights[j] * v * v;
        }
    return std::sqrt(acc);
}

GridFunction3 time_derivative(const GridFunction3& u) {
    const PhaseGrid& g = u.grid();
    GridFunction3 out(g);
    for (int k = 0; k <= g.Nt; ++k) {
        int ka = (k < g.Nt) ? k : k - 1; // backward difference at the last level
        int kb = ka + 1;
        for (int i = 0; i < g.Nx; ++i)
            for (int j = 0; j < g.Nv; ++j)
                out.at(k, i, j) = (u.at(kb, i, j) - u.at(ka, i, j)) / g.dt;
    }
    return out;
}

namespace {

// Upwind one-sided difference of one spatial profile at cell i; boundary
// cells take the interior-sided difference.
inline double upwind_diff(const GridFunction3& u, int k, int i, int j, double v, double dx,
                          int nx) {
    if (v > 0.0) {
        int ia = (i > 0) ? i - 1 : 0;
        int ib = (i > 0) ? i : 1;
        return (u.at(k, ib, j) - u.at(k, ia, j)) / dx;
    }
    int ia = (i < nx - 1) ? i : nx - 2;
    int ib = (i < nx - 1) ? i + 1 : nx - 1;
    return (u.at(k, ib, j) - u.at(k, ia, j)) / dx;
}

inline double upwind_diff2(const GridFunction2& u, int i, int j, double v, double dx, int nx) {
    if (v > 0.0) {
        int ia = (i > 0) ? i - 1 : 0;
        int ib = (i > 0) ? i : 1;
        return (u.at(ib, j) - u.at(ia, j)) / dx;
    }
    int ia = (i < nx - 1) ? i : nx - 2;
    int ib = (i < nx - 1) ? i + 1 : nx - 1;
    return (u.at(ib, j) - u.at(ia, j)) / dx;
}

} // namespace

GridFunction3 streaming_derivative(const GridFunction3& u) {
    const PhaseGrid& g = u.grid();
    GridFunction3 out(g);
    for (int k = 0; k <= g.Nt; ++k)
        for (int i = 0; i < g.Nx; ++i)
            for (int j = 0; j < g.Nv; ++j)
                out.at(k, i, j) = g.v_nodes[j] * upwind_diff(u, k, i, j, g.v_nodes[j], g.dx, g.Nx);
    return out;
}

GridFunction2 streaming_derivative(const GridFunction2& u) {
    const PhaseGrid& g = u.grid();
    GridFunction2 out(g);
    for (int i = 0; i < g.Nx; ++i)
        for (int j = 0; j < g.Nv; ++j)
            out.at(i, j) = g.v_nodes[j] * upwind_diff2(u, i, j, g.v_nodes[j], g.dx, g.Nx);
    return out;
}

InflowTrace trace_inflow(const GridFunction3& u) {
    const PhaseGrid& g = u.grid();
    InflowTrace tr;
    tr.levels = g.Nt + 1;
    tr.nv = g.Nv;
    tr.values.resize(static_cast<size_t>(tr.levels) * tr.nv);
    for (int k = 0; k <= g.Nt; ++k)
        for (int j = 0; j < g.Nv; ++j) {
            int cell = g.v_nodes[j] > 0.0 ? 0 : g.Nx - 1;
            tr.values[static_cast<size_t>(k) * g.Nv + j] = u.at(k, cell, j);
        }
    return tr;
}

std::vector<double> trace_inflow(const GridFunction2& u) {
    const PhaseGrid& g = u.grid();
    std::vector<double> tr(static_cast<size_t>(g.Nv));
    for (int j = 0; j < g.Nv; ++j) {
        int cell = g.v_nodes[j] > 0.0 ? 0 : g.Nx - 1;
        tr[j] = u.at(cell, j);
    }
    return tr;
}

NormReport norms(const GridFunction3& u) {
    NormReport r;
    r.sup = sup_norm(u);
    r.l2 = l2_norm(u);
    r.sup_dt = sup_norm(time_derivative(u));
    r.sup_stream = sup_norm(streaming_derivative(u));
    r.trace_sup = sup_of(trace_inflow(u).values);
    r.h_inf = r.sup + r.sup_dt + r.sup_stream + r.trace_sup;
    r.w_inf_t = r.sup + r.sup_dt;
    return r;
}

double h_inf_slice(const GridFunction2& u) {
    double trace = sup_of(trace_inflow(u));
    return sup_norm(u) + sup_norm(streaming_derivative(u)) + trace;
}

GridFunction2 final_slice(const GridFunction3& u) {
    const PhaseGrid& g = u.grid();
    GridFunction2 out(g);
    for (int i = 0; i < g.Nx; ++i)
        for (int j = 0; j < g.Nv; ++j) out.at(i, j) = u.at(g.Nt, i, j);
    return out;
}

GridFunction3 lin_comb(const GridFunction3& a, double ca, const GridFunction3& b, double cb) {
    GridFunction3 out(a.grid());
    auto da = a.data(), db = b.data();
    auto dst = out.data();
    for (size_t n = 0; n < dst.size(); ++n) dst[n] = ca * da[n] + cb * db[n];
    return out;
}

GridFunction2 lin_comb(const GridFunction2& a, double ca, const GridFunction2& b, double cb) {
    GridFunction2 out(a.grid());
    auto da = a.data(), db = b.data();
    auto dst = out.data();
    for (size_t n = 0; n < dst.size(); ++n) dst[n] = ca * da[n] + cb * db[n];
    return out;
}

GridFunction3 hadamard(const GridFunction3& a, const GridFunction3& b) {
    GridFunction3 out(a.grid());
    auto da = a.data(), db = b.data();
    auto dst = out.data();
    for (size_t n = 0; n < dst.size(); ++n) dst[n] = da[n] * db[n];
    return out;
}

GridFunction3 scaled(const GridFunction3& a, double c) {
    GridFunction3 out(a.grid());
    auto da = a.data();
    auto dst = out.data();
    for (size_t n = 0; n < dst.size(); ++n) dst[n] = c * da[n];
    return out;
}

GridFunction2 scaled(const GridFunction2& a, double c) {
    GridFunction2 out(a.grid());
    auto da = a.data();
    auto dst = out.data();
    for (size_t n = 0; n < dst.size(); ++n) dst[n] = c * da[n];
    return out;
}

// --- I/O -----------------------------------------------------------------

namespace {

void write_le_doubles(std::ofstream& out, std::span<const double> data) {
    for (double v : data) {
        uint64_t bits = std::bit_cast<uint64_t>(v);
        unsigned char bytes[8];
        for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }
}

std::vector<double> read_le_doubles(std::ifstream& in, size_t count, const std::string& path) {
    std::vector<double> data(count);
    std::vector<unsigned char> bytes(count * 8);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<size_t>(in.gcount()) != bytes.size())
        throw IoError("truncated field dump: " + path);
    for (size_t n = 0; n < count; ++n) {
        uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<uint64_t>(bytes[n * 8 + b]) << (8 * b);
        data[n] = std::bit_cast<double>(bits);
    }
    return data;
}

void dump_with_dims(const std::filesystem::path& path, std::span<const int> dims,
                    std::span<const double> data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "TIVP1";
    for (int d : dims) out << ' ' << d;
    out << '\n';
    write_le_doubles(out, data);
    if (!out) throw IoError("write failed: " + path.string());
}

std::pair<std::vector<int>, std::vector<double>> load_any(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string magic;
    hs >> magic;
    if (magic != "TIVP1") throw IoError("bad field dump header in " + path.string());
    std::vector<int> dims;
    int d;
    while (hs >> d) {
        if (d <= 0) throw IoError("bad dimension in field dump " + path.string());
        dims.push_back(d);
    }
    if (dims.empty() || dims.size() > 3)
        throw IoError("unsupported dump rank in " + path.string());
    size_t count = 1;
    for (int dim : dims) count *= static_cast<size_t>(dim);
    return {dims, read_le_doubles(in, count, path.string())};
}

} // namespace

void dump_field(const std::filesystem::path& path, const GridFunction3& u) {
    const PhaseGrid& g = u.grid();
    int dims[3] = {g.Nt + 1, g.Nx, g.Nv};
    dump_with_dims(path, dims, u.data());
}

void dump_slice(const std::filesystem::path& path, const GridFunction2& u) {
    const PhaseGrid& g = u.grid();
    int dims[2] = {g.Nx, g.Nv};
    dump_with_dims(path, dims, u.data());
}

void dump_matrix(const std::filesystem::path& path, int rows, int cols,
                 std::span<const double> data) {
    if (data.size() != static_cast<size_t>(rows) * cols)
        throw IoError("matrix dump shape mismatch");
    int dims[2] = {rows, cols};
    dump_with_dims(path, dims, data);
}

GridFunction3 load_field(const std::filesystem::path& path, const PhaseGrid& grid) {
    auto [dims, data] = load_any(path);
    if (dims.size() != 3 || dims[0] != grid.Nt + 1 || dims[1] != grid.Nx || dims[2] != grid.Nv)
        throw IoError("field dump " + path.string() + " does not match the grid (Nt+1, Nx, Nv)");
    return GridFunction3(grid, std::move(data));
}

GridFunction2 load_slice(const std::filesystem::path& path, const PhaseGrid& grid) {
    auto [dims, data] = load_any(path);
    if (dims.size() == 3 && dims[0] == 1) dims.erase(dims.begin());
    if (dims.size() != 2 || dims[0] != grid.Nx || dims[1] != grid.Nv)
        throw IoError("slice dump " + path.string() + " does not match the grid (Nx, Nv)");
    return GridFunction2(grid, std::move(data));
}

void write_slice_csv(const std::filesystem::path& path, const GridFunction2& u) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (f == nullptr) throw IoError("cannot open for writing: " + path.string());
    const PhaseGrid& g = u.grid();
    std::fprintf(f, "x,v,value\n");
    for (int i = 0; i < g.Nx; ++i)
        for (int j = 0; j < g.Nv; ++j)
            std::fprintf(f, "%.17g,%.17g,%.17g\n", g.x_centers[i], g.v_nodes[j], u.at(i, j));
    std::fclose(f);
}

} // namespace kinv
