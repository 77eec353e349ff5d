#pragma once
//
// Periodic box, cell-grid decomposition and particle sorting.
//
// All Fourier phases in this library use exp(2*pi*i*<m, x - y>) with the
// raw particle coordinates, i.e. the mode lattice has unit period and the
// box-center shift cancels between source and target. The convergence
// ratio of the per-cell interpolation is therefore nu = pi*M*r_c with the
// physical cell radius r_c.
//

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kpme {

using Vec3 = std::array<double, 3>;

/// Cubic box of half edge length `radius` centered at `center`.
struct Box3 {
    Vec3 center{0.0, 0.0, 0.0};
    double radius = 1.0;

    Box3() = default;
    Box3(const Vec3& c, double r) : center(c), radius(r) {
        if (!(r > 0.0))
            throw std::invalid_argument("Box3: radius must be positive");
    }

    bool contains(const Vec3& p) const {
        for (int a = 0; a < 3; ++a)
            if (std::abs(p[a] - center[a]) > radius) return false;
        return true;
    }
};

struct PointCloud {
    std::vector<Vec3> positions;

    std::size_t size() const { return positions.size(); }
};

struct ChargeVector {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

/// Shift-only normalization: the phase convention is translation invariant,
/// so only the box-center offset is removed.
inline Vec3 normalize_position(const Box3& box, const Vec3& x) {
    return {x[0] - box.center[0], x[1] - box.center[1], x[2] - box.center[2]};
}

/// Cartesian decomposition of the box into counts[0]*counts[1]*counts[2]
/// cuboid cells, each carrying an equispaced product interpolation grid.
struct CellGrid {
    Box3 box;
    std::array<int, 3> counts{1, 1, 1};

    int cell_count() const { return counts[0] * counts[1] * counts[2]; }

    int flatten(const std::array<int, 3>& c) const {
        return (c[0] * counts[1] + c[1]) * counts[2] + c[2];
    }

    std::array<int, 3> unflatten(int idx) const {
        std::array<int, 3> c;
        c[2] = idx % counts[2];
        idx /= counts[2];
        c[1] = idx % counts[1];
        c[0] = idx / counts[1];
        return c;
    }

    double cell_radius(int axis) const { return box.radius / counts[axis]; }

    double max_cell_radius() const {
        double r = 0.0;
        for (int a = 0; a < 3; ++a) r = std::max(r, cell_radius(a));
        return r;
    }

    double axis_lo(int axis, int idx) const {
        return box.center[axis] - box.radius +
               2.0 * box.radius * idx / counts[axis];
    }

    double axis_hi(int axis, int idx) const {
        return box.center[axis] - box.radius +
               2.0 * box.radius * (idx + 1) / counts[axis];
    }

    /// Equispaced interpolation nodes on cell interval `idx` of `axis`,
    /// endpoints included.
    std::vector<double> axis_nodes(int axis, int idx, int order) const {
        if (order < 2)
            throw std::invalid_argument("CellGrid: interpolation order must be >= 2");
        const double a = axis_lo(axis, idx), b = axis_hi(axis, idx);
        std::vector<double> nodes(order);
        for (int k = 0; k < order; ++k)
            nodes[k] = a + (b - a) * k / (order - 1);
        return nodes;
    }
};

inline CellGrid build_cell_grid(const Box3& box, const std::array<int, 3>& counts) {
    for (int a = 0; a < 3; ++a)
        if (counts[a] < 1)
            throw std::invalid_argument("build_cell_grid: cell counts must be >= 1");
    return CellGrid{box, counts};
}

inline CellGrid build_cell_grid(const Box3& box, int cells_per_axis) {
    return build_cell_grid(box, {cells_per_axis, cells_per_axis, cells_per_axis});
}

/// Per-cell particle index lists, ascending within each cell.
struct Partition {
    std::vector<std::vector<int>> members;
};

/// Sorts particles into cells. A particle on a shared face goes to the cell
/// with the smaller multi-index.
inline Partition assign_particles(const CellGrid& grid, const PointCloud& cloud) {
    Partition part;
    part.members.assign(grid.cell_count(), {});
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.positions[i];
        if (!grid.box.contains(p))
            throw std::invalid_argument("assign_particles: particle " +
                                        std::to_string(i) + " outside the box");
        std::array<int, 3> c;
        for (int a = 0; a < 3; ++a) {
            const int K = grid.counts[a];
            const double t =
                (p[a] - (grid.box.center[a] - grid.box.radius)) * K /
                (2.0 * grid.box.radius);
            int idx = static_cast<int>(std::floor(t));
            if (t == static_cast<double>(idx) && idx > 0) --idx;
            if (idx < 0) idx = 0;
            if (idx > K - 1) idx = K - 1;
            c[a] = idx;
        }
        part.members[grid.flatten(c)].push_back(static_cast<int>(i));
    }
    return part;
}

struct ConvergenceCheck {
    double nu = 0.0;
    bool ok = false;
};

/// nu = pi * M * r_c with the largest per-axis cell radius; the KPME
/// interpolation converges geometrically iff nu < 1.
inline ConvergenceCheck check_convergence_ratio(const CellGrid& grid, int modes) {
    if (modes < 1)
        throw std::invalid_argument("check_convergence_ratio: modes must be >= 1");
    ConvergenceCheck c;
    c.nu = M_PI * modes * grid.max_cell_radius();
    c.ok = c.nu < 1.0;
    return c;
}

// ---------------------------------------------------------------------------
// Point-cloud text format: first line N, then N lines "x y z q".
// ---------------------------------------------------------------------------

struct CloudData {
    PointCloud cloud;
    ChargeVector charges;
};

inline CloudData read_cloud(std::istream& in) {
    CloudData data;
    std::size_t n = 0;
    if (!(in >> n)) throw std::runtime_error("read_cloud: missing particle count");
    data.cloud.positions.reserve(n);
    data.charges.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 p;
        double q;
        if (!(in >> p[0] >> p[1] >> p[2] >> q))
            throw std::runtime_error("read_cloud: malformed line " +
                                     std::to_string(i + 2));
        data.cloud.positions.push_back(p);
        data.charges.values.push_back(q);
    }
    return data;
}

inline CloudData read_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_cloud: cannot open " + path);
    return read_cloud(in);
}

inline void write_cloud(std::ostream& out, const CloudData& data) {
    out.precision(17);
    out << data.cloud.size() << '\n';
    for (std::size_t i = 0; i < data.cloud.size(); ++i) {
        const Vec3& p = data.cloud.positions[i];
        out << p[0] << ' ' << p[1] << ' ' << p[2] << ' '
            << data.charges.values[i] << '\n';
    }
}

namespace detail {

/// splitmix64; used instead of std::uniform_real_distribution so that
/// sampled clouds are identical across standard library implementations.
class SeededUniform {
  public:
    explicit SeededUniform(std::uint64_t seed) : state_(seed) {}

    double next01() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return static_cast<double>(z >> 11) * 0x1.0p-53;
    }

  private:
    std::uint64_t state_;
};

}  // namespace detail

/// Uniform positions in the box, charges uniform in [-1, 1].
inline CloudData sample_cloud(const Box3& box, std::size_t n, std::uint64_t seed) {
    CloudData data;
    detail::SeededUniform rng(seed);
    data.cloud.positions.reserve(n);
    data.charges.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 p;
        for (int a = 0; a < 3; ++a)
            p[a] = box.center[a] + box.radius * (2.0 * rng.next01() - 1.0);
        data.cloud.positions.push_back(p);
        data.charges.values.push_back(2.0 * rng.next01() - 1.0);
    }
    return data;
}

}  // namespace kpme
