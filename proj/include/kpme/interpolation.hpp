#pragma once
//
// Equispaced Lagrange interpolation onto per-cell product grids and its
// transpose (anterpolation).
//

#include "kpme/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace kpme {

/// Weights of the degree-(order-1) Lagrange basis at y, for equispaced nodes
/// on [a, b] with endpoints included. Plain monomial product form; the usual
/// equispaced instability beyond order 10 or so is accepted.
inline Eigen::VectorXd lagrange_weights_1d(int order, double a, double b, double y) {
    if (order < 2) throw std::invalid_argument("lagrange_weights_1d: order must be >= 2");
    if (a == b) throw std::invalid_argument("lagrange_weights_1d: degenerate interval");
    const double t = (y - 0.5 * (b + a)) / (0.5 * (b - a));
    Eigen::VectorXd w(order);
    for (int k = 0; k < order; ++k) {
        const double tk = -1.0 + 2.0 * k / (order - 1);
        double prod = 1.0;
        for (int j = 0; j < order; ++j) {
            if (j == k) continue;
            const double tj = -1.0 + 2.0 * j / (order - 1);
            prod *= (t - tj) / (tk - tj);
        }
        w(k) = prod;
    }
    return w;
}

/// Outer product of the three axis weight vectors for a point inside cell
/// `cell` of the grid; lexicographic ordering, axis 0 slowest.
inline Eigen::VectorXd tensor_weights(const CellGrid& grid,
                                      const std::array<int, 3>& cell, int order,
                                      const Vec3& y) {
    std::array<Eigen::VectorXd, 3> w1;
    for (int a = 0; a < 3; ++a) {
        const double lo = grid.axis_lo(a, cell[a]);
        const double hi = grid.axis_hi(a, cell[a]);
        const double slack = 1e-12 * (hi - lo);
        if (y[a] < lo - slack || y[a] > hi + slack)
            throw std::invalid_argument("tensor_weights: point outside cell");
        w1[a] = lagrange_weights_1d(order, lo, hi, y[a]);
    }
    Eigen::VectorXd w(static_cast<long long>(order) * order * order);
    long long idx = 0;
    for (int i = 0; i < order; ++i)
        for (int j = 0; j < order; ++j)
            for (int k = 0; k < order; ++k)
                w(idx++) = w1[0](i) * w1[1](j) * w1[2](k);
    return w;
}

/// Particle-to-grid map S and its transpose over a cell partition. The
/// per-particle weight vectors are precomputed at construction.
class InterpOperator {
  public:
    InterpOperator(const CellGrid& grid, const Partition& part,
                   const PointCloud& cloud, int order)
        : grid_(grid), part_(part), order_(order) {
        weights_.resize(cloud.size());
        for (int c = 0; c < grid.cell_count(); ++c) {
            const std::array<int, 3> mi = grid.unflatten(c);
            for (int p : part.members[c])
                weights_[p] = tensor_weights(grid, mi, order, cloud.positions[p]);
        }
    }

    int order() const { return order_; }
    long long grid_size() const {
        return static_cast<long long>(order_) * order_ * order_;
    }
    const CellGrid& grid() const { return grid_; }
    const Partition& partition() const { return part_; }

    /// phi_c = sum over particles in cell c of w_p * q_p.
    std::vector<Eigen::VectorXd> interpolate(const ChargeVector& q) const {
        if (q.size() != weights_.size())
            throw std::invalid_argument("interpolate: charge count mismatch");
        std::vector<Eigen::VectorXd> out(grid_.cell_count(),
                                         Eigen::VectorXd::Zero(grid_size()));
        for (int c = 0; c < grid_.cell_count(); ++c)
            for (int p : part_.members[c]) out[c] += q.values[p] * weights_[p];
        return out;
    }

    /// z_p = <w_p, phi_cell(p)>; exact transpose of interpolate.
    std::vector<double> anterpolate(const std::vector<Eigen::VectorXd>& phi) const {
        if (static_cast<int>(phi.size()) != grid_.cell_count())
            throw std::invalid_argument("anterpolate: cell count mismatch");
        std::vector<double> out(weights_.size(), 0.0);
        for (int c = 0; c < grid_.cell_count(); ++c) {
            if (phi[c].size() != grid_size())
                throw std::invalid_argument("anterpolate: grid vector size mismatch");
            for (int p : part_.members[c]) out[p] = weights_[p].dot(phi[c]);
        }
        return out;
    }

    const Eigen::VectorXd& particle_weights(int p) const { return weights_[p]; }

  private:
    CellGrid grid_;
    Partition part_;
    int order_;
    std::vector<Eigen::VectorXd> weights_;
};

/// Measured sup error of interpolating the worst mode exp(2*pi*i*<m, .>),
/// m = (M,M,M), over one cell of radius r_c with an order-L product grid.
/// Decays at least as fast as (pi*M*r_c)^L in the order L.
inline double interp_error_probe(int modes, double r_c, int order,
                                 std::uint64_t seed = 1, int samples = 200) {
    const Box3 box({0.0, 0.0, 0.0}, r_c);
    const CellGrid grid = build_cell_grid(box, 1);
    const std::array<int, 3> cell{0, 0, 0};

    std::vector<Vec3> nodes;
    const std::vector<double> n0 = grid.axis_nodes(0, 0, order);
    for (double x : n0)
        for (double y : n0)
            for (double z : n0) nodes.push_back({x, y, z});

    auto phase = [&](const Vec3& p) {
        return 2.0 * M_PI * modes * (p[0] + p[1] + p[2]);
    };
    Eigen::VectorXd fc(nodes.size()), fs(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        fc(i) = std::cos(phase(nodes[i]));
        fs(i) = std::sin(phase(nodes[i]));
    }

    detail::SeededUniform rng(seed);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        Vec3 p;
        for (int a = 0; a < 3; ++a) p[a] = r_c * (2.0 * rng.next01() - 1.0);
        const Eigen::VectorXd w = tensor_weights(grid, cell, order, p);
        const double ec = std::abs(w.dot(fc) - std::cos(phase(p)));
        const double es = std::abs(w.dot(fs) - std::sin(phase(p)));
        worst = std::max({worst, ec, es});
    }
    return worst;
}

}  // namespace kpme
