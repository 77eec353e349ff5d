#pragma once
//
// Symmetry-compressed real Fourier factors. The sign-flip group on modes
// lets the full sum over m in [-M,M] collapse to m in [0,M] with real
// cosine/sine blocks:
//
//   sum over sign flips of exp(2*pi*i*<g*m, x-y>)
//     = prod_j 2^{delta(m_j)} cos(2*pi*m_j*(x_j-y_j)),  delta(m)=1 iff m!=0.
//

#include "kpme/alpha.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace kpme {

/// 2 x |points| block with rows sqrt(2^delta)*cos(2*pi*m*y) and
/// sqrt(2^delta)*sin(2*pi*m*y). For m=0 the sine row is identically zero.
inline Eigen::MatrixXd build_w(int m, const std::vector<double>& points) {
    if (m < 0) throw std::invalid_argument("build_w: m must be >= 0");
    const double scale = m == 0 ? 1.0 : std::sqrt(2.0);
    Eigen::MatrixXd w(2, points.size());
    for (std::size_t j = 0; j < points.size(); ++j) {
        const double ph = 2.0 * M_PI * m * points[j];
        w(0, j) = scale * std::cos(ph);
        w(1, j) = scale * std::sin(ph);
    }
    return w;
}

struct OrbitCheck {
    double orbit_sum = 0.0;       // direct sum over distinct sign flips of m
    double cosine_product = 0.0;  // prod_j 2^{delta(m_j)} cos(2 pi m_j (x_j-y_j))
};

inline OrbitCheck orbit_sum_check(const std::array<int, 3>& m, const Vec3& x,
                                  const Vec3& y) {
    for (int a = 0; a < 3; ++a)
        if (m[a] < 0) throw std::invalid_argument("orbit_sum_check: m must be >= 0");

    OrbitCheck chk;
    for (int s0 = 0; s0 < (m[0] ? 2 : 1); ++s0)
        for (int s1 = 0; s1 < (m[1] ? 2 : 1); ++s1)
            for (int s2 = 0; s2 < (m[2] ? 2 : 1); ++s2) {
                const double g0 = (s0 ? -m[0] : m[0]);
                const double g1 = (s1 ? -m[1] : m[1]);
                const double g2 = (s2 ? -m[2] : m[2]);
                chk.orbit_sum += std::cos(2.0 * M_PI * (g0 * (x[0] - y[0]) +
                                                        g1 * (x[1] - y[1]) +
                                                        g2 * (x[2] - y[2])));
            }

    chk.cosine_product = 1.0;
    for (int a = 0; a < 3; ++a)
        chk.cosine_product *= (m[a] ? 2.0 : 1.0) *
                              std::cos(2.0 * M_PI * m[a] * (x[a] - y[a]));
    return chk;
}

namespace detail {

/// Even part of a profile indexed over [-M, M]; for the quadrature kinds the
/// profiles are exactly even, for the SVD kind the odd component is noise at
/// machine precision (the target tensor is even per axis).
inline double even_profile(const Eigen::VectorXd& p, int m, int modes) {
    return 0.5 * (p(m + modes) + p(modes - m));
}

}  // namespace detail

/// Weighted factor V[lambda] for one axis: 2(M+1) x L matrix stacking
/// omega^{1/6} * sqrt(alpha_lambda(m)) * W_{m,nodes} over m = 0..M, so that
/// V_X^T V_Y carries omega^{1/3} per axis, i.e. omega across the three axes.
/// Requires omega >= 0 and alpha_lambda(m) >= 0 (quadrature kinds).
inline Eigen::MatrixXd build_v(const SkpTerm& term, int axis,
                               const std::vector<double>& nodes, int modes) {
    if (axis < 0 || axis > 2) throw std::invalid_argument("build_v: bad axis");
    if (term.weight < 0.0)
        throw std::invalid_argument("build_v: negative weight needs sign routing");
    const Eigen::VectorXd& p = term.profiles[axis];
    const double ws = std::pow(term.weight, 1.0 / 6.0);

    Eigen::MatrixXd v(2 * (modes + 1), nodes.size());
    for (int m = 0; m <= modes; ++m) {
        const double a = detail::even_profile(p, m, modes);
        if (a < -1e-14 * std::abs(p.cwiseAbs().maxCoeff()))
            throw std::invalid_argument("build_v: negative profile needs sign routing");
        v.middleRows(2 * m, 2) = (ws * std::sqrt(std::max(a, 0.0))) *
                                 build_w(m, nodes);
    }
    return v;
}

/// Asymmetric factored split of one axis operand between a target grid X and
/// a source grid Y:
///   A(lambda) = U * V,  U = W_X^T (L x 2(M+1)),
///   V rows = omega^{1/3} * alpha_lambda(m) * W_{m,Y}.
/// Signs of omega and alpha ride on V, so SVD-kind terms are handled too.
struct AxisFactorPair {
    Eigen::MatrixXd u;  // L_target x 2(M+1)
    Eigen::MatrixXd v;  // 2(M+1) x L_source
};

inline AxisFactorPair build_uv(const SkpTerm& term, int axis,
                               const std::vector<double>& target_nodes,
                               const std::vector<double>& source_nodes, int modes) {
    if (axis < 0 || axis > 2) throw std::invalid_argument("build_uv: bad axis");
    const Eigen::VectorXd& p = term.profiles[axis];
    const double ws = std::cbrt(term.weight);

    AxisFactorPair pair;
    pair.u.resize(target_nodes.size(), 2 * (modes + 1));
    pair.v.resize(2 * (modes + 1), source_nodes.size());
    for (int m = 0; m <= modes; ++m) {
        pair.u.middleCols(2 * m, 2) = build_w(m, target_nodes).transpose();
        pair.v.middleRows(2 * m, 2) = (ws * detail::even_profile(p, m, modes)) *
                                      build_w(m, source_nodes);
    }
    return pair;
}

}  // namespace kpme
