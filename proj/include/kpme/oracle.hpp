#pragma once
//
// Brute-force reference evaluators. Deliberately unoptimized and sharing
// nothing with the fast path beyond the alpha formula.
//

#include "kpme/alpha.hpp"
#include "kpme/geometry.hpp"

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <vector>

namespace kpme {

/// Direct truncated reciprocal sum:
///   p(x_i) = sum_j q_j sum_{0 != m in [-M,M]^3} alpha(|m|) e^{2 pi i <x_i - y_j, m>}.
/// Complex accumulation with a certified imaginary residue.
inline std::vector<double> dense_reciprocal_apply(const std::vector<Vec3>& targets,
                                                  const std::vector<Vec3>& sources,
                                                  const std::vector<double>& q,
                                                  const EwaldConfig& cfg) {
    if (sources.size() != q.size())
        throw std::invalid_argument("dense_reciprocal_apply: charge count mismatch");
    const int M = cfg.modes;
    const double nmodes = std::pow(2.0 * M + 1.0, 3);
    if (double(targets.size()) * double(sources.size()) * nmodes > 1e9)
        throw std::invalid_argument("dense_reciprocal_apply: size guard exceeded");

    std::vector<double> out(targets.size(), 0.0);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        std::complex<double> acc(0.0, 0.0);
        double scale = 0.0;
        for (std::size_t j = 0; j < sources.size(); ++j) {
            const Vec3& x = targets[i];
            const Vec3& y = sources[j];
            for (int m0 = -M; m0 <= M; ++m0)
                for (int m1 = -M; m1 <= M; ++m1)
                    for (int m2 = -M; m2 <= M; ++m2) {
                        const double a = alpha_weight(cfg, m0, m1, m2);
                        if (a == 0.0) continue;
                        const double ph =
                            2.0 * M_PI * (m0 * (x[0] - y[0]) + m1 * (x[1] - y[1]) +
                                          m2 * (x[2] - y[2]));
                        const std::complex<double> term =
                            q[j] * a * std::complex<double>(std::cos(ph), std::sin(ph));
                        acc += term;
                        scale += std::abs(term);
                    }
        }
        if (std::abs(acc.imag()) > 1e-12 * std::max(scale, 1.0))
            throw numerical_error("dense_reciprocal_apply: imaginary residue too large");
        out[i] = acc.real();
    }
    return out;
}

/// Materializes sum_lambda omega * p0 (x) p1 (x) p2 - c_Lambda * delta_0.
inline AlphaVector dense_rebuild_skp(const SkpDecomposition& dec) {
    const int M = dec.modes;
    const long long n = 2LL * M + 1;
    if (n * n * n > 10'000'000)
        throw std::invalid_argument("dense_rebuild_skp: size guard exceeded");

    AlphaVector a;
    a.modes = M;
    a.entries = Eigen::VectorXd::Zero(n * n * n);
    for (const SkpTerm& t : dec.terms)
        for (int m0 = -M; m0 <= M; ++m0)
            for (int m1 = -M; m1 <= M; ++m1)
                for (int m2 = -M; m2 <= M; ++m2)
                    a.entries(a.index(m0, m1, m2)) +=
                        t.weight * t.profiles[0](m0 + M) * t.profiles[1](m1 + M) *
                        t.profiles[2](m2 + M);
    a.entries(a.index(0, 0, 0)) -= dec.correction;
    return a;
}

/// H_M restricted to two node lists (grid-to-grid kernel matrix).
inline Eigen::MatrixXd dense_grid_kernel(const EwaldConfig& cfg,
                                         const std::vector<Vec3>& grid_x,
                                         const std::vector<Vec3>& grid_y) {
    const int M = cfg.modes;
    const double nmodes = std::pow(2.0 * M + 1.0, 3);
    if (double(grid_x.size()) * double(grid_y.size()) * nmodes > 1e9)
        throw std::invalid_argument("dense_grid_kernel: size guard exceeded");

    Eigen::MatrixXd h(grid_x.size(), grid_y.size());
    for (std::size_t i = 0; i < grid_x.size(); ++i)
        for (std::size_t j = 0; j < grid_y.size(); ++j) {
            double acc = 0.0;
            for (int m0 = -M; m0 <= M; ++m0)
                for (int m1 = -M; m1 <= M; ++m1)
                    for (int m2 = -M; m2 <= M; ++m2) {
                        const double a = alpha_weight(cfg, m0, m1, m2);
                        if (a == 0.0) continue;
                        acc += a * std::cos(2.0 * M_PI *
                                            (m0 * (grid_x[i][0] - grid_y[j][0]) +
                                             m1 * (grid_x[i][1] - grid_y[j][1]) +
                                             m2 * (grid_x[i][2] - grid_y[j][2])));
                    }
            h(i, j) = acc;
        }
    return h;
}

}  // namespace kpme
