#pragma once
//
// Mode-weight vector alpha_M and its Sum of Kronecker Products
// decompositions: recursive SVD (NKPA), cardinal sine quadrature, and
// tabulated quadrature rules.
//

#include "kpme/kron.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kpme {

struct EwaldConfig {
    double xi = 1.0;
    int modes = 1;  // M; mode set is [-M, M]^3

    EwaldConfig() = default;
    EwaldConfig(double xi_, int modes_) : xi(xi_), modes(modes_) {
        if (!(xi > 0.0)) throw std::invalid_argument("EwaldConfig: xi must be positive");
        if (modes < 1) throw std::invalid_argument("EwaldConfig: modes must be >= 1");
    }

    int mode_range() const { return 2 * modes + 1; }
};

/// alpha(|m|) = exp(-pi^2 |m|^2 / xi^2) / |m|^2, zero at m = 0.
inline double alpha_weight(const EwaldConfig& cfg, int m0, int m1, int m2) {
    const double r2 = double(m0) * m0 + double(m1) * m1 + double(m2) * m2;
    if (r2 == 0.0) return 0.0;
    const double p = M_PI / cfg.xi;
    return std::exp(-p * p * r2) / r2;
}

/// alpha_M over [-M,M]^3, lexicographic with axis 0 slowest.
struct AlphaVector {
    int modes = 0;
    Eigen::VectorXd entries;

    long long index(int m0, int m1, int m2) const {
        const long long n = 2 * modes + 1;
        return ((m0 + modes) * n + (m1 + modes)) * n + (m2 + modes);
    }

    double at(int m0, int m1, int m2) const { return entries(index(m0, m1, m2)); }
};

inline AlphaVector assemble_alpha(const EwaldConfig& cfg) {
    AlphaVector a;
    a.modes = cfg.modes;
    const int M = cfg.modes;
    const long long n = cfg.mode_range();
    a.entries.resize(n * n * n);
    for (int m0 = -M; m0 <= M; ++m0)
        for (int m1 = -M; m1 <= M; ++m1)
            for (int m2 = -M; m2 <= M; ++m2)
                a.entries(a.index(m0, m1, m2)) = alpha_weight(cfg, m0, m1, m2);
    return a;
}

enum class SkpKind { svd, sinc, tabulated };

/// One term omega * p0 (x) p1 (x) p2; profiles run over m = -M..M.
struct SkpTerm {
    double weight = 0.0;
    std::array<Eigen::VectorXd, 3> profiles;
};

struct SkpDecomposition {
    SkpKind kind = SkpKind::sinc;
    int modes = 0;
    double correction = 0.0;  // c_Lambda, subtracted at the zero mode
    std::vector<SkpTerm> terms;
};

// ---------------------------------------------------------------------------
// Quadrature rules for 1/R = integral of exp(-lambda R).
// ---------------------------------------------------------------------------

struct QuadratureRule {
    std::vector<double> nodes;    // lambda_l
    std::vector<double> weights;  // omega_l
    double lifting = 0.0;         // step h (sinc kind only)
    int half_width = 0;           // N_quad (sinc kind only)
    double min_arg = 1.0;
    double max_arg = 1.0;
    double eps = 0.0;  // certified max error on [min_arg, max_arg]

    bool covers(double lo, double hi) const { return min_arg <= lo && max_arg >= hi; }
};

/// Max over integer arguments R in [1, max_arg] of |1/R - sum w exp(-l R)|.
inline double quadrature_max_error(const QuadratureRule& rule, long long max_arg) {
    double worst = 0.0;
    for (long long r = 1; r <= max_arg; ++r) {
        double s = 0.0;
        for (std::size_t l = 0; l < rule.nodes.size(); ++l)
            s += rule.weights[l] * std::exp(-rule.nodes[l] * double(r));
        worst = std::max(worst, std::abs(1.0 / double(r) - s));
    }
    return worst;
}

/// Cardinal sine rule: omega_l = h/(1+e^{-lh}), lambda_l = log(1+e^{lh}),
/// l in [-N, N]. The step h is brute-forced over 64 log-spaced candidates
/// around the asymptotic h* = pi/sqrt(2N+1), scoring the max error over the
/// integer arguments |m|^2 in [1, 3M^2].
inline QuadratureRule sinc_rule(int n_quad, int modes) {
    if (n_quad < 1) throw std::invalid_argument("sinc_rule: n_quad must be >= 1");
    if (modes < 1) throw std::invalid_argument("sinc_rule: modes must be >= 1");

    const double h_star = M_PI / std::sqrt(2.0 * n_quad + 1.0);
    const long long max_arg = 3LL * modes * modes;

    auto build = [&](double h) {
        QuadratureRule rule;
        rule.lifting = h;
        rule.half_width = n_quad;
        rule.min_arg = 1.0;
        rule.max_arg = double(max_arg);
        rule.nodes.reserve(2 * n_quad + 1);
        rule.weights.reserve(2 * n_quad + 1);
        for (int l = -n_quad; l <= n_quad; ++l) {
            rule.weights.push_back(h / (1.0 + std::exp(-l * h)));
            rule.nodes.push_back(std::log1p(std::exp(l * h)));
        }
        return rule;
    };

    QuadratureRule best;
    double best_err = std::numeric_limits<double>::infinity();
    const int candidates = 64;
    for (int c = 0; c < candidates; ++c) {
        const double t = double(c) / (candidates - 1);
        const double h = (h_star / 4.0) * std::pow(16.0, t);
        QuadratureRule rule = build(h);
        const double err = quadrature_max_error(rule, max_arg);
        if (err < best_err) {
            best_err = err;
            best = rule;
        }
    }
    best.eps = best_err;
    return best;
}

/// Smallest sinc rule meeting eps on [1, 3M^2]; grows N until it fits.
inline QuadratureRule sinc_rule_for_eps(double eps, int modes, int max_n = 400) {
    if (!(eps > 0.0)) throw std::invalid_argument("sinc_rule_for_eps: eps must be positive");
    for (int n = 1; n <= max_n; ++n) {
        QuadratureRule rule = sinc_rule(n, modes);
        if (rule.eps <= eps) return rule;
    }
    throw numerical_error("sinc_rule_for_eps: eps not reached within node budget");
}

/// Terms alpha_lambda(m) = exp(-(lambda + pi^2/xi^2) m^2) per axis, with the
/// correction c_Lambda = sum of weights cancelling the spurious zero mode.
inline SkpDecomposition skp_from_quadrature(const QuadratureRule& rule,
                                            const EwaldConfig& cfg,
                                            SkpKind kind = SkpKind::sinc) {
    const int M = cfg.modes;
    if (!rule.covers(1.0, 3.0 * M * M))
        throw std::invalid_argument(
            "skp_from_quadrature: rule does not cover arguments [1, 3M^2]");

    SkpDecomposition dec;
    dec.kind = kind;
    dec.modes = M;
    const double shift = (M_PI / cfg.xi) * (M_PI / cfg.xi);
    for (std::size_t l = 0; l < rule.nodes.size(); ++l) {
        SkpTerm term;
        term.weight = rule.weights[l];
        Eigen::VectorXd p(2 * M + 1);
        for (int m = -M; m <= M; ++m)
            p(m + M) = std::exp(-(rule.nodes[l] + shift) * double(m) * double(m));
        term.profiles = {p, p, p};
        dec.terms.push_back(std::move(term));
        dec.correction += rule.weights[l];
    }
    return dec;
}

/// File format: `count`, then count lines `node weight`, then a trailer line
/// `min_arg max_arg eps`.
inline QuadratureRule load_tabulated_rule(std::istream& in) {
    QuadratureRule rule;
    int count = 0;
    if (!(in >> count) || count < 1)
        throw std::runtime_error("load_tabulated_rule: missing or invalid node count");
    rule.nodes.resize(count);
    rule.weights.resize(count);
    for (int i = 0; i < count; ++i)
        if (!(in >> rule.nodes[i] >> rule.weights[i]))
            throw std::runtime_error("load_tabulated_rule: malformed node line " +
                                     std::to_string(i + 2));
    if (!(in >> rule.min_arg >> rule.max_arg >> rule.eps))
        throw std::runtime_error("load_tabulated_rule: missing trailer line");
    return rule;
}

inline QuadratureRule load_tabulated_rule(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_tabulated_rule: cannot open " + path);
    return load_tabulated_rule(in);
}

// ---------------------------------------------------------------------------
// Recursive SVD decomposition (nearest Kronecker product approximation).
// ---------------------------------------------------------------------------

/// Decomposes alpha as sum_i sum_j (s_i s_ij) u_i (x) u_ij (x) v_ij by two
/// nested truncated SVDs: first the unfolding with axis-0 rows, then, for
/// each retained right singular vector, the unfolding with axis-1 rows.
/// Truncation keeps singular values > tol * s_max (relative).
///
/// If error_bound is given it receives the a priori Frobenius estimate
/// sqrt(sum_{i>r0} s_i^2) + sum_{i<=r0} s_i sqrt(sum_{j>r1} s_ij^2).
inline SkpDecomposition nkpa_svd(const AlphaVector& alpha, double tol_outer,
                                 double tol_inner, double* error_bound = nullptr) {
    if (tol_inner > tol_outer)
        throw std::invalid_argument("nkpa_svd: tol_inner must be <= tol_outer");
    const int M = alpha.modes;
    const int n = 2 * M + 1;
    const std::vector<int> shape{n, n, n};

    SkpDecomposition dec;
    dec.kind = SkpKind::svd;
    dec.modes = M;
    dec.correction = 0.0;
    double bound = 0.0;

    const Eigen::MatrixXd outer = matricize(alpha.entries, shape, 0);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd0(outer,
                                           Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (!std::isfinite(svd0.singularValues().sum()))
        throw numerical_error("nkpa_svd: outer SVD produced non-finite values");
    const auto& s0 = svd0.singularValues();
    const double s0_max = s0.size() ? s0(0) : 0.0;

    double tail0_sq = 0.0;
    for (Eigen::Index i = 0; i < s0.size(); ++i) {
        if (s0_max == 0.0 || s0(i) <= tol_outer * s0_max) {
            tail0_sq += s0(i) * s0(i);
            continue;
        }
        const Eigen::VectorXd u = svd0.matrixU().col(i);
        const Eigen::VectorXd w = svd0.matrixV().col(i);

        const Eigen::MatrixXd inner = matricize(w, {n, n}, 0);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd1(
            inner, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (!std::isfinite(svd1.singularValues().sum()))
            throw numerical_error("nkpa_svd: inner SVD produced non-finite values");
        const auto& s1 = svd1.singularValues();
        const double s1_max = s1.size() ? s1(0) : 0.0;

        double tail1_sq = 0.0;
        for (Eigen::Index j = 0; j < s1.size(); ++j) {
            if (s1_max == 0.0 || s1(j) <= tol_inner * s1_max) {
                tail1_sq += s1(j) * s1(j);
                continue;
            }
            SkpTerm term;
            term.weight = s0(i) * s1(j);
            term.profiles = {u, Eigen::VectorXd(svd1.matrixU().col(j)),
                             Eigen::VectorXd(svd1.matrixV().col(j))};
            dec.terms.push_back(std::move(term));
        }
        bound += s0(i) * std::sqrt(tail1_sq);
    }
    bound += std::sqrt(tail0_sq);
    if (error_bound) *error_bound = bound;
    return dec;
}

/// Lower bound ceil((log(eps/16)/pi)^2) on the optimal exponential-sum term
/// count at precision eps. A tiny slack keeps exact-integer cases from
/// rounding up on the last ulp.
inline int optimal_term_lower_bound(double eps) {
    if (!(eps > 0.0 && eps < 16.0))
        throw std::invalid_argument("optimal_term_lower_bound: need 0 < eps < 16");
    const double t = std::log(eps / 16.0) / M_PI;
    return static_cast<int>(std::ceil(t * t - 1e-9));
}

}  // namespace kpme
