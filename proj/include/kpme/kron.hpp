#pragma once
//
// Fast Kronecker matrix-vector products: mode-k matricization, the reshaped
// shuffle algorithm and a dense oracle.
//

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kpme {

/// Numerical failure (SVD breakdown, non-finite intermediate, ...).
class numerical_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline long long shape_product(const std::vector<int>& shape) {
    long long total = 1;
    for (int n : shape) {
        if (n < 1) throw std::invalid_argument("shape entries must be >= 1");
        total *= n;
    }
    return total;
}

}  // namespace detail

/// Reshapes a lexicographic (axis-0 slowest) vector over `shape` into a
/// matrix whose rows are indexed by axis k; the columns run over the
/// remaining axes, still in lexicographic order.
inline Eigen::MatrixXd matricize(const Eigen::VectorXd& v,
                                 const std::vector<int>& shape, int k) {
    const int d = static_cast<int>(shape.size());
    if (k < 0 || k >= d) throw std::invalid_argument("matricize: bad axis");
    const long long total = detail::shape_product(shape);
    if (v.size() != total)
        throw std::invalid_argument("matricize: vector/shape size mismatch");

    const long long rows = shape[k];
    const long long cols = total / rows;
    long long inner = 1;  // product of sizes after axis k
    for (int a = k + 1; a < d; ++a) inner *= shape[a];
    const long long outer = total / (rows * inner);

    Eigen::MatrixXd m(rows, cols);
    for (long long o = 0; o < outer; ++o)
        for (long long r = 0; r < rows; ++r)
            for (long long i = 0; i < inner; ++i)
                m(r, o * inner + i) = v((o * rows + r) * inner + i);
    return m;
}

/// Inverse of matricize; `shape[k]` must equal `m.rows()`.
inline Eigen::VectorXd vectorize(const Eigen::MatrixXd& m,
                                 const std::vector<int>& shape, int k) {
    const int d = static_cast<int>(shape.size());
    if (k < 0 || k >= d) throw std::invalid_argument("vectorize: bad axis");
    const long long total = detail::shape_product(shape);
    if (m.rows() != shape[k] || m.rows() * m.cols() != total)
        throw std::invalid_argument("vectorize: matrix/shape size mismatch");

    long long inner = 1;
    for (int a = k + 1; a < d; ++a) inner *= shape[a];
    const long long rows = shape[k];
    const long long outer = total / (rows * inner);

    Eigen::VectorXd v(total);
    for (long long o = 0; o < outer; ++o)
        for (long long r = 0; r < rows; ++r)
            for (long long i = 0; i < inner; ++i)
                v((o * rows + r) * inner + i) = m(r, o * inner + i);
    return v;
}

/// One factor of a Kronecker operand; optionally held in factored form
/// A = U * V with fixed inner dimension.
struct KronFactor {
    Eigen::MatrixXd dense;
    std::optional<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> factored;

    KronFactor() = default;
    explicit KronFactor(Eigen::MatrixXd a) : dense(std::move(a)) {}
    KronFactor(Eigen::MatrixXd u, Eigen::MatrixXd v) {
        if (u.cols() != v.rows())
            throw std::invalid_argument("KronFactor: factored shapes mismatch");
        factored.emplace(std::move(u), std::move(v));
    }

    Eigen::Index rows() const {
        return factored ? factored->first.rows() : dense.rows();
    }
    Eigen::Index cols() const {
        return factored ? factored->second.cols() : dense.cols();
    }

    Eigen::MatrixXd materialize() const {
        return factored ? Eigen::MatrixXd(factored->first * factored->second)
                        : dense;
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x,
                          long long* multiply_count = nullptr) const {
        if (x.rows() != cols())
            throw std::invalid_argument("KronFactor: operand size mismatch");
        if (factored) {
            const auto& [u, v] = *factored;
            if (multiply_count)
                *multiply_count += v.rows() * v.cols() * x.cols() +
                                   u.rows() * u.cols() * x.cols();
            return u * (v * x);
        }
        if (multiply_count) *multiply_count += dense.rows() * dense.cols() * x.cols();
        return dense * x;
    }
};

struct KronOperand {
    std::vector<KronFactor> factors;

    int order() const { return static_cast<int>(factors.size()); }

    std::vector<int> col_shape() const {
        std::vector<int> s;
        s.reserve(factors.size());
        for (const auto& f : factors) s.push_back(static_cast<int>(f.cols()));
        return s;
    }

    std::vector<int> row_shape() const {
        std::vector<int> s;
        s.reserve(factors.size());
        for (const auto& f : factors) s.push_back(static_cast<int>(f.rows()));
        return s;
    }
};

/// Materializes the full Kronecker product. Guarded to 1e7 entries.
inline Eigen::MatrixXd kron_dense(const KronOperand& op) {
    if (op.order() == 0) throw std::invalid_argument("kron_dense: empty operand");
    long long rows = 1, cols = 1;
    for (const auto& f : op.factors) {
        rows *= f.rows();
        cols *= f.cols();
    }
    if (rows * cols > 10'000'000)
        throw std::invalid_argument("kron_dense: size guard exceeded");

    Eigen::MatrixXd acc = Eigen::MatrixXd::Ones(1, 1);
    for (const auto& f : op.factors) {
        const Eigen::MatrixXd b = f.materialize();
        Eigen::MatrixXd next(acc.rows() * b.rows(), acc.cols() * b.cols());
        for (Eigen::Index i = 0; i < acc.rows(); ++i)
            for (Eigen::Index j = 0; j < acc.cols(); ++j)
                next.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) =
                    acc(i, j) * b;
        acc = std::move(next);
    }
    return acc;
}

/// Naive baseline: materialize, then multiply.
inline Eigen::VectorXd kron_matvec_dense(const KronOperand& op,
                                         const Eigen::VectorXd& q) {
    const Eigen::MatrixXd a = kron_dense(op);
    if (a.cols() != q.size())
        throw std::invalid_argument("kron_matvec_dense: size mismatch");
    return a * q;
}

/// Reshaped shuffle algorithm: for p descending, unfold on axis p, multiply
/// by the p-th factor, fold back. Permutations are never materialized.
inline Eigen::VectorXd kron_matvec_shuffle(const KronOperand& op,
                                           const Eigen::VectorXd& q,
                                           long long* multiply_count = nullptr) {
    const int d = op.order();
    if (d == 0) throw std::invalid_argument("kron_matvec_shuffle: empty operand");
    std::vector<int> shape = op.col_shape();
    if (detail::shape_product(shape) != q.size())
        throw std::invalid_argument("kron_matvec_shuffle: size mismatch");

    Eigen::VectorXd v = q;
    for (int p = d - 1; p >= 0; --p) {
        Eigen::MatrixXd m = matricize(v, shape, p);
        Eigen::MatrixXd r = op.factors[p].apply(m, multiply_count);
        shape[p] = static_cast<int>(r.rows());
        v = vectorize(r, shape, p);
    }
    return v;
}

/// Multiply count of the shuffle applied to dense factors:
/// sum_p M_p * N_p * prod_{k<p} N_k * prod_{k>p} M_k.
inline long long op_count_estimate(const KronOperand& op) {
    const int d = op.order();
    long long total = 0;
    for (int p = 0; p < d; ++p) {
        long long cols = 1;
        for (int k = 0; k < p; ++k) cols *= op.factors[k].cols();
        for (int k = p + 1; k < d; ++k) cols *= op.factors[k].rows();
        total += op.factors[p].rows() * op.factors[p].cols() * cols;
    }
    return total;
}

}  // namespace kpme
