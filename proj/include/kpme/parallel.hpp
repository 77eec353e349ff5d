#pragma once
//
// Simulated distributed backend: a logical rank grid with one cell per rank,
// deterministic ordered collectives, the split parallel Kronecker mat-vec
// and the full KPME driver.
//
// Ranks are driven in bulk-synchronous supersteps by the calling thread.
// Local phases may run on a thread pool, but every reduction accumulates in
// ascending rank order, so outputs are bit-identical across runs and thread
// counts.
//

#include "kpme/alpha.hpp"
#include "kpme/geometry.hpp"
#include "kpme/interpolation.hpp"
#include "kpme/kron.hpp"
#include "kpme/symfourier.hpp"

#include <Eigen/Dense>

#include <functional>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <vector>

namespace kpme {

/// Runs fn(0..n-1); with threads > 1 the indices are split into contiguous
/// chunks. Safe only for bodies writing disjoint slots.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    const int nt = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (int t = 0; t < nt; ++t)
        pool.emplace_back([&, t] {
            for (int i = t; i < n; i += nt) fn(i);
        });
    for (auto& th : pool) th.join();
}

/// Logical K0 x K1 x K2 rank grid; rank multi-indices flatten like cells.
struct RankGrid {
    std::array<int, 3> counts{1, 1, 1};

    explicit RankGrid(const std::array<int, 3>& c) : counts(c) {
        for (int a = 0; a < 3; ++a)
            if (counts[a] < 1)
                throw std::invalid_argument("RankGrid: counts must be >= 1");
    }

    int size() const { return counts[0] * counts[1] * counts[2]; }

    int flatten(const std::array<int, 3>& c) const {
        return (c[0] * counts[1] + c[1]) * counts[2] + c[2];
    }

    std::array<int, 3> unflatten(int r) const {
        std::array<int, 3> c;
        c[2] = r % counts[2];
        r /= counts[2];
        c[1] = r % counts[1];
        c[0] = r / counts[1];
        return c;
    }

    /// Ranks agreeing with `rank` on all axes except `axis`, ascending.
    std::vector<int> axis_group(int rank, int axis) const {
        std::array<int, 3> c = unflatten(rank);
        std::vector<int> g;
        g.reserve(counts[axis]);
        for (int i = 0; i < counts[axis]; ++i) {
            c[axis] = i;
            g.push_back(flatten(c));
        }
        return g;
    }
};

struct LedgerRow {
    int rank = 0;
    int step = 0;
    int group_axis = -1;  // -1 for the global scalar all-reduce
    long long payload = 0;
};

inline void ledger_to_csv(const std::vector<LedgerRow>& rows, std::ostream& out) {
    out << "rank,step,group_axis,payload_count\n";
    for (const LedgerRow& r : rows)
        out << r.rank << ',' << r.step << ',' << r.group_axis << ',' << r.payload
            << '\n';
}

/// Deterministic collective layer over the rank grid. All reductions
/// accumulate in ascending rank order and are logged.
class SimulatedComm {
  public:
    explicit SimulatedComm(const RankGrid& grid, int threads = 1)
        : grid_(grid), threads_(threads) {}

    const RankGrid& grid() const { return grid_; }
    int threads() const { return threads_; }
    const std::vector<LedgerRow>& ledger() const { return ledger_; }

    /// In-place all-reduce (sum) of one matrix per rank within axis groups.
    void allreduce_axis(int axis, std::vector<Eigen::MatrixXd>& local) {
        if (static_cast<int>(local.size()) != grid_.size())
            throw std::invalid_argument("allreduce_axis: buffer count mismatch");
        const int step = step_++;
        std::vector<bool> done(grid_.size(), false);
        for (int r = 0; r < grid_.size(); ++r) {
            if (done[r]) continue;
            const std::vector<int> group = grid_.axis_group(r, axis);
            Eigen::MatrixXd sum = local[group[0]];
            for (std::size_t g = 1; g < group.size(); ++g) sum += local[group[g]];
            for (int member : group) {
                local[member] = sum;
                done[member] = true;
            }
        }
        for (int r = 0; r < grid_.size(); ++r)
            ledger_.push_back({r, step, axis, local[r].size()});
    }

    /// All-reduce (sum) of one scalar per rank over the whole grid.
    double allreduce_scalar(const std::vector<double>& values) {
        if (static_cast<int>(values.size()) != grid_.size())
            throw std::invalid_argument("allreduce_scalar: value count mismatch");
        const int step = step_++;
        double sum = 0.0;
        for (int r = 0; r < grid_.size(); ++r) sum += values[r];
        for (int r = 0; r < grid_.size(); ++r) ledger_.push_back({r, step, -1, 1});
        return sum;
    }

  private:
    RankGrid grid_;
    int threads_;
    int step_ = 0;
    std::vector<LedgerRow> ledger_;
};

/// Per-rank factored axis operands U^{(p)} V^{(p)} of one SKP term.
struct AxisSplitFactors {
    std::array<Eigen::MatrixXd, 3> u;  // L x 2(M+1), the rank's target factor
    std::array<Eigen::MatrixXd, 3> v;  // 2(M+1) x L, the rank's source factor
};

/// Split parallel Kronecker mat-vec: for each axis descending, apply V
/// locally on the matricized data, reduce-sum over the axis group, apply U.
/// factors[r] holds rank r's own U/V; local[r] is its L^3 grid vector.
inline std::vector<Eigen::VectorXd> spkmv(SimulatedComm& comm,
                                          const std::vector<AxisSplitFactors>& factors,
                                          const std::vector<Eigen::VectorXd>& local,
                                          int order) {
    const int n = comm.grid().size();
    if (static_cast<int>(factors.size()) != n ||
        static_cast<int>(local.size()) != n)
        throw std::invalid_argument("spkmv: per-rank input count mismatch");

    std::vector<Eigen::VectorXd> data = local;
    std::vector<int> shape{order, order, order};
    for (int p = 2; p >= 0; --p) {
        std::vector<Eigen::MatrixXd> buf(n);
        parallel_for(n, comm.threads(), [&](int r) {
            buf[r] = factors[r].v[p] * matricize(data[r], shape, p);
        });
        comm.allreduce_axis(p, buf);
        shape[p] = order;
        parallel_for(n, comm.threads(), [&](int r) {
            data[r] = vectorize(factors[r].u[p] * buf[r], shape, p);
        });
    }
    return data;
}

/// Sum of SPKMV applications over all terms. In fused mode the per-term
/// intermediates are stacked so each axis needs a single reduction with
/// term-count-fold payload; outputs are identical either way.
inline std::vector<Eigen::VectorXd> spkmv_sum(
    SimulatedComm& comm, const std::vector<std::vector<AxisSplitFactors>>& terms,
    const std::vector<Eigen::VectorXd>& local, int order, bool fuse) {
    const int n = comm.grid().size();
    const long long g3 = static_cast<long long>(order) * order * order;
    std::vector<Eigen::VectorXd> out(n, Eigen::VectorXd::Zero(g3));
    if (terms.empty()) return out;

    if (!fuse) {
        for (const auto& term : terms) {
            std::vector<Eigen::VectorXd> z = spkmv(comm, term, local, order);
            for (int r = 0; r < n; ++r) out[r] += z[r];
        }
        return out;
    }

    const int nt = static_cast<int>(terms.size());
    // data[t][r]: term t's running local tensor on rank r
    std::vector<std::vector<Eigen::VectorXd>> data(
        nt, std::vector<Eigen::VectorXd>(local));
    std::vector<int> shape{order, order, order};
    for (int p = 2; p >= 0; --p) {
        const int vrows = static_cast<int>(terms[0][0].v[p].rows());
        const long long cols = g3 / order;
        std::vector<Eigen::MatrixXd> buf(n);
        parallel_for(n, comm.threads(), [&](int r) {
            buf[r].resize(static_cast<long long>(nt) * vrows, cols);
            for (int t = 0; t < nt; ++t)
                buf[r].middleRows(static_cast<long long>(t) * vrows, vrows) =
                    terms[t][r].v[p] * matricize(data[t][r], shape, p);
        });
        comm.allreduce_axis(p, buf);
        shape[p] = order;
        parallel_for(n, comm.threads(), [&](int r) {
            for (int t = 0; t < nt; ++t)
                data[t][r] = vectorize(
                    terms[t][r].u[p] *
                        buf[r].middleRows(static_cast<long long>(t) * vrows, vrows),
                    shape, p);
        });
    }
    for (int t = 0; t < nt; ++t)
        for (int r = 0; r < n; ++r) out[r] += data[t][r];
    return out;
}

struct KpmeOptions {
    bool fuse_terms = false;
    int threads = 1;
};

struct KpmeResult {
    std::vector<double> potentials;  // per particle, global index order
    std::vector<LedgerRow> ledger;
};

/// Full driver: all-reduce the total charge, interpolate onto per-cell
/// grids, accumulate SPKMV over the SKP terms, anterpolate, and subtract
/// the zero-mode correction c_Lambda * sum(q) from every potential.
inline KpmeResult kpme_apply(const EwaldConfig& cfg, const CellGrid& grid,
                             int order, const SkpDecomposition& dec,
                             const PointCloud& cloud, const ChargeVector& q,
                             const KpmeOptions& opt = {}) {
    if (dec.modes != cfg.modes)
        throw std::invalid_argument("kpme_apply: decomposition mode bound mismatch");

    const Partition part = assign_particles(grid, cloud);
    SimulatedComm comm(RankGrid(grid.counts), opt.threads);
    const int n = comm.grid().size();

    std::vector<double> local_charge(n, 0.0);
    for (int r = 0; r < n; ++r)
        for (int p : part.members[r]) local_charge[r] += q.values[p];
    const double total_charge = comm.allreduce_scalar(local_charge);

    const InterpOperator interp(grid, part, cloud, order);
    const std::vector<Eigen::VectorXd> phi = interp.interpolate(q);

    // Each rank's factors use its own cell nodes, shifted to the box frame.
    std::vector<std::vector<AxisSplitFactors>> terms(
        dec.terms.size(), std::vector<AxisSplitFactors>(n));
    for (int r = 0; r < n; ++r) {
        const std::array<int, 3> cell = comm.grid().unflatten(r);
        std::array<std::vector<double>, 3> nodes;
        for (int a = 0; a < 3; ++a) {
            nodes[a] = grid.axis_nodes(a, cell[a], order);
            for (double& x : nodes[a]) x -= grid.box.center[a];
        }
        for (std::size_t t = 0; t < dec.terms.size(); ++t)
            for (int a = 0; a < 3; ++a) {
                AxisFactorPair pair =
                    build_uv(dec.terms[t], a, nodes[a], nodes[a], cfg.modes);
                terms[t][r].u[a] = std::move(pair.u);
                terms[t][r].v[a] = std::move(pair.v);
            }
    }

    const std::vector<Eigen::VectorXd> psi =
        spkmv_sum(comm, terms, phi, order, opt.fuse_terms);

    KpmeResult result;
    result.potentials = interp.anterpolate(psi);
    const double correction = dec.correction * total_charge;
    for (double& z : result.potentials) z -= correction;
    result.ledger = comm.ledger();
    return result;
}

}  // namespace kpme
