// Experiment runner: end-to-end runs against the dense oracle, convergence
// and compression sweeps, and simulated-rank scaling studies. All outputs
// are CSV.

#include "kpme/alpha.hpp"
#include "kpme/geometry.hpp"
#include "kpme/interpolation.hpp"
#include "kpme/oracle.hpp"
#include "kpme/parallel.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace kpme;

int env_threads() {
    const char* s = std::getenv("KPME_THREADS");
    if (!s) return 1;
    const int t = std::atoi(s);
    return t >= 1 ? t : 1;
}

double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file " + path);
    out.precision(17);
    return out;
}

struct QuadFlags {
    std::string kind = "sinc";
    double eps = 1e-10;
    int nquad = 0;  // 0 means pick from eps
    std::string file;
};

void add_quad_flags(CLI::App* cmd, QuadFlags& q) {
    cmd->add_option("--quad", q.kind, "decomposition kind: sinc|tab|svd")
        ->check(CLI::IsMember({"sinc", "tab", "svd"}));
    cmd->add_option("--eps", q.eps, "target decomposition accuracy");
    cmd->add_option("--nquad", q.nquad, "sinc half-width (overrides --eps)");
    cmd->add_option("--quad-file", q.file, "tabulated quadrature rule file");
}

SkpDecomposition build_decomposition(const QuadFlags& q, const EwaldConfig& cfg) {
    if (q.kind == "sinc") {
        const QuadratureRule rule = q.nquad > 0 ? sinc_rule(q.nquad, cfg.modes)
                                                : sinc_rule_for_eps(q.eps, cfg.modes);
        return skp_from_quadrature(rule, cfg, SkpKind::sinc);
    }
    if (q.kind == "tab") {
        if (q.file.empty())
            throw std::invalid_argument("--quad tab requires --quad-file");
        const QuadratureRule rule = load_tabulated_rule(q.file);
        return skp_from_quadrature(rule, cfg, SkpKind::tabulated);
    }
    return nkpa_svd(assemble_alpha(cfg), q.eps, q.eps / 10.0);
}

std::array<int, 3> parse_cells(const std::string& s) {
    std::array<int, 3> c{1, 1, 1};
    std::istringstream in(s);
    char comma;
    if (!(in >> c[0] >> comma >> c[1] >> comma >> c[2]))
        throw std::invalid_argument("bad --cells value, expected Kx,Ky,Kz");
    return c;
}

void warn_checks(const CellGrid& grid, int modes, int order) {
    const ConvergenceCheck chk = check_convergence_ratio(grid, modes);
    if (!chk.ok)
        std::cerr << "warning: convergence ratio nu = " << chk.nu
                  << " >= 1; interpolation may diverge\n";
    if (order > 10)
        std::cerr << "warning: order " << order
                  << " > 10; equispaced Lagrange interpolation is unstable\n";
}

// ---------------------------------------------------------------------------

int cmd_run(int particles, const std::string& input, int modes, int order,
            const std::string& cells, double xi, const QuadFlags& quad,
            double nu, std::uint64_t seed, bool fuse, bool with_oracle,
            const std::string& output, const std::string& ledger_path) {
    const EwaldConfig cfg(xi, modes);
    const std::array<int, 3> counts = parse_cells(cells);

    CloudData data;
    Box3 box;
    if (!input.empty()) {
        data = read_cloud(input);
        Vec3 lo{0, 0, 0}, hi{0, 0, 0};
        if (!data.cloud.positions.empty()) {
            lo = hi = data.cloud.positions[0];
            for (const Vec3& p : data.cloud.positions)
                for (int a = 0; a < 3; ++a) {
                    lo[a] = std::min(lo[a], p[a]);
                    hi[a] = std::max(hi[a], p[a]);
                }
        }
        Vec3 center{0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]),
                    0.5 * (lo[2] + hi[2])};
        double radius = 1e-12;
        for (int a = 0; a < 3; ++a)
            radius = std::max(radius, 0.5 * (hi[a] - lo[a]) * (1.0 + 1e-12));
        box = Box3(center, radius);
    } else {
        const int min_k = std::min({counts[0], counts[1], counts[2]});
        box = Box3({0, 0, 0}, nu * min_k / (M_PI * modes));
        data = sample_cloud(box, particles, seed);
    }

    const CellGrid grid = build_cell_grid(box, counts);
    warn_checks(grid, modes, order);

    const auto t0 = std::chrono::steady_clock::now();
    const SkpDecomposition dec = build_decomposition(quad, cfg);
    KpmeOptions opt;
    opt.fuse_terms = fuse;
    opt.threads = env_threads();
    const KpmeResult result =
        kpme_apply(cfg, grid, order, dec, data.cloud, data.charges, opt);
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                  t0)
            .count();

    double err = -1.0;
    if (with_oracle) {
        const std::vector<double> ref = dense_reciprocal_apply(
            data.cloud.positions, data.cloud.positions, data.charges.values, cfg);
        err = rel_l2(result.potentials, ref);
    }

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!output.empty()) {
        file = open_output(output);
        out = &file;
    }
    out->precision(17);
    *out << "index,x,y,z,q,potential\n";
    for (std::size_t i = 0; i < data.cloud.size(); ++i) {
        const Vec3& p = data.cloud.positions[i];
        *out << i << ',' << p[0] << ',' << p[1] << ',' << p[2] << ','
             << data.charges.values[i] << ',' << result.potentials[i] << '\n';
    }
    *out << "N,M,L,K,eps,err_vs_oracle,wall_ms\n";
    *out << data.cloud.size() << ',' << modes << ',' << order << ',' << counts[0]
         << 'x' << counts[1] << 'x' << counts[2] << ',' << quad.eps << ',';
    if (err >= 0.0) *out << err;
    *out << ',' << wall_ms << '\n';

    if (!ledger_path.empty()) {
        std::ofstream lf = open_output(ledger_path);
        ledger_to_csv(result.ledger, lf);
    }
    return 0;
}

int cmd_convergence(const std::vector<int>& modes_list,
                    const std::vector<double>& nu_list, int order_min,
                    int order_max, int particles, double xi, const QuadFlags& quad,
                    std::uint64_t seed, const std::string& output) {
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!output.empty()) {
        file = open_output(output);
        out = &file;
    }
    out->precision(17);
    *out << "M,nu,L,rel_error\n";

    for (int modes : modes_list) {
        const EwaldConfig cfg(xi, modes);
        const SkpDecomposition dec = build_decomposition(quad, cfg);
        for (double nu : nu_list) {
            const Box3 box({0, 0, 0}, nu / (M_PI * modes));
            const CellGrid grid = build_cell_grid(box, 1);
            const CloudData data = sample_cloud(box, particles, seed);
            const std::vector<double> ref = dense_reciprocal_apply(
                data.cloud.positions, data.cloud.positions, data.charges.values,
                cfg);
            for (int order = order_min; order <= order_max; ++order) {
                KpmeOptions opt;
                opt.threads = env_threads();
                const KpmeResult result = kpme_apply(cfg, grid, order, dec,
                                                     data.cloud, data.charges, opt);
                *out << modes << ',' << nu << ',' << order << ','
                     << rel_l2(result.potentials, ref) << '\n';
            }
        }
    }
    return 0;
}

int cmd_compression(const std::vector<int>& modes_list,
                    const std::vector<double>& eps_list, const QuadFlags& quad,
                    double xi, const std::string& output) {
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!output.empty()) {
        file = open_output(output);
        out = &file;
    }
    out->precision(17);
    *out << "M,eps,terms,relative_rank\n";

    for (int modes : modes_list) {
        const EwaldConfig cfg(xi, modes);
        for (double eps : eps_list) {
            std::size_t terms = 0;
            if (quad.kind == "sinc") {
                terms = sinc_rule_for_eps(eps, modes).nodes.size();
            } else if (quad.kind == "tab") {
                if (quad.file.empty())
                    throw std::invalid_argument("--quad tab requires --quad-file");
                const QuadratureRule rule = load_tabulated_rule(quad.file);
                if (!rule.covers(1.0, 3.0 * modes * modes)) {
                    std::cerr << "warning: tabulated rule does not cover M=" << modes
                              << "; row skipped\n";
                    continue;
                }
                terms = rule.nodes.size();
            } else {
                terms = nkpa_svd(assemble_alpha(cfg), eps, eps / 10.0).terms.size();
            }
            const double denom = double(2 * modes + 1) * (2 * modes + 1);
            *out << modes << ',' << eps << ',' << terms << ',' << terms / denom
                 << '\n';
        }
    }
    return 0;
}

int cmd_scaling(const std::string& shapes_arg, int particles, int modes,
                int order, double xi, const QuadFlags& quad, double nu,
                std::uint64_t seed, bool fuse, const std::string& output,
                const std::string& ledger_path) {
    std::vector<std::array<int, 3>> shapes;
    std::istringstream in(shapes_arg);
    std::string tok;
    while (std::getline(in, tok, ';'))
        if (!tok.empty()) shapes.push_back(parse_cells(tok));
    if (shapes.empty()) throw std::invalid_argument("no rank-grid shapes given");

    const EwaldConfig cfg(xi, modes);
    // Box sized for the worst shape (a K=1 axis sees the whole box radius).
    const Box3 box({0, 0, 0}, nu / (M_PI * modes));
    const CloudData data = sample_cloud(box, particles, seed);
    const SkpDecomposition dec = build_decomposition(quad, cfg);

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!output.empty()) {
        file = open_output(output);
        out = &file;
    }
    out->precision(17);
    *out << "shape,gathered_error,reductions_per_rank,payload_total,wall_ms\n";

    std::vector<double> reference;
    std::vector<LedgerRow> last_ledger;
    for (const auto& shape : shapes) {
        const CellGrid grid = build_cell_grid(box, shape);
        KpmeOptions opt;
        opt.fuse_terms = fuse;
        opt.threads = env_threads();
        const auto t0 = std::chrono::steady_clock::now();
        const KpmeResult result =
            kpme_apply(cfg, grid, order, dec, data.cloud, data.charges, opt);
        const double wall_ms = std::chrono::duration<double, std::milli>(
                                   std::chrono::steady_clock::now() - t0)
                                   .count();

        double gathered_error = 0.0;
        if (reference.empty())
            reference = result.potentials;
        else
            gathered_error = rel_l2(result.potentials, reference);

        long long reductions = 0, payload = 0;
        for (const LedgerRow& row : result.ledger)
            if (row.rank == 0) {
                ++reductions;
                payload += row.payload;
            }

        *out << shape[0] << 'x' << shape[1] << 'x' << shape[2] << ','
             << gathered_error << ',' << reductions << ',' << payload << ','
             << wall_ms << '\n';
        last_ledger = result.ledger;
    }

    if (!ledger_path.empty()) {
        std::ofstream lf = open_output(ledger_path);
        ledger_to_csv(last_ledger, lf);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kroneckerised particle mesh Ewald experiments"};
    app.require_subcommand(1);

    // shared flag storage
    int particles = 64, modes = 4, order = 8;
    std::string cells = "1,1,1", input, output, ledger_path;
    double xi = 3.0, nu = 0.25;
    std::uint64_t seed = 1;
    bool fuse = false, with_oracle = false;
    QuadFlags quad;

    CLI::App* run = app.add_subcommand("run", "single end-to-end run");
    run->add_option("--particles", particles, "number of sampled particles");
    run->add_option("--input", input, "point cloud file (overrides sampling)");
    run->add_option("--modes", modes, "mode bound M")->check(CLI::PositiveNumber);
    run->add_option("--order", order, "interpolation order L")
        ->check(CLI::Range(2, 16));
    run->add_option("--cells", cells, "cell counts Kx,Ky,Kz");
    run->add_option("--xi", xi, "Ewald parameter");
    run->add_option("--nu", nu, "target convergence ratio for box sizing");
    run->add_option("--seed", seed, "sampling seed");
    run->add_flag("--fuse-terms", fuse, "single reduction per axis");
    run->add_flag("--oracle", with_oracle, "compare against the dense oracle");
    run->add_option("--output", output, "result CSV path (default stdout)");
    run->add_option("--ledger", ledger_path, "communication ledger CSV path");
    add_quad_flags(run, quad);

    std::vector<int> modes_list{2, 4};
    std::vector<double> nu_list{0.5, 0.25, 0.125};
    int order_min = 2, order_max = 12;

    CLI::App* conv = app.add_subcommand("convergence", "error vs order sweep");
    conv->add_option("--modes-list", modes_list, "mode bounds to sweep");
    conv->add_option("--nu-list", nu_list, "convergence ratios to sweep");
    conv->add_option("--order-min", order_min, "first order")
        ->check(CLI::Range(2, 16));
    conv->add_option("--order-max", order_max, "last order")
        ->check(CLI::Range(2, 16));
    conv->add_option("--particles", particles, "particles per run");
    conv->add_option("--xi", xi, "Ewald parameter");
    conv->add_option("--seed", seed, "sampling seed");
    conv->add_option("--output", output, "result CSV path (default stdout)");
    add_quad_flags(conv, quad);

    std::vector<double> eps_list{1e-4, 1e-8};

    CLI::App* comp = app.add_subcommand("compression", "term count vs M sweep");
    comp->add_option("--modes-list", modes_list, "mode bounds to sweep");
    comp->add_option("--eps-list", eps_list, "accuracies to sweep");
    comp->add_option("--xi", xi, "Ewald parameter");
    comp->add_option("--output", output, "result CSV path (default stdout)");
    add_quad_flags(comp, quad);

    std::string shapes = "2,2,2;8,1,1;4,2,1";

    CLI::App* scal = app.add_subcommand("scaling", "rank-grid shape comparison");
    scal->add_option("--shapes", shapes, "semicolon-separated Kx,Ky,Kz shapes");
    scal->add_option("--particles", particles, "number of sampled particles");
    scal->add_option("--modes", modes, "mode bound M")->check(CLI::PositiveNumber);
    scal->add_option("--order", order, "interpolation order L")
        ->check(CLI::Range(2, 16));
    scal->add_option("--xi", xi, "Ewald parameter");
    scal->add_option("--nu", nu, "convergence ratio for the worst shape");
    scal->add_option("--seed", seed, "sampling seed");
    scal->add_flag("--fuse-terms", fuse, "single reduction per axis");
    scal->add_option("--output", output, "result CSV path (default stdout)");
    scal->add_option("--ledger", ledger_path, "communication ledger CSV path");
    add_quad_flags(scal, quad);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (run->parsed())
            return cmd_run(particles, input, modes, order, cells, xi, quad, nu,
                           seed, fuse, with_oracle, output, ledger_path);
        if (conv->parsed()) {
            if (order_max < order_min)
                throw std::invalid_argument("--order-max must be >= --order-min");
            return cmd_convergence(modes_list, nu_list, order_min, order_max,
                                   particles, xi, quad, seed, output);
        }
        if (comp->parsed())
            return cmd_compression(modes_list, eps_list, quad, xi, output);
        if (scal->parsed())
            return cmd_scaling(shapes, particles, modes, order, xi, quad, nu,
                               seed, fuse, output, ledger_path);
    } catch (const kpme::numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid arguments: " << e.what() << '\n';
        return 1;
    } catch (const std::runtime_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
