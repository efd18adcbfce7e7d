#include "cli.hpp"

#include "report.hpp"

#include "capcon/capcon.hpp"

#include <CLI11.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>

namespace capcon::cli {

namespace {

const std::vector<double> eps_decades = {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};

struct Options {
    std::vector<std::size_t> sizes;
    std::vector<std::size_t> ns;
    std::vector<double> eps;
    std::string convention;
    std::string mode = "exact";
    double tol = 1e-12;
    std::uint64_t seed = 42;
    std::size_t max_iter = 500;
    std::size_t levels = 5;
    std::size_t n0 = 8;
    std::size_t repeats = 3;
    std::string output;
    std::string format = "csv";
    std::string compare;
    double rtol = 0.01;
};

struct Result {
    Table table;
    std::vector<Metric> metrics;
    bool unconverged = false;
};

// One coupled-system row: the printed coordinates and the discretization behind them.
struct CoupledRow {
    std::size_t size = 0;
    std::size_t n_Q = 0;
    std::size_t mesh_n = 0;
};

TableConvention parse_convention(const std::string& s)
{
    return s == "literal" ? TableConvention::Literal : TableConvention::Table;
}

FractionalMode parse_mode(const std::string& s)
{
    return s == "lumped" ? FractionalMode::Lumped : FractionalMode::Exact;
}

std::vector<CoupledRow> coupled_rows(const Options& o, const std::vector<std::size_t>& default_sizes)
{
    const TableConvention c = parse_convention(o.convention);
    std::vector<CoupledRow> rows;
    if (!o.ns.empty()) {
        for (std::size_t n : o.ns) {
            if (n < 2 || n % 2 != 0)
                throw InvalidArgument("mesh size n must be even and at least 2, got " + std::to_string(n));
            const std::size_t label = c == TableConvention::Table ? n + 2 : n;
            rows.push_back({coupled_size(label), label - 1, n});
        }
        return rows;
    }
    for (std::size_t s : o.sizes.empty() ? default_sizes : o.sizes) {
        const std::size_t n = mesh_for_size(s, c);
        if (n % 2 != 0)
            throw InvalidArgument("size " + std::to_string(s) + " maps to an odd mesh; the midline needs even n");
        rows.push_back({s, labelled_n(s) - 1, n});
    }
    return rows;
}

std::vector<double> eps_or(const Options& o, const std::vector<double>& fallback)
{
    return o.eps.empty() ? fallback : o.eps;
}

SolveSettings settings(const Options& o)
{
    SolveSettings s;
    s.tol = o.tol;
    s.max_iter = o.max_iter;
    s.seed = o.seed;
    s.mode = parse_mode(o.mode);
    return s;
}

const char* geometry_a = "midline";
const char* geometry_b = "boundary";

// ---------------------------------------------------------------------------

Result babuska_cond(const Options& o)
{
    Result r;
    r.table.title = "babuska-cond: spectrum of the boundary multiplier system with the H^1 x H^-1/2 preconditioner";
    r.table.columns = {"n", "h", "size", "n_Q", "lambda_abs_min", "lambda_abs_max", "kappa"};
    r.table.keys = {"size"};
    const std::vector<std::size_t> ns = o.ns.empty() ? std::vector<std::size_t>{8, 16, 32, 64, 128} : o.ns;
    std::vector<SpectrumReport> reps(ns.size());
    std::vector<std::size_t> sizes(ns.size()), nqs(ns.size());
    for_each_cell(ns.size(), [&](std::size_t i) {
        BlockSystem sys(discretize_babuska(ns[i]), 1.0);
        reps[i] = condition_number(sys, babuska_preconditioner(sys, parse_mode(o.mode)));
        sizes[i] = sys.size();
        nqs[i] = sys.n_Q();
    });
    for (std::size_t i = 0; i < ns.size(); ++i) {
        const double h = std::sqrt(2.0) / static_cast<double>(ns[i]);
        r.table.add({(long long)ns[i], h, (long long)sizes[i], (long long)nqs[i], reps[i].abs_min, reps[i].abs_max,
                     reps[i].kappa});
        for (auto [name, v] : {std::pair{"lambda_abs_min", reps[i].abs_min}, std::pair{"lambda_abs_max", reps[i].abs_max},
                               std::pair{"kappa", reps[i].kappa}})
            r.metrics.push_back({"babuska-cond", geometry_b, (long long)ns[i], (long long)nqs[i], 1.0, name, v});
    }
    return r;
}

Result babuska_iters(const Options& o)
{
    Result r;
    r.table.title = "babuska-iters: MinRes iterations for the boundary multiplier system";
    r.table.columns = {"n", "h", "size", "n_Q", "iterations", "converged"};
    r.table.keys = {"size"};
    const std::vector<std::size_t> ns = o.ns.empty() ? std::vector<std::size_t>{8, 16, 32, 64, 128} : o.ns;
    const auto cells = run_babuska_iterations(ns, settings(o));
    for (const auto& c : cells) {
        r.table.add({(long long)c.n, std::sqrt(2.0) / static_cast<double>(c.n), (long long)c.size, (long long)c.n_Q,
                     (long long)c.iterations, (long long)c.converged});
        r.metrics.push_back({"babuska-iters", geometry_b, (long long)c.n, (long long)c.n_Q, 1.0, "iterations",
                             static_cast<double>(c.iterations)});
        r.unconverged = r.unconverged || !c.converged;
    }
    return r;
}

Result coupled_cond(const Options& o, PreconditionerKind kind)
{
    const std::string id = kind == PreconditionerKind::Qcap ? "qcap-cond" : "wcap-cond";
    Result r;
    r.table.title = id + ": condition numbers of the " + (kind == PreconditionerKind::Qcap ? "Q-cap" : "W-cap") +
                    " preconditioned coupled system (" + o.convention + " convention)";
    r.table.columns = {"size", "n_Q",      "eps",       "kappa",         "lambda_abs_min",
                       "lambda_abs_max", "mesh_n", "mesh_size", "coupling_eps"};
    r.table.keys = {"size", "eps"};
    const TableConvention c = parse_convention(o.convention);
    const auto rows = coupled_rows(o, {99, 323, 1155, 4355});
    const auto eps = eps_or(o, eps_decades);
    for (const auto& row : rows) {
        auto d = discretize_coupled(row.mesh_n);
        std::vector<SpectrumReport> reps(eps.size());
        for_each_cell(eps.size(), [&](std::size_t b) {
            BlockSystem sys(d, coupling_eps(eps[b], c));
            reps[b] = condition_number(sys, make_preconditioner(sys, kind, parse_mode(o.mode)));
        });
        for (std::size_t b = 0; b < eps.size(); ++b) {
            r.table.add({(long long)row.size, (long long)row.n_Q, eps[b], reps[b].kappa, reps[b].abs_min,
                         reps[b].abs_max, (long long)row.mesh_n, (long long)coupled_size(row.mesh_n),
                         coupling_eps(eps[b], c)});
            r.metrics.push_back({id, geometry_a, (long long)row.mesh_n, (long long)(row.mesh_n - 1), eps[b], "kappa", reps[b].kappa});
        }
    }
    return r;
}

Result coupled_iters(const Options& o, PreconditionerKind kind)
{
    const std::string id = kind == PreconditionerKind::Qcap ? "qcap-iters" : "wcap-iters";
    Result r;
    r.table.title = id + ": MinRes iterations for the " + (kind == PreconditionerKind::Qcap ? "Q-cap" : "W-cap") +
                    " preconditioned coupled system (" + o.convention + " convention)";
    r.table.columns = {"size", "n_Q", "eps", "iterations", "converged", "mesh_n", "mesh_size", "coupling_eps"};
    r.table.keys = {"size", "eps"};
    const TableConvention c = parse_convention(o.convention);
    const auto rows = coupled_rows(o, {99, 323, 1155, 4355, 16899});
    const auto eps = eps_or(o, eps_decades);
    Vector coupling;
    for (double e : eps)
        coupling.push_back(coupling_eps(e, c));
    std::vector<std::size_t> ns;
    for (const auto& row : rows)
        ns.push_back(row.mesh_n);
    const auto cells = run_iteration_table(ns, coupling, kind, settings(o));
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < eps.size(); ++b) {
            const IterationCell& cell = cells[a * eps.size() + b];
            r.table.add({(long long)rows[a].size, (long long)rows[a].n_Q, eps[b], (long long)cell.iterations,
                         (long long)cell.converged, (long long)cell.n, (long long)cell.size, coupling[b]});
            r.metrics.push_back({id, geometry_a, (long long)cell.n, (long long)(cell.n - 1), eps[b], "iterations",
                                 static_cast<double>(cell.iterations)});
            r.unconverged = r.unconverged || !cell.converged;
        }
    return r;
}

Result schur_spectrum(const Options& o)
{
    Result r;
    r.table.title = "schur-spectrum: clusters of the exact Schur-complement preconditioned spectrum";
    r.table.columns = {"n", "size", "eps", "cluster", "multiplicity", "max_deviation", "iterations"};
    r.table.keys = {"n", "eps", "cluster"};
    const std::vector<std::size_t> ns = o.ns.empty() ? std::vector<std::size_t>{10} : o.ns;
    const std::array<double, 3> targets = {0.5 - 0.5 * std::sqrt(5.0), 1.0, 0.5 + 0.5 * std::sqrt(5.0)};
    for (std::size_t n : ns) {
        auto d = discretize_coupled(n);
        for (double e : eps_or(o, {1e-2, 1.0, 1e2})) {
            BlockSystem sys(d, e);
            const BlockPreconditioner P = schur_preconditioner(sys);
            const Vector ev = generalized_spectrum(sys, P);
            std::array<std::size_t, 3> count{};
            std::array<double, 3> dev{};
            for (double l : ev) {
                std::size_t best = 0;
                for (std::size_t k = 1; k < 3; ++k)
                    if (std::abs(l - targets[k]) < std::abs(l - targets[best]))
                        best = k;
                ++count[best];
                dev[best] = std::max(dev[best], std::abs(l - targets[best]));
            }
            const SolveReport rep = solve_system(sys, P, manufactured_rhs(sys), settings(o));
            r.unconverged = r.unconverged || !rep.converged;
            for (std::size_t k = 0; k < 3; ++k) {
                r.table.add({(long long)n, (long long)sys.size(), e, targets[k], (long long)count[k], dev[k],
                             (long long)rep.iterations});
                r.metrics.push_back(
                    {"schur-spectrum", geometry_a, (long long)n, (long long)sys.n_Q(), e, "max_deviation", dev[k]});
            }
            r.metrics.push_back({"schur-spectrum", geometry_a, (long long)n, (long long)sys.n_Q(), e, "iterations",
                                 static_cast<double>(rep.iterations)});
        }
    }
    return r;
}

Result trace_constants(const Options& o)
{
    Result r;
    r.table.title = "trace-constants: extreme eigenvalues of the trace pencil T A^-1 T' p = lambda H(1/2)^-1 p";
    r.table.columns = {"n", "h", "n_Q", "lambda_min", "lambda_max"};
    r.table.keys = {"n"};
    const std::vector<std::size_t> ns = o.ns.empty() ? std::vector<std::size_t>{8, 16, 32, 64, 128} : o.ns;
    for (std::size_t n : ns)
        if (n < 2 || n % 2 != 0)
            throw InvalidArgument("mesh size n must be even and at least 2, got " + std::to_string(n));
    const TraceConstantSeq seq = trace_constant_sequence(ns);
    for (std::size_t i = 0; i < seq.n.size(); ++i) {
        r.table.add({(long long)seq.n[i], std::sqrt(2.0) / static_cast<double>(seq.n[i]), (long long)seq.n_Q[i],
                     seq.lambda_min[i], seq.lambda_max[i]});
        r.metrics.push_back({"trace-constants", geometry_a, (long long)seq.n[i], (long long)seq.n_Q[i], 1.0,
                             "lambda_min", seq.lambda_min[i]});
        r.metrics.push_back({"trace-constants", geometry_a, (long long)seq.n[i], (long long)seq.n_Q[i], 1.0,
                             "lambda_max", seq.lambda_max[i]});
    }
    const double bound = kappa_bound(seq.c1, seq.c2);
    r.table.notes = {"c1=" + format_cell(seq.c1), "c2=" + format_cell(seq.c2), "kappa_bound=" + format_cell(bound)};
    const long long nl = seq.n.empty() ? 0 : (long long)seq.n.back();
    const long long ql = seq.n_Q.empty() ? 0 : (long long)seq.n_Q.back();
    r.metrics.push_back({"trace-constants", geometry_a, nl, ql, 1.0, "c1", seq.c1});
    r.metrics.push_back({"trace-constants", geometry_a, nl, ql, 1.0, "c2", seq.c2});
    r.metrics.push_back({"trace-constants", geometry_a, nl, ql, 1.0, "kappa_bound", bound});
    return r;
}

Result spectrum_intervals_cmd(const Options& o)
{
    Result r;
    r.table.title = "spectrum-intervals: Q-cap spectrum against the Rusten-Winther intervals (" + o.convention +
                    " convention)";
    r.table.columns = {"size",     "mesh_n",   "eps",        "coupling_eps", "sigma_min", "sigma_max",
                       "I_minus_lo", "I_minus_hi", "I_plus_lo", "I_plus_hi",    "lambda_min", "lambda_max",
                       "kappa",     "violation", "cluster_distance"};
    r.table.keys = {"size", "eps"};
    const TableConvention c = parse_convention(o.convention);
    for (const auto& row : coupled_rows(o, {4355})) {
        auto d = discretize_coupled(row.mesh_n);
        for (double e : eps_or(o, eps_decades)) {
            BlockSystem sys(d, coupling_eps(e, c));
            const SpectrumReport s = spectrum_intervals(sys);
            const double viol = containment_violation(s);
            const double dist = cluster_distance(s.eigenvalues);
            r.table.add({(long long)row.size, (long long)row.mesh_n, e, coupling_eps(e, c), s.sigma_min, s.sigma_max,
                         s.I_minus.lo, s.I_minus.hi, s.I_plus.lo, s.I_plus.hi, s.lambda_min, s.lambda_max, s.kappa,
                         viol, dist});
            for (auto [name, v] : {std::pair{"violation", viol}, std::pair{"cluster_distance", dist},
                                   std::pair{"kappa", s.kappa}})
                r.metrics.push_back({"spectrum-intervals", geometry_a, (long long)row.mesh_n, (long long)sys.n_Q(), e,
                                     name, v});
        }
    }
    return r;
}

Result infsup(const Options& o)
{
    Result r;
    r.table.title = "infsup: discrete inf-sup constants of the coupling operator";
    r.table.columns = {"n", "eps", "norm", "beta", "beta_without_u"};
    r.table.keys = {"n", "eps", "norm"};
    const std::vector<std::size_t> ns = o.ns.empty() ? std::vector<std::size_t>{8, 16, 32} : o.ns;
    for (std::size_t n : ns) {
        auto d = discretize_coupled(n);
        for (double e : eps_or(o, eps_decades)) {
            BlockSystem sys(d, e);
            for (auto [norm, name] : {std::pair{InfSupNorm::Qcap, "qcap"}, std::pair{InfSupNorm::Wcap, "wcap"}}) {
                const double full = infsup_constant(sys, norm, false);
                const double reduced = infsup_constant(sys, norm, true);
                r.table.add({(long long)n, e, std::string(name), full, reduced});
                r.metrics.push_back({"infsup", geometry_a, (long long)n, (long long)sys.n_Q(), e,
                                     std::string("beta_") + name, full});
            }
        }
    }
    return r;
}

Result convergence(const Options& o)
{
    Result r;
    r.table.title = "convergence: H1 errors of the manufactured solution and observed rates";
    r.table.columns = {"n",       "size",       "h",          "error_u",   "rate_u",
                       "error_v", "rate_v",     "iterations_qcap", "iterations_wcap", "solution_diff"};
    r.table.keys = {"n"};
    std::vector<std::size_t> ns = o.ns;
    if (ns.empty())
        for (std::size_t k = 0; k < o.levels; ++k)
            ns.push_back(o.n0 << k);
    const double eps = o.eps.empty() ? 1.0 : o.eps.front();
    const SolveSettings s = settings(o);
    const ConvergenceTable q = convergence_study(ns, eps, PreconditionerKind::Qcap, s);
    const ConvergenceTable w = convergence_study(ns, eps, PreconditionerKind::Wcap, s);
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double diff = max_abs_diff(q[i].solution, w[i].solution);
        r.table.add({(long long)q[i].n, (long long)q[i].size, q[i].h, q[i].error_u, q[i].rate_u, q[i].error_v,
                     q[i].rate_v, (long long)q[i].iterations, (long long)w[i].iterations, diff});
        const long long nq = (long long)q[i].n - 1;
        r.metrics.push_back({"convergence", geometry_a, (long long)q[i].n, nq, eps, "error_u", q[i].error_u});
        r.metrics.push_back({"convergence", geometry_a, (long long)q[i].n, nq, eps, "error_v", q[i].error_v});
        if (i > 0) {
            r.metrics.push_back({"convergence", geometry_a, (long long)q[i].n, nq, eps, "rate_u", q[i].rate_u});
            r.metrics.push_back({"convergence", geometry_a, (long long)q[i].n, nq, eps, "rate_v", q[i].rate_v});
        }
        r.metrics.push_back({"convergence", geometry_a, (long long)q[i].n, nq, eps, "solution_diff", diff});
        r.unconverged = r.unconverged || !q[i].converged || !w[i].converged;
    }
    return r;
}

Result timings(const Options& o)
{
    Result r;
    r.table.title = "timings: setup and solve wall times at eps = 1 (seconds)";
    r.table.columns = {"n",         "n_Q",         "size",        "factor_s",  "gevp_s",
                       "gevp_rate", "qcap_solve_s", "qcap_iters", "wcap_setup_s", "wcap_solve_s",
                       "wcap_iters"};
    r.table.keys = {"n"};
    const std::vector<std::size_t> ns = o.ns.empty() ? std::vector<std::size_t>{64, 128, 256, 512} : o.ns;
    const TimingReport rep = timing_harness(ns, parse_mode(o.mode), settings(o), o.repeats);
    Vector m, g;
    for (const auto& row : rep.rows) {
        m.push_back(static_cast<double>(row.n_Q));
        g.push_back(std::max(row.gevp_seconds, 1e-9));
    }
    const Vector rates = step_exponents(m, g);
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const TimingRow& t = rep.rows[i];
        const double rate = i == 0 ? std::numeric_limits<double>::quiet_NaN() : rates[i - 1];
        r.table.add({(long long)t.n, (long long)t.n_Q, (long long)t.size, t.factor_seconds, t.gevp_seconds, rate,
                     t.qcap_solve_seconds, (long long)t.qcap_iterations, t.wcap_setup_seconds, t.wcap_solve_seconds,
                     (long long)t.wcap_iterations});
        for (auto [name, v] : {std::pair{"gevp_seconds", t.gevp_seconds}, std::pair{"factor_seconds", t.factor_seconds},
                               std::pair{"qcap_solve_seconds", t.qcap_solve_seconds},
                               std::pair{"wcap_solve_seconds", t.wcap_solve_seconds}})
            r.metrics.push_back({"timings", geometry_a, (long long)t.n, (long long)t.n_Q, 1.0, name, v});
    }
    r.table.notes = {"gevp_exponent=" + format_cell(rep.gevp_exponent),
                     "factor_exponent=" + format_cell(rep.factor_exponent),
                     "qcap_solve_exponent=" + format_cell(rep.qcap_solve_exponent),
                     "wcap_solve_exponent=" + format_cell(rep.wcap_solve_exponent)};
    r.metrics.push_back({"timings", geometry_a, 0, 0, 1.0, "gevp_exponent", rep.gevp_exponent});
    return r;
}

// ---------------------------------------------------------------------------

struct Command {
    const char* name;
    const char* help;
    std::function<Result(const Options&)> run;
    std::string convention;
    double tol;
};

std::vector<Command> commands()
{
    using K = PreconditionerKind;
    return {
        {"babuska-cond", "Condition numbers of the boundary multiplier system", babuska_cond, "literal", 1e-12},
        {"babuska-iters", "MinRes iterations for the boundary multiplier system", babuska_iters, "literal", 1e-10},
        {"qcap-cond", "Q-cap condition number table", [](const Options& o) { return coupled_cond(o, K::Qcap); },
         "table", 1e-12},
        {"wcap-cond", "W-cap condition number table", [](const Options& o) { return coupled_cond(o, K::Wcap); },
         "table", 1e-12},
        {"qcap-iters", "Q-cap MinRes iteration table", [](const Options& o) { return coupled_iters(o, K::Qcap); },
         "table", 1e-12},
        {"wcap-iters", "W-cap MinRes iteration table", [](const Options& o) { return coupled_iters(o, K::Wcap); },
         "table", 1e-12},
        {"schur-spectrum", "Spectrum clusters with the exact Schur preconditioner", schur_spectrum, "literal", 1e-12},
        {"trace-constants", "Trace pencil extremes under refinement", trace_constants, "literal", 1e-12},
        {"spectrum-intervals", "Q-cap spectrum against the Rusten-Winther intervals", spectrum_intervals_cmd,
         "literal", 1e-12},
        {"infsup", "Discrete inf-sup constants", infsup, "literal", 1e-12},
        {"convergence", "Manufactured-solution H1 convergence", convergence, "literal", 1e-24},
        {"timings", "Setup and solve timings", timings, "literal", 1e-12},
    };
}

int emit(const Result& res, const Options& o, std::ostream& out, std::ostream& err)
{
    std::ofstream file;
    if (!o.output.empty()) {
        file.open(o.output);
        if (!file) {
            err << "error: cannot open " << o.output << " for writing\n";
            return ConfigError;
        }
    }
    std::ostream& os = o.output.empty() ? out : static_cast<std::ostream&>(file);
    if (o.format == "json")
        write_json(os, res.metrics);
    else
        write_csv(os, res.table);

    int code = res.unconverged ? NotConverged : Success;
    if (!o.compare.empty()) {
        std::ifstream ref(o.compare);
        if (!ref) {
            err << "error: cannot open reference " << o.compare << "\n";
            return ConfigError;
        }
        const CompareResult cmp = compare_csv(res.table, ref, o.rtol);
        for (const auto& v : cmp.violations)
            err << "compare: " << v << "\n";
        err << "compare: " << cmp.checked << " values checked, " << cmp.violations.size() << " outside rtol "
            << o.rtol << ", " << cmp.missing << " reference rows not computed\n";
        if (!cmp.ok() && code == Success)
            code = CompareFailed;
    }
    if (res.unconverged)
        err << "warning: at least one solve did not converge\n";
    return code;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Spectral and iterative experiments for coupled 2D-1D saddle point systems", "capcon"};
    app.require_subcommand(1);
    const auto cmds = commands();
    std::vector<Options> opts(cmds.size());
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < cmds.size(); ++i) {
        Options& o = opts[i];
        o.convention = cmds[i].convention;
        o.tol = cmds[i].tol;
        CLI::App* sub = app.add_subcommand(cmds[i].name, cmds[i].help);
        sub->add_option("--sizes", o.sizes, "Coupled-system sizes as printed in the table rows")->delimiter(',');
        sub->add_option("--n", o.ns, "Mesh cells per side (overrides --sizes)")->delimiter(',');
        sub->add_option("--eps", o.eps, "Epsilon values")->delimiter(',');
        sub->add_option("--convention", o.convention, "How sizes and eps map to the discretization")
            ->check(CLI::IsMember({"table", "literal"}))
            ->capture_default_str();
        sub->add_option("--mode", o.mode, "Fractional eigensolver path")
            ->check(CLI::IsMember({"exact", "lumped"}))
            ->capture_default_str();
        sub->add_option("--tol", o.tol, "MinRes tolerance on the squared preconditioned residual")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--seed", o.seed, "Seed of the random initial guess")->capture_default_str();
        sub->add_option("--max-iter", o.max_iter, "MinRes iteration cap")->capture_default_str();
        sub->add_option("--levels", o.levels, "Refinement levels (convergence)")->check(CLI::Range(2, 12));
        sub->add_option("--n0", o.n0, "Coarsest mesh (convergence)");
        sub->add_option("--repeats", o.repeats, "Repeats per timing, minimum reported")->check(CLI::Range(1, 100));
        sub->add_option("--output,-o", o.output, "Write the table to this file");
        sub->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--compare", o.compare, "Reference CSV to check the results against");
        sub->add_option("--rtol", o.rtol, "Relative tolerance for --compare")->check(CLI::PositiveNumber);
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? Success : ConfigError;
    }

    for (std::size_t i = 0; i < cmds.size(); ++i) {
        if (!subs[i]->parsed())
            continue;
        try {
            return emit(cmds[i].run(opts[i]), opts[i], out, err);
        } catch (const NoConvergence& e) {
            err << "error: " << e.what() << "\n";
            return NotConverged;
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
            return ConfigError;
        }
    }
    return ConfigError;
}

} // namespace capcon::cli
