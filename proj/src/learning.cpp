#include "catbn/learning.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "catbn/random.hpp"

namespace catbn {

void EmConfig::validate() const {
    if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
    if (!(ll_tolerance > 0.0)) throw InvalidArgument("ll_tolerance must be > 0");
    if (!(pseudocount >= 0.0)) throw InvalidArgument("pseudocount must be >= 0");
    if (restarts < 1) throw InvalidArgument("restarts must be >= 1");
}

std::vector<VarIndex> latent_variables(const Network& net, const Dataset& data, const ColumnBinding& b) {
    std::vector<char> bound(net.size(), 0);
    for (std::size_t c = 0; c < b.var_of_column.size(); ++c) {
        const VarIndex v = b.var_of_column[c];
        if (v == kNoVar) continue;
        bound[v] = 1;
        if (is_target_role(net.variable(v).role)) continue;
        bool any = false;
        for (std::size_t r = 0; r < data.rows() && !any; ++r) any = data.at(r, c) != kMissing;
        if (!any && data.rows() > 0)
            throw InvalidArgument("column '" + data.columns[c].id + "' is entirely missing but '" +
                                  net.variable(v).id + "' is not a latent variable");
    }
    std::vector<VarIndex> latent;
    for (VarIndex v = 0; v < net.size(); ++v) {
        if (bound[v]) continue;
        if (!is_target_role(net.variable(v).role))
            throw InvalidArgument("variable '" + net.variable(v).id + "' has no data column");
        latent.push_back(v);
    }
    return latent;
}

namespace {

SufficientStats zero_stats(const Network& net) {
    SufficientStats s;
    s.counts.reserve(net.size());
    for (const Cpt& c : net.cpts()) s.counts.emplace_back(c.table.size(), 0.0);
    return s;
}

void add_into(SufficientStats& acc, const SufficientStats& part) {
    for (std::size_t v = 0; v < acc.counts.size(); ++v)
        for (std::size_t i = 0; i < acc.counts[v].size(); ++i) acc.counts[v][i] += part.counts[v][i];
    acc.loglik += part.loglik;
}

[[noreturn]] void impossible_row(const Dataset& data, std::size_t r) {
    throw Error("row " + std::to_string(r) + " (student '" + data.student_ids[r] +
                "') has zero probability under the current parameters");
}

}  // namespace

SufficientStats expected_counts(const JunctionTree& tree, const Dataset& data, const ColumnBinding& b,
                                Execution exec) {
    const Network& net = tree.network();
    const std::size_t n = data.rows();

    if (exec == Execution::serial) {
        SufficientStats acc = zero_stats(net);
        Beliefs bel;
        for (std::size_t r = 0; r < n; ++r) {
            try {
                tree.calibrate(b.evidence_for(data, r), bel);
            } catch (const ImpossibleEvidence&) {
                impossible_row(data, r);
            }
            acc.loglik += bel.log_evidence();
            for (VarIndex v = 0; v < net.size(); ++v) bel.accumulate_family(v, acc.counts[v]);
        }
        return acc;
    }

    const std::size_t blocks = std::min<std::size_t>(64, std::max<std::size_t>(n, 1));
    std::vector<SufficientStats> partial(blocks, zero_stats(net));
    std::size_t failed = std::numeric_limits<std::size_t>::max();

#pragma omp parallel
    {
        Beliefs bel;
#pragma omp for schedule(dynamic, 1)
        for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(blocks); ++blk) {
            const std::size_t lo = n * static_cast<std::size_t>(blk) / blocks;
            const std::size_t hi = n * static_cast<std::size_t>(blk + 1) / blocks;
            SufficientStats& acc = partial[static_cast<std::size_t>(blk)];
            for (std::size_t r = lo; r < hi; ++r) {
                try {
                    tree.calibrate(b.evidence_for(data, r), bel);
                } catch (const ImpossibleEvidence&) {
#pragma omp critical(catbn_estep_fail)
                    failed = std::min(failed, r);
                    break;
                }
                acc.loglik += bel.log_evidence();
                for (VarIndex v = 0; v < net.size(); ++v) bel.accumulate_family(v, acc.counts[v]);
            }
        }
    }
    if (failed != std::numeric_limits<std::size_t>::max()) impossible_row(data, failed);

    SufficientStats total = zero_stats(net);
    for (const auto& p : partial) add_into(total, p);
    return total;
}

Network m_step(const Network& structure, const SufficientStats& stats, double pseudocount) {
    Network out = structure;
    for (VarIndex v = 0; v < structure.size(); ++v) {
        const auto card = static_cast<std::size_t>(structure.cardinality(v));
        const auto& n = stats.counts.at(v);
        std::vector<double> table(n.size());
        for (std::size_t r = 0; r < n.size() / card; ++r) {
            double total = 0.0;
            for (std::size_t s = 0; s < card; ++s) total += n[r * card + s];
            const double denom = total + pseudocount * static_cast<double>(card);
            for (std::size_t s = 0; s < card; ++s)
                table[r * card + s] = denom > 0.0 ? (n[r * card + s] + pseudocount) / denom
                                                  : 1.0 / static_cast<double>(card);
        }
        out.set_table(v, std::move(table));
    }
    return out;
}

Network fit_complete(const Network& structure, const Dataset& data, double pseudocount) {
    if (!(pseudocount >= 0.0)) throw InvalidArgument("pseudocount must be >= 0");
    const ColumnBinding b = bind_columns(structure, data);
    std::vector<std::size_t> column_of(structure.size(), std::numeric_limits<std::size_t>::max());
    for (std::size_t c = 0; c < b.var_of_column.size(); ++c)
        if (b.var_of_column[c] != kNoVar) column_of[b.var_of_column[c]] = c;
    for (VarIndex v = 0; v < structure.size(); ++v)
        if (column_of[v] == std::numeric_limits<std::size_t>::max())
            throw InvalidArgument("variable '" + structure.variable(v).id + "' has no data column");

    SufficientStats stats = zero_stats(structure);
    std::vector<int> assignment(structure.size());
    for (std::size_t r = 0; r < data.rows(); ++r) {
        for (VarIndex v = 0; v < structure.size(); ++v) {
            const int x = data.at(r, column_of[v]);
            if (x == kMissing)
                throw InvalidArgument("row " + std::to_string(r) + " misses '" + structure.variable(v).id +
                                      "'; complete data required");
            assignment[v] = x;
        }
        for (VarIndex v = 0; v < structure.size(); ++v) {
            const auto card = static_cast<std::size_t>(structure.cardinality(v));
            stats.counts[v][structure.row_index(v, assignment) * card + static_cast<std::size_t>(assignment[v])] +=
                1.0;
        }
    }
    return m_step(structure, stats, pseudocount);
}

Network random_parameters(const Network& structure, std::uint64_t seed) {
    Network out = structure;
    Rng rng(seed);
    for (VarIndex v = 0; v < structure.size(); ++v) {
        std::vector<double> table = structure.cpt(v).table;
        const auto card = static_cast<std::size_t>(structure.cardinality(v));
        for (std::size_t r = 0; r < table.size() / card; ++r)
            sample_flat_dirichlet(rng, std::span(table).subspan(r * card, card));
        out.set_table(v, std::move(table));
    }
    return out;
}

namespace {

double log_prior(const Network& net, double pseudocount) {
    if (pseudocount == 0.0) return 0.0;
    double s = 0.0;
    for (const Cpt& c : net.cpts())
        for (double x : c.table) s += std::log(x);
    return pseudocount * s;
}

}  // namespace

namespace {

FitResult em_run(const Network& structure, const Dataset& data, const ColumnBinding& b, const EmConfig& cfg,
                 std::uint64_t seed, Execution exec) {
    FitResult res;
    Network current = random_parameters(structure, seed);
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        const JunctionTree tree(current);
        const SufficientStats stats = expected_counts(tree, data, b, exec);
        const double objective = stats.loglik + log_prior(current, cfg.pseudocount);
        if (!std::isfinite(objective)) throw Error("non-finite log-likelihood at iteration " + std::to_string(it));
        res.ll_trace.push_back(objective);
        res.iterations_used = it;
        if (it > 1 && std::abs(objective - res.ll_trace[res.ll_trace.size() - 2]) < cfg.ll_tolerance) {
            res.converged = true;
            break;
        }
        current = m_step(structure, stats, cfg.pseudocount);
    }
    res.network = std::move(current);
    return res;
}

}  // namespace

FitResult em_fit(const Network& structure, const Dataset& data, const EmConfig& cfg, Execution exec) {
    cfg.validate();
    require_valid(structure);
    const ColumnBinding b = bind_columns(structure, data);
    latent_variables(structure, data, b);

    FitResult best;
    for (int r = 0; r < cfg.restarts; ++r) {
        const std::uint64_t seed = r == 0 ? cfg.seed : derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
        FitResult run = em_run(structure, data, b, cfg, seed, exec);
        run.restart = r;
        if (r == 0 || run.ll_trace.back() > best.ll_trace.back()) best = std::move(run);
    }
    return best;
}

Sparsity sparsity_metrics(std::span<const Network> nets) {
    if (nets.empty()) throw InvalidArgument("sparsity needs at least one network");
    Sparsity s;
    for (const Network& net : nets) {
        std::size_t zeros = 0;
        std::size_t rows = 0;
        double fraction_sum = 0.0;
        for (VarIndex v = 0; v < net.size(); ++v) {
            const auto& t = net.cpt(v).table;
            const auto card = static_cast<std::size_t>(net.cardinality(v));
            for (std::size_t r = 0; r < t.size() / card; ++r) {
                std::size_t z = 0;
                for (std::size_t k = 0; k < card; ++k) z += t[r * card + k] == 0.0 ? 1 : 0;
                zeros += z;
                fraction_sum += static_cast<double>(z) / static_cast<double>(card);
                ++rows;
            }
        }
        s.azt += static_cast<double>(zeros);
        s.as += rows ? fraction_sum / static_cast<double>(rows) : 0.0;
    }
    s.azt /= static_cast<double>(nets.size());
    s.as /= static_cast<double>(nets.size());
    return s;
}

void write_ll_trace_csv(const FitResult& fit, std::ostream& out) {
    out << "iteration,loglik\n";
    out << std::fixed << std::setprecision(9);
    for (std::size_t i = 0; i < fit.ll_trace.size(); ++i) out << i + 1 << ',' << fit.ll_trace[i] << '\n';
}

}  // namespace catbn
