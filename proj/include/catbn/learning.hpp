#ifndef CATBN_LEARNING_HPP
#define CATBN_LEARNING_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "catbn/dataset.hpp"
#include "catbn/inference.hpp"
#include "catbn/network.hpp"

namespace catbn {

enum class Execution { parallel, serial };

struct EmConfig {
    int max_iterations = 100;
    double ll_tolerance = 1e-4;  // absolute change of the traced objective
    double pseudocount = 0.0;
    std::uint64_t seed = 1;
    /// Independent random starts; the fit with the highest final objective is
    /// kept (earliest on ties). Start r > 0 uses derive_seed(seed, r).
    int restarts = 1;

    /// Throws InvalidArgument.
    void validate() const;
};

struct FitResult {
    Network network;
    int iterations_used = 0;
    /// Objective at the start of each iteration: the data log-likelihood,
    /// plus pseudocount * sum(ln theta) when smoothing is on (the quantity
    /// EM ascends in that case).
    std::vector<double> ll_trace;
    bool converged = false;
    int restart = 0;  // which start produced this fit
};

/// Expected (or, for complete data, exact) family counts in Cpt layout.
struct SufficientStats {
    std::vector<std::vector<double>> counts;
    double loglik = 0.0;
};

/// Variables the data never observes and that may legitimately stay hidden
/// (skill and scoregroup roles). Throws InvalidArgument for an unbound
/// observed-role variable or an all-missing non-latent column.
std::vector<VarIndex> latent_variables(const Network& net, const Dataset& data, const ColumnBinding& b);

/// E-step. The parallel path splits rows into at most 64 fixed blocks and
/// merges block sums in block order, so its result does not depend on the
/// thread count; it differs from the serial reference only by summation
/// order. Throws Error naming the first row with zero probability.
SufficientStats expected_counts(const JunctionTree& tree, const Dataset& data, const ColumnBinding& b,
                                Execution exec = Execution::parallel);

/// Row-normalizes counts: (n + a) / (N + a * card); rows with N + a = 0
/// become uniform.
Network m_step(const Network& structure, const SufficientStats& stats, double pseudocount);

/// Closed-form maximum likelihood for fully observed data.
Network fit_complete(const Network& structure, const Dataset& data, double pseudocount);

/// Every Cpt row drawn from a flat Dirichlet.
Network random_parameters(const Network& structure, std::uint64_t seed);

FitResult em_fit(const Network& structure, const Dataset& data, const EmConfig& cfg,
                 Execution exec = Execution::parallel);

struct Sparsity {
    double azt = 0.0;  // mean count of zero entries per network
    double as = 0.0;   // mean over networks of the mean per-row zero fraction
};

/// Throws InvalidArgument on an empty list.
Sparsity sparsity_metrics(std::span<const Network> nets);

/// "iteration,loglik" with 1-based iterations.
void write_ll_trace_csv(const FitResult& fit, std::ostream& out);

}  // namespace catbn

#endif
