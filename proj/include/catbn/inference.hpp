#ifndef CATBN_INFERENCE_HPP
#define CATBN_INFERENCE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "catbn/network.hpp"

namespace catbn {

class Beliefs;

/// Exact inference by clique-tree propagation.
///
/// Compilation moralizes the DAG, triangulates it with a min-fill
/// elimination order (ties broken by lowest variable index) and joins the
/// maximal cliques with a maximum-weight spanning tree over separator sizes.
/// Disconnected components are linked through empty separators so one
/// calibration covers the whole network.
///
/// Potentials are kept in linear space. Each clique is renormalized before it
/// sends a message and the normalizers are accumulated as ln P(e); absorbing
/// clique potentials are rescaled whenever their mass drops below 1e-200, so
/// underflow needs a single message entry below ~1e-108 which CPT entries of
/// any fitted model never produce.
///
/// The tree is immutable after construction and may be shared by concurrent
/// readers; all per-query state lives in Beliefs.
class JunctionTree {
public:
    /// Throws Error when the network fails validation.
    explicit JunctionTree(Network net);

    const Network& network() const noexcept { return net_; }

    /// Throws ImpossibleEvidence when P(e) = 0.
    Beliefs calibrate(const Evidence& e) const;
    void calibrate(const Evidence& e, Beliefs& out) const;

    std::size_t clique_count() const noexcept { return cliques_.size(); }
    std::span<const VarIndex> clique(std::size_t c) const { return cliques_.at(c).vars; }
    /// Smallest clique containing all of `vars`.
    std::optional<std::size_t> clique_containing(std::span<const VarIndex> vars) const;
    std::size_t total_entries() const noexcept;

private:
    friend class Beliefs;

    struct Clique {
        std::vector<VarIndex> vars;  // ascending
        std::vector<std::size_t> strides;
        std::size_t entries = 1;
    };
    struct Edge {
        std::size_t parent = 0;
        std::size_t child = 0;
        std::size_t sep_entries = 1;
        std::vector<std::uint32_t> parent_map;  // clique entry -> separator entry
        std::vector<std::uint32_t> child_map;
    };

    std::vector<std::uint32_t> projection(const Clique& c, std::span<const VarIndex> sub) const;
    int state_in(const Clique& c, VarIndex v, std::size_t entry) const;
    std::size_t position(const Clique& c, VarIndex v) const;

    Network net_;
    std::vector<Clique> cliques_;
    std::vector<Edge> edges_;  // breadth-first from the root clique 0
    std::vector<std::vector<double>> initial_;
    std::vector<std::size_t> home_;                        // clique holding each family
    std::vector<std::vector<std::uint32_t>> family_map_;  // home clique entry -> cpt index
    std::vector<std::size_t> var_clique_;                  // smallest clique holding each var
};

/// Calibrated clique beliefs for one evidence set.
class Beliefs {
public:
    Beliefs() = default;

    /// ln P(e).
    double log_evidence() const noexcept { return log_evidence_; }

    Distribution marginal(VarIndex v) const;

    /// P(vars | e) with the first listed variable most significant. Requires
    /// the variables to share a clique; throws InvalidArgument otherwise.
    std::vector<double> joint(std::span<const VarIndex> vars) const;
    bool has_joint(std::span<const VarIndex> vars) const;

    /// P(v, parents(v) | e) laid out exactly like v's Cpt table.
    std::vector<double> family(VarIndex v) const;
    /// Adds weight * P(v, parents(v) | e) into `acc` (Cpt layout).
    void accumulate_family(VarIndex v, std::span<double> acc, double weight = 1.0) const;

    const JunctionTree& tree() const { return *tree_; }

private:
    friend class JunctionTree;
    const JunctionTree* tree_ = nullptr;
    std::vector<std::vector<double>> potentials_;
    std::vector<std::vector<double>> separators_;
    double log_evidence_ = 0.0;
};

std::vector<Distribution> posterior_marginals(const JunctionTree& tree, const Evidence& e,
                                              std::span<const VarIndex> targets);
/// Compiles a fresh tree per call; prefer the JunctionTree overload in loops.
std::vector<Distribution> posterior_marginals(const Network& net, const Evidence& e,
                                              std::span<const VarIndex> targets);

}  // namespace catbn

#endif
