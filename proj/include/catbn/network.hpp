#ifndef CATBN_NETWORK_HPP
#define CATBN_NETWORK_HPP

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "catbn/error.hpp"

namespace catbn {

using VarIndex = std::size_t;
inline constexpr VarIndex kNoVar = std::numeric_limits<VarIndex>::max();

enum class Role { skill, question, info, scoregroup };
enum class Scale { boolean, points };

std::string_view to_string(Role role);
std::string_view to_string(Scale scale);
Role role_from_string(std::string_view s);
Scale scale_from_string(std::string_view s);

/// Skills and score groups are the estimation targets of a session.
inline bool is_target_role(Role r) { return r == Role::skill || r == Role::scoregroup; }

struct Variable {
    std::string id;
    std::string name;
    int cardinality = 2;
    Role role = Role::skill;
    std::vector<std::string> states;
    std::optional<Scale> scale;  // questions only
};

/// P(child | parents). Rows enumerate parent configurations with the first
/// parent most significant; each row holds `cardinality(child)` entries.
struct Cpt {
    VarIndex child = kNoVar;
    std::vector<VarIndex> parents;
    std::vector<double> table;

    std::size_t row_count(std::size_t child_card) const {
        return child_card == 0 ? 0 : table.size() / child_card;
    }
};

/// Discrete Bayesian network. Variables are addressed by dense index; string
/// ids are kept for I/O. Every variable owns exactly one Cpt.
class Network {
public:
    /// Adds a variable with a parentless uniform Cpt. Throws on duplicate id.
    VarIndex add_variable(Variable v);

    /// Replaces the parent list of `child` and resets its table to uniform.
    void set_parents(VarIndex child, std::vector<VarIndex> parents);

    /// Installs a full Cpt without checking it; see validate_network.
    void set_cpt(Cpt cpt);

    void set_table(VarIndex child, std::vector<double> table);

    std::size_t size() const noexcept { return vars_.size(); }
    const Variable& variable(VarIndex v) const { return vars_.at(v); }
    const std::vector<Variable>& variables() const noexcept { return vars_; }
    const Cpt& cpt(VarIndex v) const { return cpts_.at(v); }
    const std::vector<Cpt>& cpts() const noexcept { return cpts_; }
    int cardinality(VarIndex v) const { return vars_.at(v).cardinality; }

    std::optional<VarIndex> find(std::string_view id) const;
    /// Throws UnknownVariable.
    VarIndex index_of(std::string_view id) const;

    std::vector<VarIndex> with_role(Role role) const;
    /// Skill and scoregroup variables, in index order.
    std::vector<VarIndex> targets() const;
    std::vector<VarIndex> children(VarIndex v) const;
    std::size_t edge_count() const;

    /// Kahn order with smallest-index-first tie-break. Throws Error on a cycle.
    std::vector<VarIndex> topological_order() const;

    /// Row of `child`'s table addressed by a full assignment of all variables.
    std::size_t row_index(VarIndex child, std::span<const int> assignment) const;

private:
    std::vector<Variable> vars_;
    std::vector<Cpt> cpts_;
    std::unordered_map<std::string, VarIndex> index_;
};

/// Observed states, 0-based. Ordered by variable index so iteration is stable.
class Evidence {
public:
    Evidence() = default;

    void set(VarIndex v, int state) { values_[v] = state; }
    void erase(VarIndex v) { values_.erase(v); }
    bool contains(VarIndex v) const { return values_.count(v) != 0; }
    std::optional<int> get(VarIndex v) const;
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    auto begin() const { return values_.begin(); }
    auto end() const { return values_.end(); }

    Evidence with(VarIndex v, int state) const {
        Evidence e = *this;
        e.set(v, state);
        return e;
    }

    bool operator==(const Evidence&) const = default;

private:
    std::map<VarIndex, int> values_;
};

/// Throws UnknownVariable / InvalidArgument for ids out of range or states
/// out of range.
void check_evidence(const Network& net, const Evidence& e);

struct Distribution {
    VarIndex variable = kNoVar;
    std::vector<double> p;

    std::size_t argmax() const;  // lowest index on ties
};

enum class ViolationKind { cycle, row_sum, shape, dangling_parent, bad_cardinality, bad_entry };

struct Violation {
    ViolationKind kind;
    std::vector<std::string> variables;
    std::optional<std::size_t> row;
    double deficit = 0.0;  // 1 - row sum, for row_sum violations
    std::string message;
};

struct ValidationResult {
    std::vector<Violation> violations;
    bool ok() const noexcept { return violations.empty(); }
    std::string summary() const;
};

inline constexpr double kRowSumTolerance = 1e-9;

ValidationResult validate_network(const Network& net);

/// Throws Error carrying the validation summary.
void require_valid(const Network& net);

}  // namespace catbn

#endif
