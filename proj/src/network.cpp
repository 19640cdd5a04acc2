#include "catbn/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

namespace catbn {

std::string_view to_string(Role role) {
    switch (role) {
        case Role::skill: return "skill";
        case Role::question: return "question";
        case Role::info: return "info";
        case Role::scoregroup: return "scoregroup";
    }
    return "?";
}

std::string_view to_string(Scale scale) {
    return scale == Scale::boolean ? "boolean" : "points";
}

Role role_from_string(std::string_view s) {
    if (s == "skill") return Role::skill;
    if (s == "question") return Role::question;
    if (s == "info") return Role::info;
    if (s == "scoregroup") return Role::scoregroup;
    throw ParseError("unknown role '" + std::string(s) + "'");
}

Scale scale_from_string(std::string_view s) {
    if (s == "boolean") return Scale::boolean;
    if (s == "points") return Scale::points;
    throw ParseError("unknown scale '" + std::string(s) + "'");
}

namespace {

std::vector<double> uniform_table(std::size_t rows, int card) {
    return std::vector<double>(rows * static_cast<std::size_t>(card), 1.0 / card);
}

}  // namespace

VarIndex Network::add_variable(Variable v) {
    if (v.cardinality < 2) throw InvalidArgument("variable '" + v.id + "' needs cardinality >= 2");
    if (index_.count(v.id)) throw InvalidArgument("duplicate variable id '" + v.id + "'");
    if (v.states.empty()) {
        for (int s = 0; s < v.cardinality; ++s) v.states.push_back(std::to_string(s + 1));
    }
    if (static_cast<int>(v.states.size()) != v.cardinality)
        throw InvalidArgument("variable '" + v.id + "' state label count differs from cardinality");
    if (v.name.empty()) v.name = v.id;
    const VarIndex idx = vars_.size();
    index_.emplace(v.id, idx);
    Cpt cpt;
    cpt.child = idx;
    cpt.table = uniform_table(1, v.cardinality);
    vars_.push_back(std::move(v));
    cpts_.push_back(std::move(cpt));
    return idx;
}

void Network::set_parents(VarIndex child, std::vector<VarIndex> parents) {
    std::size_t rows = 1;
    for (VarIndex p : parents) rows *= static_cast<std::size_t>(cardinality(p));
    Cpt& cpt = cpts_.at(child);
    cpt.parents = std::move(parents);
    cpt.table = uniform_table(rows, cardinality(child));
}

void Network::set_cpt(Cpt cpt) {
    const VarIndex child = cpt.child;
    cpts_.at(child) = std::move(cpt);
}

void Network::set_table(VarIndex child, std::vector<double> table) {
    Cpt& cpt = cpts_.at(child);
    if (table.size() != cpt.table.size())
        throw InvalidArgument("table size mismatch for '" + vars_.at(child).id + "'");
    cpt.table = std::move(table);
}

std::optional<VarIndex> Network::find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

VarIndex Network::index_of(std::string_view id) const {
    if (auto v = find(id)) return *v;
    throw UnknownVariable(std::string(id));
}

std::vector<VarIndex> Network::with_role(Role role) const {
    std::vector<VarIndex> out;
    for (VarIndex v = 0; v < vars_.size(); ++v)
        if (vars_[v].role == role) out.push_back(v);
    return out;
}

std::vector<VarIndex> Network::targets() const {
    std::vector<VarIndex> out;
    for (VarIndex v = 0; v < vars_.size(); ++v)
        if (is_target_role(vars_[v].role)) out.push_back(v);
    return out;
}

std::vector<VarIndex> Network::children(VarIndex v) const {
    std::vector<VarIndex> out;
    for (const Cpt& c : cpts_)
        if (std::find(c.parents.begin(), c.parents.end(), v) != c.parents.end()) out.push_back(c.child);
    return out;
}

std::size_t Network::edge_count() const {
    std::size_t n = 0;
    for (const Cpt& c : cpts_) n += c.parents.size();
    return n;
}

std::vector<VarIndex> Network::topological_order() const {
    const std::size_t n = vars_.size();
    std::vector<std::size_t> indegree(n, 0);
    std::vector<std::vector<VarIndex>> kids(n);
    for (const Cpt& c : cpts_) {
        for (VarIndex p : c.parents) {
            if (p >= n) throw Error("dangling parent of '" + vars_.at(c.child).id + "'");
            kids[p].push_back(c.child);
            ++indegree[c.child];
        }
    }
    std::priority_queue<VarIndex, std::vector<VarIndex>, std::greater<>> ready;
    for (VarIndex v = 0; v < n; ++v)
        if (indegree[v] == 0) ready.push(v);
    std::vector<VarIndex> order;
    order.reserve(n);
    while (!ready.empty()) {
        VarIndex v = ready.top();
        ready.pop();
        order.push_back(v);
        for (VarIndex k : kids[v])
            if (--indegree[k] == 0) ready.push(k);
    }
    if (order.size() != n) throw Error("network contains a directed cycle");
    return order;
}

std::size_t Network::row_index(VarIndex child, std::span<const int> assignment) const {
    std::size_t row = 0;
    for (VarIndex p : cpts_.at(child).parents)
        row = row * static_cast<std::size_t>(cardinality(p)) + static_cast<std::size_t>(assignment[p]);
    return row;
}

std::optional<int> Evidence::get(VarIndex v) const {
    auto it = values_.find(v);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

void check_evidence(const Network& net, const Evidence& e) {
    for (auto [v, s] : e) {
        if (v >= net.size()) throw UnknownVariable("#" + std::to_string(v));
        if (s < 0 || s >= net.cardinality(v))
            throw InvalidArgument("state " + std::to_string(s) + " out of range for '" + net.variable(v).id + "'");
    }
}

std::size_t Distribution::argmax() const {
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

namespace {

// Finds one directed cycle among the variables left after Kahn peeling.
std::vector<VarIndex> find_cycle(const Network& net) {
    const std::size_t n = net.size();
    std::vector<std::vector<VarIndex>> kids(n);
    for (const Cpt& c : net.cpts())
        for (VarIndex p : c.parents)
            if (p < n && c.child < n) kids[p].push_back(c.child);
    enum { white, grey, black };
    std::vector<int> colour(n, white);
    std::vector<VarIndex> parent(n, kNoVar);
    for (VarIndex start = 0; start < n; ++start) {
        if (colour[start] != white) continue;
        std::vector<std::pair<VarIndex, std::size_t>> stack{{start, 0}};
        colour[start] = grey;
        while (!stack.empty()) {
            auto& [v, next] = stack.back();
            if (next < kids[v].size()) {
                VarIndex k = kids[v][next++];
                if (colour[k] == grey) {
                    std::vector<VarIndex> cycle{k};
                    for (VarIndex u = v; u != k; u = parent[u]) cycle.push_back(u);
                    std::sort(cycle.begin(), cycle.end());
                    return cycle;
                }
                if (colour[k] == white) {
                    colour[k] = grey;
                    parent[k] = v;
                    stack.emplace_back(k, 0);
                }
            } else {
                colour[v] = black;
                stack.pop_back();
            }
        }
    }
    return {};
}

}  // namespace

ValidationResult validate_network(const Network& net) {
    ValidationResult res;
    const std::size_t n = net.size();
    auto add = [&](ViolationKind k, std::vector<std::string> vars, std::optional<std::size_t> row,
                   std::string msg, double deficit = 0.0) {
        res.violations.push_back({k, std::move(vars), row, deficit, std::move(msg)});
    };

    for (VarIndex v = 0; v < n; ++v) {
        const Variable& var = net.variable(v);
        if (var.cardinality < 2)
            add(ViolationKind::bad_cardinality, {var.id}, std::nullopt, "cardinality below 2");
        if (static_cast<int>(var.states.size()) != var.cardinality)
            add(ViolationKind::shape, {var.id}, std::nullopt, "state label count differs from cardinality");
    }

    bool dangling = false;
    for (VarIndex v = 0; v < n; ++v) {
        const Cpt& c = net.cpt(v);
        const std::string& id = net.variable(v).id;
        if (c.child != v) {
            add(ViolationKind::shape, {id}, std::nullopt, "cpt child index does not match its slot");
            continue;
        }
        std::size_t rows = 1;
        bool ok = true;
        for (VarIndex p : c.parents) {
            if (p >= n) {
                add(ViolationKind::dangling_parent, {id}, std::nullopt,
                    "parent #" + std::to_string(p) + " does not exist");
                ok = false;
                dangling = true;
                continue;
            }
            rows *= static_cast<std::size_t>(net.cardinality(p));
        }
        if (!ok) continue;
        const auto card = static_cast<std::size_t>(net.cardinality(v));
        if (c.table.size() != rows * card) {
            add(ViolationKind::shape, {id}, std::nullopt,
                "table has " + std::to_string(c.table.size()) + " entries, expected " +
                    std::to_string(rows * card));
            continue;
        }
        for (std::size_t r = 0; r < rows; ++r) {
            double sum = 0.0;
            bool entries_ok = true;
            for (std::size_t s = 0; s < card; ++s) {
                const double x = c.table[r * card + s];
                if (!(x >= 0.0 && x <= 1.0)) entries_ok = false;
                sum += x;
            }
            if (!entries_ok)
                add(ViolationKind::bad_entry, {id}, r, "entry outside [0,1]");
            if (!(std::abs(sum - 1.0) <= kRowSumTolerance)) {
                std::ostringstream msg;
                msg << "row sums to " << sum;
                add(ViolationKind::row_sum, {id}, r, msg.str(), 1.0 - sum);
            }
        }
    }

    if (!dangling) {
        auto cycle = find_cycle(net);
        if (!cycle.empty()) {
            std::vector<std::string> ids;
            for (VarIndex v : cycle) ids.push_back(net.variable(v).id);
            add(ViolationKind::cycle, ids, std::nullopt, "directed cycle");
        }
    }
    return res;
}

std::string ValidationResult::summary() const {
    std::ostringstream out;
    for (const Violation& v : violations) {
        out << v.message << " [";
        for (std::size_t i = 0; i < v.variables.size(); ++i) out << (i ? "," : "") << v.variables[i];
        out << "]";
        if (v.row) out << " row " << *v.row;
        out << "\n";
    }
    return out.str();
}

void require_valid(const Network& net) {
    auto res = validate_network(net);
    if (!res.ok()) throw Error("invalid network:\n" + res.summary());
}

}  // namespace catbn
