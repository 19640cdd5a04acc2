#include "catbn/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace catbn {

namespace {

constexpr double kRescaleBelow = 1e-200;

using Adjacency = std::vector<std::vector<char>>;

Adjacency moral_graph(const Network& net) {
    const std::size_t n = net.size();
    Adjacency adj(n, std::vector<char>(n, 0));
    auto link = [&](VarIndex a, VarIndex b) {
        if (a == b) return;
        adj[a][b] = adj[b][a] = 1;
    };
    for (const Cpt& c : net.cpts()) {
        for (std::size_t i = 0; i < c.parents.size(); ++i) {
            link(c.child, c.parents[i]);
            for (std::size_t j = i + 1; j < c.parents.size(); ++j) link(c.parents[i], c.parents[j]);
        }
    }
    return adj;
}

// Min-fill elimination; returns the maximal elimination cliques.
std::vector<std::vector<VarIndex>> triangulate(Adjacency adj) {
    const std::size_t n = adj.size();
    std::vector<char> gone(n, 0);
    std::vector<std::vector<VarIndex>> cliques;
    for (std::size_t step = 0; step < n; ++step) {
        VarIndex best = kNoVar;
        std::size_t best_fill = 0;
        for (VarIndex v = 0; v < n; ++v) {
            if (gone[v]) continue;
            std::vector<VarIndex> nb;
            for (VarIndex u = 0; u < n; ++u)
                if (!gone[u] && adj[v][u]) nb.push_back(u);
            std::size_t fill = 0;
            for (std::size_t i = 0; i < nb.size(); ++i)
                for (std::size_t j = i + 1; j < nb.size(); ++j)
                    if (!adj[nb[i]][nb[j]]) ++fill;
            if (best == kNoVar || fill < best_fill) {
                best = v;
                best_fill = fill;
            }
        }
        std::vector<VarIndex> clique{best};
        for (VarIndex u = 0; u < n; ++u)
            if (!gone[u] && adj[best][u]) clique.push_back(u);
        for (std::size_t i = 1; i < clique.size(); ++i)
            for (std::size_t j = i + 1; j < clique.size(); ++j)
                adj[clique[i]][clique[j]] = adj[clique[j]][clique[i]] = 1;
        gone[best] = 1;
        std::sort(clique.begin(), clique.end());
        cliques.push_back(std::move(clique));
    }
    std::vector<std::vector<VarIndex>> maximal;
    for (std::size_t i = 0; i < cliques.size(); ++i) {
        bool contained = false;
        for (std::size_t j = 0; j < cliques.size() && !contained; ++j) {
            if (i == j) continue;
            const bool subset = std::includes(cliques[j].begin(), cliques[j].end(), cliques[i].begin(),
                                              cliques[i].end());
            // Equal cliques: keep the first occurrence only.
            if (subset && (cliques[j].size() > cliques[i].size() || j < i)) contained = true;
        }
        if (!contained) maximal.push_back(cliques[i]);
    }
    return maximal;
}

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[b] = a;
        return true;
    }
};

std::vector<VarIndex> intersect(const std::vector<VarIndex>& a, const std::vector<VarIndex>& b) {
    std::vector<VarIndex> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

}  // namespace

JunctionTree::JunctionTree(Network net) : net_(std::move(net)) {
    require_valid(net_);
    const std::size_t n = net_.size();
    if (n == 0) throw InvalidArgument("cannot compile an empty network");

    for (auto& vars : triangulate(moral_graph(net_))) {
        Clique c;
        c.vars = std::move(vars);
        c.strides.assign(c.vars.size(), 1);
        for (std::size_t i = c.vars.size(); i-- > 0;) {
            c.strides[i] = c.entries;
            c.entries *= static_cast<std::size_t>(net_.cardinality(c.vars[i]));
        }
        cliques_.push_back(std::move(c));
    }

    // Maximum spanning tree on separator size; zero-weight links join components.
    const std::size_t m = cliques_.size();
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> links;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            links.emplace_back(intersect(cliques_[i].vars, cliques_[j].vars).size(), i, j);
    std::stable_sort(links.begin(), links.end(),
                     [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
    UnionFind uf(m);
    std::vector<std::vector<std::size_t>> adj(m);
    for (auto [w, i, j] : links) {
        if (uf.unite(i, j)) {
            adj[i].push_back(j);
            adj[j].push_back(i);
        }
    }

    std::vector<char> seen(m, 0);
    std::vector<std::size_t> queue{0};
    seen[0] = 1;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const std::size_t p = queue[head];
        std::sort(adj[p].begin(), adj[p].end());
        for (std::size_t c : adj[p]) {
            if (seen[c]) continue;
            seen[c] = 1;
            queue.push_back(c);
            Edge e;
            e.parent = p;
            e.child = c;
            const auto sep = intersect(cliques_[p].vars, cliques_[c].vars);
            for (VarIndex v : sep) e.sep_entries *= static_cast<std::size_t>(net_.cardinality(v));
            e.parent_map = projection(cliques_[p], sep);
            e.child_map = projection(cliques_[c], sep);
            edges_.push_back(std::move(e));
        }
    }

    var_clique_.assign(n, kNoVar);
    for (VarIndex v = 0; v < n; ++v) {
        const VarIndex one[] = {v};
        var_clique_[v] = *clique_containing(one);
    }

    initial_.resize(m);
    for (std::size_t c = 0; c < m; ++c) initial_[c].assign(cliques_[c].entries, 1.0);
    home_.assign(n, 0);
    family_map_.resize(n);
    for (VarIndex v = 0; v < n; ++v) {
        const Cpt& cpt = net_.cpt(v);
        std::vector<VarIndex> fam = cpt.parents;
        fam.push_back(v);
        auto home = clique_containing(fam);
        if (!home) throw Error("internal: family of '" + net_.variable(v).id + "' not covered by a clique");
        home_[v] = *home;
        family_map_[v] = projection(cliques_[*home], fam);
        auto& pot = initial_[*home];
        for (std::size_t i = 0; i < pot.size(); ++i) pot[i] *= cpt.table[family_map_[v][i]];
    }
}

std::size_t JunctionTree::position(const Clique& c, VarIndex v) const {
    auto it = std::lower_bound(c.vars.begin(), c.vars.end(), v);
    return static_cast<std::size_t>(it - c.vars.begin());
}

int JunctionTree::state_in(const Clique& c, VarIndex v, std::size_t entry) const {
    const std::size_t k = position(c, v);
    return static_cast<int>((entry / c.strides[k]) % static_cast<std::size_t>(net_.cardinality(v)));
}

std::vector<std::uint32_t> JunctionTree::projection(const Clique& c, std::span<const VarIndex> sub) const {
    // Stride of each clique variable inside the sub-table (0 when absent).
    std::vector<std::size_t> sub_stride(c.vars.size(), 0);
    std::size_t s = 1;
    for (std::size_t i = sub.size(); i-- > 0;) {
        sub_stride[position(c, sub[i])] = s;
        s *= static_cast<std::size_t>(net_.cardinality(sub[i]));
    }
    std::vector<std::uint32_t> map(c.entries);
    std::vector<int> digit(c.vars.size(), 0);
    std::size_t target = 0;
    for (std::size_t e = 0; e < c.entries; ++e) {
        map[e] = static_cast<std::uint32_t>(target);
        for (std::size_t k = c.vars.size(); k-- > 0;) {
            const int card = net_.cardinality(c.vars[k]);
            if (++digit[k] < card) {
                target += sub_stride[k];
                break;
            }
            target -= sub_stride[k] * static_cast<std::size_t>(card - 1);
            digit[k] = 0;
        }
    }
    return map;
}

std::optional<std::size_t> JunctionTree::clique_containing(std::span<const VarIndex> vars) const {
    std::vector<VarIndex> want(vars.begin(), vars.end());
    std::sort(want.begin(), want.end());
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < cliques_.size(); ++c) {
        const auto& cv = cliques_[c].vars;
        if (!std::includes(cv.begin(), cv.end(), want.begin(), want.end())) continue;
        if (!best || cliques_[c].entries < cliques_[*best].entries) best = c;
    }
    return best;
}

std::size_t JunctionTree::total_entries() const noexcept {
    std::size_t t = 0;
    for (const auto& c : cliques_) t += c.entries;
    return t;
}

Beliefs JunctionTree::calibrate(const Evidence& e) const {
    Beliefs b;
    calibrate(e, b);
    return b;
}

void JunctionTree::calibrate(const Evidence& e, Beliefs& out) const {
    check_evidence(net_, e);
    out.tree_ = this;
    out.potentials_ = initial_;
    out.separators_.resize(edges_.size());
    double log_z = 0.0;
    auto& pot = out.potentials_;

    for (auto [v, s] : e) {
        const std::size_t c = var_clique_[v];
        const Clique& cl = cliques_[c];
        const std::size_t k = position(cl, v);
        const auto card = static_cast<std::size_t>(net_.cardinality(v));
        for (std::size_t i = 0; i < cl.entries; ++i)
            if ((i / cl.strides[k]) % card != static_cast<std::size_t>(s)) pot[c][i] = 0.0;
    }

    auto normalize = [&](std::vector<double>& p) {
        double z = 0.0;
        for (double x : p) z += x;
        if (!(z > 0.0)) throw ImpossibleEvidence("evidence has zero probability under the model");
        const double inv = 1.0 / z;
        for (double& x : p) x *= inv;
        log_z += std::log(z);
    };

    // Collect towards the root.
    for (std::size_t k = edges_.size(); k-- > 0;) {
        const Edge& ed = edges_[k];
        auto& child = pot[ed.child];
        normalize(child);
        auto& sep = out.separators_[k];
        sep.assign(ed.sep_entries, 0.0);
        for (std::size_t i = 0; i < child.size(); ++i) sep[ed.child_map[i]] += child[i];
        auto& parent = pot[ed.parent];
        double mass = 0.0;
        for (std::size_t i = 0; i < parent.size(); ++i) {
            parent[i] *= sep[ed.parent_map[i]];
            mass += parent[i];
        }
        if (mass > 0.0 && mass < kRescaleBelow) normalize(parent);
    }
    normalize(pot[0]);

    // Distribute from the root.
    std::vector<double> fresh;
    for (std::size_t k = 0; k < edges_.size(); ++k) {
        const Edge& ed = edges_[k];
        const auto& parent = pot[ed.parent];
        fresh.assign(ed.sep_entries, 0.0);
        for (std::size_t i = 0; i < parent.size(); ++i) fresh[ed.parent_map[i]] += parent[i];
        auto& old = out.separators_[k];
        for (std::size_t j = 0; j < fresh.size(); ++j) old[j] = old[j] > 0.0 ? fresh[j] / old[j] : 0.0;
        auto& child = pot[ed.child];
        double z = 0.0;
        for (std::size_t i = 0; i < child.size(); ++i) {
            child[i] *= old[ed.child_map[i]];
            z += child[i];
        }
        if (z > 0.0)
            for (double& x : child) x /= z;
        old.swap(fresh);  // separators end up holding calibrated marginals
    }
    out.log_evidence_ = log_z;
}

Distribution Beliefs::marginal(VarIndex v) const {
    const JunctionTree& t = *tree_;
    const auto& net = t.net_;
    if (v >= net.size()) throw UnknownVariable("#" + std::to_string(v));
    const std::size_t c = t.var_clique_[v];
    const auto& cl = t.cliques_[c];
    const std::size_t k = t.position(cl, v);
    const auto card = static_cast<std::size_t>(net.cardinality(v));
    Distribution d{v, std::vector<double>(card, 0.0)};
    const auto& pot = potentials_[c];
    for (std::size_t i = 0; i < pot.size(); ++i) d.p[(i / cl.strides[k]) % card] += pot[i];
    double z = 0.0;
    for (double x : d.p) z += x;
    for (double& x : d.p) x /= z;
    return d;
}

bool Beliefs::has_joint(std::span<const VarIndex> vars) const {
    return tree_->clique_containing(vars).has_value();
}

std::vector<double> Beliefs::joint(std::span<const VarIndex> vars) const {
    const JunctionTree& t = *tree_;
    auto c = t.clique_containing(vars);
    if (!c) throw InvalidArgument("requested variables do not share a clique");
    const auto map = t.projection(t.cliques_[*c], vars);
    std::size_t size = 1;
    for (VarIndex v : vars) size *= static_cast<std::size_t>(t.net_.cardinality(v));
    std::vector<double> out(size, 0.0);
    const auto& pot = potentials_[*c];
    for (std::size_t i = 0; i < pot.size(); ++i) out[map[i]] += pot[i];
    double z = 0.0;
    for (double x : out) z += x;
    for (double& x : out) x /= z;
    return out;
}

std::vector<double> Beliefs::family(VarIndex v) const {
    std::vector<double> out(tree_->net_.cpt(v).table.size(), 0.0);
    accumulate_family(v, out, 1.0);
    return out;
}

void Beliefs::accumulate_family(VarIndex v, std::span<double> acc, double weight) const {
    const JunctionTree& t = *tree_;
    const auto& pot = potentials_[t.home_[v]];
    const auto& map = t.family_map_[v];
    double z = 0.0;
    for (double x : pot) z += x;
    // Divide per entry so a fully observed family contributes exactly `weight`.
    for (std::size_t i = 0; i < pot.size(); ++i)
        if (pot[i] != 0.0) acc[map[i]] += weight * (pot[i] / z);
}

std::vector<Distribution> posterior_marginals(const JunctionTree& tree, const Evidence& e,
                                              std::span<const VarIndex> targets) {
    for (VarIndex v : targets)
        if (v >= tree.network().size()) throw UnknownVariable("#" + std::to_string(v));
    const Beliefs b = tree.calibrate(e);
    std::vector<Distribution> out;
    out.reserve(targets.size());
    for (VarIndex v : targets) out.push_back(b.marginal(v));
    return out;
}

std::vector<Distribution> posterior_marginals(const Network& net, const Evidence& e,
                                              std::span<const VarIndex> targets) {
    return posterior_marginals(JunctionTree(net), e, targets);
}

}  // namespace catbn
