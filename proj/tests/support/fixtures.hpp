#ifndef CATBN_TESTS_FIXTURES_HPP
#define CATBN_TESTS_FIXTURES_HPP

#include "catbn/dataset.hpp"
#include "catbn/network.hpp"
#include "catbn/random.hpp"

namespace catbn::fixtures {

// S -> X with P(S=1) = 0.6, P(X=1|S=1) = 0.9, P(X=1|S=2) = 0.2 (1-based
// labels; index 0 internally).
inline Network two_node(double prior = 0.6, double hit1 = 0.9, double hit2 = 0.2) {
    Network net;
    Variable s;
    s.id = "S";
    s.role = Role::skill;
    const VarIndex sv = net.add_variable(s);
    Variable x;
    x.id = "X";
    x.role = Role::question;
    x.scale = Scale::boolean;
    const VarIndex xv = net.add_variable(x);
    net.set_table(sv, {prior, 1.0 - prior});
    net.set_parents(xv, {sv});
    net.set_table(xv, {hit1, 1.0 - hit1, hit2, 1.0 - hit2});
    return net;
}

inline Dataset columns_for(const Network& net) {
    Dataset ds;
    for (const Variable& v : net.variables())
        ds.columns.push_back({v.id, v.role == Role::question ? ColumnKind::question : ColumnKind::info, v.cardinality,
                              v.cardinality - 1});
    return ds;
}

// Complete samples of every variable.
inline Dataset sample_complete(const Network& net, std::size_t n, std::uint64_t seed) {
    Dataset ds = columns_for(net);
    Rng rng(seed);
    const auto order = net.topological_order();
    std::vector<int> x(net.size());
    for (std::size_t r = 0; r < n; ++r) {
        for (VarIndex v : order) {
            const auto c = static_cast<std::size_t>(net.cardinality(v));
            x[v] = sample_categorical(rng, std::span(net.cpt(v).table).subspan(net.row_index(v, x) * c, c));
        }
        ds.add_row("r" + std::to_string(r), x);
    }
    return ds;
}

}  // namespace catbn::fixtures

#endif
