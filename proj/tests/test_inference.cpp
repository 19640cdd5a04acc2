#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "catbn/inference.hpp"
#include "catbn/likelihood.hpp"
#include "support/fixtures.hpp"
#include "support/oracle.hpp"

using namespace catbn;

TEST(PosteriorMarginals, TwoNodeWorkedExample) {
    const Network net = fixtures::two_node();
    Evidence e;
    e.set(net.index_of("X"), 0);
    const VarIndex target[] = {net.index_of("S")};
    const auto post = posterior_marginals(net, e, target);
    // 0.6*0.9 / (0.6*0.9 + 0.4*0.2), confirmed by enumeration below.
    EXPECT_NEAR(post[0].p[0], 0.54 / 0.62, 1e-12);
    EXPECT_NEAR(post[0].p[0], 0.87097, 1e-5);
    EXPECT_NEAR(oracle::enumerate(net, e).marginals[0][0], post[0].p[0], 1e-12);
}

TEST(PosteriorMarginals, NoEvidenceReturnsPrior) {
    const Network net = fixtures::two_node();
    const VarIndex target[] = {0};
    EXPECT_NEAR(posterior_marginals(net, {}, target)[0].p[0], 0.6, 1e-12);
}

TEST(PosteriorMarginals, IndependentChildLeavesPriorUnchanged) {
    const Network net = fixtures::two_node(0.6, 0.7, 0.7);
    Evidence e;
    e.set(1, 0);
    const VarIndex target[] = {0};
    EXPECT_NEAR(posterior_marginals(net, e, target)[0].p[0], 0.6, 1e-12);
}

TEST(PosteriorMarginals, ImpossibleEvidenceIsAnError) {
    const Network net = fixtures::two_node(1.0, 1.0, 0.5);
    Evidence e;
    e.set(1, 1);  // X=2 impossible when S=1 surely and P(X=1|S=1)=1
    const VarIndex target[] = {0};
    EXPECT_THROW(posterior_marginals(net, e, target), ImpossibleEvidence);
}

TEST(PosteriorMarginals, UnknownTargetIsAnError) {
    const Network net = fixtures::two_node();
    const VarIndex target[] = {7};
    EXPECT_THROW(posterior_marginals(net, {}, target), UnknownVariable);
}

TEST(PosteriorMarginals, RepeatedCallsAreBitIdentical) {
    std::mt19937_64 rng(5);
    const Network net = oracle::random_network(rng);
    const JunctionTree tree(net);
    const Evidence e = oracle::random_evidence(rng, net, 0.2);
    std::vector<VarIndex> all(net.size());
    std::iota(all.begin(), all.end(), 0);
    try {
        const auto a = posterior_marginals(tree, e, all);
        const auto b = posterior_marginals(tree, e, all);
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].p, b[i].p);
    } catch (const ImpossibleEvidence&) {
        GTEST_SKIP();
    }
}

// Property: random DAGs with deterministic zeros match joint enumeration.
TEST(PosteriorMarginals, MatchesEnumerationOnRandomNetworks) {
    std::mt19937_64 rng(2024);
    oracle::RandomNetOptions opt;
    opt.max_vars = 9;
    opt.zero_probability = 0.15;
    int impossible = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const Network net = oracle::random_network(rng, opt);
        const JunctionTree tree(net);
        for (int k = 0; k < 5; ++k) {
            const Evidence e = oracle::random_evidence(rng, net);
            const auto truth = oracle::enumerate(net, e);
            if (truth.evidence_probability == 0.0) {
                EXPECT_THROW(tree.calibrate(e), ImpossibleEvidence);
                ++impossible;
                continue;
            }
            const Beliefs b = tree.calibrate(e);
            EXPECT_NEAR(b.log_evidence(), std::log(truth.evidence_probability), 1e-9);
            for (VarIndex v = 0; v < net.size(); ++v) {
                const auto m = b.marginal(v);
                double sum = 0.0;
                for (std::size_t s = 0; s < m.p.size(); ++s) {
                    EXPECT_NEAR(m.p[s], truth.marginals[v][s], 1e-9);
                    // Support: no mass on states the evidence rules out.
                    if (truth.marginals[v][s] == 0.0) EXPECT_EQ(m.p[s], 0.0);
                    sum += m.p[s];
                }
                EXPECT_NEAR(sum, 1.0, 1e-9);
            }
        }
    }
    EXPECT_GT(impossible, 0);  // the generator does exercise zero-probability evidence
}

TEST(Beliefs, FamilyAndPairJointsMatchEnumeration) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const Network net = oracle::random_network(rng);
        const JunctionTree tree(net);
        const Evidence e = oracle::random_evidence(rng, net, 0.2);
        if (oracle::enumerate(net, e).evidence_probability == 0.0) continue;
        const Beliefs b = tree.calibrate(e);
        for (VarIndex v = 0; v < net.size(); ++v) {
            const auto fam = b.family(v);
            std::vector<double> expect(fam.size(), 0.0);
            double z = 0.0;
            oracle::for_each_assignment(net, [&](const std::vector<int>& x) {
                for (auto [u, s] : e)
                    if (x[u] != s) return;
                const double p = oracle::joint_probability(net, x);
                expect[net.row_index(v, x) * net.cardinality(v) + x[v]] += p;
                z += p;
            });
            for (std::size_t i = 0; i < fam.size(); ++i) EXPECT_NEAR(fam[i], expect[i] / z, 1e-9);
            for (VarIndex p : net.cpt(v).parents) {
                const VarIndex pair[] = {v, p};
                if (!b.has_joint(pair)) continue;
                const auto j = b.joint(pair);
                const auto ref = oracle::pair_joint(net, e, v, p);
                for (std::size_t i = 0; i < j.size(); ++i) EXPECT_NEAR(j[i], ref[i], 1e-9);
            }
        }
    }
}

TEST(JunctionTree, DisconnectedComponentsAndSingleVariable) {
    Network net;
    const VarIndex a = net.add_variable({"A", "", 2, Role::skill, {}, {}});
    const VarIndex b = net.add_variable({"B", "", 3, Role::question, {}, {}});
    net.set_table(a, {0.3, 0.7});
    net.set_table(b, {0.2, 0.3, 0.5});
    const JunctionTree tree(net);
    Evidence e;
    e.set(b, 2);
    const Beliefs bel = tree.calibrate(e);
    EXPECT_NEAR(bel.log_evidence(), std::log(0.5), 1e-12);
    EXPECT_NEAR(bel.marginal(a).p[0], 0.3, 1e-12);
}

TEST(JunctionTree, LongChainDoesNotUnderflow) {
    // One skill with 800 weakly informative children: P(e) is ~1e-800, far
    // below double range, yet ln P(e) and the posterior stay finite.
    Network net;
    Variable s{"S", "", 2, Role::skill, {}, {}};
    const VarIndex sv = net.add_variable(s);
    net.set_table(sv, {0.5, 0.5});
    for (int i = 0; i < 800; ++i) {
        const VarIndex x = net.add_variable({"X" + std::to_string(i), "", 2, Role::question, {}, Scale::boolean});
        net.set_parents(x, {sv});
        net.set_table(x, {0.1, 0.9, 0.1, 0.9});
    }
    const JunctionTree tree(net);
    Evidence e;
    for (VarIndex v = 1; v < net.size(); ++v) e.set(v, 0);
    const Beliefs b = tree.calibrate(e);
    EXPECT_NEAR(b.log_evidence(), 800 * std::log(0.1), 1e-6);
    EXPECT_NEAR(b.marginal(sv).p[0], 0.5, 1e-12);
}

TEST(LogLikelihood, WorkedExamples) {
    const Network net = fixtures::two_node();
    Dataset ds;
    ds.columns = {{"S", ColumnKind::score, 2, 0}, {"X", ColumnKind::question, 2, 1}};
    EXPECT_EQ(log_likelihood(net, ds).total, 0.0);  // empty dataset

    const int complete[] = {0, 0};
    ds.add_row("a", complete);
    EXPECT_NEAR(log_likelihood(net, ds).total, std::log(0.54), 1e-12);
    EXPECT_NEAR(log_likelihood(net, ds).total, -0.61619, 1e-5);

    Dataset missing = ds.select_rows(std::vector<std::size_t>{});
    const int partial[] = {kMissing, 0};
    missing.add_row("b", partial);
    EXPECT_NEAR(log_likelihood(net, missing).total, std::log(0.62), 1e-12);
    EXPECT_NEAR(log_likelihood(net, missing).total, -0.47804, 1e-5);
}

TEST(LogLikelihood, ImpossibleRowFlagged) {
    const Network net = fixtures::two_node(1.0, 1.0, 0.5);
    Dataset ds;
    ds.columns = {{"X", ColumnKind::question, 2, 1}};
    const int ok[] = {0}, bad[] = {1};
    ds.add_row("a", ok);
    ds.add_row("b", bad);
    const auto ll = log_likelihood(net, ds);
    EXPECT_FALSE(ll.finite());
    EXPECT_EQ(ll.impossible_rows, std::vector<std::size_t>{1});
    EXPECT_TRUE(std::isinf(ll.total));
    EXPECT_EQ(ll.per_row[0], 0.0);
}
