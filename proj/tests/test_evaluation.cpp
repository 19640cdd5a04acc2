#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "catbn/evaluation.hpp"
#include "support/oracle.hpp"

using namespace catbn;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("catbn_eval_" + name);
    fs::remove_all(dir);
    return dir;
}

TestBlueprint tiny_blueprint() {
    TestBlueprint bp;
    bp.questions = {{"Q1", 1}, {"Q2", 2}, {"Q3", 1}, {"Q4", 2}, {"Q5", 1}, {"Q6", 1}};
    bp.info_vars = {{"math", 5}, {"gender", 2}};
    bp.total_points = 8;
    return bp;
}

Dataset tiny_data(std::size_t n, std::uint64_t seed) {
    const TestBlueprint bp = tiny_blueprint();
    const Network truth =
        make_ground_truth(bp, {.skill_states = 3, .scale = Scale::points, .with_info = true, .seed = seed});
    return generate_synthetic(truth, bp, n, seed + 1).data;
}

// Three Boolean questions under one binary skill with hand-picked CPTs.
Network hand_net() {
    Network net;
    const VarIndex s = net.add_variable({"S", "", 2, Role::skill, {}, {}});
    net.set_table(s, {0.55, 0.45});
    const double hit[3][2] = {{0.9, 0.3}, {0.6, 0.35}, {0.8, 0.1}};
    for (int i = 0; i < 3; ++i) {
        const VarIndex x = net.add_variable({"X" + std::to_string(i + 1), "", 2, Role::question, {}, Scale::boolean});
        net.set_parents(x, {s});
        net.set_table(x, {hit[i][0], 1 - hit[i][0], hit[i][1], 1 - hit[i][1]});
    }
    return net;
}

}  // namespace

TEST(Folds, PartitionProperties) {
    const auto f = assign_folds(10, 2, 7);
    ASSERT_EQ(f.size(), 10u);
    EXPECT_EQ(std::count(f.begin(), f.end(), 0), 5);
    EXPECT_EQ(std::count(f.begin(), f.end(), 1), 5);
    EXPECT_EQ(assign_folds(10, 2, 7), f);

    const auto g = assign_folds(23, 4, 1);
    std::vector<int> sizes(4, 0);
    for (int k : g) ++sizes.at(static_cast<std::size_t>(k));
    EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1);
    EXPECT_NE(assign_folds(23, 4, 2), g);
}

TEST(Folds, ConfigValidation) {
    EvalConfig cfg;
    cfg.specs = {"b2"};
    cfg.folds = 1;
    EXPECT_THROW(cfg.validate(10), InvalidArgument);
    cfg.folds = 11;
    EXPECT_THROW(cfg.validate(10), InvalidArgument);
    cfg.folds = 10;
    EXPECT_NO_THROW(cfg.validate(10));
    cfg.specs = {"zz"};
    EXPECT_THROW(cfg.validate(10), InvalidArgument);
}

TEST(SuccessRatio, DirectFormula) {
    // Q1 predicted state 0 (P = 0.62); Q2 is a 50/50 tie, predicted state 0.
    Network net = hand_net();
    net.set_table(0, {0.6, 0.4});
    net.set_table(1, {0.9, 0.1, 0.2, 0.8});
    net.set_table(2, {0.5, 0.5, 0.5, 0.5});
    auto tree = std::make_shared<const JunctionTree>(net);
    const VarIndex askable[] = {1, 2};
    Session s(tree, {}, TerminationRule::exhaust(), askable);
    EXPECT_EQ(*success_ratio_step(s, {{1, 0}, {2, 1}}), 0.5);
    EXPECT_EQ(*success_ratio_step(s, {{1, 0}, {2, 0}}), 1.0);
    EXPECT_THROW(success_ratio_step(s, {{1, 0}}), InvalidArgument);
    s.submit_answer(1, 0);
    s.submit_answer(2, 0);
    EXPECT_FALSE(success_ratio_step(s, {{1, 0}, {2, 0}}).has_value());
}

TEST(SuccessRatio, HandNetMatchesEnumeration) {
    const Network net = hand_net();
    auto tree = std::make_shared<const JunctionTree>(net);
    Dataset ds;
    for (int i = 1; i <= 3; ++i) ds.columns.push_back({"X" + std::to_string(i), ColumnKind::question, 2, 1});

    for (int code = 0; code < 8; ++code) {
        const int answers[] = {code & 1, (code >> 1) & 1, (code >> 2) & 1};
        Dataset one = ds;
        one.add_row("s", answers);
        const StudentRun run = run_student(tree, one, 0, false, 3);
        ASSERT_EQ(run.sr.size(), 4u);

        // Oracle: greedy order and argmax predictions by full enumeration.
        Evidence e;
        std::vector<VarIndex> remaining = {1, 2, 3};
        for (std::size_t step = 0; step <= 3; ++step) {
            if (remaining.empty()) {
                EXPECT_FALSE(run.sr[step].has_value());
                break;
            }
            const auto en = oracle::enumerate(net, e);
            int correct = 0;
            for (VarIndex q : remaining) {
                const auto& m = en.marginals[q];
                const int pred = m[1] > m[0] ? 1 : 0;
                correct += pred == answers[q - 1];
            }
            ASSERT_TRUE(run.sr[step].has_value());
            EXPECT_DOUBLE_EQ(*run.sr[step], static_cast<double>(correct) / static_cast<double>(remaining.size()));

            const double h = oracle::entropy_by_enumeration(net, e);
            VarIndex best = kNoVar;
            double best_ig = -1.0;
            for (VarIndex q : remaining) {
                const double ig = h - oracle::expected_entropy_by_enumeration(net, e, q);
                if (ig > best_ig + 1e-12) {
                    best_ig = ig;
                    best = q;
                }
            }
            ASSERT_LT(step, run.asked.size());
            EXPECT_EQ(run.asked[step], best);
            e.set(best, answers[best - 1]);
            std::erase(remaining, best);
        }
    }
}

TEST(CrossValidate, ReportInvariants) {
    const Dataset data = tiny_data(60, 3);
    EvalConfig cfg;
    cfg.folds = 3;
    cfg.seed = 5;
    cfg.specs = {"b2", "b3+", "n3o"};
    cfg.em.max_iterations = 30;
    const EvalReport r = cross_validate(data, tiny_blueprint(), cfg);
    ASSERT_EQ(r.models.size(), 3u);
    EXPECT_EQ(r.student_ids, data.student_ids);
    for (const ModelReport& m : r.models) {
        EXPECT_TRUE(m.complete) << m.model;
        EXPECT_EQ(m.students, 60u);
        ASSERT_EQ(m.sr_curve.size(), 7u);  // SR_0 .. SR_6
        for (std::size_t s = 0; s < m.sr_curve.size(); ++s) {
            EXPECT_GE(m.sr_curve[s], 0.0);
            EXPECT_LE(m.sr_curve[s], 1.0);
        }
        EXPECT_EQ(m.sr_curve.back(), 0.0);
        EXPECT_FALSE(m.sr_conditional.back().has_value());
        EXPECT_EQ(m.sr_support[0], 60u);
        EXPECT_EQ(m.sr_support.back(), 0u);
        ASSERT_EQ(m.occurrence.size(), 6u);
        for (std::size_t s = 0; s < 6; ++s) {
            double col = 0.0;
            for (const auto& row : m.occurrence) col += row[s];
            EXPECT_NEAR(col, 1.0, 1e-12);
        }
        EXPECT_GE(m.sparsity.azt, 0.0);
    }

    cfg.max_steps = 2;
    cfg.specs = {"b2"};
    const EvalReport short_run = cross_validate(data, tiny_blueprint(), cfg);
    EXPECT_EQ(short_run.models[0].sr_curve.size(), 3u);
}

TEST(CrossValidate, SerialAndParallelAgree) {
    const Dataset data = tiny_data(40, 8);
    EvalConfig cfg;
    cfg.folds = 4;
    cfg.specs = {"n2+", "b2"};
    cfg.em.max_iterations = 20;
    cfg.execution = Execution::serial;
    const EvalReport a = cross_validate(data, tiny_blueprint(), cfg);
    cfg.execution = Execution::parallel;
    const EvalReport b = cross_validate(data, tiny_blueprint(), cfg);
    for (std::size_t i = 0; i < a.models.size(); ++i) {
        EXPECT_EQ(a.models[i].sr_curve, b.models[i].sr_curve);
        EXPECT_EQ(a.models[i].occurrence, b.models[i].occurrence);
        EXPECT_EQ(a.models[i].sparsity.as, b.models[i].sparsity.as);
    }
}

TEST(CrossValidate, ScaleChecks) {
    const Dataset points = tiny_data(30, 2);
    const Dataset boolean = to_boolean(points);
    EvalConfig cfg;
    cfg.folds = 3;
    cfg.specs = {"n2"};
    EXPECT_THROW(cross_validate(boolean, tiny_blueprint(), cfg), InvalidArgument);
    cfg.specs = {"b2"};
    cfg.em.max_iterations = 10;
    const EvalReport via_points = cross_validate(points, tiny_blueprint(), cfg);
    const EvalReport via_bool = cross_validate(boolean, tiny_blueprint(), cfg);
    EXPECT_EQ(via_points.models[0].sr_curve, via_bool.models[0].sr_curve);
}

TEST(CrossValidate, CacheReuseGivesSameReport) {
    const Dataset data = tiny_data(30, 4);
    EvalConfig cfg;
    cfg.folds = 3;
    cfg.specs = {"b3"};
    cfg.em.max_iterations = 15;
    cfg.cache_dir = scratch_dir("cache");
    const EvalReport first = cross_validate(data, tiny_blueprint(), cfg);
    EXPECT_FALSE(fs::is_empty(*cfg.cache_dir));
    const EvalReport second = cross_validate(data, tiny_blueprint(), cfg);
    EXPECT_EQ(first.models[0].sr_curve, second.models[0].sr_curve);
    fs::remove_all(*cfg.cache_dir);
}

TEST(EmitReport, FilesAndFormats) {
    EvalReport r;
    ModelReport m;
    m.model = "b2";
    m.sr_curve = {0.5, 0.75};
    m.sr_conditional = {0.5, std::nullopt};
    m.sr_support = {4, 0};
    m.question_ids = {"Q1"};
    m.occurrence = {{1.0}};
    m.sparsity = {2.0, 0.125};
    m.students = 4;
    r.models.push_back(m);
    r.student_ids = {"a", "b"};
    r.fold_of_row = {0, 1};
    const fs::path dir = scratch_dir("emit");
    emit_report(r, dir);
    EXPECT_EQ(slurp(dir / "sr_curves.csv"), "model,step,sr\nb2,0,0.500000\nb2,1,0.750000\n");
    EXPECT_EQ(slurp(dir / "sr_curves_conditional.csv"), "model,step,sr,students\nb2,0,0.500000,4\nb2,1,,0\n");
    EXPECT_EQ(slurp(dir / "occurrence_b2.csv"), "question,step,freq\nQ1,1,1.000000\n");
    EXPECT_EQ(slurp(dir / "sparsity.csv"), "model,azt,as\nb2,2.000000,0.125000\n");
    EXPECT_EQ(slurp(dir / "folds.csv"), "student_id,fold\na,0\nb,1\n");
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(manifest["models"][0]["id"], "b2");
    fs::remove_all(dir);
}

TEST(EmitReport, CsvRoundTripsToReportValues) {
    const Dataset data = tiny_data(30, 6);
    EvalConfig cfg;
    cfg.folds = 3;
    cfg.specs = {"n2"};
    cfg.em.max_iterations = 10;
    const EvalReport r = cross_validate(data, tiny_blueprint(), cfg);
    const fs::path dir = scratch_dir("roundtrip");
    emit_report(r, dir);
    std::ifstream in(dir / "sr_curves.csv");
    std::string line;
    std::getline(in, line);
    std::size_t s = 0;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string model, step, value;
        std::getline(ss, model, ',');
        std::getline(ss, step, ',');
        std::getline(ss, value, ',');
        EXPECT_EQ(model, "n2");
        EXPECT_EQ(std::stoul(step), s);
        EXPECT_NEAR(std::stod(value), r.models[0].sr_curve[s], 5e-7);
        ++s;
    }
    EXPECT_EQ(s, r.models[0].sr_curve.size());
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(manifest["seed"], cfg.seed);
    EXPECT_EQ(manifest["dataset_rows"], 30);
    fs::remove_all(dir);
}

TEST(RunStudent, AnswersRuledOutByTheModelAreDropped) {
    // Both questions copy the skill; a record answering them differently is impossible.
    Network net = hand_net();
    net.set_table(1, {1.0, 0.0, 0.0, 1.0});
    net.set_table(2, {1.0, 0.0, 0.0, 1.0});
    auto tree = std::make_shared<const JunctionTree>(net);
    Dataset ds;
    for (int i = 1; i <= 3; ++i) ds.columns.push_back({"X" + std::to_string(i), ColumnKind::question, 2, 1});
    const int answers[] = {0, 1, 0};
    ds.add_row("s", answers);
    const StudentRun run = run_student(tree, ds, 0, false, 3);
    EXPECT_EQ(run.dropped_answers, 1u);
    EXPECT_EQ(run.asked.size(), 3u);
    ASSERT_EQ(run.sr.size(), 4u);
    EXPECT_FALSE(run.sr[3].has_value());

    Session s(tree);
    s.submit_answer(1, 0);
    const Evidence before = s.evidence();
    s.skip_answer(2, 1);
    EXPECT_EQ(s.evidence(), before);
    EXPECT_EQ(s.step(), 2);
    EXPECT_FALSE(s.transcript().back().absorbed);
    EXPECT_EQ(s.remaining(), std::vector<VarIndex>{3});
}
