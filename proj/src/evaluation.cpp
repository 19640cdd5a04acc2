#include "catbn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>

#include "catbn/network_io.hpp"
#include "catbn/random.hpp"

namespace catbn {

void EvalConfig::validate(std::size_t rows) const {
    if (folds < 2) throw InvalidArgument("folds must be >= 2");
    if (static_cast<std::size_t>(folds) > rows)
        throw InvalidArgument("folds (" + std::to_string(folds) + ") exceed the dataset size (" +
                              std::to_string(rows) + ")");
    if (specs.empty()) throw InvalidArgument("no model specs to evaluate");
    if (max_steps && *max_steps < 0) throw InvalidArgument("max_steps must be >= 0");
    for (const auto& s : specs) spec_by_id(s);
    em.validate();
}

Dataset training_view(const ModelSpec& spec, const Dataset& data) {
    if (spec.scale == Scale::points && data.scale == Scale::boolean)
        throw InvalidArgument("model '" + spec.id + "' uses the points scale but the dataset is Boolean");
    Dataset view = spec.scale == Scale::boolean && data.scale == Scale::points ? to_boolean(data) : data;
    if (spec.observed_score) view = with_score_column(view, discretize_scores(view), kSingleSkillId);
    return view;
}

FitResult train_model(const ModelSpec& spec, const TestBlueprint& bp, const Dataset& data, const EmConfig& em,
                      Execution exec) {
    return em_fit(build_model(spec, bp), training_view(spec, data), em, exec);
}

std::vector<int> assign_folds(std::size_t rows, int folds, std::uint64_t seed) {
    std::vector<std::size_t> perm(rows);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    for (std::size_t i = rows; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
    std::vector<int> fold(rows);
    for (std::size_t k = 0; k < rows; ++k) fold[perm[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
    return fold;
}

std::optional<double> success_ratio_step(const Session& session, const std::map<VarIndex, int>& truth) {
    if (session.remaining().empty()) return std::nullopt;
    const auto predictions = session.predict_answers();
    std::size_t hits = 0;
    for (const auto& [q, pred] : predictions) {
        auto it = truth.find(q);
        if (it == truth.end())
            throw InvalidArgument("no recorded answer for '" + session.model().network().variable(q).id + "'");
        if (pred.state == it->second) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

StudentRun run_student(std::shared_ptr<const JunctionTree> model, const Dataset& ds, std::size_t row,
                       bool use_info, std::size_t steps) {
    const Network& net = model->network();
    const ColumnBinding binding = bind_columns(net, ds);
    Evidence initial;
    std::vector<std::pair<VarIndex, int>> info;
    std::map<VarIndex, int> truth;
    std::vector<VarIndex> askable;
    for (std::size_t c = 0; c < ds.cols(); ++c) {
        const VarIndex v = binding.var_of_column[c];
        const int x = ds.at(row, c);
        if (v == kNoVar || x == kMissing) continue;
        switch (net.variable(v).role) {
            case Role::question:
                truth[v] = x;
                askable.push_back(v);
                break;
            case Role::info:
                if (use_info) info.emplace_back(v, x);
                break;
            default: break;  // skills and score groups stay hidden
        }
    }
    StudentRun run;
    for (auto [v, x] : info) {
        Evidence next = initial.with(v, x);
        try {
            model->calibrate(next);
            initial = std::move(next);
        } catch (const ImpossibleEvidence&) {
            ++run.dropped_answers;
        }
    }
    Session session(std::move(model), initial, TerminationRule::exhaust(), askable);
    for (std::size_t s = 0; s <= steps; ++s) {
        run.sr.push_back(success_ratio_step(session, truth));
        if (s == steps) break;
        auto next = session.select_next();
        if (!next) {
            run.sr.resize(steps + 1);
            break;
        }
        const int answer = truth.at(next->question);
        try {
            session.submit_answer(next->question, answer);
        } catch (const ImpossibleEvidence&) {
            session.skip_answer(next->question, answer);
            ++run.dropped_answers;
        }
        run.asked.push_back(next->question);
    }
    return run;
}

namespace {

std::uint64_t fnv(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// First captured exception, in iteration order, rethrown outside a parallel loop.
void rethrow_first(const std::vector<std::exception_ptr>& errors) {
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string hex(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

nlohmann::ordered_json config_json(const EvalConfig& cfg) {
    nlohmann::ordered_json j;
    j["folds"] = cfg.folds;
    j["seed"] = cfg.seed;
    j["models"] = cfg.specs;
    if (cfg.max_steps)
        j["max_steps"] = *cfg.max_steps;
    else
        j["max_steps"] = "all";
    j["em"] = {{"max_iterations", cfg.em.max_iterations},
               {"ll_tolerance", cfg.em.ll_tolerance},
               {"pseudocount", cfg.em.pseudocount},
               {"seed", cfg.em.seed},
               {"restarts", cfg.em.restarts}};
    return j;
}

struct FoldFit {
    std::shared_ptr<const JunctionTree> tree;
    std::optional<Network> network;
    bool failed = false;
};

FoldFit fit_fold(const ModelSpec& spec, const Network& structure, const Dataset& train, const EvalConfig& cfg,
                 int fold, std::uint64_t data_hash) {
    EmConfig em = cfg.em;
    em.seed = derive_seed(cfg.em.seed ^ fnv(spec.id), static_cast<std::uint64_t>(fold));

    std::optional<std::filesystem::path> cache_file;
    if (cfg.cache_dir) {
        std::ostringstream key;
        key << spec.id << '|' << fold << '|' << cfg.folds << '|' << cfg.seed << '|' << data_hash << '|'
            << em.max_iterations << '|' << em.ll_tolerance << '|' << em.pseudocount << '|' << em.seed << '|' << em.restarts;
        cache_file = *cfg.cache_dir / (spec.id + "_fold" + std::to_string(fold) + "_" + hex(fnv(key.str())) + ".json");
    }

    FoldFit out;
    if (cache_file && std::filesystem::exists(*cache_file)) {
        out.network = load_network(*cache_file);
        out.tree = std::make_shared<const JunctionTree>(*out.network);
        return out;
    }
    try {
        FitResult fit = em_fit(structure, training_view(spec, train), em, Execution::parallel);
        if (fit.ll_trace.empty() || !std::isfinite(fit.ll_trace.back())) throw Error("non-finite log-likelihood");
        out.network = std::move(fit.network);
    } catch (const Error&) {
        out.failed = true;
        return out;
    }
    if (cache_file) save_network(*out.network, *cache_file);
    out.tree = std::make_shared<const JunctionTree>(*out.network);
    return out;
}

ModelReport evaluate_spec(const ModelSpec& spec, const Dataset& data, const TestBlueprint& bp,
                          const EvalConfig& cfg, const std::vector<int>& fold_of_row, std::uint64_t data_hash) {
    const Network structure = build_model(spec, bp);
    const auto questions = structure.with_role(Role::question);
    const std::size_t steps =
        cfg.max_steps ? std::min<std::size_t>(questions.size(), static_cast<std::size_t>(*cfg.max_steps))
                      : questions.size();

    std::vector<FoldFit> fits(static_cast<std::size_t>(cfg.folds));
    std::vector<std::exception_ptr> fold_errors(fits.size());
    const bool par = cfg.execution == Execution::parallel;
#pragma omp parallel for schedule(dynamic, 1) if (par)
    for (int f = 0; f < cfg.folds; ++f) {
        try {
            std::vector<std::size_t> train_rows;
            for (std::size_t r = 0; r < data.rows(); ++r)
                if (fold_of_row[r] != f) train_rows.push_back(r);
            fits[static_cast<std::size_t>(f)] =
                fit_fold(spec, structure, data.select_rows(train_rows), cfg, f, data_hash);
        } catch (...) {
            fold_errors[static_cast<std::size_t>(f)] = std::current_exception();
        }
    }
    rethrow_first(fold_errors);

    std::vector<StudentRun> runs(data.rows());
    std::vector<char> evaluated(data.rows(), 0);
    std::vector<std::exception_ptr> student_errors(data.rows());
#pragma omp parallel for schedule(dynamic, 1) if (par)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(data.rows()); ++r) {
        const auto row = static_cast<std::size_t>(r);
        const auto& fit = fits[static_cast<std::size_t>(fold_of_row[row])];
        if (fit.failed) continue;
        try {
            runs[row] = run_student(fit.tree, data, row, spec.additional_info, steps);
            evaluated[row] = 1;
        } catch (...) {
            student_errors[row] = std::current_exception();
        }
    }
    rethrow_first(student_errors);

    ModelReport rep;
    rep.model = spec.id;
    for (VarIndex q : questions) rep.question_ids.push_back(structure.variable(q).id);
    std::vector<Network> nets;
    for (int f = 0; f < cfg.folds; ++f) {
        const auto& fit = fits[static_cast<std::size_t>(f)];
        if (fit.failed) {
            rep.failed_folds.push_back(f);
            rep.complete = false;
        } else {
            nets.push_back(*fit.network);
        }
    }
    if (!nets.empty()) rep.sparsity = sparsity_metrics(nets);

    std::vector<double> sums(steps + 1, 0.0);
    rep.sr_support.assign(steps + 1, 0);
    rep.occurrence.assign(questions.size(), std::vector<double>(steps, 0.0));
    std::vector<std::size_t> position(structure.size(), 0);
    for (std::size_t i = 0; i < questions.size(); ++i) position[questions[i]] = i;
    for (std::size_t r = 0; r < data.rows(); ++r) {  // row order: sums are reproducible
        if (!evaluated[r]) continue;
        ++rep.students;
        const auto& run = runs[r];
        rep.dropped_answers += run.dropped_answers;
        for (std::size_t s = 0; s <= steps; ++s) {
            if (!run.sr[s]) continue;
            sums[s] += *run.sr[s];
            ++rep.sr_support[s];
        }
        for (std::size_t k = 0; k < run.asked.size(); ++k) rep.occurrence[position[run.asked[k]]][k] += 1.0;
    }
    const double n = static_cast<double>(std::max<std::size_t>(rep.students, 1));
    for (std::size_t s = 0; s <= steps; ++s) {
        rep.sr_curve.push_back(sums[s] / n);
        rep.sr_conditional.push_back(rep.sr_support[s] ? std::optional<double>(sums[s] / static_cast<double>(rep.sr_support[s]))
                                                       : std::nullopt);
    }
    for (auto& row : rep.occurrence)
        for (double& x : row) x /= n;
    return rep;
}

}  // namespace

EvalReport cross_validate(const Dataset& data, const TestBlueprint& bp, const EvalConfig& cfg) {
    cfg.validate(data.rows());
    validate_blueprint(bp);
    std::optional<Dataset> boolean_view;
    for (const auto& id : cfg.specs) {
        const ModelSpec& spec = spec_by_id(id);
        if (spec.scale == Scale::points && data.scale == Scale::boolean)
            throw InvalidArgument("model '" + id + "' uses the points scale but the dataset is Boolean");
        if (spec.scale == Scale::boolean && data.scale == Scale::points && !boolean_view)
            boolean_view = to_boolean(data);
    }

    if (cfg.cache_dir) {
        std::error_code ec;
        std::filesystem::create_directories(*cfg.cache_dir, ec);
        if (ec) throw Error("cannot create cache directory " + cfg.cache_dir->string() + ": " + ec.message());
    }

    EvalReport report;
    report.student_ids = data.student_ids;
    report.fold_of_row = assign_folds(data.rows(), cfg.folds, cfg.seed);
    const std::uint64_t data_hash = dataset_hash(data);
    report.manifest["seed"] = cfg.seed;
    report.manifest["config"] = config_json(cfg);
    report.manifest["dataset_hash"] = hex(data_hash);
    report.manifest["dataset_rows"] = data.rows();
    report.manifest["dataset_scale"] = std::string(to_string(data.scale));
    report.manifest["entropy_log_base"] = "e";
    report.manifest["sr_divisor"] = "all held-out students (paper style); conditional variant in sr_curves_conditional.csv";

    for (const auto& id : cfg.specs) {
        const ModelSpec& spec = spec_by_id(id);
        const Dataset& view = spec.scale == data.scale ? data : *boolean_view;
        report.models.push_back(evaluate_spec(spec, view, bp, cfg, report.fold_of_row, data_hash));
    }
    return report;
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + p.string());
    return out;
}

std::string fixed6(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

}  // namespace

void emit_report(const EvalReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());

    {
        auto out = open_out(dir / "sr_curves.csv");
        out << "model,step,sr\n";
        for (const auto& m : report.models)
            for (std::size_t s = 0; s < m.sr_curve.size(); ++s) out << m.model << ',' << s << ',' << fixed6(m.sr_curve[s]) << '\n';
    }
    {
        auto out = open_out(dir / "sr_curves_conditional.csv");
        out << "model,step,sr,students\n";
        for (const auto& m : report.models)
            for (std::size_t s = 0; s < m.sr_conditional.size(); ++s)
                out << m.model << ',' << s << ',' << (m.sr_conditional[s] ? fixed6(*m.sr_conditional[s]) : "") << ','
                    << m.sr_support[s] << '\n';
    }
    for (const auto& m : report.models) {
        auto out = open_out(dir / ("occurrence_" + m.model + ".csv"));
        out << "question,step,freq\n";
        for (std::size_t q = 0; q < m.occurrence.size(); ++q)
            for (std::size_t s = 0; s < m.occurrence[q].size(); ++s)
                out << m.question_ids[q] << ',' << s + 1 << ',' << fixed6(m.occurrence[q][s]) << '\n';
    }
    {
        auto out = open_out(dir / "sparsity.csv");
        out << "model,azt,as\n";
        for (const auto& m : report.models) out << m.model << ',' << fixed6(m.sparsity.azt) << ',' << fixed6(m.sparsity.as) << '\n';
    }
    {
        auto out = open_out(dir / "folds.csv");
        out << "student_id,fold\n";
        for (std::size_t r = 0; r < report.student_ids.size(); ++r)
            out << report.student_ids[r] << ',' << report.fold_of_row[r] << '\n';
    }
    {
        auto out = open_out(dir / "manifest.json");
        nlohmann::ordered_json m = report.manifest;
        m["models"] = nlohmann::ordered_json::array();
        for (const auto& r : report.models)
            m["models"].push_back({{"id", r.model}, {"complete", r.complete}, {"failed_folds", r.failed_folds},
                                   {"students", r.students},
                                   {"dropped_answers", r.dropped_answers}});
        out << m.dump(2) << '\n';
    }
}

}  // namespace catbn
