// catbn: command-line front end for the adaptive-testing engine.
//
// Option values are layered: command-line flags override CATBN_* environment
// variables, which override a JSON config file (--config or CATBN_CONFIG).

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "catbn/cat_session.hpp"
#include "catbn/data.hpp"
#include "catbn/evaluation.hpp"
#include "catbn/network_io.hpp"
#include "catbn/random.hpp"
#include "catbn/server.hpp"

namespace {

using namespace catbn;
using nlohmann::json;

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

// "a=1,b=2" -> {a: 1, b: 2}
std::map<std::string, std::string> parse_pairs(const std::string& s, const char* what) {
    std::map<std::string, std::string> out;
    for (const auto& item : split(s, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size())
            throw InvalidArgument(std::string(what) + ": expected key=value, got '" + item + "'");
        out[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return out;
}

int parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw InvalidArgument(what + ": '" + s + "' is not an integer");
}

TestBlueprint blueprint_or_default(const std::string& path) {
    return path.empty() ? paper_blueprint() : load_blueprint(path);
}

// Scale of a network's question variables (Boolean when every question is binary).
Scale network_scale(const Network& net) {
    for (VarIndex q : net.with_role(Role::question)) {
        const auto& v = net.variable(q);
        if (v.scale) return *v.scale;
        if (v.cardinality != 2) return Scale::points;
    }
    return Scale::boolean;
}

struct GenerateArgs {
    std::string blueprint, out, truth_out, skills_out, scale = "points";
    std::size_t n = 300;
    std::uint64_t seed = 1;
    int skill_states = 3;
    bool with_info = false;
};

struct EmArgs {
    int max_iterations = 100;
    double tolerance = 1e-4;
    double pseudocount = 0.0;
    std::uint64_t em_seed = 1;
    int restarts = 1;

    EmConfig config() const {
        EmConfig c;
        c.max_iterations = max_iterations;
        c.ll_tolerance = tolerance;
        c.pseudocount = pseudocount;
        c.seed = em_seed;
        c.restarts = restarts;
        c.validate();
        return c;
    }
};

struct TrainArgs {
    std::string model, data, blueprint, out, trace, data_scale = "points";
    EmArgs em;
    bool serial = false;
};

struct EvaluateArgs {
    std::string data, blueprint, models, out, cache_dir, data_scale = "points";
    int folds = 10;
    int max_steps = -1;
    std::uint64_t seed = 1;
    EmArgs em;
    bool serial = false;
};

struct SimulateArgs {
    std::string network, data, blueprint, student, answers, info, data_scale = "points";
    bool use_info = false;
    int max_questions = 0;
    double entropy_below = 0.0;
};

struct ServeArgs {
    std::string models, host = "127.0.0.1", session_log;
    int port = 8080;
    int ttl = 3600;
};

struct BlueprintArgs {
    std::string out;
    bool no_expert_map = false;
};

void add_em_options(CLI::App* sub, EmArgs& em) {
    sub->add_option("--max-iterations", em.max_iterations, "EM iteration cap")->capture_default_str();
    sub->add_option("--tolerance", em.tolerance, "EM stop: absolute log-likelihood change")->capture_default_str();
    sub->add_option("--pseudocount", em.pseudocount, "Dirichlet smoothing added to every CPT cell")
        ->capture_default_str();
    sub->add_option("--em-seed", em.em_seed, "seed for the random EM starting point")->capture_default_str();
    sub->add_option("--restarts", em.restarts, "random EM starts; the best final log-likelihood wins")
        ->capture_default_str();
}

int run_generate(const GenerateArgs& a) {
    const TestBlueprint bp = blueprint_or_default(a.blueprint);
    GroundTruthOptions opt;
    opt.skill_states = a.skill_states;
    opt.scale = scale_from_string(a.scale);
    opt.with_info = a.with_info;
    opt.seed = a.seed;
    const Network truth = make_ground_truth(bp, opt);
    const SyntheticData syn = generate_synthetic(truth, bp, a.n, derive_seed(a.seed, 1));
    save_csv(syn.data, a.out);
    if (!a.truth_out.empty()) save_network(truth, a.truth_out);
    if (!a.skills_out.empty()) save_truth_skills(syn, a.skills_out);
    std::cerr << "wrote " << syn.data.rows() << " students to " << a.out << "\n";
    return 0;
}

int run_train(const TrainArgs& a) {
    const TestBlueprint bp = blueprint_or_default(a.blueprint);
    const ModelSpec& spec = spec_by_id(a.model);
    const Dataset data = load_csv(a.data, bp, scale_from_string(a.data_scale));
    const FitResult fit =
        train_model(spec, bp, data, a.em.config(), a.serial ? Execution::serial : Execution::parallel);
    save_network(fit.network, a.out);
    if (!a.trace.empty()) {
        std::ofstream out(a.trace);
        if (!out) throw Error("cannot write " + a.trace);
        write_ll_trace_csv(fit, out);
    }
    std::cerr << a.model << ": " << fit.iterations_used << " EM iterations, "
              << (fit.converged ? "converged" : "not converged") << ", log-likelihood " << fit.ll_trace.back()
              << "\n";
    return 0;
}

int run_evaluate(const EvaluateArgs& a) {
    const TestBlueprint bp = blueprint_or_default(a.blueprint);
    const Dataset data = load_csv(a.data, bp, scale_from_string(a.data_scale));
    EvalConfig cfg;
    cfg.folds = a.folds;
    cfg.seed = a.seed;
    cfg.specs = split(a.models, ',');
    if (a.max_steps >= 0) cfg.max_steps = a.max_steps;
    cfg.em = a.em.config();
    cfg.execution = a.serial ? Execution::serial : Execution::parallel;
    if (!a.cache_dir.empty()) cfg.cache_dir = a.cache_dir;
    const EvalReport report = cross_validate(data, bp, cfg);
    emit_report(report, a.out);
    for (const auto& m : report.models) {
        std::cerr << m.model << ": SR0 " << m.sr_curve.front();
        if (m.sr_curve.size() > 1) std::cerr << ", SR1 " << m.sr_curve[1];
        if (!m.complete) std::cerr << " (incomplete: " << m.failed_folds.size() << " failed folds)";
        std::cerr << "\n";
    }
    std::cerr << "reports written to " << a.out << "\n";
    return 0;
}

int run_simulate(const SimulateArgs& a) {
    const Network net = load_network(a.network);
    auto tree = std::make_shared<const JunctionTree>(net);
    if (a.data.empty() == a.answers.empty()) throw InvalidArgument("give exactly one of --data or --answers");

    Evidence initial;
    std::map<VarIndex, int> responses;
    auto set_state = [&](const std::string& id, int wire, bool question) {
        const VarIndex v = net.index_of(id);
        const bool is_question = net.variable(v).role == Role::question;
        if (question != is_question)
            throw InvalidArgument("'" + id + "' is " + (is_question ? "a question" : "not a question"));
        const int s = from_wire_state(wire);
        if (s < 0 || s >= net.cardinality(v))
            throw InvalidArgument("state " + std::to_string(wire) + " out of range for '" + id + "'");
        if (question)
            responses[v] = s;
        else
            initial.set(v, s);
    };

    if (!a.answers.empty()) {
        for (const auto& [id, value] : parse_pairs(a.answers, "--answers")) set_state(id, parse_int(value, id), true);
    } else {
        if (a.student.empty()) throw InvalidArgument("--data needs --student");
        const TestBlueprint bp = blueprint_or_default(a.blueprint);
        Dataset data = load_csv(a.data, bp, scale_from_string(a.data_scale));
        if (network_scale(net) == Scale::boolean && data.scale == Scale::points) data = to_boolean(data);
        const auto it = std::find(data.student_ids.begin(), data.student_ids.end(), a.student);
        if (it == data.student_ids.end()) throw InvalidArgument("no student '" + a.student + "' in " + a.data);
        const auto row = static_cast<std::size_t>(it - data.student_ids.begin());
        const ColumnBinding b = bind_columns(net, data);
        for (std::size_t c = 0; c < data.cols(); ++c) {
            const VarIndex v = b.var_of_column[c];
            const int x = data.at(row, c);
            if (v == kNoVar || x == kMissing) continue;
            if (net.variable(v).role == Role::question)
                responses[v] = x;
            else if (net.variable(v).role == Role::info && a.use_info)
                initial.set(v, x);
        }
    }
    if (!a.info.empty())
        for (const auto& [id, value] : parse_pairs(a.info, "--info")) set_state(id, parse_int(value, id), false);

    TerminationRule rule = TerminationRule::exhaust();
    if (a.max_questions > 0 && a.entropy_below > 0.0)
        throw InvalidArgument("give at most one of --max-questions and --entropy-below");
    if (a.max_questions > 0) rule = TerminationRule::after(a.max_questions);
    if (a.entropy_below > 0.0) rule = TerminationRule::entropy_below(a.entropy_below);

    const Session s = simulate(tree, initial, responses, rule);
    for (const auto& step : s.transcript()) std::cout << transcript_step_to_json(net, step).dump() << "\n";
    return 0;
}

catbn::ApiServer* g_server = nullptr;

int run_serve(const ServeArgs& a) {
    std::map<std::string, std::shared_ptr<const JunctionTree>> models;
    for (const auto& [id, path] : parse_pairs(a.models, "--models"))
        models[id] = std::make_shared<const JunctionTree>(load_network(path));
    ServerConfig cfg;
    cfg.host = a.host;
    cfg.port = a.port;
    cfg.ttl = std::chrono::seconds(a.ttl);
    if (!a.session_log.empty()) cfg.session_log = a.session_log;
    ApiServer server(std::move(models), cfg);
    const int port = server.bind();
    if (port < 0) throw Error("cannot bind " + a.host + ":" + std::to_string(a.port));
    g_server = &server;
    std::signal(SIGINT, [](int) { g_server->stop(); });
    std::signal(SIGTERM, [](int) { g_server->stop(); });
    std::cerr << "listening on http://" << a.host << ":" << port << "\n";
    server.listen_after_bind();
    g_server = nullptr;
    return 0;
}

int run_blueprint(const BlueprintArgs& a) {
    TestBlueprint bp = paper_blueprint();
    if (!a.no_expert_map) bp.expert_map = synthetic_expert_map(bp);
    nlohmann::ordered_json doc = blueprint_to_json(bp);
    if (!a.no_expert_map)
        doc["note"] = "expert_map is a synthetic placeholder, not the mapping of the original study";
    std::ofstream out(a.out);
    if (!out) throw Error("cannot write " + a.out);
    out << doc.dump(2) << "\n";
    return 0;
}

std::string env_name(const std::string& option) {
    std::string n = "CATBN_";
    for (char c : option) n += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return n;
}

// Prepends config-file and environment values for `sub`'s options so that
// later (command-line) occurrences win under the take-last policy.
std::vector<std::string> layered_args(CLI::App& app, int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string config_path;
    if (const char* env = std::getenv("CATBN_CONFIG")) config_path = env;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    std::size_t sub_pos = args.size();
    CLI::App* sub = nullptr;
    for (std::size_t i = 0; i < args.size() && !sub; ++i)
        for (CLI::App* s : app.get_subcommands({}))
            if (s->get_name() == args[i]) {
                sub = s;
                sub_pos = i;
                break;
            }
    if (!sub) return args;

    json config = json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw Error("cannot read config file " + config_path);
        try {
            in >> config;
        } catch (const json::exception& ex) {
            throw ParseError(config_path + ": " + ex.what());
        }
        if (!config.is_object()) throw ParseError(config_path + ": expected a JSON object");
    }
    auto to_text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };

    std::vector<std::string> injected;
    for (const CLI::Option* opt : sub->get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help") continue;
        std::optional<std::string> value;
        for (const json* scope : {&config, config.contains(sub->get_name()) ? &config[sub->get_name()] : nullptr}) {
            if (!scope || !scope->is_object()) continue;
            if (scope->contains(name)) value = to_text((*scope)[name]);
        }
        if (const char* env = std::getenv(env_name(name).c_str())) value = env;
        if (value) injected.push_back("--" + name + "=" + *value);
    }
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, injected.begin(), injected.end());
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive testing with Bayesian networks: synthetic data, EM training, cross-validated "
                 "evaluation, simulated and live test sessions.\n"
                 "Options may also come from CATBN_<OPTION> environment variables or a JSON config file;\n"
                 "flags override environment, environment overrides the config file.",
                 "catbn"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (top-level keys or per-subcommand objects)");

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "sample a synthetic dataset from a ground-truth network");
    g->add_option("--out", gen.out, "dataset CSV to write")->required();
    g->add_option("--blueprint", gen.blueprint, "blueprint JSON (default: built-in 53-question test)");
    g->add_option("-n,--students", gen.n, "number of students")->capture_default_str();
    g->add_option("--seed", gen.seed, "random seed")->capture_default_str();
    g->add_option("--skill-states", gen.skill_states, "states of the ground-truth skill")->capture_default_str();
    g->add_option("--scale", gen.scale, "question scale")
        ->check(CLI::IsMember({"boolean", "points"}))
        ->capture_default_str();
    g->add_flag("--with-info", gen.with_info, "generate personal-information columns");
    g->add_option("--truth-out", gen.truth_out, "write the ground-truth network JSON");
    g->add_option("--skills-out", gen.skills_out, "write the sampled skill states CSV");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "fit one model structure with EM and save the network");
    t->add_option("--model", tr.model, "model id (b2, b2+, b3, ..., n2e)")->required();
    t->add_option("--data", tr.data, "dataset CSV")->required();
    t->add_option("--out", tr.out, "network JSON to write")->required();
    t->add_option("--blueprint", tr.blueprint, "blueprint JSON (default: built-in 53-question test)");
    t->add_option("--data-scale", tr.data_scale, "scale of the question cells in the CSV")
        ->check(CLI::IsMember({"boolean", "points"}))
        ->capture_default_str();
    t->add_option("--trace", tr.trace, "write the EM log-likelihood trace CSV");
    add_em_options(t, tr.em);
    t->add_flag("--serial", tr.serial, "use the serial reference E-step");

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "k-fold cross-validation of adaptive tests, writes report CSVs");
    e->add_option("--data", ev.data, "dataset CSV")->required();
    e->add_option("--models", ev.models, "comma-separated model ids")->required();
    e->add_option("--out", ev.out, "report directory")->required();
    e->add_option("--blueprint", ev.blueprint, "blueprint JSON (default: built-in 53-question test)");
    e->add_option("--data-scale", ev.data_scale, "scale of the question cells in the CSV")
        ->check(CLI::IsMember({"boolean", "points"}))
        ->capture_default_str();
    e->add_option("--folds", ev.folds, "number of folds")->capture_default_str();
    e->add_option("--seed", ev.seed, "fold assignment seed")->capture_default_str();
    e->add_option("--max-steps", ev.max_steps, "questions per simulated test (-1: all)")->capture_default_str();
    e->add_option("--cache-dir", ev.cache_dir, "reuse fitted fold networks from this directory");
    add_em_options(e, ev.em);
    e->add_flag("--serial", ev.serial, "run folds and students serially");

    SimulateArgs si;
    auto* s = app.add_subcommand("simulate", "replay one student's answers, print the transcript as JSON lines");
    s->add_option("--network", si.network, "trained network JSON")->required();
    s->add_option("--answers", si.answers, "recorded answers as Q=state pairs, 1-based (e.g. X1=2,X2=1)");
    s->add_option("--data", si.data, "dataset CSV holding the student's answers");
    s->add_option("--student", si.student, "student id within --data");
    s->add_option("--blueprint", si.blueprint, "blueprint JSON for --data");
    s->add_option("--data-scale", si.data_scale, "scale of the question cells in --data")
        ->check(CLI::IsMember({"boolean", "points"}))
        ->capture_default_str();
    s->add_flag("--use-info", si.use_info, "insert the student's personal information from --data first");
    s->add_option("--info", si.info, "personal information as id=state pairs, 1-based");
    s->add_option("--max-questions", si.max_questions, "stop after this many questions");
    s->add_option("--entropy-below", si.entropy_below, "stop once the skill entropy drops below this value");

    ServeArgs sv;
    auto* v = app.add_subcommand("serve", "HTTP API for live adaptive sessions");
    v->add_option("--models", sv.models, "id=network.json pairs, comma-separated")->required();
    v->add_option("--host", sv.host, "bind address")->capture_default_str();
    v->add_option("--port", sv.port, "port (0: any free port)")->capture_default_str();
    v->add_option("--ttl", sv.ttl, "idle seconds before a session expires")->capture_default_str();
    v->add_option("--session-log", sv.session_log, "JSON-lines log replayed on restart");

    BlueprintArgs bpa;
    auto* b = app.add_subcommand("blueprint", "write the built-in test blueprint as JSON");
    b->add_option("--out", bpa.out, "blueprint JSON to write")->required();
    b->add_flag("--no-expert-map", bpa.no_expert_map, "omit the synthetic seven-skill expert map");

    try {
        std::vector<std::string> args = layered_args(app, argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& ex) {
        return app.exit(ex);
    } catch (const catbn::Error& ex) {
        std::cerr << "catbn: error: " << ex.what() << "\n";
        return 2;
    }

    try {
        if (*g) return run_generate(gen);
        if (*t) return run_train(tr);
        if (*e) return run_evaluate(ev);
        if (*s) return run_simulate(si);
        if (*v) return run_serve(sv);
        if (*b) return run_blueprint(bpa);
    } catch (const std::exception& ex) {
        std::cerr << "catbn: error: " << ex.what() << "\n";
        return 1;
    }
    return 1;
}
