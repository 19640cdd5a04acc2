#include "catbn/server.hpp"

#include <random>
#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "catbn/network_io.hpp"

namespace catbn {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ApiResponse error(int status, const std::string& code, const std::string& message) {
    ordered_json j;
    j["code"] = code;
    j["message"] = message;
    return {status, j.dump()};
}

ApiResponse ok(const ordered_json& j, int status = 200) { return {status, j.dump()}; }

ordered_json posteriors_json(const Network& net, const std::vector<Distribution>& ds) {
    ordered_json j = ordered_json::object();
    for (const auto& d : ds) j[net.variable(d.variable).id] = d.p;
    return j;
}

}  // namespace

ApiServer::ApiServer(std::map<std::string, std::shared_ptr<const JunctionTree>> models, ServerConfig cfg)
    : models_(std::move(models)), cfg_(std::move(cfg)) {
    if (models_.empty()) throw InvalidArgument("server needs at least one model");
    if (cfg_.session_log) {
        replay_log();
        log_.open(*cfg_.session_log, std::ios::app);
        if (!log_) throw Error("cannot open session log " + cfg_.session_log->string());
    }
}

ApiServer::~ApiServer() { stop(); }

std::size_t ApiServer::session_count() const {
    std::shared_lock lock(sessions_mutex_);
    return sessions_.size();
}

std::string ApiServer::fresh_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%llx-%llu", static_cast<unsigned long long>(rng() & 0xffffffffffULL),
                  static_cast<unsigned long long>(++counter_));
    return buf;
}

void ApiServer::sweep_expired() {
    const auto now = now_();
    std::unique_lock lock(sessions_mutex_);
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        std::unique_lock entry_lock(it->second->mutex, std::try_to_lock);
        if (entry_lock.owns_lock() && now - it->second->last_access > cfg_.ttl)
            it = sessions_.erase(it);
        else
            ++it;
    }
}

void ApiServer::log_event(const std::string& line) {
    if (!log_.is_open()) return;
    std::lock_guard lock(log_mutex_);
    log_ << line << '\n';
    log_.flush();
}

void ApiServer::replay_log() {
    std::ifstream in(*cfg_.session_log);
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json ev;
        try {
            ev = json::parse(line);
        } catch (const json::exception&) {
            continue;  // torn final line after a crash
        }
        const std::string kind = ev.value("event", "");
        const std::string id = ev.value("id", "");
        if (kind == "create") {
            create_session(ev.at("request").dump(), true, id);
        } else if (kind == "answer") {
            ApiResponse err;
            if (auto e = lookup(id, err)) post_answer(id, *e, ev.at("request").dump(), true);
        } else if (kind == "delete") {
            std::unique_lock lock(sessions_mutex_);
            sessions_.erase(id);
        }
    }
}

std::shared_ptr<ApiServer::Entry> ApiServer::lookup(const std::string& id, ApiResponse& err) {
    std::shared_ptr<Entry> e;
    {
        std::shared_lock lock(sessions_mutex_);
        auto it = sessions_.find(id);
        if (it != sessions_.end()) e = it->second;
    }
    if (!e) {
        err = error(404, "unknown_session", "no session '" + id + "'");
        return nullptr;
    }
    return e;
}

ApiResponse ApiServer::handle(const std::string& method, const std::string& path, const std::string& body) {
    static const std::regex session_re(R"(^/sessions/([^/]+)(/([a-z]+))?/?$)");
    try {
        if (path == "/models" && method == "GET") return list_models();
        if ((path == "/sessions" || path == "/sessions/") && method == "POST") return create_session(body);
        std::smatch m;
        if (!std::regex_match(path, m, session_re)) return error(404, "not_found", "no route for " + path);
        const std::string id = m[1];
        const std::string action = m[3];
        ApiResponse err;
        auto entry = lookup(id, err);
        if (!entry) return err;
        std::lock_guard lock(entry->mutex);
        if (now_() - entry->last_access > cfg_.ttl) {
            std::unique_lock slock(sessions_mutex_);
            sessions_.erase(id);
            return error(410, "session_expired", "session '" + id + "' has expired");
        }
        entry->last_access = now_();
        if (action.empty() && method == "DELETE") {
            {
                std::unique_lock slock(sessions_mutex_);
                sessions_.erase(id);
            }
            ordered_json ev{{"event", "delete"}, {"id", id}};
            log_event(ev.dump());
            return ok({{"deleted", true}});
        }
        if (action == "next" && method == "GET") return next_question(*entry);
        if (action == "answers" && method == "POST") return post_answer(id, *entry, body);
        if (action == "estimates" && method == "GET") return estimates(*entry);
        if (action == "transcript" && method == "GET") return transcript(*entry);
        return error(404, "not_found", "no route for " + method + " " + path);
    } catch (const json::exception& ex) {
        return error(422, "invalid_json", ex.what());
    } catch (const ImpossibleEvidence& ex) {
        return error(422, "impossible_evidence", ex.what());
    } catch (const Error& ex) {
        return error(422, "invalid_request", ex.what());
    }
}

ApiResponse ApiServer::list_models() const {
    ordered_json out = ordered_json::array();
    for (const auto& [id, tree] : models_) {
        const Network& net = tree->network();
        ordered_json m;
        m["id"] = id;
        m["questions"] = ordered_json::array();
        for (VarIndex q : net.with_role(Role::question))
            m["questions"].push_back({{"id", net.variable(q).id}, {"states", net.variable(q).states}});
        m["info"] = ordered_json::array();
        for (VarIndex y : net.with_role(Role::info))
            m["info"].push_back({{"id", net.variable(y).id}, {"states", net.variable(y).states}});
        m["skills"] = ordered_json::array();
        for (VarIndex s : net.targets()) m["skills"].push_back(net.variable(s).id);
        out.push_back(std::move(m));
    }
    return ok({{"models", out}});
}

ApiResponse ApiServer::create_session(const std::string& body, bool replaying, const std::string& forced_id) {
    const json req = body.empty() ? json::object() : json::parse(body);
    const std::string model_id = req.at("model").get<std::string>();
    auto mit = models_.find(model_id);
    if (mit == models_.end()) return error(422, "unknown_model", "no model '" + model_id + "' is loaded");
    const Network& net = mit->second->network();
    Evidence info;
    if (req.contains("info_evidence")) {
        for (const auto& [var, state] : req.at("info_evidence").items()) {
            auto v = net.find(var);
            if (!v) return error(422, "unknown_variable", "model has no variable '" + var + "'");
            if (net.variable(*v).role != Role::info)
                return error(422, "invalid_evidence", "'" + var + "' is not an info variable");
            const int s = from_wire_state(state.get<int>());
            if (s < 0 || s >= net.cardinality(*v))
                return error(422, "invalid_state", "state " + std::to_string(state.get<int>()) + " out of range for '" + var + "'");
            info.set(*v, s);
        }
    }
    if (!replaying) sweep_expired();
    auto entry = std::make_shared<Entry>();
    entry->model_id = model_id;
    entry->session = std::make_unique<Session>(mit->second, info);
    entry->last_access = now_();
    const auto first = entry->session->select_next();

    std::string id;
    {
        std::unique_lock lock(sessions_mutex_);
        id = forced_id.empty() ? fresh_id() : forced_id;
        sessions_[id] = entry;
    }
    if (!replaying) log_event(ordered_json{{"event", "create"}, {"id", id}, {"request", req}}.dump());

    ordered_json out;
    out["session_id"] = id;
    out["model"] = model_id;
    out["first_question"] = first ? json(net.variable(first->question).id) : json(nullptr);
    out["ig"] = first ? json(first->information_gain) : json(nullptr);
    return ok(out, 201);
}

ApiResponse ApiServer::next_question(Entry& e) {
    const auto next = e.session->select_next();
    if (!next) return ok({{"done", true}});
    ordered_json out;
    out["done"] = false;
    out["question"] = e.session->model().network().variable(next->question).id;
    out["ig"] = next->information_gain;
    return ok(out);
}

ApiResponse ApiServer::post_answer(const std::string& id, Entry& e, const std::string& body, bool replaying) {
    const json req = json::parse(body);
    const Network& net = e.session->model().network();
    const std::string qid = req.at("question").get<std::string>();
    auto q = net.find(qid);
    if (!q || net.variable(*q).role != Role::question)
        return error(422, "unknown_question", "model has no question '" + qid + "'");
    if (e.session->evidence().contains(*q))
        return error(409, "duplicate_answer", "question '" + qid + "' was already answered");
    const int wire = req.at("state").get<int>();
    const int s = from_wire_state(wire);
    if (s < 0 || s >= net.cardinality(*q))
        return error(422, "invalid_state", "state " + std::to_string(wire) + " out of range for '" + qid + "'");
    const auto& remaining = e.session->remaining();
    if (std::find(remaining.begin(), remaining.end(), *q) == remaining.end())
        return error(422, "not_askable", "question '" + qid + "' is not part of this session");
    e.session->submit_answer(*q, s);
    if (!replaying) log_event(ordered_json{{"event", "answer"}, {"id", id}, {"request", req}}.dump());

    ordered_json out;
    out["step"] = e.session->step();
    out["entropy"] = e.session->entropy_trace().back();
    out["skill_posteriors"] = posteriors_json(net, e.session->skill_estimates());
    return ok(out);
}

ApiResponse ApiServer::estimates(Entry& e) {
    const Network& net = e.session->model().network();
    ordered_json out;
    out["step"] = e.session->step();
    out["entropy"] = e.session->entropy_trace().back();
    out["entropy_trace"] = e.session->entropy_trace();
    out["skill_posteriors"] = posteriors_json(net, e.session->skill_estimates());
    ordered_json pred = ordered_json::object();
    for (const auto& [q, p] : e.session->predict_answers())
        pred[net.variable(q).id] = {{"state", to_wire_state(p.state)}, {"tie", p.tie}, {"p", p.distribution.p}};
    out["predicted"] = std::move(pred);
    return ok(out);
}

ApiResponse ApiServer::transcript(Entry& e) {
    const Network& net = e.session->model().network();
    ordered_json steps = ordered_json::array();
    for (const auto& s : e.session->transcript()) steps.push_back(transcript_step_to_json(net, s));
    return ok({{"transcript", steps}});
}

int ApiServer::bind() {
    http_ = std::make_unique<httplib::Server>();
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
        const ApiResponse r = handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body, "application/json");
    };
    http_->set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    http_->Get(".*", route);
    http_->Post(".*", route);
    http_->Delete(".*", route);
    http_->Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    if (cfg_.port == 0) return http_->bind_to_any_port(cfg_.host);
    return http_->bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1;
}

bool ApiServer::listen_after_bind() { return http_ && http_->listen_after_bind(); }

bool ApiServer::listen() { return bind() >= 0 && listen_after_bind(); }

void ApiServer::stop() {
    if (http_) http_->stop();
}

}  // namespace catbn
