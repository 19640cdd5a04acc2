#ifndef CATBN_SERVER_HPP
#define CATBN_SERVER_HPP

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "catbn/cat_session.hpp"

namespace httplib {
class Server;
}

namespace catbn {

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::chrono::seconds ttl{3600};
    std::optional<std::filesystem::path> session_log;
};

struct ApiResponse {
    int status = 200;
    std::string body;  // JSON
};

/// HTTP surface over adaptive sessions. Requests are routed through handle(),
/// which is usable without a socket. States are 1-based on the wire.
///
///   GET    /models
///   POST   /sessions                {model, info_evidence}
///   GET    /sessions/{id}/next
///   POST   /sessions/{id}/answers   {question, state}
///   GET    /sessions/{id}/estimates
///   GET    /sessions/{id}/transcript
///   DELETE /sessions/{id}
///
/// Errors carry {code, message}: 404 unknown session, 409 duplicate answer,
/// 410 expired session, 422 invalid input. Sessions idle for longer than
/// the ttl expire; expired sessions are evicted when new ones are created.
class ApiServer {
public:
    using Clock = std::chrono::steady_clock;

    ApiServer(std::map<std::string, std::shared_ptr<const JunctionTree>> models, ServerConfig cfg);
    ~ApiServer();

    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    ApiResponse handle(const std::string& method, const std::string& path, const std::string& body);

    /// Binds and serves until stop(); returns false when binding fails.
    bool listen();
    /// Binds now and returns the bound port (or -1); serve with listen_after_bind().
    int bind();
    bool listen_after_bind();
    void stop();

    std::size_t session_count() const;
    /// Test hook: overrides the clock used for expiry.
    void set_clock(std::function<Clock::time_point()> now) { now_ = std::move(now); }

private:
    struct Entry {
        std::mutex mutex;
        std::string model_id;
        std::unique_ptr<Session> session;
        Clock::time_point last_access;
    };

    ApiResponse create_session(const std::string& body, bool replaying = false, const std::string& forced_id = {});
    ApiResponse next_question(Entry& e);
    ApiResponse post_answer(const std::string& id, Entry& e, const std::string& body, bool replaying = false);
    ApiResponse estimates(Entry& e);
    ApiResponse transcript(Entry& e);
    ApiResponse list_models() const;

    std::shared_ptr<Entry> lookup(const std::string& id, ApiResponse& error);
    void log_event(const std::string& line);
    void replay_log();
    std::string fresh_id();
    void sweep_expired();

    std::map<std::string, std::shared_ptr<const JunctionTree>> models_;
    ServerConfig cfg_;
    mutable std::shared_mutex sessions_mutex_;
    std::unordered_map<std::string, std::shared_ptr<Entry>> sessions_;
    std::mutex log_mutex_;
    std::ofstream log_;
    std::uint64_t counter_ = 0;
    std::function<Clock::time_point()> now_ = [] { return Clock::now(); };
    std::unique_ptr<httplib::Server> http_;
};

}  // namespace catbn

#endif
