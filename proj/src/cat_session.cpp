#include "catbn/cat_session.hpp"

#include <algorithm>
#include <cmath>

#include "catbn/network_io.hpp"

namespace catbn {

namespace {

// IG values closer than this are treated as ties and resolved by index.
constexpr double kTieEpsilon = 1e-12;

double plogp(double p) { return p > 0.0 ? -p * std::log(p) : 0.0; }

}  // namespace

double entropy(const Beliefs& beliefs) {
    double h = 0.0;
    for (VarIndex t : beliefs.tree().network().targets())
        for (double p : beliefs.marginal(t).p) h += plogp(p);
    return h;
}

double entropy(const JunctionTree& tree, const Evidence& e) { return entropy(tree.calibrate(e)); }

double expected_entropy_pairwise(const Beliefs& beliefs, VarIndex q) {
    const Network& net = beliefs.tree().network();
    const auto qcard = static_cast<std::size_t>(net.cardinality(q));
    double eh = 0.0;
    for (VarIndex t : net.targets()) {
        if (t == q) continue;  // observing q leaves it no entropy
        const VarIndex pair[] = {t, q};
        const auto joint = beliefs.joint(pair);  // [s][x]
        const std::size_t tcard = joint.size() / qcard;
        for (std::size_t x = 0; x < qcard; ++x) {
            double col = 0.0;
            for (std::size_t s = 0; s < tcard; ++s) col += joint[s * qcard + x];
            if (!(col > 0.0)) continue;
            for (std::size_t s = 0; s < tcard; ++s) {
                const double j = joint[s * qcard + x];
                if (j > 0.0) eh -= j * std::log(j / col);
            }
        }
    }
    return eh;
}

double expected_entropy_by_conditioning(const JunctionTree& tree, const Evidence& e, VarIndex q) {
    const Distribution pq = tree.calibrate(e).marginal(q);
    double eh = 0.0;
    Beliefs scratch;
    for (std::size_t x = 0; x < pq.p.size(); ++x) {
        if (!(pq.p[x] > 0.0)) continue;
        try {
            tree.calibrate(e.with(q, static_cast<int>(x)), scratch);
        } catch (const ImpossibleEvidence&) {
            continue;
        }
        eh += pq.p[x] * entropy(scratch);
    }
    return eh;
}

double expected_entropy(const Beliefs& beliefs, const Evidence& e, VarIndex q) {
    const Network& net = beliefs.tree().network();
    if (q >= net.size()) throw UnknownVariable("#" + std::to_string(q));
    for (VarIndex t : net.targets()) {
        if (t == q) continue;
        const VarIndex pair[] = {t, q};
        if (!beliefs.has_joint(pair)) return expected_entropy_by_conditioning(beliefs.tree(), e, q);
    }
    return expected_entropy_pairwise(beliefs, q);
}

double expected_entropy(const JunctionTree& tree, const Evidence& e, VarIndex q) {
    return expected_entropy(tree.calibrate(e), e, q);
}

double information_gain(const JunctionTree& tree, const Evidence& e, VarIndex q) {
    const Beliefs b = tree.calibrate(e);
    return entropy(b) - expected_entropy(b, e, q);
}

TerminationRule TerminationRule::after(int k) {
    if (k < 1) throw InvalidArgument("max_questions must be >= 1");
    TerminationRule r;
    r.kind = Kind::max_questions;
    r.max_questions = k;
    return r;
}

TerminationRule TerminationRule::entropy_below(double h) {
    if (!(h > 0.0)) throw InvalidArgument("entropy threshold must be > 0");
    TerminationRule r;
    r.kind = Kind::entropy_below;
    r.entropy_threshold = h;
    return r;
}

Session::Session(std::shared_ptr<const JunctionTree> model, Evidence initial, TerminationRule rule)
    : Session(model, std::move(initial), rule, model->network().with_role(Role::question)) {}

Session::Session(std::shared_ptr<const JunctionTree> model, Evidence initial, TerminationRule rule,
                 std::span<const VarIndex> askable)
    : model_(std::move(model)), evidence_(std::move(initial)), rule_(rule) {
    if (!model_) throw InvalidArgument("session needs a model");
    const Network& net = model_->network();
    check_evidence(net, evidence_);
    for (auto [v, s] : evidence_)
        if (net.variable(v).role == Role::question)
            throw InvalidArgument("initial evidence may not answer question '" + net.variable(v).id + "'");
    for (VarIndex q : askable) {
        if (q >= net.size() || net.variable(q).role != Role::question)
            throw InvalidArgument("askable list contains a non-question variable");
        remaining_.push_back(q);
    }
    std::sort(remaining_.begin(), remaining_.end());
    remaining_.erase(std::unique(remaining_.begin(), remaining_.end()), remaining_.end());
    cache_ = model_->calibrate(evidence_);
    entropy_trace_.push_back(entropy(*cache_));
}

const Beliefs& Session::beliefs() const {
    if (!cache_) cache_ = model_->calibrate(evidence_);
    return *cache_;
}

double Session::current_entropy() const { return entropy(beliefs()); }

bool Session::terminated() const {
    if (remaining_.empty()) return true;
    switch (rule_.kind) {
        case TerminationRule::Kind::exhaust: return false;
        case TerminationRule::Kind::max_questions: return step_ >= rule_.max_questions;
        case TerminationRule::Kind::entropy_below: return current_entropy() < rule_.entropy_threshold;
    }
    return false;
}

std::vector<double> Session::information_gains() const {
    const Beliefs& b = beliefs();
    const double h = entropy(b);
    std::vector<double> out;
    out.reserve(remaining_.size());
    for (VarIndex q : remaining_) out.push_back(h - expected_entropy(b, evidence_, q));
    return out;
}

std::optional<Selection> Session::select_next() const {
    if (terminated()) return std::nullopt;
    const auto gains = information_gains();
    Selection best{remaining_.front(), gains.front()};
    for (std::size_t i = 1; i < gains.size(); ++i) {
        if (gains[i] > best.information_gain + kTieEpsilon) best = {remaining_[i], gains[i]};
    }
    return best;
}

void Session::submit_answer(VarIndex q, int state) {
    const Network& net = model_->network();
    if (q >= net.size()) throw UnknownVariable("#" + std::to_string(q));
    auto it = std::find(remaining_.begin(), remaining_.end(), q);
    if (it == remaining_.end())
        throw InvalidArgument("question '" + net.variable(q).id + "' is not awaiting an answer");
    if (state < 0 || state >= net.cardinality(q))
        throw InvalidArgument("state " + std::to_string(state) + " out of range for '" + net.variable(q).id + "'");

    const Beliefs& before = beliefs();
    const double ig = entropy(before) - expected_entropy(before, evidence_, q);
    Evidence next = evidence_.with(q, state);
    Beliefs after = model_->calibrate(next);  // throws before any mutation

    TranscriptStep rec;
    rec.step = step_ + 1;
    rec.asked = q;
    rec.answer = state;
    rec.information_gain = ig;
    rec.entropy_after = entropy(after);
    for (VarIndex t : net.targets()) rec.skill_posteriors.push_back(after.marginal(t));

    evidence_ = std::move(next);
    remaining_.erase(it);
    ++step_;
    cache_ = std::move(after);
    entropy_trace_.push_back(rec.entropy_after);
    transcript_.push_back(std::move(rec));
}

void Session::skip_answer(VarIndex q, int state) {
    const Network& net = model_->network();
    if (q >= net.size()) throw UnknownVariable("#" + std::to_string(q));
    auto it = std::find(remaining_.begin(), remaining_.end(), q);
    if (it == remaining_.end())
        throw InvalidArgument("question '" + net.variable(q).id + "' is not awaiting an answer");

    const Beliefs& b = beliefs();
    TranscriptStep rec;
    rec.step = step_ + 1;
    rec.asked = q;
    rec.answer = state;
    rec.information_gain = entropy(b) - expected_entropy(b, evidence_, q);
    rec.entropy_after = entropy(b);
    for (VarIndex t : net.targets()) rec.skill_posteriors.push_back(b.marginal(t));
    rec.absorbed = false;

    remaining_.erase(it);
    ++step_;
    entropy_trace_.push_back(rec.entropy_after);
    transcript_.push_back(std::move(rec));
}

std::map<VarIndex, Prediction> Session::predict_answers() const {
    const Beliefs& b = beliefs();
    std::map<VarIndex, Prediction> out;
    for (VarIndex q : remaining_) {
        Prediction p;
        p.distribution = b.marginal(q);
        p.state = static_cast<int>(p.distribution.argmax());
        const double top = p.distribution.p[static_cast<std::size_t>(p.state)];
        for (std::size_t s = 0; s < p.distribution.p.size(); ++s)
            if (static_cast<int>(s) != p.state && std::abs(p.distribution.p[s] - top) <= kTieEpsilon) p.tie = true;
        out.emplace(q, std::move(p));
    }
    return out;
}

std::vector<Distribution> Session::skill_estimates() const {
    const Beliefs& b = beliefs();
    std::vector<Distribution> out;
    for (VarIndex t : model_->network().targets()) out.push_back(b.marginal(t));
    return out;
}

nlohmann::ordered_json transcript_step_to_json(const Network& net, const TranscriptStep& s) {
    nlohmann::ordered_json j;
    j["step"] = s.step;
    j["asked"] = net.variable(s.asked).id;
    j["answer"] = to_wire_state(s.answer);
    j["ig"] = s.information_gain;
    j["entropy_after"] = s.entropy_after;
    nlohmann::ordered_json post = nlohmann::ordered_json::object();
    for (const auto& d : s.skill_posteriors) post[net.variable(d.variable).id] = d.p;
    j["skill_posteriors"] = std::move(post);
    return j;
}

Session simulate(std::shared_ptr<const JunctionTree> model, const Evidence& initial,
                 const std::map<VarIndex, int>& responses, TerminationRule rule) {
    std::vector<VarIndex> askable;
    for (auto [q, s] : responses) askable.push_back(q);
    Session session(std::move(model), initial, rule, askable);
    while (auto next = session.select_next()) session.submit_answer(next->question, responses.at(next->question));
    return session;
}

}  // namespace catbn
