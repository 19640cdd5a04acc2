#ifndef CATBN_CAT_SESSION_HPP
#define CATBN_CAT_SESSION_HPP

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "catbn/inference.hpp"
#include "catbn/network.hpp"

namespace catbn {

/// Entropies use the natural logarithm.
///
/// H(e): sum over skill and scoregroup variables of the Shannon entropy of
/// their posterior marginal (not the joint entropy of all skills).
double entropy(const JunctionTree& tree, const Evidence& e);
double entropy(const Beliefs& beliefs);

/// sum_x P(q = x | e) * H(e, q = x); outcomes with zero probability are skipped.
double expected_entropy(const JunctionTree& tree, const Evidence& e, VarIndex q);
/// Same quantity from an already calibrated `beliefs` for `e`. Uses the
/// pairwise route when every target variable shares a clique with q and
/// falls back to conditioning otherwise.
double expected_entropy(const Beliefs& beliefs, const Evidence& e, VarIndex q);
/// Pairwise route only: reads P(S_i, q | e) from clique beliefs. Requires
/// every target to share a clique with q.
double expected_entropy_pairwise(const Beliefs& beliefs, VarIndex q);
/// Conditioning route only: recalibrates once per outcome of q.
double expected_entropy_by_conditioning(const JunctionTree& tree, const Evidence& e, VarIndex q);

double information_gain(const JunctionTree& tree, const Evidence& e, VarIndex q);

struct TerminationRule {
    enum class Kind { exhaust, max_questions, entropy_below };
    Kind kind = Kind::exhaust;
    int max_questions = 0;
    double entropy_threshold = 0.0;

    static TerminationRule exhaust() { return {}; }
    /// Throws InvalidArgument for k < 1.
    static TerminationRule after(int k);
    /// Stand-in for a confidence-based stop. Throws InvalidArgument for h <= 0.
    static TerminationRule entropy_below(double h);
};

struct Selection {
    VarIndex question = kNoVar;
    double information_gain = 0.0;
};

struct Prediction {
    int state = 0;  // argmax, lowest index on ties
    bool tie = false;
    Distribution distribution;
};

struct TranscriptStep {
    int step = 0;
    VarIndex asked = kNoVar;
    int answer = 0;  // 0-based
    double information_gain = 0.0;
    double entropy_after = 0.0;
    std::vector<Distribution> skill_posteriors;
    bool absorbed = true;  // false when the answer was ruled out and dropped
};

/// One adaptive test. Single-owner and mutable; many sessions may share one
/// immutable JunctionTree.
class Session {
public:
    /// `initial` may only assign non-question variables (e.g. personal info).
    /// Throws ImpossibleEvidence / InvalidArgument.
    Session(std::shared_ptr<const JunctionTree> model, Evidence initial = {},
            TerminationRule rule = TerminationRule::exhaust());
    /// Restricts the askable questions to `askable` (kept in network order).
    Session(std::shared_ptr<const JunctionTree> model, Evidence initial, TerminationRule rule,
            std::span<const VarIndex> askable);

    const JunctionTree& model() const noexcept { return *model_; }
    const std::shared_ptr<const JunctionTree>& model_ptr() const noexcept { return model_; }
    const Evidence& evidence() const noexcept { return evidence_; }
    const std::vector<VarIndex>& remaining() const noexcept { return remaining_; }
    int step() const noexcept { return step_; }
    const std::vector<double>& entropy_trace() const noexcept { return entropy_trace_; }
    const std::vector<TranscriptStep>& transcript() const noexcept { return transcript_; }
    const TerminationRule& rule() const noexcept { return rule_; }

    bool terminated() const;

    /// argmax information gain over the remaining questions, ties to the
    /// lowest variable index; nullopt when nothing remains or the
    /// termination rule is met.
    std::optional<Selection> select_next() const;

    /// Throws InvalidArgument for an answered/unknown question or bad state,
    /// ImpossibleEvidence when the model rules the answer out. The session is
    /// unchanged on error.
    void submit_answer(VarIndex q, int state);

    /// Records `q` as asked without adding its answer to the evidence. For
    /// replaying recorded answers the model assigns zero probability.
    void skip_answer(VarIndex q, int state);

    std::map<VarIndex, Prediction> predict_answers() const;
    std::vector<Distribution> skill_estimates() const;
    double current_entropy() const;

    /// Information gain of every remaining question, in remaining() order.
    std::vector<double> information_gains() const;

private:
    const Beliefs& beliefs() const;

    std::shared_ptr<const JunctionTree> model_;
    Evidence evidence_;
    TerminationRule rule_;
    std::vector<VarIndex> remaining_;
    int step_ = 0;
    std::vector<double> entropy_trace_;
    std::vector<TranscriptStep> transcript_;
    mutable std::optional<Beliefs> cache_;
};

/// {step, asked, answer, ig, entropy_after, skill_posteriors}; states 1-based.
nlohmann::ordered_json transcript_step_to_json(const Network& net, const TranscriptStep& s);

/// Replays answers from `responses` (question -> 0-based state) by greedy
/// selection until the rule stops or no answerable question remains.
Session simulate(std::shared_ptr<const JunctionTree> model, const Evidence& initial,
                 const std::map<VarIndex, int>& responses, TerminationRule rule = TerminationRule::exhaust());

}  // namespace catbn

#endif
