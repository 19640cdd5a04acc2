#ifndef CATBN_EVALUATION_HPP
#define CATBN_EVALUATION_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "catbn/cat_session.hpp"
#include "catbn/data.hpp"
#include "catbn/learning.hpp"
#include "catbn/model_zoo.hpp"

namespace catbn {

struct EvalConfig {
    int folds = 10;
    std::uint64_t seed = 1;
    std::vector<std::string> specs;
    std::optional<int> max_steps;  // nullopt: run every test to the end
    EmConfig em;
    /// Outer loops (folds, held-out students). EM always runs its
    /// block-deterministic E-step so both modes produce identical numbers.
    Execution execution = Execution::parallel;
    std::optional<std::filesystem::path> cache_dir;

    /// Throws InvalidArgument.
    void validate(std::size_t rows) const;
};

struct ModelReport {
    std::string model;
    /// SR_s = sum_t SR_s^t / N over all N held-out students; undefined terms
    /// (no remaining question) contribute nothing to the sum.
    std::vector<double> sr_curve;
    /// Mean over the students whose test still had remaining questions.
    std::vector<std::optional<double>> sr_conditional;
    std::vector<std::size_t> sr_support;
    std::vector<std::string> question_ids;
    /// [question][step - 1]: share of students asked that question at that step.
    std::vector<std::vector<double>> occurrence;
    Sparsity sparsity;
    bool complete = true;
    std::vector<int> failed_folds;
    std::size_t students = 0;
    std::size_t dropped_answers = 0;
};

struct EvalReport {
    std::vector<ModelReport> models;
    std::vector<std::string> student_ids;
    std::vector<int> fold_of_row;
    nlohmann::ordered_json manifest;
};

/// What `spec` learns from: the full-marks Boolean view for Boolean specs on
/// points data, plus the score-group column for observed-score specs.
/// Throws InvalidArgument for a points spec on Boolean data.
Dataset training_view(const ModelSpec& spec, const Dataset& data);

/// EM fit of `spec` built over `bp` on training_view(spec, data).
FitResult train_model(const ModelSpec& spec, const TestBlueprint& bp, const Dataset& data, const EmConfig& em,
                      Execution exec = Execution::parallel);

/// Shuffles row indices with `seed` and deals them round-robin into folds.
std::vector<int> assign_folds(std::size_t rows, int folds, std::uint64_t seed);

/// SR_s^t over the session's remaining questions; nullopt when none remain.
/// Throws InvalidArgument when `truth` lacks a remaining question.
std::optional<double> success_ratio_step(const Session& session, const std::map<VarIndex, int>& truth);

struct StudentRun {
    std::vector<std::optional<double>> sr;  // index = step
    std::vector<VarIndex> asked;            // in asking order
    std::size_t dropped_answers = 0;        // recorded answers (or info values) the model ruled out
};

/// Simulates one held-out student: info evidence first when `use_info`, then
/// greedy select / answer-from-record / predict for up to `steps` questions.
/// Values the model assigns zero probability are left out of the evidence
/// (the question still counts as asked) and tallied in `dropped_answers`.
StudentRun run_student(std::shared_ptr<const JunctionTree> model, const Dataset& ds, std::size_t row,
                       bool use_info, std::size_t steps);

/// k-fold protocol over every configured spec. Boolean specs handed a points
/// dataset are evaluated on its full-marks Boolean view of the same rows;
/// points specs on Boolean data are rejected.
EvalReport cross_validate(const Dataset& data, const TestBlueprint& bp, const EvalConfig& cfg);

/// Writes sr_curves.csv, sr_curves_conditional.csv, occurrence_<model>.csv,
/// sparsity.csv, folds.csv and manifest.json into `dir` (created if needed).
void emit_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace catbn

#endif
