#ifndef CATBN_DATA_HPP
#define CATBN_DATA_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "catbn/dataset.hpp"
#include "catbn/model_zoo.hpp"
#include "catbn/network.hpp"

namespace catbn {

// CSV layout: header "student_id,<info ids...>,<question ids...>" in
// blueprint order. Question cells hold points (0/1 on the Boolean scale),
// info cells hold 1-based states, empty cells are missing answers.

/// Columns implied by a blueprint for the given scale.
std::vector<Column> dataset_schema(const TestBlueprint& bp, Scale scale);

/// Throws ParseError naming the row and column for header mismatches,
/// malformed or out-of-range cells, and duplicate student ids.
Dataset load_csv(const std::filesystem::path& path, const TestBlueprint& bp, Scale scale);
Dataset read_csv(std::istream& in, const TestBlueprint& bp, Scale scale);

void save_csv(const Dataset& ds, const std::filesystem::path& path);
void write_csv(const Dataset& ds, std::ostream& out);

/// FNV-1a 64 over the canonical CSV text.
std::uint64_t dataset_hash(const Dataset& ds);

/// Full-marks proxy: 1 iff the question received its maximum points.
/// Throws InvalidArgument on Boolean input.
Dataset to_boolean(const Dataset& ds);

enum class ScoreGroup { bad = 0, average = 1, good = 2 };

struct ScoreGroups {
    std::vector<int> group;                // per row, 0 = bad .. 2 = good
    std::array<std::size_t, 3> sizes{};
    std::size_t partial_rows = 0;          // totals computed over answered cells only
};

/// Rows ordered by (total score, student id) are cut into thirds of sizes
/// ceil(N/3), ceil((N - first)/2), remainder. Throws InvalidArgument for N < 3.
ScoreGroups discretize_scores(const Dataset& ds);

/// Copy of `ds` with an extra score column `column_id` holding the groups.
Dataset with_score_column(const Dataset& ds, const ScoreGroups& groups, const std::string& column_id);

struct SyntheticData {
    Dataset data;
    std::vector<std::string> skill_ids;
    std::vector<int> skills;  // row-major rows() x skill_ids.size(), 0-based
};

/// Ancestral sampling from `truth`. Question and info columns follow the
/// blueprint; info variables absent from `truth` are left missing. The scale
/// is read from the truth's question annotations. Throws for n < 1.
SyntheticData generate_synthetic(const Network& truth, const TestBlueprint& bp, std::size_t n,
                                 std::uint64_t seed);

/// truth_skills.csv: student_id,<skill ids...>, 1-based states.
void save_truth_skills(const SyntheticData& syn, const std::filesystem::path& path);

struct GroundTruthOptions {
    int skill_states = 3;
    Scale scale = Scale::boolean;
    bool with_info = false;
    std::uint64_t seed = 1;
    /// Item difficulties are uniform on [-difficulty_spread, difficulty_spread]
    /// and discriminations uniform on [min_discrimination, max_discrimination]
    /// (logistic scale, abilities spread over [-1.5, 1.5]). The defaults put the
    /// prior answer-prediction rate near 0.71 on the built-in blueprint.
    double difficulty_spread = 2.5;
    double min_discrimination = 1.0;
    double max_discrimination = 2.5;
};

/// A single-skill generator network with monotone couplings: higher skill
/// states raise the chance of a correct (or higher-scored) answer and lower
/// the subject grades (grade 1 is best). Item difficulties and
/// discriminations are drawn from the seed.
Network make_ground_truth(const TestBlueprint& bp, const GroundTruthOptions& opt);

/// Pearson correlation of each subject's grade with the total score, over
/// rows where the grade is present. nullopt when a side has zero variance.
std::map<std::string, std::optional<double>> grade_correlations(
    const Dataset& ds, const std::vector<std::string>& subjects = {"math", "physics", "chemistry"});

}  // namespace catbn

#endif
