#ifndef CATBN_MODEL_ZOO_HPP
#define CATBN_MODEL_ZOO_HPP

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "catbn/network.hpp"

namespace catbn {

struct QuestionSpec {
    std::string id;
    int max_points = 1;
};

struct InfoSpec {
    std::string id;
    int cardinality = 2;
};

/// Declarative description of a test: its questions, the personal covariates
/// collected before testing, and optionally an expert skill -> questions map.
struct TestBlueprint {
    int total_points = 0;
    std::vector<QuestionSpec> questions;
    std::vector<InfoSpec> info_vars;
    std::map<std::string, std::vector<std::string>> expert_map;

    int max_points_sum() const;
};

/// Throws InvalidArgument: duplicate ids, non-positive max_points, point sum
/// different from total_points, expert map with unknown questions, a
/// question without a skill or with more than four, or an empty skill.
void validate_blueprint(const TestBlueprint& bp);

/// 53 questions from 29 problems, 120 points: eight one-point parts of the
/// first problem, 17 problems split into two 2-point parts, 11 unsplit
/// 4-point problems. Info: three averaged subject grades (5 states), gender,
/// age band.
TestBlueprint paper_blueprint();

/// Seven-skill mapping over a blueprint's questions. Synthetic placeholder:
/// question i gets skill i mod 7 and every third question a second skill.
std::map<std::string, std::vector<std::string>> synthetic_expert_map(const TestBlueprint& bp);

nlohmann::ordered_json blueprint_to_json(const TestBlueprint& bp);
TestBlueprint blueprint_from_json(const nlohmann::json& doc);
void save_blueprint(const TestBlueprint& bp, const std::filesystem::path& path);
TestBlueprint load_blueprint(const std::filesystem::path& path);

struct ModelSpec {
    std::string id;
    std::string name;
    int skill_count = 1;
    int skill_states = 2;
    Scale scale = Scale::boolean;
    bool additional_info = false;
    bool observed_score = false;

    bool operator==(const ModelSpec&) const = default;
};

/// The fourteen canonical structures, Boolean block first.
const std::vector<ModelSpec>& enumerate_specs();
/// Throws InvalidArgument for an unknown id.
const ModelSpec& spec_by_id(std::string_view id);
/// Throws InvalidArgument when `spec` differs from the canonical row of its id.
void check_spec(const ModelSpec& spec);

inline constexpr int kScoreGroups = 3;
inline const char* const kSingleSkillId = "S1";

/// Structure with uniform CPTs. Skills come first, then questions in
/// blueprint order, then info variables (children of the skill node).
Network build_model(const ModelSpec& spec, const TestBlueprint& bp);

}  // namespace catbn

#endif
