#include "catbn/model_zoo.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace catbn {

int TestBlueprint::max_points_sum() const {
    int s = 0;
    for (const auto& q : questions) s += q.max_points;
    return s;
}

void validate_blueprint(const TestBlueprint& bp) {
    if (bp.questions.empty()) throw InvalidArgument("blueprint has no questions");
    std::set<std::string> ids;
    for (const auto& q : bp.questions) {
        if (!ids.insert(q.id).second) throw InvalidArgument("duplicate id '" + q.id + "' in blueprint");
        if (q.max_points < 1) throw InvalidArgument("question '" + q.id + "' needs max_points >= 1");
    }
    for (const auto& y : bp.info_vars) {
        if (!ids.insert(y.id).second) throw InvalidArgument("duplicate id '" + y.id + "' in blueprint");
        if (y.cardinality < 2) throw InvalidArgument("info variable '" + y.id + "' needs cardinality >= 2");
    }
    if (bp.max_points_sum() != bp.total_points)
        throw InvalidArgument("question max_points sum to " + std::to_string(bp.max_points_sum()) +
                              " but the blueprint declares " + std::to_string(bp.total_points));
    if (bp.expert_map.empty()) return;
    std::map<std::string, int> skills_per_question;
    for (const auto& [skill, qs] : bp.expert_map) {
        if (ids.count(skill)) throw InvalidArgument("skill id '" + skill + "' collides with a question or info id");
        if (qs.empty()) throw InvalidArgument("skill '" + skill + "' maps to no question");
        std::set<std::string> mine;
        for (const auto& q : qs) {
            if (!mine.insert(q).second) throw InvalidArgument("skill '" + skill + "' lists '" + q + "' twice");
            auto it = std::find_if(bp.questions.begin(), bp.questions.end(),
                                   [&](const QuestionSpec& s) { return s.id == q; });
            if (it == bp.questions.end())
                throw InvalidArgument("expert map names unknown question '" + q + "'");
            ++skills_per_question[q];
        }
    }
    for (const auto& q : bp.questions) {
        const int k = skills_per_question[q.id];
        if (k < 1 || k > 4)
            throw InvalidArgument("question '" + q.id + "' has " + std::to_string(k) +
                                  " skills in the expert map (allowed 1-4)");
    }
}

TestBlueprint paper_blueprint() {
    TestBlueprint bp;
    bp.total_points = 120;
    int next = 1;
    auto add = [&](int pts) { bp.questions.push_back({"X" + std::to_string(next++), pts}); };
    for (int i = 0; i < 8; ++i) add(1);
    for (int p = 0; p < 28; ++p) {
        // Eleven problems stay whole, the other seventeen split into two parts.
        if (p % 5 == 2 || p % 5 == 4) {
            add(4);
        } else {
            add(2);
            add(2);
        }
    }
    bp.info_vars = {{"math", 5}, {"physics", 5}, {"chemistry", 5}, {"gender", 2}, {"age", 3}};
    return bp;
}

std::map<std::string, std::vector<std::string>> synthetic_expert_map(const TestBlueprint& bp) {
    std::map<std::string, std::vector<std::string>> map;
    for (std::size_t i = 0; i < bp.questions.size(); ++i) {
        const auto& q = bp.questions[i].id;
        map["S" + std::to_string(i % 7 + 1)].push_back(q);
        if (i % 3 == 0) map["S" + std::to_string((i + 3) % 7 + 1)].push_back(q);
    }
    return map;
}

nlohmann::ordered_json blueprint_to_json(const TestBlueprint& bp) {
    nlohmann::ordered_json doc;
    doc["total_points"] = bp.total_points;
    doc["questions"] = nlohmann::ordered_json::array();
    for (const auto& q : bp.questions) doc["questions"].push_back({{"id", q.id}, {"max_points", q.max_points}});
    doc["info_vars"] = nlohmann::ordered_json::array();
    for (const auto& y : bp.info_vars) doc["info_vars"].push_back({{"id", y.id}, {"cardinality", y.cardinality}});
    if (!bp.expert_map.empty()) {
        doc["expert_map"] = nlohmann::ordered_json::object();
        for (const auto& [s, qs] : bp.expert_map) doc["expert_map"][s] = qs;
    }
    return doc;
}

TestBlueprint blueprint_from_json(const nlohmann::json& doc) {
    TestBlueprint bp;
    try {
        bp.total_points = doc.at("total_points").get<int>();
        for (const auto& q : doc.at("questions")) bp.questions.push_back({q.at("id"), q.at("max_points")});
        if (doc.contains("info_vars"))
            for (const auto& y : doc.at("info_vars")) bp.info_vars.push_back({y.at("id"), y.at("cardinality")});
        if (doc.contains("expert_map"))
            for (const auto& [s, qs] : doc.at("expert_map").items())
                bp.expert_map[s] = qs.get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("malformed blueprint: ") + ex.what());
    }
    validate_blueprint(bp);
    return bp;
}

void save_blueprint(const TestBlueprint& bp, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << blueprint_to_json(bp).dump(2) << "\n";
}

TestBlueprint load_blueprint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(path.string() + ": " + ex.what());
    }
    return blueprint_from_json(doc);
}

const std::vector<ModelSpec>& enumerate_specs() {
    static const std::vector<ModelSpec> specs = {
        {"b2", "tf_simple", 1, 2, Scale::boolean, false, false},
        {"b2+", "tf_plus", 1, 2, Scale::boolean, true, false},
        {"b3", "tf3s_simple", 1, 3, Scale::boolean, false, false},
        {"b3+", "tf3s_plus", 1, 3, Scale::boolean, true, false},
        {"b3o", "tf3s_obssimple", 1, 3, Scale::boolean, false, true},
        {"b3o+", "tf3s_obsplus", 1, 3, Scale::boolean, true, true},
        {"b2e", "tf_expert", 7, 2, Scale::boolean, false, false},
        {"n2", "points_simple", 1, 2, Scale::points, false, false},
        {"n2+", "points_plus", 1, 2, Scale::points, true, false},
        {"n3", "points3s_simple", 1, 3, Scale::points, false, false},
        {"n3+", "points3s_plus", 1, 3, Scale::points, true, false},
        {"n3o", "points3s_obssimple", 1, 3, Scale::points, false, true},
        {"n3o+", "points3s_obsplus", 1, 3, Scale::points, true, true},
        {"n2e", "points_expert", 7, 2, Scale::points, false, false},
    };
    return specs;
}

const ModelSpec& spec_by_id(std::string_view id) {
    for (const auto& s : enumerate_specs())
        if (s.id == id) return s;
    throw InvalidArgument("unknown model id '" + std::string(id) + "'");
}

void check_spec(const ModelSpec& spec) {
    if (!(spec_by_id(spec.id) == spec))
        throw InvalidArgument("model spec '" + spec.id + "' does not match its canonical definition");
}

Network build_model(const ModelSpec& spec, const TestBlueprint& bp) {
    check_spec(spec);
    validate_blueprint(bp);
    Network net;
    std::vector<VarIndex> skills;
    std::map<std::string, VarIndex> skill_index;

    if (spec.skill_count == 1) {
        Variable s;
        s.id = kSingleSkillId;
        s.cardinality = spec.skill_states;
        if (spec.observed_score) {
            s.name = "score group";
            s.role = Role::scoregroup;
            s.states = {"bad", "average", "good"};
        } else {
            s.name = "skill";
            s.role = Role::skill;
        }
        skills.push_back(net.add_variable(std::move(s)));
    } else {
        if (bp.expert_map.empty())
            throw InvalidArgument("model '" + spec.id + "' needs an expert map in the blueprint");
        if (static_cast<int>(bp.expert_map.size()) != spec.skill_count)
            throw InvalidArgument("model '" + spec.id + "' expects " + std::to_string(spec.skill_count) +
                                  " skills, expert map has " + std::to_string(bp.expert_map.size()));
        for (const auto& [id, qs] : bp.expert_map) {  // std::map: sorted by skill id
            Variable s;
            s.id = id;
            s.cardinality = spec.skill_states;
            s.role = Role::skill;
            const VarIndex v = net.add_variable(std::move(s));
            skills.push_back(v);
            skill_index[id] = v;
        }
    }

    for (const auto& q : bp.questions) {
        Variable x;
        x.id = q.id;
        x.role = Role::question;
        x.scale = spec.scale;
        x.cardinality = spec.scale == Scale::boolean ? 2 : q.max_points + 1;
        for (int p = 0; p < x.cardinality; ++p) x.states.push_back(std::to_string(p));
        const VarIndex v = net.add_variable(std::move(x));
        if (spec.skill_count == 1) {
            net.set_parents(v, {skills.front()});
        } else {
            std::vector<VarIndex> parents;
            for (const auto& [sid, qs] : bp.expert_map)
                if (std::find(qs.begin(), qs.end(), q.id) != qs.end()) parents.push_back(skill_index.at(sid));
            net.set_parents(v, std::move(parents));
        }
    }

    if (spec.additional_info) {
        for (const auto& y : bp.info_vars) {
            Variable v;
            v.id = y.id;
            v.role = Role::info;
            v.cardinality = y.cardinality;
            const VarIndex idx = net.add_variable(std::move(v));
            net.set_parents(idx, {skills.front()});
        }
    }
    return net;
}

}  // namespace catbn
