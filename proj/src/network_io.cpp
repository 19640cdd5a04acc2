#include "catbn/network_io.hpp"

#include <fstream>

namespace catbn {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json network_to_json(const Network& net) {
    ordered_json doc;
    doc["variables"] = ordered_json::array();
    for (const Variable& v : net.variables()) {
        ordered_json jv;
        jv["id"] = v.id;
        jv["name"] = v.name;
        jv["cardinality"] = v.cardinality;
        jv["role"] = std::string(to_string(v.role));
        jv["states"] = v.states;
        if (v.scale) jv["scale"] = std::string(to_string(*v.scale));
        doc["variables"].push_back(std::move(jv));
    }
    doc["cpts"] = ordered_json::array();
    for (const Cpt& c : net.cpts()) {
        ordered_json jc;
        jc["child"] = net.variable(c.child).id;
        jc["parents"] = ordered_json::array();
        for (VarIndex p : c.parents) jc["parents"].push_back(net.variable(p).id);
        const auto card = static_cast<std::size_t>(net.cardinality(c.child));
        ordered_json rows = ordered_json::array();
        for (std::size_t r = 0; r < c.row_count(card); ++r) {
            ordered_json row = ordered_json::array();
            for (std::size_t s = 0; s < card; ++s) row.push_back(c.table[r * card + s]);
            rows.push_back(std::move(row));
        }
        jc["rows"] = std::move(rows);
        doc["cpts"].push_back(std::move(jc));
    }
    return doc;
}

Network network_from_json(const json& doc) {
    Network net;
    try {
        for (const auto& jv : doc.at("variables")) {
            Variable v;
            v.id = jv.at("id").get<std::string>();
            v.name = jv.value("name", v.id);
            v.cardinality = jv.at("cardinality").get<int>();
            v.role = role_from_string(jv.at("role").get<std::string>());
            if (jv.contains("states")) v.states = jv.at("states").get<std::vector<std::string>>();
            if (jv.contains("scale")) v.scale = scale_from_string(jv.at("scale").get<std::string>());
            net.add_variable(std::move(v));
        }
        std::vector<bool> seen(net.size(), false);
        for (const auto& jc : doc.at("cpts")) {
            const auto child_id = jc.at("child").get<std::string>();
            auto child = net.find(child_id);
            if (!child) throw ParseError("cpt for unknown variable '" + child_id + "'");
            if (seen[*child]) throw ParseError("duplicate cpt for '" + child_id + "'");
            seen[*child] = true;
            Cpt cpt;
            cpt.child = *child;
            for (const auto& jp : jc.at("parents")) {
                const auto pid = jp.get<std::string>();
                auto p = net.find(pid);
                if (!p) throw ParseError("cpt of '" + child_id + "' names unknown parent '" + pid + "'");
                cpt.parents.push_back(*p);
            }
            for (const auto& row : jc.at("rows"))
                for (const auto& x : row) cpt.table.push_back(x.get<double>());
            net.set_cpt(std::move(cpt));
        }
        for (VarIndex v = 0; v < net.size(); ++v)
            if (!seen[v]) throw ParseError("missing cpt for '" + net.variable(v).id + "'");
    } catch (const json::exception& ex) {
        throw ParseError(std::string("malformed network json: ") + ex.what());
    } catch (const InvalidArgument& ex) {
        throw ParseError(ex.what());
    }
    return net;
}

void save_network(const Network& net, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << network_to_json(net).dump(2) << "\n";
    if (!out) throw Error("write failed for " + path.string());
}

Network load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& ex) {
        throw ParseError(path.string() + ": " + ex.what());
    }
    return network_from_json(doc);
}

}  // namespace catbn
