#ifndef CATBN_NETWORK_IO_HPP
#define CATBN_NETWORK_IO_HPP

#include <filesystem>
#include <string>

#include <json.hpp>

#include "catbn/network.hpp"

namespace catbn {

// {variables:[{id,name,cardinality,role,states[,scale]}],
//  cpts:[{child,parents,rows:[[...]]}]}
// Rows are listed with parent configurations in lexicographic order of the
// parent list (first parent most significant).
nlohmann::ordered_json network_to_json(const Network& net);
/// Throws ParseError on malformed documents or unknown ids. Does not validate
/// row sums or acyclicity; run validate_network on the result.
Network network_from_json(const nlohmann::json& doc);

void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

/// 1-based wire state <-> 0-based internal index.
inline int to_wire_state(int state) { return state + 1; }
inline int from_wire_state(int wire) { return wire - 1; }

}  // namespace catbn

#endif
