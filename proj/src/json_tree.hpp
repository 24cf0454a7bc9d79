#pragma once

#include <json.hpp>

#include "curstat/tree.hpp"

namespace curstat::detail {

// {"states": [0,1,...], "edges": [[0,1],...], "names": {"0": "healthy", ...}}
MultistateTree tree_from_json(const nlohmann::json& j);
nlohmann::json tree_to_json(const MultistateTree& tree);

}  // namespace curstat::detail
