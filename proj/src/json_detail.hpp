#pragma once

#include <nlohmann/json.hpp>

#include "treevimp/tree.hpp"

namespace treevimp {

Tree tree_from_json_object(const nlohmann::json& j);
nlohmann::json tree_to_json_object(const Tree& tree);

} // namespace treevimp
