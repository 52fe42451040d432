#pragma once

#include "wesac/mdp.hpp"

#include <json.hpp>

#include <filesystem>

namespace wesac {

/// {n_states, n_actions, gamma, reward[s][a], transition[s][a][s']}
nlohmann::json mdp_to_json(const TabularMdp& m);

/// Parses the document written by mdp_to_json. Shape errors throw
/// std::invalid_argument; numerical invariants are left to validate_mdp.
TabularMdp mdp_from_json(const nlohmann::json& j);

TabularMdp load_mdp(const std::filesystem::path& path);
void save_mdp(const TabularMdp& m, const std::filesystem::path& path);

nlohmann::json table_to_json(const Eigen::MatrixXd& t);
Eigen::MatrixXd table_from_json(const nlohmann::json& j);

}  // namespace wesac
