#include "wesac/mdp_io.hpp"

#include <fstream>
#include <stdexcept>

namespace wesac {

nlohmann::json table_to_json(const Eigen::MatrixXd& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < t.cols(); ++j) row.push_back(t(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd table_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty() || !j.front().is_array()) {
        throw std::invalid_argument("expected a non-empty 2-D array");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.front().size());
    Eigen::MatrixXd t(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw std::invalid_argument("ragged 2-D array at row " + std::to_string(i));
        }
        for (Eigen::Index c = 0; c < cols; ++c) t(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return t;
}

nlohmann::json mdp_to_json(const TabularMdp& m) {
    nlohmann::json j;
    j["n_states"] = m.n_states;
    j["n_actions"] = m.n_actions;
    j["gamma"] = m.gamma;
    j["reward"] = table_to_json(m.reward);
    nlohmann::json tr = nlohmann::json::array();
    for (std::size_t s = 0; s < m.n_states; ++s) {
        nlohmann::json per_action = nlohmann::json::array();
        for (std::size_t a = 0; a < m.n_actions; ++a) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t k = 0; k < m.n_states; ++k) row.push_back(m.p(s, a, k));
            per_action.push_back(std::move(row));
        }
        tr.push_back(std::move(per_action));
    }
    j["transition"] = std::move(tr);
    return j;
}

TabularMdp mdp_from_json(const nlohmann::json& j) {
    for (const char* key : {"n_states", "n_actions", "gamma", "reward", "transition"}) {
        if (!j.contains(key)) throw std::invalid_argument(std::string("MDP document lacks '") + key + "'");
    }
    TabularMdp m(j.at("n_states").get<std::size_t>(), j.at("n_actions").get<std::size_t>(),
                 j.at("gamma").get<double>());
    m.reward = table_from_json(j.at("reward"));
    if (static_cast<std::size_t>(m.reward.rows()) != m.n_states ||
        static_cast<std::size_t>(m.reward.cols()) != m.n_actions) {
        throw std::invalid_argument("reward shape does not match n_states x n_actions");
    }
    const auto& tr = j.at("transition");
    if (!tr.is_array() || tr.size() != m.n_states) {
        throw std::invalid_argument("transition must have n_states entries");
    }
    for (std::size_t s = 0; s < m.n_states; ++s) {
        if (!tr[s].is_array() || tr[s].size() != m.n_actions) {
            throw std::invalid_argument("transition[" + std::to_string(s) + "] must have n_actions entries");
        }
        for (std::size_t a = 0; a < m.n_actions; ++a) {
            const auto& row = tr[s][a];
            if (!row.is_array() || row.size() != m.n_states) {
                throw std::invalid_argument("transition row has wrong length");
            }
            for (std::size_t k = 0; k < m.n_states; ++k) m.p(s, a, k) = row[k].get<double>();
        }
    }
    return m;
}

TabularMdp load_mdp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open MDP file " + path.string());
    return mdp_from_json(nlohmann::json::parse(in));
}

void save_mdp(const TabularMdp& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write MDP file " + path.string());
    out << mdp_to_json(m).dump(2) << '\n';
}

}  // namespace wesac
