#pragma once

#include "wesac/agent.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace wesac::harness {

inline constexpr const char* kCsvHeader =
    "step,eval_return_mean,eval_return_std,q_loss,pi_loss,mean_weight,wall_ms";
inline constexpr std::size_t kFinalWindow = 10;

struct RunConfig {
    std::string env = "pendulum";
    /// "wesac" or "sac".
    std::string algorithm = "wesac";
    std::uint64_t seed = 0;
    std::size_t total_steps = 60000;
    std::size_t gradient_steps = 1;
    double alpha = 0.2;
    double gamma = 0.99;
    double eta = 0.01;
    double tau = 0.005;
    double learning_rate = 3e-4;
    std::vector<std::size_t> hidden{64, 64};
    std::size_t batch_size = 256;
    std::size_t warmup = 1000;
    std::size_t buffer_capacity = 1000000;
    std::size_t eval_interval = 1000;
    std::size_t eval_episodes = 5;
    double reward_scale = 1.0;
    /// wesac only: run the weighted code path with every weight set to 1.
    bool force_unit_weight = false;
    /// Record real elapsed time in wall_ms; off keeps CSVs reproducible.
    bool log_wall_time = false;
    bool save_checkpoints = false;

    /// Throws std::invalid_argument naming the bad field.
    void validate() const;
    AgentConfig agent_config(const env::EnvSpec& spec) const;
    /// `<env>_<algorithm>_seed<seed>`
    std::string stem() const;
};

/// Rejects unknown keys. A `seeds` array expands into one config per seed;
/// a top-level array concatenates its entries.
std::vector<RunConfig> configs_from_json(const nlohmann::json& j);
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
std::vector<RunConfig> load_configs(const std::filesystem::path& path);

struct MetricRow {
    std::size_t step = 0;
    double eval_return_mean = 0.0;
    double eval_return_std = 0.0;
    double q_loss = 0.0;
    double pi_loss = 0.0;
    double mean_weight = 1.0;
    double wall_ms = 0.0;
};

std::string format_row(const MetricRow& r);
std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path);

struct RunSummary {
    std::string env;
    std::string algorithm;
    std::uint64_t seed = 0;
    double final_return_mean = 0.0;
    double final_return_std = 0.0;
    std::optional<std::size_t> aborted_at;
    /// "ok", "no-gradient-run" or "aborted".
    std::string status = "ok";
    std::string abort_reason;
};

nlohmann::json to_json(const RunSummary& s);

struct RunResult {
    RunSummary summary;
    std::vector<MetricRow> rows;
    std::filesystem::path csv_path;
    std::filesystem::path summary_path;
};

/// Mean and population std of the last kFinalWindow eval_return_mean values.
std::pair<double, double> final_return(const std::vector<MetricRow>& rows);

/**
 * Trains one agent. Every eval_interval environment steps after gradient
 * updates have begun, runs eval_episodes deterministic episodes on a separate
 * environment instance and writes one CSV row; losses and mean_weight are
 * averaged over the updates since the previous row. Writes
 * `<stem>.csv` and `<stem>.summary.json` into `out_dir`.
 */
RunResult run_experiment(const RunConfig& config, const std::filesystem::path& out_dir);

/// Raises glibc's mmap threshold so per-step minibatch buffers are reused
/// instead of mapped and unmapped. No-op elsewhere; called by run_experiment.
void tune_allocator();

/// Runs configs on up to `threads` worker threads; results keep input order.
std::vector<RunResult> run_experiments(const std::vector<RunConfig>& configs,
                                       const std::filesystem::path& out_dir, std::size_t threads);

/// Trailing moving average; the first window - 1 points average the prefix.
std::vector<double> smooth(const std::vector<double>& series, std::size_t window = 20);

struct SeedFinal {
    std::uint64_t seed = 0;
    double final_return = 0.0;
};

struct EnvComparison {
    std::string env;
    std::string algorithm_a;
    std::string algorithm_b;
    std::vector<SeedFinal> a;
    std::vector<SeedFinal> b;
    double mean_a = 0.0;
    double mean_b = 0.0;
    /// (mean_b - mean_a) / |mean_a| * 100
    double improvement_pct = 0.0;
    /// Per shared seed, same statistic on that seed's pair.
    std::vector<std::pair<std::uint64_t, double>> per_seed_pct;
};

/// Percent change from a to b; 0 when both are 0.
double percent_improvement(double a, double b);

/// Compares every `*.csv` run log in dir_a against dir_b by env. Throws
/// std::invalid_argument if either side is empty or the env sets differ.
std::vector<EnvComparison> compare(const std::filesystem::path& dir_a,
                                   const std::filesystem::path& dir_b);

nlohmann::json to_json(const std::vector<EnvComparison>& report);
std::string format_report(const std::vector<EnvComparison>& report);

}  // namespace wesac::harness
