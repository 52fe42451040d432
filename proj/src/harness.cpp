#include "wesac/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace wesac::harness {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("RunConfig: " + what); };
    const auto& names = env::env_names();
    if (std::find(names.begin(), names.end(), env) == names.end()) fail("unknown env '" + env + "'");
    if (algorithm != "wesac" && algorithm != "sac") fail("algorithm must be 'wesac' or 'sac'");
    if (force_unit_weight && algorithm != "wesac") fail("force_unit_weight applies to wesac only");
    if (eval_interval == 0) fail("eval_interval must be > 0");
    if (eval_episodes == 0) fail("eval_episodes must be > 0");
    if (gradient_steps == 0) fail("gradient_steps must be > 0");
    if (total_steps == 0) fail("total_steps must be > 0");
    if (!(eta > 0.0 && eta <= 1.0)) fail("eta must lie in (0, 1]");
    if (!(reward_scale > 0.0) || !std::isfinite(reward_scale)) fail("reward_scale must be > 0");
    // Remaining fields are checked by AgentConfig.
    env::EnvSpec spec;
    agent_config(spec).validate();
}

AgentConfig RunConfig::agent_config(const env::EnvSpec& spec) const {
    AgentConfig a;
    a.observation_dim = spec.observation_dim;
    a.action_dim = spec.action_dim;
    a.action_bound = spec.action_bound;
    a.hidden = hidden;
    a.alpha = alpha;
    a.gamma = gamma;
    a.eta = eta;
    a.tau = tau;
    a.learning_rate = learning_rate;
    a.batch_size = batch_size;
    a.warmup = warmup;
    a.buffer_capacity = buffer_capacity;
    a.gradient_steps = gradient_steps;
    a.reward_scale = reward_scale;
    if (algorithm == "sac") {
        a.weight_mode = WeightMode::Shannon;
    } else {
        a.weight_mode = force_unit_weight ? WeightMode::Unit : WeightMode::SelfBalancing;
    }
    return a;
}

std::string RunConfig::stem() const { return env + "_" + algorithm + "_seed" + std::to_string(seed); }

namespace {

const std::set<std::string> kConfigKeys{
    "env",        "algorithm",   "seed",          "seeds",           "total_steps",
    "gradient_steps", "alpha",   "gamma",         "eta",             "tau",
    "learning_rate",  "hidden",  "batch_size",    "warmup",          "buffer_capacity",
    "eval_interval",  "eval_episodes", "reward_scale", "force_unit_weight", "log_wall_time",
    "save_checkpoints"};

template <typename T>
void read(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

}  // namespace

RunConfig config_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("RunConfig: expected a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!kConfigKeys.count(key)) throw std::invalid_argument("RunConfig: unknown key '" + key + "'");
    }
    if (j.contains("seeds")) throw std::invalid_argument("RunConfig: use configs_from_json for 'seeds'");
    RunConfig c;
    read(j, "env", c.env);
    read(j, "algorithm", c.algorithm);
    read(j, "seed", c.seed);
    read(j, "total_steps", c.total_steps);
    read(j, "gradient_steps", c.gradient_steps);
    read(j, "alpha", c.alpha);
    read(j, "gamma", c.gamma);
    read(j, "eta", c.eta);
    read(j, "tau", c.tau);
    read(j, "learning_rate", c.learning_rate);
    read(j, "hidden", c.hidden);
    read(j, "batch_size", c.batch_size);
    read(j, "warmup", c.warmup);
    read(j, "buffer_capacity", c.buffer_capacity);
    read(j, "eval_interval", c.eval_interval);
    read(j, "eval_episodes", c.eval_episodes);
    read(j, "reward_scale", c.reward_scale);
    read(j, "force_unit_weight", c.force_unit_weight);
    read(j, "log_wall_time", c.log_wall_time);
    read(j, "save_checkpoints", c.save_checkpoints);
    c.validate();
    return c;
}

std::vector<RunConfig> configs_from_json(const json& j) {
    if (j.is_array()) {
        std::vector<RunConfig> out;
        for (const auto& e : j) {
            auto part = configs_from_json(e);
            out.insert(out.end(), part.begin(), part.end());
        }
        if (out.empty()) throw std::invalid_argument("RunConfig: empty config list");
        return out;
    }
    if (!j.is_object()) throw std::invalid_argument("RunConfig: expected a JSON object");
    if (!j.contains("seeds")) return {config_from_json(j)};
    if (j.contains("seed")) throw std::invalid_argument("RunConfig: give 'seed' or 'seeds', not both");
    std::vector<RunConfig> out;
    json single = j;
    single.erase("seeds");
    for (const auto& s : j.at("seeds")) {
        single["seed"] = s;
        out.push_back(config_from_json(single));
    }
    if (out.empty()) throw std::invalid_argument("RunConfig: 'seeds' is empty");
    return out;
}

json to_json(const RunConfig& c) {
    return {{"env", c.env},
            {"algorithm", c.algorithm},
            {"seed", c.seed},
            {"total_steps", c.total_steps},
            {"gradient_steps", c.gradient_steps},
            {"alpha", c.alpha},
            {"gamma", c.gamma},
            {"eta", c.eta},
            {"tau", c.tau},
            {"learning_rate", c.learning_rate},
            {"hidden", c.hidden},
            {"batch_size", c.batch_size},
            {"warmup", c.warmup},
            {"buffer_capacity", c.buffer_capacity},
            {"eval_interval", c.eval_interval},
            {"eval_episodes", c.eval_episodes},
            {"reward_scale", c.reward_scale},
            {"force_unit_weight", c.force_unit_weight},
            {"log_wall_time", c.log_wall_time},
            {"save_checkpoints", c.save_checkpoints}};
}

std::vector<RunConfig> load_configs(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    return configs_from_json(json::parse(in));
}

std::string format_row(const MetricRow& r) {
    return std::to_string(r.step) + "," + fmt(r.eval_return_mean) + "," + fmt(r.eval_return_std) + "," +
           fmt(r.q_loss) + "," + fmt(r.pi_loss) + "," + fmt(r.mean_weight) + "," + fmt(r.wall_ms);
}

std::vector<MetricRow> read_metrics_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) {
        throw std::invalid_argument(path.string() + ": unexpected CSV header");
    }
    std::vector<MetricRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string f[7];
        for (auto& x : f) {
            if (!std::getline(ss, x, ',')) throw std::invalid_argument(path.string() + ": short row");
        }
        MetricRow r;
        r.step = std::stoull(f[0]);
        r.eval_return_mean = std::stod(f[1]);
        r.eval_return_std = std::stod(f[2]);
        r.q_loss = std::stod(f[3]);
        r.pi_loss = std::stod(f[4]);
        r.mean_weight = std::stod(f[5]);
        r.wall_ms = std::stod(f[6]);
        rows.push_back(r);
    }
    return rows;
}

json to_json(const RunSummary& s) {
    json j{{"env", s.env},
           {"algorithm", s.algorithm},
           {"seed", s.seed},
           {"final_return_mean", s.final_return_mean},
           {"final_return_std", s.final_return_std},
           {"aborted_at", nullptr},
           {"status", s.status}};
    if (s.aborted_at) j["aborted_at"] = *s.aborted_at;
    if (!s.abort_reason.empty()) j["abort_reason"] = s.abort_reason;
    return j;
}

std::pair<double, double> final_return(const std::vector<MetricRow>& rows) {
    const std::size_t n = std::min(rows.size(), kFinalWindow);
    std::vector<double> tail;
    for (std::size_t i = rows.size() - n; i < rows.size(); ++i) tail.push_back(rows[i].eval_return_mean);
    return {mean_of(tail), std_of(tail)};
}

namespace {

std::uint64_t eval_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

std::pair<double, double> evaluate(Agent& agent, env::Environment& env, std::size_t episodes) {
    std::vector<double> returns;
    for (std::size_t e = 0; e < episodes; ++e) {
        auto obs = env.reset();
        double total = 0.0;
        for (;;) {
            auto r = env.step(agent.act(obs, ActMode::Deterministic));
            total += r.reward;
            obs = std::move(r.observation);
            if (r.terminal || r.truncated) break;
        }
        returns.push_back(total);
    }
    return {mean_of(returns), std_of(returns)};
}

}  // namespace

void tune_allocator() {
#ifdef __GLIBC__
    // Minibatch buffers sit near glibc's mmap threshold; keep them on the heap.
    static const bool done = [] {
        mallopt(M_MMAP_THRESHOLD, 64 << 20);
        mallopt(M_TRIM_THRESHOLD, 256 << 20);
        return true;
    }();
    (void)done;
#endif
}

RunResult run_experiment(const RunConfig& config, const fs::path& out_dir) {
    config.validate();
    tune_allocator();
    fs::create_directories(out_dir);
    const auto start = std::chrono::steady_clock::now();

    auto train_env = env::make_env(config.env, config.seed);
    auto eval_env = env::make_env(config.env, eval_seed(config.seed));
    Agent agent(config.agent_config(train_env->spec()), config.seed);

    RunResult result;
    result.csv_path = out_dir / (config.stem() + ".csv");
    result.summary_path = out_dir / (config.stem() + ".summary.json");
    auto& summary = result.summary;
    summary.env = config.env;
    summary.algorithm = config.algorithm;
    summary.seed = config.seed;

    std::ofstream csv(result.csv_path, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + result.csv_path.string());
    csv << kCsvHeader << '\n';

    double ql = 0.0, pl = 0.0, mw = 0.0;
    std::size_t n_updates = 0;
    bool any_update = false;
    for (std::size_t t = 1; t <= config.total_steps; ++t) {
        StepMetrics m;
        try {
            m = agent.train_step(*train_env);
        } catch (const ad::NonFiniteError& e) {
            summary.aborted_at = t;
            summary.status = "aborted";
            summary.abort_reason = e.what();
            break;
        }
        if (m.updated) {
            any_update = true;
            ql += m.q_loss;
            pl += m.pi_loss;
            mw += m.mean_weight;
            ++n_updates;
        }
        if (any_update && t % config.eval_interval == 0) {
            MetricRow row;
            row.step = t;
            std::tie(row.eval_return_mean, row.eval_return_std) =
                evaluate(agent, *eval_env, config.eval_episodes);
            if (n_updates > 0) {
                const auto n = static_cast<double>(n_updates);
                row.q_loss = ql / n;
                row.pi_loss = pl / n;
                row.mean_weight = mw / n;
            }
            if (config.log_wall_time) {
                row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            }
            csv << format_row(row) << '\n';
            csv.flush();
            result.rows.push_back(row);
            ql = pl = mw = 0.0;
            n_updates = 0;
        }
    }
    csv.close();

    if (!any_update && summary.status == "ok") summary.status = "no-gradient-run";
    if (!result.rows.empty()) {
        std::tie(summary.final_return_mean, summary.final_return_std) = final_return(result.rows);
    }
    if (config.save_checkpoints) agent.save_checkpoints(out_dir / (config.stem() + "_checkpoints"));
    write_text(result.summary_path, to_json(summary).dump(2) + "\n");
    return result;
}

std::vector<RunResult> run_experiments(const std::vector<RunConfig>& configs, const fs::path& out_dir,
                                       std::size_t threads) {
    std::vector<RunResult> results(configs.size());
    std::vector<std::exception_ptr> errors(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            try {
                results[i] = run_experiment(configs[i], out_dir);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(threads, configs.size()));
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

std::vector<double> smooth(const std::vector<double>& series, std::size_t window) {
    if (window == 0) throw std::invalid_argument("smooth: window must be >= 1");
    if (series.empty()) throw std::invalid_argument("smooth: empty series");
    std::vector<double> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const std::size_t lo = i + 1 >= window ? i + 1 - window : 0;
        double s = 0.0;
        for (std::size_t k = lo; k <= i; ++k) s += series[k];
        out[i] = s / static_cast<double>(i + 1 - lo);
    }
    return out;
}

double percent_improvement(double a, double b) {
    if (a == 0.0) {
        if (b == 0.0) return 0.0;
        return b > 0.0 ? INFINITY : -INFINITY;
    }
    return (b - a) / std::abs(a) * 100.0;
}

namespace {

struct RunKey {
    std::string env;
    std::string algorithm;
    std::uint64_t seed = 0;
};

RunKey parse_stem(const std::string& stem) {
    const auto sp = stem.rfind("_seed");
    if (sp == std::string::npos) throw std::invalid_argument("run file '" + stem + "' lacks _seed<N>");
    const auto ap = stem.rfind('_', sp - 1);
    if (ap == std::string::npos || ap == 0) throw std::invalid_argument("run file '" + stem + "' lacks an algorithm");
    RunKey k;
    k.env = stem.substr(0, ap);
    k.algorithm = stem.substr(ap + 1, sp - ap - 1);
    k.seed = std::stoull(stem.substr(sp + 5));
    return k;
}

using Side = std::map<std::string, std::pair<std::string, std::vector<SeedFinal>>>;

Side load_side(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw std::invalid_argument(dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    Side side;
    for (const auto& f : files) {
        const auto key = parse_stem(f.stem().string());
        const auto rows = read_metrics_csv(f);
        if (rows.empty()) continue;
        auto& [algo, seeds] = side[key.env];
        algo = algo.empty() ? key.algorithm : (algo == key.algorithm ? algo : algo + "+" + key.algorithm);
        seeds.push_back({key.seed, final_return(rows).first});
    }
    if (side.empty()) throw std::invalid_argument(dir.string() + " holds no run logs with rows");
    return side;
}

}  // namespace

std::vector<EnvComparison> compare(const fs::path& dir_a, const fs::path& dir_b) {
    const Side a = load_side(dir_a);
    const Side b = load_side(dir_b);
    std::set<std::string> ea, eb;
    for (const auto& [k, _] : a) ea.insert(k);
    for (const auto& [k, _] : b) eb.insert(k);
    if (ea != eb) throw std::invalid_argument("compare: the two sides cover different envs");

    std::vector<EnvComparison> report;
    for (const auto& [env_name, side_a] : a) {
        const auto& side_b = b.at(env_name);
        EnvComparison c;
        c.env = env_name;
        c.algorithm_a = side_a.first;
        c.algorithm_b = side_b.first;
        c.a = side_a.second;
        c.b = side_b.second;
        std::vector<double> va, vb;
        for (const auto& s : c.a) va.push_back(s.final_return);
        for (const auto& s : c.b) vb.push_back(s.final_return);
        c.mean_a = mean_of(va);
        c.mean_b = mean_of(vb);
        c.improvement_pct = percent_improvement(c.mean_a, c.mean_b);
        for (const auto& sa : c.a) {
            for (const auto& sb : c.b) {
                if (sa.seed == sb.seed) c.per_seed_pct.emplace_back(sa.seed, percent_improvement(sa.final_return, sb.final_return));
            }
        }
        report.push_back(std::move(c));
    }
    return report;
}

namespace {

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string pct(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%+.2f%%", x);
    return buf;
}

}  // namespace

json to_json(const std::vector<EnvComparison>& report) {
    json out = json::array();
    for (const auto& c : report) {
        json seeds_a = json::array(), seeds_b = json::array(), per_seed = json::array();
        for (const auto& s : c.a) seeds_a.push_back({{"seed", s.seed}, {"final_return", s.final_return}});
        for (const auto& s : c.b) seeds_b.push_back({{"seed", s.seed}, {"final_return", s.final_return}});
        for (const auto& [seed, p] : c.per_seed_pct) per_seed.push_back({{"seed", seed}, {"improvement_pct", finite_or_null(p)}});
        out.push_back({{"env", c.env},
                       {"algorithm_a", c.algorithm_a},
                       {"algorithm_b", c.algorithm_b},
                       {"mean_final_return_a", c.mean_a},
                       {"mean_final_return_b", c.mean_b},
                       {"improvement_pct", finite_or_null(c.improvement_pct)},
                       {"seeds_a", seeds_a},
                       {"seeds_b", seeds_b},
                       {"per_seed_improvement_pct", per_seed}});
    }
    return out;
}

std::string format_report(const std::vector<EnvComparison>& report) {
    std::ostringstream os;
    for (const auto& c : report) {
        os << c.env << ": " << c.algorithm_a << " " << fmt(c.mean_a) << " -> " << c.algorithm_b << " "
           << fmt(c.mean_b) << "  " << pct(c.improvement_pct) << "\n";
        for (const auto& [seed, p] : c.per_seed_pct) os << "  seed " << seed << ": " << pct(p) << "\n";
    }
    return os.str();
}

}  // namespace wesac::harness
