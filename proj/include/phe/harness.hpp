#pragma once

// Configuration-driven experiment runner.
//
// A config is a JSON document with sections "env", "agent", "run" and an
// optional "sweep" grid. Every (cell, seed) job is independent and draws all
// of its randomness from streams keyed by (root_seed, cell key, seed,
// episode), so results do not depend on job order or thread count.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "phe/agents.hpp"
#include "phe/environments.hpp"
#include "phe/errors.hpp"
#include "phe/mdp.hpp"
#include "phe/random.hpp"

namespace phe {

using json = nlohmann::json;

struct EnvConfig {
  std::string type = "riverswim";
  RiverSwimConfig riverswim;
  DeepSeaConfig deepsea;

  std::string name() const {
    if (type == "riverswim") return "riverswim-" + std::to_string(riverswim.n_states);
    return "deepsea-" + std::to_string(deepsea.depth);
  }

  TabularMdp build() const {
    if (type == "riverswim") return riverswim_spec(riverswim);
    if (type == "deepsea") return deepsea_spec(deepsea);
    throw InputError("unknown environment type '" + type + "'");
  }
};

struct RunSettings {
  int episodes = 100;
  std::vector<std::uint64_t> seeds{0};
  std::uint64_t root_seed = 0;
  std::string out_dir = "out";
  bool plots = true;
  int threads = 0;  // 0: hardware concurrency
};

struct ExperimentConfig {
  json env = json::object();
  std::vector<json> agents;  // base agent sections
  json sweep = json::object();  // "agent.<field>" or "env.<field>" -> list of values
  RunSettings run;
};

namespace detail {

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw InputError(std::string("config field '") + key + "': " + e.what());
    }
  }
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& section) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return it.key() == k; }) == known.end())
      throw InputError("unknown field '" + it.key() + "' in " + section + " section");
  }
}

}  // namespace detail

inline EnvConfig parse_env(const json& j) {
  if (!j.is_object()) throw InputError("env section must be an object");
  EnvConfig e;
  detail::read_field(j, "type", e.type);
  if (e.type == "riverswim") {
    detail::reject_unknown(j, {"type", "n_states", "horizon", "p_right", "p_stay", "p_left", "start_stay",
                               "start_advance", "end_stay", "end_slip", "r_left_state", "r_goal"}, "env");
    auto& r = e.riverswim;
    detail::read_field(j, "n_states", r.n_states);
    detail::read_field(j, "horizon", r.horizon);
    detail::read_field(j, "p_right", r.p_right);
    detail::read_field(j, "p_stay", r.p_stay);
    detail::read_field(j, "p_left", r.p_left);
    detail::read_field(j, "start_stay", r.start_stay);
    detail::read_field(j, "start_advance", r.start_advance);
    detail::read_field(j, "end_stay", r.end_stay);
    detail::read_field(j, "end_slip", r.end_slip);
    detail::read_field(j, "r_left_state", r.r_left_state);
    detail::read_field(j, "r_goal", r.r_goal);
    validate(r);
  } else if (e.type == "deepsea") {
    detail::reject_unknown(j, {"type", "depth", "move_right_cost", "goal_reward"}, "env");
    detail::read_field(j, "depth", e.deepsea.depth);
    detail::read_field(j, "move_right_cost", e.deepsea.move_right_cost);
    detail::read_field(j, "goal_reward", e.deepsea.goal_reward);
    (void)deepsea_spec(e.deepsea);
  } else {
    throw InputError("unknown environment type '" + e.type + "'");
  }
  return e;
}

inline AgentConfig parse_agent(const json& j) {
  if (!j.is_object()) throw InputError("agent section must be an object");
  detail::reject_unknown(j, {"algo", "sigma2", "M", "beta", "epsilon", "lambda", "delta", "sampler"}, "agent");
  AgentConfig c;
  std::string algo = "lsvi_phe";
  detail::read_field(j, "algo", algo);
  c.algorithm = algorithm_from_string(algo);
  if (c.algorithm == Algorithm::kRlsvi) c.sigma2 = 1.0;
  detail::read_field(j, "sigma2", c.sigma2);
  if (auto it = j.find("M"); it != j.end()) {
    if (it->is_string()) {
      if (it->get<std::string>() != "theory") throw InputError("agent.M must be an integer or \"theory\"");
    } else if (it->is_number_integer()) {
      c.m = it->get<int>();
    } else {
      throw InputError("agent.M must be an integer or \"theory\"");
    }
  }
  detail::read_field(j, "beta", c.beta);
  detail::read_field(j, "epsilon", c.epsilon);
  detail::read_field(j, "lambda", c.lambda);
  detail::read_field(j, "delta", c.delta);
  std::string sampler = "direct";
  detail::read_field(j, "sampler", sampler);
  if (sampler == "direct") c.sampler = SamplerPath::kDirect;
  else if (sampler == "via_rewards") c.sampler = SamplerPath::kViaRewards;
  else throw InputError("agent.sampler must be \"direct\" or \"via_rewards\"");
  validate(c);
  return c;
}

/// The fields that identify an agent cell, with M resolved.
inline json agent_params(const AgentConfig& c, int feature_dim) {
  json p;
  p["lambda"] = c.lambda;
  switch (c.algorithm) {
    case Algorithm::kLsviPhe:
      p["sigma2"] = c.sigma2;
      p["M"] = resolved_m(c, feature_dim);
      if (c.sampler == SamplerPath::kViaRewards) p["sampler"] = "via_rewards";
      break;
    case Algorithm::kRlsvi:
      p["sigma2"] = c.sigma2;
      if (c.sampler == SamplerPath::kViaRewards) p["sampler"] = "via_rewards";
      break;
    case Algorithm::kLsviUcb: p["beta"] = c.beta; break;
    case Algorithm::kEpsilonGreedy: p["epsilon"] = c.epsilon; break;
  }
  return p;
}

inline ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  detail::reject_unknown(j, {"env", "agent", "run", "sweep"}, "top-level");
  ExperimentConfig cfg;
  if (!j.contains("env")) throw InputError("config is missing the env section");
  if (!j.contains("agent")) throw InputError("config is missing the agent section");
  cfg.env = j.at("env");
  (void)parse_env(cfg.env);
  const json& agent = j.at("agent");
  if (agent.is_array()) {
    for (const auto& a : agent) cfg.agents.push_back(a);
  } else {
    cfg.agents.push_back(agent);
  }
  if (cfg.agents.empty()) throw InputError("agent section lists no agents");
  for (const auto& a : cfg.agents) (void)parse_agent(a);

  if (auto it = j.find("run"); it != j.end()) {
    const json& r = *it;
    detail::reject_unknown(r, {"episodes", "seeds", "root_seed", "out", "plots", "threads"}, "run");
    detail::read_field(r, "episodes", cfg.run.episodes);
    detail::read_field(r, "seeds", cfg.run.seeds);
    detail::read_field(r, "root_seed", cfg.run.root_seed);
    detail::read_field(r, "out", cfg.run.out_dir);
    detail::read_field(r, "plots", cfg.run.plots);
    detail::read_field(r, "threads", cfg.run.threads);
  }
  if (cfg.run.episodes < 1) throw InputError("run.episodes must be at least 1");
  if (cfg.run.seeds.empty()) throw InputError("run.seeds must not be empty");

  if (auto it = j.find("sweep"); it != j.end()) {
    if (!it->is_object()) throw InputError("sweep section must be an object of lists");
    for (auto s = it->begin(); s != it->end(); ++s) {
      if (!s.value().is_array() || s.value().empty()) throw InputError("sweep entry '" + s.key() + "' must be a nonempty list");
      if (s.key().rfind("agent.", 0) != 0 && s.key().rfind("env.", 0) != 0)
        throw InputError("sweep keys must start with agent. or env.: '" + s.key() + "'");
    }
    cfg.sweep = *it;
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

struct Cell {
  EnvConfig env;
  AgentConfig agent;
  std::string algo;
  std::string params_json;
};

/// Cartesian product of base agents x sweep grid (grid ignored unless expand).
/// Grid points that leave a cell's parameters unchanged are merged.
inline std::vector<Cell> expand_cells(const ExperimentConfig& cfg, bool expand) {
  std::vector<std::pair<std::string, json>> axes;
  if (expand)
    for (auto it = cfg.sweep.begin(); it != cfg.sweep.end(); ++it) axes.emplace_back(it.key(), it.value());

  std::vector<Cell> cells;
  for (const json& base_agent : cfg.agents) {
    std::vector<std::size_t> idx(axes.size(), 0);
    while (true) {
      json env = cfg.env, agent = base_agent;
      for (std::size_t i = 0; i < axes.size(); ++i) {
        const std::string& key = axes[i].first;
        const json& value = axes[i].second[idx[i]];
        if (key.rfind("agent.", 0) == 0) agent[key.substr(6)] = value;
        else env[key.substr(4)] = value;
      }
      Cell c;
      c.env = parse_env(env);
      c.agent = parse_agent(agent);
      const TabularMdp mdp = c.env.build();
      c.algo = to_string(c.agent.algorithm);
      c.params_json = agent_params(c.agent, mdp.n_states() * mdp.n_actions()).dump();
      const bool seen = std::any_of(cells.begin(), cells.end(), [&](const Cell& o) {
        return o.env.name() == c.env.name() && o.algo == c.algo && o.params_json == c.params_json;
      });
      if (!seen) cells.push_back(std::move(c));

      std::size_t k = 0;
      while (k < axes.size() && ++idx[k] == axes[k].second.size()) idx[k++] = 0;
      if (k == axes.size()) break;
    }
  }
  return cells;
}

struct RunRow {
  std::string algo;
  std::string env;
  std::string params_json;
  std::uint64_t seed = 0;
  int episode = 0;  // 1-based
  double ret = 0.0;
  double value_exact = 0.0;
  double regret_cum = 0.0;

  bool operator==(const RunRow&) const = default;
};

struct RunResult {
  std::vector<RunRow> rows;
};

/// Learner that plans with one of the linear agents.
class LinearLearner {
 public:
  LinearLearner(const TabularMdp& mdp, AgentConfig cfg)
      : cfg_(std::move(cfg)), history_(tabular_features(mdp), mdp.horizon(), cfg_.lambda) {
    validate(cfg_);
  }

  std::vector<Eigen::MatrixXd> plan(const RandomStream& stream) { return phe::plan(history_, cfg_, stream).q; }
  double epsilon() const { return exploration_epsilon(cfg_); }
  void observe(const Trajectory& traj) { history_.append(traj); }

 private:
  AgentConfig cfg_;
  History history_;
};

/// Plays the exact optimal Q table every episode.
class OracleLearner {
 public:
  explicit OracleLearner(const TabularMdp& mdp) : q_(optimal_values(mdp).q) {}
  std::vector<Eigen::MatrixXd> plan(const RandomStream&) const { return q_; }
  double epsilon() const { return 0.0; }
  void observe(const Trajectory&) {}

 private:
  std::vector<Eigen::MatrixXd> q_;
};

inline constexpr std::uint64_t kPlanStream = 0;
inline constexpr std::uint64_t kEnvStream = 1;
inline constexpr std::uint64_t kActStream = 2;

/// Streams for one (cell, seed) job.
inline RandomStream job_stream(std::uint64_t root_seed, const std::string& env_name, const std::string& algo,
                               const std::string& params_json, std::uint64_t seed) {
  const std::uint64_t cell_key = RandomStream::hash_label(env_name + "|" + algo + "|" + params_json);
  return RandomStream(root_seed).substream({cell_key, seed});
}

/// K episodes of plan, act, evaluate exactly, record.
template <class Learner>
std::vector<RunRow> run_learner(Learner& learner, const TabularMdp& mdp, int episodes, const RandomStream& job,
                                const std::string& algo, const std::string& env_name, const std::string& params_json,
                                std::uint64_t seed) {
  const double v_star = optimal_values(mdp).v(0, mdp.initial_state());
  RegretLedger ledger;
  std::vector<RunRow> rows;
  rows.reserve(static_cast<std::size_t>(episodes));
  for (int k = 1; k <= episodes; ++k) {
    const auto key = static_cast<std::uint64_t>(k);
    const std::vector<Eigen::MatrixXd> q = learner.plan(job.substream({key, kPlanStream}));
    const double eps = learner.epsilon();
    RandomStream env_rng = job.substream({key, kEnvStream});
    RandomStream act_rng = job.substream({key, kActStream});
    QEstimate view;
    view.q = q;
    const Trajectory traj = rollout(mdp, k, env_rng, [&](int h, int s) { return act(view, h, s, act_rng, eps); });
    const double value = evaluate_policy(mdp, greedy_policy(q, eps)).v(0, mdp.initial_state());
    update_ledger(ledger, traj, v_star, value);
    rows.push_back({algo, env_name, params_json, seed, k, traj.realized_return, value, ledger.back().regret_cum});
    learner.observe(traj);
  }
  return rows;
}

inline std::vector<RunRow> run_cell(const Cell& cell, int episodes, std::uint64_t seed, std::uint64_t root_seed = 0) {
  const TabularMdp mdp = cell.env.build();
  LinearLearner learner(mdp, cell.agent);
  const RandomStream job = job_stream(root_seed, cell.env.name(), cell.algo, cell.params_json, seed);
  return run_learner(learner, mdp, episodes, job, cell.algo, cell.env.name(), cell.params_json, seed);
}

/// Runs every (cell, seed) job, in parallel when threads allow, and merges
/// rows in (cell, seed-list) order.
inline RunResult run_sweep(const ExperimentConfig& cfg, bool expand = true) {
  const std::vector<Cell> cells = expand_cells(cfg, expand);
  const std::size_t n_seeds = cfg.run.seeds.size();
  const std::size_t n_jobs = cells.size() * n_seeds;
  std::vector<std::vector<RunRow>> out(n_jobs);

  unsigned threads = cfg.run.threads > 0 ? static_cast<unsigned>(cfg.run.threads) : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1u, static_cast<unsigned>(std::max<std::size_t>(1, n_jobs)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t job; (job = next.fetch_add(1)) < n_jobs;) {
      try {
        out[job] = run_cell(cells[job / n_seeds], cfg.run.episodes, cfg.run.seeds[job % n_seeds], cfg.run.root_seed);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  RunResult result;
  for (auto& rows : out) result.rows.insert(result.rows.end(), rows.begin(), rows.end());
  return result;
}

// ---- CSV ----

inline constexpr const char* kCsvHeader = "algo,env,params_json,seed,episode,return,value_exact,regret_cum";

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_csv(const RunResult& result, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const RunRow& r : result.rows) {
    out << csv_field(r.algo) << ',' << csv_field(r.env) << ',' << csv_field(r.params_json) << ',' << r.seed << ','
        << r.episode << ',' << format_double(r.ret) << ',' << format_double(r.value_exact) << ','
        << format_double(r.regret_cum) << '\n';
  }
}

inline void emit_csv(const RunResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_csv(result, out);
  out.flush();
  if (!out) throw IoError("failed writing " + path);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace detail

inline RunResult read_csv(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw InputError(source + ": missing or unexpected CSV header");
  RunResult result;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 8) throw InputError(source + ":" + std::to_string(line_no) + ": expected 8 fields");
    try {
      result.rows.push_back({f[0], f[1], f[2], std::stoull(f[3]), std::stoi(f[4]), std::stod(f[5]), std::stod(f[6]),
                             std::stod(f[7])});
    } catch (const std::exception&) {
      throw InputError(source + ":" + std::to_string(line_no) + ": malformed number");
    }
  }
  return result;
}

inline RunResult parse_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_csv(in, path);
}

// ---- summaries ----

struct SeriesSummary {
  std::string env;
  std::string label;  // algo + params
  std::vector<double> return_mean, return_stderr;
  std::vector<double> regret_mean, regret_stderr;
  std::size_t n_seeds = 0;
};

/// Mean and standard error across seeds, per episode, for every cell.
/// Cells appear in first-seen order; episodes are assumed to be 1..K.
inline std::vector<SeriesSummary> summarize(const RunResult& result) {
  std::vector<SeriesSummary> out;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::vector<std::map<std::uint64_t, std::vector<const RunRow*>>> by_seed;
  for (const RunRow& r : result.rows) {
    const std::string label = r.algo + " " + r.params_json;
    auto [it, fresh] = index.try_emplace({r.env, label}, out.size());
    if (fresh) {
      out.push_back({r.env, label, {}, {}, {}, {}, 0});
      by_seed.emplace_back();
    }
    by_seed[it->second][r.seed].push_back(&r);
  }
  for (std::size_t c = 0; c < out.size(); ++c) {
    std::size_t k_max = 0;
    for (const auto& [seed, rows] : by_seed[c]) k_max = std::max(k_max, rows.size());
    SeriesSummary& s = out[c];
    s.n_seeds = by_seed[c].size();
    for (std::size_t k = 0; k < k_max; ++k) {
      std::vector<double> rets, regs;
      for (const auto& [seed, rows] : by_seed[c]) {
        if (k < rows.size()) {
          rets.push_back(rows[k]->ret);
          regs.push_back(rows[k]->regret_cum);
        }
      }
      auto moments = [](const std::vector<double>& xs) {
        const double n = static_cast<double>(xs.size());
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= n;
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        const double se = xs.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
        return std::pair{mean, se};
      };
      const auto [rm, rs] = moments(rets);
      const auto [gm, gs] = moments(regs);
      s.return_mean.push_back(rm);
      s.return_stderr.push_back(rs);
      s.regret_mean.push_back(gm);
      s.regret_stderr.push_back(gs);
    }
  }
  return out;
}

}  // namespace phe
