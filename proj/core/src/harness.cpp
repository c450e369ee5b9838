#include "hrlsched/harness.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace hrlsched {

namespace {

std::vector<UserProfile> make_users(const std::vector<int>& deadlines, const std::vector<double>& lambdas) {
  const std::size_t k = deadlines.size();
  std::vector<UserProfile> users;
  for (std::size_t i = 0; i < k; ++i) {
    // Evenly spread over [130, 150] dB.
    const double pl = 130.0 + 20.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(k);
    users.push_back({deadlines[i], lambdas[i], pl});
  }
  return users;
}

ScenarioConfig large_config(std::string name, const std::vector<double>& lambda8, std::size_t k,
                            std::size_t n_tx) {
  const std::vector<int> d8{4, 5, 6, 7, 4, 5, 6, 7};
  std::vector<int> d;
  std::vector<double> l;
  for (std::size_t i = 0; i < k; ++i) {
    d.push_back(d8[i % 8]);
    l.push_back(lambda8[i % 8]);
  }
  ScenarioConfig c;
  c.name = std::move(name);
  c.env.users = make_users(d, l);
  c.env.n_tx = n_tx;
  c.env.arrival_prob = 0.3;
  c.env.bandwidth_hz = 58e6;
  c.env.tx_power_dbm = 12.0;
  c.env.noise_dbm = -125.0;
  c.slots = 100000;
  return c;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  if (used != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return d;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d < 0 || d != static_cast<double>(static_cast<std::uint64_t>(d)))
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return static_cast<std::uint64_t>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

}  // namespace

void ScenarioConfig::validate() const {
  try {
    env.validate();
    trainer.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (seeds.empty()) throw ConfigError("seeds: at least one seed required");
  if (!(variant.lambda_scale > 0.0)) throw ConfigError("variant.lambda_scale must be positive");
  for (const auto& p : old_policies)
    if (!std::filesystem::exists(p)) throw ConfigError("old_policy.path: cannot resolve '" + p + "'");
}

std::vector<std::string> preset_names() { return {"desk", "config1", "config2", "config1_k10", "config2_k10", "light"}; }

ScenarioConfig preset(std::string_view name) {
  if (name == "desk" || name == "light") {
    ScenarioConfig c;
    c.name = std::string(name);
    c.env.users = make_users({3, 4, 3, 4}, {8, 12, 8, 12});
    c.env.n_tx = 2;
    c.env.arrival_prob = 0.3;
    c.env.bandwidth_hz = 10e6;
    c.env.tx_power_dbm = 12.0;
    c.env.noise_dbm = -135.0;
    c.slots = 20000;
    if (name == "light") {
      c.env.arrival_prob = 0.05;
      for (auto& u : c.env.users) u.lambda_kbit = 4.0;
    }
    return c;
  }
  const std::vector<double> cfg1{22, 42, 62, 82, 22, 42, 62, 82};
  const std::vector<double> cfg2{30, 50, 70, 90, 30, 50, 70, 90};
  if (name == "config1") return large_config("config1", cfg1, 8, 4);
  if (name == "config2") return large_config("config2", cfg2, 8, 4);
  if (name == "config1_k10") return large_config("config1_k10", cfg1, 10, 5);
  if (name == "config2_k10") return large_config("config2_k10", cfg2, 10, 5);
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

ScenarioConfig parse_config(std::string_view text, const std::string& base_dir) {
  ScenarioConfig cfg = preset("desk");
  cfg.name = "custom";
  std::vector<UserProfile> users;
  std::vector<std::map<std::string, std::string>> user_sections;
  std::vector<std::map<std::string, std::string>> old_sections;
  enum class Section { top, user, old_policy } section = Section::top;
  bool seen_top_key = false;

  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t == "[user]") {
        section = Section::user;
        user_sections.emplace_back();
      } else if (t == "[old_policy]") {
        section = Section::old_policy;
        old_sections.emplace_back();
      } else {
        throw ConfigError("line " + std::to_string(line_no) + ": unknown section " + t);
      }
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    if (section == Section::user) {
      user_sections.back()[key] = val;
      continue;
    }
    if (section == Section::old_policy) {
      old_sections.back()[key] = val;
      continue;
    }

    if (key == "preset") {
      if (seen_top_key) throw ConfigError("preset: must be the first key");
      cfg = preset(val);
      continue;
    }
    seen_top_key = true;
    auto& e = cfg.env;
    auto& tr = cfg.trainer;
    if (key == "name") cfg.name = val;
    else if (key == "n_tx") e.n_tx = to_uint(key, val);
    else if (key == "arrival_prob") e.arrival_prob = to_double(key, val);
    else if (key == "tau") e.tau = to_double(key, val);
    else if (key == "slot_seconds") e.slot_seconds = to_double(key, val);
    else if (key == "bandwidth_hz") e.bandwidth_hz = to_double(key, val);
    else if (key == "tx_power_dbm") e.tx_power_dbm = to_double(key, val);
    else if (key == "noise_dbm") e.noise_dbm = to_double(key, val);
    else if (key == "alpha_factor") e.alpha_factor = to_double(key, val);
    else if (key == "channel_corr") e.channel_corr = to_double(key, val);
    else if (key == "csi_nmse") e.csi_nmse = to_double(key, val);
    else if (key == "horizon") tr.horizon = to_uint(key, val);
    else if (key == "batch_size") tr.batch_size = to_uint(key, val);
    else if (key == "varsigma") tr.varsigma = to_double(key, val);
    else if (key == "kappa1") tr.kappa1 = to_double(key, val);
    else if (key == "kappa2") tr.kappa2 = to_double(key, val);
    else if (key == "sigma_dk") tr.sigma_dk = to_double(key, val);
    else if (key == "nu") tr.nu = to_double(key, val);
    else if (key == "warmup_slots") tr.warmup_slots = to_uint(key, val);
    else if (key == "cost_scale") tr.cost_scale = to_double(key, val);
    else if (key == "reuse_ema") tr.reuse_ema = to_double(key, val);
    else if (key == "ma_window") tr.ma_window = to_uint(key, val);
    else if (key == "j_bar_norm") {
      if (val == "mean") tr.j_bar_norm = JBarNorm::mean;
      else if (val == "inverse_horizon") tr.j_bar_norm = JBarNorm::inverse_horizon;
      else throw ConfigError(key + ": expected mean or inverse_horizon");
    } else if (key == "init_mean_bias") cfg.init.mean_bias = to_double(key, val);
    else if (key == "init_log_std_bias") cfg.init.log_std_bias = to_double(key, val);
    else if (key == "init_weight_scale") cfg.init.weight_scale = to_double(key, val);
    else if (key == "ablate_dk") cfg.ablate_dk = to_bool(key, val);
    else if (key == "ablate_old") cfg.ablate_old = to_bool(key, val);
    else if (key == "slots") cfg.slots = to_uint(key, val);
    else if (key == "seed") cfg.seeds = {to_uint(key, val)};
    else if (key == "seeds") {
      cfg.seeds.clear();
      std::istringstream ss(val);
      std::string tok;
      while (std::getline(ss, tok, ',')) cfg.seeds.push_back(to_uint(key, trim(tok)));
    } else if (key == "variant.lambda_scale") cfg.variant.lambda_scale = to_double(key, val);
    else if (key == "variant.path_loss_offset_db") cfg.variant.path_loss_offset_db = to_double(key, val);
    else throw ConfigError(key + ": unknown key");
  }

  if (!user_sections.empty()) {
    for (std::size_t i = 0; i < user_sections.size(); ++i) {
      UserProfile u;
      const std::string prefix = "user[" + std::to_string(i) + "].";
      bool has_deadline = false, has_lambda = false;
      for (const auto& [k, v] : user_sections[i]) {
        if (k == "deadline") {
          u.deadline = static_cast<int>(to_uint(prefix + k, v));
          has_deadline = true;
        } else if (k == "lambda_kbit") {
          u.lambda_kbit = to_double(prefix + k, v);
          has_lambda = true;
        } else if (k == "path_loss_db") {
          u.path_loss_db = to_double(prefix + k, v);
        } else {
          throw ConfigError(prefix + k + ": unknown key");
        }
      }
      if (!has_deadline) throw ConfigError(prefix + "deadline: missing");
      if (!has_lambda) throw ConfigError(prefix + "lambda_kbit: missing");
      users.push_back(u);
    }
    cfg.env.users = users;
  }
  for (std::size_t i = 0; i < old_sections.size(); ++i) {
    const std::string prefix = "old_policy[" + std::to_string(i) + "].";
    std::string path;
    for (const auto& [k, v] : old_sections[i]) {
      if (k == "path") path = v;
      else throw ConfigError(prefix + k + ": unknown key");
    }
    if (path.empty()) throw ConfigError(prefix + "path: missing");
    std::filesystem::path p(path);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    cfg.old_policies.push_back(p.string());
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_config(ss.str(), dir.empty() ? "." : dir.string());
}

ScenarioConfig resolve_config(const std::string& name_or_path) {
  if (std::filesystem::is_regular_file(name_or_path)) return load_config(name_or_path);
  for (const auto& n : preset_names())
    if (n == name_or_path) return preset(n);
  throw ConfigError("'" + name_or_path + "' is neither a config file nor a preset");
}

EnvConfig apply_variant(EnvConfig env, const EnvVariant& variant) {
  for (auto& u : env.users) {
    u.lambda_kbit *= variant.lambda_scale;
    u.path_loss_db += variant.path_loss_offset_db;
  }
  return env;
}

GaussianPolicy initial_policy(const ScenarioConfig& cfg, std::uint64_t seed) {
  MlpShape shape;
  shape.input = cfg.env.feature_length();
  shape.n_actions = cfg.env.n_users();
  Rng rng = seeded_rng(seed, 0x1217);
  return GaussianPolicy::random_init(shape, rng, cfg.init);
}

std::vector<std::string> component_labels(std::size_t n_old, bool use_dk) {
  std::vector<std::string> l{"new"};
  for (std::size_t i = 1; i <= n_old; ++i) l.push_back("old" + std::to_string(i));
  if (use_dk) l.push_back("dk");
  return l;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

MetricsCsv::MetricsCsv(std::ostream& out, std::vector<std::string> labels, bool wall_clock)
    : out_(out), n_p_(labels.size()), wall_clock_(wall_clock) {
  out_ << "iteration,slot,reward,ma_reward,drop_prob";
  for (const auto& l : labels) out_ << ",p_" << l;
  out_ << ",j_tilde";
  if (wall_clock_) out_ << ",wall_ms";
  out_ << '\n';
}

void MetricsCsv::write(const MetricsRow& row, double wall_ms) {
  if (row.p.size() != n_p_) throw std::logic_error("MetricsCsv: p column count mismatch");
  out_ << row.iteration << ',' << row.slot << ',' << format_double(row.reward) << ','
       << format_double(row.ma_reward) << ',' << format_double(row.drop_prob);
  for (double p : row.p) out_ << ',' << format_double(p);
  out_ << ',' << format_double(row.j_tilde);
  if (wall_clock_) out_ << ',' << format_double(wall_ms);
  out_ << '\n';
}

namespace {

// Opens the CSV (if requested) and adapts a MetricsCsv into a sink that also
// rejects non-finite rows.
class CsvSink {
 public:
  CsvSink(const RunOutputs& out, std::vector<std::string> labels) : start_(std::chrono::steady_clock::now()) {
    if (!out.csv_path.empty()) {
      file_.open(out.csv_path, std::ios::trunc);
      if (!file_) throw std::runtime_error("cannot open " + out.csv_path + " for writing");
      csv_ = std::make_unique<MetricsCsv>(file_, std::move(labels), out.wall_clock);
    }
  }

  MetricsSink sink() {
    return [this](const MetricsRow& row) {
      const bool finite = std::isfinite(row.reward) && std::isfinite(row.ma_reward) && std::isfinite(row.j_tilde);
      if (csv_) {
        const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_);
        csv_->write(row, ms.count());
        if (!finite) file_.flush();
      }
      if (!finite) throw TrainingDiverged("non-finite metrics at iteration " + std::to_string(row.iteration));
    };
  }

 private:
  std::chrono::steady_clock::time_point start_;
  std::ofstream file_;
  std::unique_ptr<MetricsCsv> csv_;
};

std::vector<GaussianPolicy> load_old(const ScenarioConfig& cfg) {
  std::vector<GaussianPolicy> old;
  if (cfg.ablate_old) return old;
  for (const auto& path : cfg.old_policies) {
    GaussianPolicy p = load_policy_file(path);
    if (p.shape().input != cfg.env.feature_length() || p.shape().n_actions != cfg.env.n_users())
      throw ConfigError("old_policy " + path + ": dimensions do not match the scenario");
    old.push_back(std::move(p));
  }
  return old;
}

}  // namespace

RunSummary cmd_train(const ScenarioConfig& cfg, std::uint64_t seed, const RunOutputs& out) {
  cfg.validate();
  auto old = load_old(cfg);
  const bool use_dk = !cfg.ablate_dk;
  CsvSink csv(out, component_labels(old.size(), use_dk));
  EnvConfig env_cfg = cfg.env;
  env_cfg.seed = seed;
  Environment env(env_cfg);
  GaussianPolicy trained;
  RunSummary s = run_hybrid(env, initial_policy(cfg, seed), std::move(old), use_dk, cfg.trainer, seed, cfg.slots,
                            csv.sink(), &trained);
  if (!out.policy_path.empty()) save_policy_file(trained, out.policy_path);
  return s;
}

RunSummary cmd_make_old_policy(const ScenarioConfig& cfg, std::uint64_t seed, const RunOutputs& out) {
  cfg.validate();
  CsvSink csv(out, component_labels(0, false));
  EnvConfig env_cfg = apply_variant(cfg.env, cfg.variant);
  env_cfg.seed = seed;
  Environment env(env_cfg);
  GaussianPolicy trained;
  RunSummary s = run_single_policy(env, initial_policy(cfg, seed), cfg.trainer, seed, cfg.slots, csv.sink(), &trained);
  if (!out.policy_path.empty()) save_policy_file(trained, out.policy_path);
  return s;
}

RunSummary cmd_eval(const ScenarioConfig& cfg, std::uint64_t seed, const std::string& what, const RunOutputs& out) {
  cfg.validate();
  EnvConfig env_cfg = cfg.env;
  env_cfg.seed = seed;
  Environment env(env_cfg);
  if (what == "dk") {
    CsvSink csv(out, {"dk"});
    return run_dk_greedy(env, cfg.slots, csv.sink(), cfg.trainer.batch_size, cfg.trainer.ma_window);
  }
  if (what == "single") {
    CsvSink csv(out, component_labels(0, false));
    return run_single_policy(env, initial_policy(cfg, seed), cfg.trainer, seed, cfg.slots, csv.sink());
  }
  if (what == "heuristic" || what == "hybrid") {
    auto old = load_old(cfg);
    const bool use_dk = !cfg.ablate_dk;
    CsvSink csv(out, component_labels(old.size(), use_dk));
    if (what == "heuristic")
      return run_heuristic_reuse(env, initial_policy(cfg, seed), std::move(old), use_dk, cfg.trainer, seed,
                                 cfg.slots, csv.sink());
    return run_hybrid(env, initial_policy(cfg, seed), std::move(old), use_dk, cfg.trainer, seed, cfg.slots,
                      csv.sink());
  }
  if (std::filesystem::is_regular_file(what)) {
    const GaussianPolicy pol = load_policy_file(what);
    CsvSink csv(out, {"new"});
    return run_frozen_policy(env, pol, cfg.slots, csv.sink(), cfg.trainer.batch_size, cfg.trainer.ma_window);
  }
  throw ConfigError("eval: unknown baseline or policy file '" + what + "'");
}

}  // namespace hrlsched
