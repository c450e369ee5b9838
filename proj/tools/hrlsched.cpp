#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "hrlsched/harness.hpp"

namespace {

struct CommonArgs {
  std::string config = "desk";
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> slots;
  std::optional<std::size_t> batch;
  std::optional<double> csi_nmse;
  std::vector<std::string> old_policies;
  bool ablate_dk = false;
  bool ablate_old = false;
  bool wall_clock = false;
  std::string out;
  std::string policy_out;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "preset name or config file")->capture_default_str();
  cmd->add_option("--seed", a.seed, "run seed (overrides the config)");
  cmd->add_option("--slots", a.slots, "total environment slots");
  cmd->add_option("--batch", a.batch, "slots per iteration");
  cmd->add_option("--csi-nmse", a.csi_nmse, "channel estimation NMSE")->check(CLI::Range(0.0, 1e6));
  cmd->add_option("--old-policy", a.old_policies, "old policy file (repeatable)")->check(CLI::ExistingFile);
  cmd->add_flag("--ablate-dk", a.ablate_dk, "drop the domain-knowledge component");
  cmd->add_flag("--ablate-old", a.ablate_old, "drop all old policies");
  cmd->add_flag("--wall-clock", a.wall_clock, "append a wall_ms column to the CSV");
  cmd->add_option("--out", a.out, "metrics CSV path");
}

hrlsched::ScenarioConfig build_config(const CommonArgs& a) {
  hrlsched::ScenarioConfig cfg = hrlsched::resolve_config(a.config);
  if (a.slots) cfg.slots = *a.slots;
  if (a.batch) cfg.trainer.batch_size = *a.batch;
  if (a.csi_nmse) cfg.env.csi_nmse = *a.csi_nmse;
  for (const auto& p : a.old_policies) cfg.old_policies.push_back(p);
  cfg.ablate_dk = cfg.ablate_dk || a.ablate_dk;
  cfg.ablate_old = cfg.ablate_old || a.ablate_old;
  cfg.validate();
  return cfg;
}

std::vector<std::uint64_t> seeds_of(const CommonArgs& a, const hrlsched::ScenarioConfig& cfg) {
  if (a.seed) return {*a.seed};
  return cfg.seeds;
}

// With several seeds, outputs get a ".seed<N>" suffix before the extension.
std::string per_seed(const std::string& path, std::uint64_t seed, bool many) {
  if (path.empty() || !many) return path;
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of('/');
  const std::string tag = ".seed" + std::to_string(seed);
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + tag;
  return path.substr(0, dot) + tag + path.substr(dot);
}

void report(const char* what, std::uint64_t seed, const hrlsched::RunSummary& s) {
  std::printf("%s seed=%llu slots=%zu final_ma_reward=%s", what, static_cast<unsigned long long>(seed),
              s.rewards.size(), hrlsched::format_double(s.final_ma).c_str());
  if (s.final_p.size() > 1) {
    std::printf(" p=");
    for (std::size_t i = 0; i < s.final_p.size(); ++i)
      std::printf("%s%s", i ? "," : "", hrlsched::format_double(s.final_p[i]).c_str());
  }
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid-policy RL scheduler for hard-latency MU-MIMO downlink"};
  app.require_subcommand(1);

  CommonArgs train_args;
  auto* train = app.add_subcommand("train", "train the hybrid policy");
  add_common(train, train_args);
  train->add_option("--policy-out", train_args.policy_out, "save the trained new policy here");

  CommonArgs eval_args;
  std::string what = "dk";
  auto* eval = app.add_subcommand("eval", "run a baseline or a frozen policy");
  add_common(eval, eval_args);
  eval->add_option("what", what, "dk | single | heuristic | hybrid | <policy file>")->capture_default_str();

  CommonArgs old_args;
  double lambda_scale = 1.0;
  double pl_offset = 0.0;
  auto* make_old = app.add_subcommand("make-old-policy", "train a single policy on a perturbed environment");
  add_common(make_old, old_args);
  make_old->add_option("--policy-out", old_args.policy_out, "output policy file")->required();
  make_old->add_option("--lambda-scale", lambda_scale, "scale all mean packet sizes")->check(CLI::PositiveNumber);
  make_old->add_option("--path-loss-offset", pl_offset, "add to all path losses (dB)");

  auto* presets = app.add_subcommand("presets", "list built-in scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets->parsed()) {
      for (const auto& n : hrlsched::preset_names()) {
        const auto c = hrlsched::preset(n);
        std::printf("%-12s K=%zu N_T=%zu PA=%s B=%sHz slots=%llu\n", n.c_str(), c.env.n_users(), c.env.n_tx,
                    hrlsched::format_double(c.env.arrival_prob).c_str(),
                    hrlsched::format_double(c.env.bandwidth_hz).c_str(), static_cast<unsigned long long>(c.slots));
      }
      return 0;
    }
    if (train->parsed()) {
      const auto cfg = build_config(train_args);
      const auto seeds = seeds_of(train_args, cfg);
      for (auto seed : seeds) {
        hrlsched::RunOutputs out{per_seed(train_args.out, seed, seeds.size() > 1),
                                 per_seed(train_args.policy_out, seed, seeds.size() > 1), train_args.wall_clock};
        report("train", seed, hrlsched::cmd_train(cfg, seed, out));
      }
      return 0;
    }
    if (eval->parsed()) {
      const auto cfg = build_config(eval_args);
      const auto seeds = seeds_of(eval_args, cfg);
      for (auto seed : seeds) {
        hrlsched::RunOutputs out{per_seed(eval_args.out, seed, seeds.size() > 1), {}, eval_args.wall_clock};
        report(what.c_str(), seed, hrlsched::cmd_eval(cfg, seed, what, out));
      }
      return 0;
    }
    if (make_old->parsed()) {
      auto cfg = build_config(old_args);
      cfg.variant.lambda_scale = lambda_scale;
      cfg.variant.path_loss_offset_db = pl_offset;
      const auto seed = seeds_of(old_args, cfg).front();
      hrlsched::RunOutputs out{old_args.out, old_args.policy_out, old_args.wall_clock};
      report("make-old-policy", seed, hrlsched::cmd_make_old_policy(cfg, seed, out));
      return 0;
    }
  } catch (const hrlsched::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const hrlsched::TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
