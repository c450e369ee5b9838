// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// if any selected criterion fails.

#include <CLI11.hpp>
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fd.hpp"
#include "hrlsched/baselines.hpp"
#include "hrlsched/harness.hpp"
#include "hrlsched/wsr_scheduler.hpp"
#include "oracles.hpp"

using namespace hrlsched;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets, fixed here rather than on the command line.
constexpr double kFdTol = 1e-4;
constexpr double kSimplexTol = 1e-8;
constexpr double kZfLeakTol = 1e-6;
constexpr double kUnitNormTol = 1e-10;
constexpr double kPSumTol = 1e-9;
constexpr double kDkFloorRatio = 0.95;
constexpr std::uint64_t kSeeds = 5;
constexpr std::uint64_t kEarlySlot = 2000;
constexpr double kCsiNmse = 0.4;

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path work;
  std::string cli;  // path of the command-line tool, may be empty
  fs::path old_policy;
};

std::string fmt(const char* f, double a) {
  char b[64];
  std::snprintf(b, sizeof b, f, a);
  return b;
}

// --- 1 ---------------------------------------------------------------------

Verdict gradient_check(Context&) {
  double worst = 0.0;
  std::size_t coords = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    // Desk-sized network: 44 features, K = 4, two old policies and DK.
    const auto c = oracle::random_grad_case(1000 + seed, 44, 4, 2, 64);
    worst = std::max(worst, oracle::check_log_prob_gradient(c).max_rel);
    coords += c.policy.theta_size();
  }
  return {worst <= kFdTol, "max rel err " + fmt("%.3g", worst) + " over " + std::to_string(coords) + " coords"};
}

// --- 2 ---------------------------------------------------------------------

Verdict simplex_projection(Context&) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> dim(3, 6);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(dim(rng));
    const double scale = (t % 3 == 0) ? 10.0 : 1.0;
    for (auto& v : x) v = scale * g(rng);
    const auto got = project_simplex(x);
    const auto ref = oracle::simplex_projection(x);
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(got[i] - ref[i]));
  }
  return {worst <= kSimplexTol, "max L-inf gap " + fmt("%.3g", worst)};
}

// --- 3 ---------------------------------------------------------------------

Verdict zero_forcing_limit(Context&) {
  std::mt19937_64 rng(33);
  std::uniform_int_distribution<std::size_t> nt_d(1, 6);
  double worst_leak = 0.0, worst_norm = 0.0;
  int instances = 0;
  while (instances < 200) {
    const std::size_t nt = nt_d(rng);
    const std::size_t nb = std::uniform_int_distribution<std::size_t>(1, nt)(rng);
    const CMatrix h = oracle::random_cmatrix(nb, nt, rng);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(oracle::to_eigen(h));
    const auto sv = svd.singularValues();
    if (sv(0) / sv(sv.size() - 1) >= 100.0) continue;  // keep well-conditioned draws only
    ++instances;
    const Precoder v = rzf_precoder(h, 1e-9);
    for (std::size_t j = 0; j < nb; ++j) {
      double n2 = 0.0;
      for (std::size_t k = 0; k < nt; ++k) n2 += std::norm(v.columns(k, j));
      worst_norm = std::max(worst_norm, std::abs(std::sqrt(n2) - 1.0));
    }
    for (std::size_t i = 0; i < nb; ++i) {
      auto gain = [&](std::size_t j) {
        cplx s = 0.0;
        for (std::size_t k = 0; k < nt; ++k) s += h(i, k) * v.columns(k, j);
        return std::abs(s);
      };
      const double own = gain(i);
      for (std::size_t j = 0; j < nb; ++j)
        if (j != i) worst_leak = std::max(worst_leak, gain(j) / own);
    }
  }
  return {worst_leak <= kZfLeakTol && worst_norm <= kUnitNormTol,
          "max leak ratio " + fmt("%.3g", worst_leak) + ", max |norm-1| " + fmt("%.3g", worst_norm)};
}

// --- 4 ---------------------------------------------------------------------

Verdict bit_conservation(Context&) {
  std::string detail;
  bool ok = true;
  for (const auto& name : preset_names()) {
    auto cfg = preset(name);
    cfg.env.seed = 17;
    Environment env(cfg.env);
    std::mt19937_64 rng(18);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int t = 0; t < 10000; ++t) {
      std::vector<double> w(cfg.env.n_users());
      for (auto& x : w) x = u(rng);
      env.step(w);
    }
    const auto& l = env.ledger();
    const Bits rhs = l.delivered_original + l.dropped_remaining + l.dropped_transmitted + env.residual_original_bits();
    const bool this_ok = l.arrived == rhs && l.arrived > 0;
    ok = ok && this_ok;
    detail += name + (this_ok ? " ok " : " MISMATCH ");
  }
  return {ok, detail};
}

// --- 5 ---------------------------------------------------------------------

Verdict greedy_sanity(Context&) {
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<std::size_t> kd(1, 6), nd(1, 4);
  std::uniform_real_distribution<double> wd(0.0, 3.0), nv(0.01, 1.0);
  int mismatch = 0, nonmono = 0, below_single = 0, scale_changed = 0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t k = kd(rng), nt = nd(rng);
    const CMatrix h = oracle::random_cmatrix(k, nt, rng);
    std::vector<double> w(k);
    for (auto& x : w) x = wd(rng);
    LinkBudget link;
    link.bandwidth_hz = 1e6;
    link.total_power_w = 1.0;
    link.noise_variance_w.assign(k, nv(rng));
    link.path_loss_db.assign(k, 100.0);
    const double alpha = 0.01 * link.noise_variance_w[0];

    const auto d = greedy_wsr(h, w, link, {alpha});
    const auto ref = oracle::greedy(oracle::to_eigen(h), w, link.total_power_w, link.noise_variance_w,
                                    link.bandwidth_hz, alpha);
    mismatch += d.scheduled != ref.order;
    for (std::size_t r = 1; r < d.round_wsr.size(); ++r) nonmono += d.round_wsr[r] < d.round_wsr[r - 1];
    double best_single = 0.0;
    for (std::size_t u = 0; u < k; ++u) {
      const std::size_t s[] = {u};
      best_single = std::max(best_single, w[u] * evaluate_set(h, s, link, alpha).rates[u]);
    }
    below_single += d.wsr < best_single * (1 - 1e-12);
    for (double c : {0.1, 10.0}) {
      auto ws = w;
      for (auto& x : ws) x *= c;
      scale_changed += greedy_wsr(h, ws, link, {alpha}).scheduled != d.scheduled;
    }
  }
  const bool ok = mismatch == 0 && nonmono == 0 && below_single == 0 && scale_changed == 0;
  return {ok, "oracle mismatches " + std::to_string(mismatch) + ", non-monotone rounds " + std::to_string(nonmono) +
                  ", below best single " + std::to_string(below_single) + ", scale changes " +
                  std::to_string(scale_changed)};
}

// --- 6 ---------------------------------------------------------------------

Verdict deadline_audit(Context&) {
  auto cfg = preset("desk");
  cfg.env.seed = 66;
  Environment env(cfg.env);
  HybridPolicy pol(initial_policy(cfg, 66), {}, true, cfg.trainer.sigma_dk);
  Rng rng(67);
  long violations = 0, deliveries = 0, drops = 0;
  for (int t = 0; t < 10000; ++t) {
    const State& s = env.state();
    for (const auto& q : s.queues)
      for (const auto& p : q.packets) violations += s.slot - p.arrival_slot >= q.deadline;
    const Slot now = s.slot;
    std::vector<double> f = encode_state(s, env.config());
    std::vector<double> dk = dk_mean(s.queues, env.config().q_scale_bits());
    const auto a = pol.sample({f, dk}, rng);
    const auto r = env.step(action_to_weights(a.action));
    for (const auto& d : r.outcome.delivered) {
      ++deliveries;
      violations += d.backlog_plus_remaining > d.budget;
      violations += d.budget != r.budgets[d.user];
      violations += now - d.packet.arrival_slot >= env.config().users[d.user].deadline;
    }
    for (const auto& d : r.outcome.dropped) {
      ++drops;
      violations += env.state().slot - d.packet.arrival_slot != env.config().users[d.user].deadline;
    }
  }
  return {violations == 0 && deliveries > 0 && drops > 0,
          std::to_string(violations) + " violations in " + std::to_string(deliveries) + " deliveries, " +
              std::to_string(drops) + " drops"};
}

// --- 7 ---------------------------------------------------------------------

struct HybridRun {
  double early = 0.0;
  double final = 0.0;
};

HybridRun hybrid_run(const ScenarioConfig& cfg, std::uint64_t seed, std::uint64_t slots, bool use_old, bool use_dk,
                     const fs::path& old_path) {
  EnvConfig e = cfg.env;
  e.seed = seed;
  Environment env(e);
  std::vector<GaussianPolicy> old;
  if (use_old) old.push_back(load_policy_file(old_path.string()));
  Trainer t(env, HybridPolicy(initial_policy(cfg, seed), std::move(old), use_dk, cfg.trainer.sigma_dk), cfg.trainer,
            seed);
  t.run(slots);
  return {t.tracker().moving_average_at(kEarlySlot), t.tracker().moving_average()};
}

double dk_final(const ScenarioConfig& cfg, std::uint64_t seed, std::uint64_t slots) {
  EnvConfig e = cfg.env;
  e.seed = seed;
  Environment env(e);
  return run_dk_greedy(env, slots).final_ma;
}

// The old policy reused by criteria 7 to 10: a single-policy agent trained
// on the unperturbed desk environment with its own seed. Single-policy
// learning is noisy at the default cost scale, so it gets a smaller scale
// and slower step decay over a longer budget.
fs::path ensure_old_policy(Context& ctx) {
  if (!ctx.old_policy.empty()) return ctx.old_policy;
  auto cfg = preset("desk");
  cfg.trainer.cost_scale = 0.01;
  cfg.trainer.kappa1 = 0.51;
  cfg.trainer.kappa2 = 0.52;
  cfg.slots = 200000;
  ctx.old_policy = ctx.work / "old_identity.pol";
  const auto s = cmd_make_old_policy(cfg, 100, {{}, ctx.old_policy.string(), false});
  std::printf("  old policy: %llu slots, final moving average %.0f\n", static_cast<unsigned long long>(cfg.slots),
              s.final_ma);
  return ctx.old_policy;
}

Verdict learning_behaviour(Context& ctx) {
  const auto cfg = preset("desk");
  const auto old = ensure_old_policy(ctx);
  int a_floor = 0, a_par = 0, b_wins = 0, c_dk = 0, c_old = 0;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    const auto full = hybrid_run(cfg, seed, cfg.slots, true, true, old);
    const auto no_old = hybrid_run(cfg, seed, kEarlySlot, false, true, old);
    const auto no_dk = hybrid_run(cfg, seed, kEarlySlot, true, false, old);
    EnvConfig e = cfg.env;
    e.seed = seed;
    Environment env(e);
    const auto single = run_single_policy(env, initial_policy(cfg, seed), cfg.trainer, seed, kEarlySlot);
    const double single_early = single.final_ma;
    const double ratio = full.final / dk_final(cfg, seed, cfg.slots);
    a_floor += ratio >= kDkFloorRatio;
    a_par += ratio >= 1.0;
    b_wins += full.early >= single_early;
    c_dk += no_dk.early < full.early;
    c_old += no_old.early < full.early;
    std::printf("  seed %llu: final/DK %.4f | @%llu full %.0f single %.0f no-dk %.0f no-old %.0f\n",
                static_cast<unsigned long long>(seed), ratio, static_cast<unsigned long long>(kEarlySlot), full.early,
                single_early, no_dk.early, no_old.early);
  }
  const bool a = a_floor == static_cast<int>(kSeeds) && a_par >= 3;
  const bool b = b_wins >= 4;
  const bool c = c_dk >= 3 && c_old >= 3;
  char buf[256];
  std::snprintf(buf, sizeof buf, "(a) >=0.95xDK %d/5, >=1.0xDK %d/5 %s; (b) %d/5 %s; (c) dk %d/5, old %d/5 %s",
                a_floor, a_par, a ? "ok" : "fail", b_wins, b ? "ok" : "fail", c_dk, c_old, c ? "ok" : "fail");
  return {a && b && c, buf};
}

// --- 8 ---------------------------------------------------------------------

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream f(p);
  std::string line;
  while (std::getline(f, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(std::move(cells));
  }
  return rows;
}

Verdict simplex_invariant(Context& ctx) {
  auto cfg = preset("desk");
  cfg.old_policies = {ensure_old_policy(ctx).string()};
  const fs::path csv = ctx.work / "simplex.csv";
  cmd_train(cfg, 8, {csv.string(), {}, false});
  const auto rows = read_csv(csv);
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < rows.at(0).size(); ++i)
    if (rows[0][i].rfind("p_", 0) == 0) cols.push_back(i);
  double worst_sum = 0.0;
  long out_of_range = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    double s = 0.0;
    for (auto c : cols) {
      const double v = std::stod(rows[r][c]);
      out_of_range += v < 0.0 || v > 1.0;
      s += v;
    }
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }
  const std::string last_slot = rows.back().at(1);
  const bool ok = cols.size() == 3 && worst_sum <= kPSumTol && out_of_range == 0 && last_slot == "20000";
  return {ok, std::to_string(rows.size() - 1) + " rows to slot " + last_slot + ", max |sum-1| " +
                  fmt("%.3g", worst_sum) + ", out of range " + std::to_string(out_of_range)};
}

// --- 9 ---------------------------------------------------------------------

Verdict imperfect_csi(Context& ctx) {
  auto cfg = preset("desk");
  cfg.env.csi_nmse = kCsiNmse;
  const auto old = ensure_old_policy(ctx);
  int ok = 0;
  std::string ratios;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    const double ratio = hybrid_run(cfg, seed, cfg.slots, true, true, old).final / dk_final(cfg, seed, cfg.slots);
    ok += ratio >= kDkFloorRatio;
    ratios += fmt(" %.4f", ratio);
  }
  return {ok >= 3, std::to_string(ok) + "/5 seeds >= 0.95xDK, ratios" + ratios};
}

// --- 10 --------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Verdict determinism(Context& ctx) {
  const auto old = ensure_old_policy(ctx);
  const fs::path a = ctx.work / "det_a.csv", b = ctx.work / "det_b.csv";
  std::string how;
  if (!ctx.cli.empty()) {
    how = "two CLI invocations";
    for (const auto& out : {a, b}) {
      const std::string cmd = ctx.cli + " train --config desk --seed 10 --old-policy " + old.string() + " --out " +
                              out.string() + " > /dev/null";
      if (std::system(cmd.c_str()) != 0) return {false, "CLI invocation failed: " + cmd};
    }
  } else {
    how = "two in-process runs";
    auto cfg = preset("desk");
    cfg.old_policies = {old.string()};
    cmd_train(cfg, 10, {a.string(), {}, false});
    cmd_train(cfg, 10, {b.string(), {}, false});
  }
  const std::string x = slurp(a), y = slurp(b);
  return {!x.empty() && x == y, how + ", " + std::to_string(x.size()) + " bytes, " + (x == y ? "identical" : "differ")};
}

struct Criterion {
  int id;
  double time_limit_s;  // 0: none
  std::function<Verdict(Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::vector<int> only;
  std::string work = (fs::temp_directory_path() / "hrlsched_acceptance").string();
  app.add_option("--only", only, "run just these criteria (repeatable)");
  app.add_option("--work-dir", work, "scratch directory for policies and CSVs")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  Context ctx;
  ctx.work = work;
  fs::create_directories(ctx.work);
#ifdef HRLSCHED_EXE
  ctx.cli = HRLSCHED_EXE;
#endif

  const std::vector<Criterion> all{
      {1, 30, gradient_check},    {2, 10, simplex_projection}, {3, 0, zero_forcing_limit},
      {4, 0, bit_conservation},   {5, 0, greedy_sanity},       {6, 0, deadline_audit},
      {7, 3600, learning_behaviour}, {8, 0, simplex_invariant}, {9, 1800, imperfect_csi},
      {10, 0, determinism},
  };
  int failures = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run(ctx);
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.time_limit_s > 0 && secs > c.time_limit_s) {
      v.pass = false;
      v.detail += " (over the " + fmt("%.0f", c.time_limit_s) + " s limit)";
    }
    failures += !v.pass;
    std::printf("criterion %2d: %s  %s  [%.1f s]\n", c.id, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
