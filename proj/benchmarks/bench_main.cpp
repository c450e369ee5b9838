#include <benchmark/benchmark.h>

#include <random>

#include "hrlsched/baselines.hpp"
#include "hrlsched/harness.hpp"
#include "hrlsched/wsr_scheduler.hpp"

using namespace hrlsched;

namespace {

CMatrix random_channel(std::size_t k, std::size_t nt, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  CMatrix h(k, nt);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < nt; ++j) h(i, j) = cplx(g(rng), g(rng));
  return h;
}

void BM_Rzf(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const CMatrix h = random_channel(n, n, 1);
  for (auto _ : st) benchmark::DoNotOptimize(rzf_precoder(h, 1e-3));
}
BENCHMARK(BM_Rzf)->Arg(2)->Arg(4)->Arg(6);

// K users over N_T = K / 2 antennas, the shape of the built-in presets.
void BM_GreedyWsr(benchmark::State& st) {
  const auto k = static_cast<std::size_t>(st.range(0));
  const CMatrix h = random_channel(k, k / 2, 2);
  LinkBudget link;
  link.total_power_w = 1.0;
  link.noise_variance_w.assign(k, 0.1);
  link.path_loss_db.assign(k, 100.0);
  std::vector<double> w(k);
  for (std::size_t i = 0; i < k; ++i) w[i] = 0.5 + 0.1 * static_cast<double>(i);
  for (auto _ : st) benchmark::DoNotOptimize(greedy_wsr(h, w, link, {1e-3}));
}
BENCHMARK(BM_GreedyWsr)->Arg(4)->Arg(8)->Arg(10);

void BM_GradLogProb(benchmark::State& st) {
  const auto cfg = preset("desk");
  HybridPolicy pol(initial_policy(cfg, 1), {initial_policy(cfg, 2)}, true, 0.05);
  Environment env(cfg.env);
  for (int t = 0; t < 50; ++t) env.step(std::vector<double>(4, 1.0));
  const auto f = encode_state(env.state(), env.config());
  const auto dk = dk_mean(env.state().queues, env.config().q_scale_bits());
  Rng rng(3);
  const auto a = pol.sample({f, dk}, rng).action;
  for (auto _ : st) benchmark::DoNotOptimize(pol.grad_log_prob({f, dk}, a));
}
BENCHMARK(BM_GradLogProb);

void BM_ProjectSimplex(benchmark::State& st) {
  std::vector<double> x(static_cast<std::size_t>(st.range(0)));
  Rng rng(4);
  std::normal_distribution<double> g;
  for (auto& v : x) v = g(rng);
  for (auto _ : st) benchmark::DoNotOptimize(project_simplex(x));
}
BENCHMARK(BM_ProjectSimplex)->Arg(3)->Arg(6);

void BM_EnvStep(benchmark::State& st) {
  const auto cfg = preset(st.range(0) == 0 ? "desk" : "config1");
  Environment env(cfg.env);
  const std::vector<double> w(cfg.env.n_users(), 1.0);
  for (auto _ : st) benchmark::DoNotOptimize(env.step(w).reward);
}
BENCHMARK(BM_EnvStep)->Arg(0)->Arg(1);

void BM_HybridTrainingSlots(benchmark::State& st) {
  const auto cfg = preset("desk");
  for (auto _ : st) {
    Environment env(cfg.env);
    Trainer t(env, HybridPolicy(initial_policy(cfg, 1), {}, true, cfg.trainer.sigma_dk), cfg.trainer, 1);
    t.run(1000);
    benchmark::DoNotOptimize(t.tracker().moving_average());
  }
  st.SetItemsProcessed(st.iterations() * 1000);
}
BENCHMARK(BM_HybridTrainingSlots)->Unit(benchmark::kMillisecond);

}  // namespace

// The packaged benchmark_main archive carries LTO bytecode from another
// compiler release, so the entry point lives here.
BENCHMARK_MAIN();
