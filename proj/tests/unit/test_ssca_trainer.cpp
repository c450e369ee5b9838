#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fd.hpp"
#include "hrlsched/baselines.hpp"
#include "hrlsched/harness.hpp"
#include "hrlsched/ssca_trainer.hpp"
#include "oracles.hpp"

using namespace hrlsched;

namespace {

ExperienceBuffer random_buffer(std::size_t horizon, std::mt19937_64& rng, std::vector<double>* costs = nullptr) {
  ExperienceBuffer b(horizon);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t i = 0; i < 2 * horizon + 3; ++i) {
    Experience e;
    e.cost = g(rng);
    b.push(e);
  }
  if (costs) {
    costs->clear();
    for (std::size_t i = 0; i < b.size(); ++i) costs->push_back(b[i].cost);
  }
  return b;
}

std::vector<double> random_simplex_point(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(n);
  double s = 0;
  for (auto& x : p) s += (x = e(rng));
  for (auto& x : p) x /= s;
  return p;
}

}  // namespace

TEST(ExperienceBuffer, KeepsLatestTwoL) {
  ExperienceBuffer b(3);
  for (int i = 0; i < 10; ++i) {
    Experience e;
    e.cost = i;
    b.push(e);
    EXPECT_EQ(b.full(), i >= 5);
  }
  ASSERT_EQ(b.size(), 6u);
  EXPECT_EQ(b[0].cost, 4.0);
  EXPECT_EQ(b[5].cost, 9.0);
  EXPECT_THROW(ExperienceBuffer(0), std::invalid_argument);
}

TEST(Estimators, JBar) {
  std::mt19937_64 rng(1);
  std::vector<double> c;
  const auto b = random_buffer(5, rng, &c);
  double fold = 0;
  for (double x : c) fold += x;
  EXPECT_NEAR(estimate_J_bar(b), fold / 10.0, 1e-12);
  EXPECT_NEAR(estimate_J_bar(b, JBarNorm::inverse_horizon), fold / 5.0, 1e-12);
  ExperienceBuffer constant(2);
  for (int i = 0; i < 4; ++i) {
    Experience e;
    e.cost = -3.5;
    constant.push(e);
  }
  EXPECT_EQ(estimate_J_bar(constant), -3.5);
  EXPECT_THROW(estimate_J_bar(ExperienceBuffer(2)), std::logic_error);
}

TEST(Estimators, QMatchesDoubleLoop) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> c;
    const auto b = random_buffer(4, rng, &c);
    const double jbar = estimate_J_bar(b);
    for (std::size_t r = 1; r <= 4; ++r)
      EXPECT_NEAR(estimate_Q(b, r, jbar), oracle::truncated_return(c, 4, r, jbar), 1e-12);
  }
  std::vector<double> c;
  const auto b = random_buffer(1, rng, &c);
  EXPECT_NEAR(estimate_Q(b, 1, 0.25), c[0] - 0.25, 1e-15);
  EXPECT_THROW(estimate_Q(b, 2, 0.0), std::out_of_range);
}

TEST(Estimators, GBarMatchesIndependentAccumulation) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto c = oracle::random_grad_case(seed, 8, 3, 1, 8);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::size_t horizon = 5;
    ExperienceBuffer b(horizon);
    for (std::size_t i = 0; i < 2 * horizon; ++i) {
      Experience e;
      for (std::size_t j = 0; j < 8; ++j) e.features.push_back(g(rng));
      for (std::size_t j = 0; j < 3; ++j) e.dk_mean.push_back(std::abs(g(rng)));
      for (std::size_t j = 0; j < 3; ++j) e.action.push_back(g(rng));
      e.fixed_logs = c.policy.fixed_log_densities(e.input(), e.action);
      e.cost = g(rng);
      b.push(std::move(e));
    }
    const double jbar = estimate_J_bar(b);
    const auto got = estimate_g_bar(b, c.policy, jbar);
    std::vector<double> ref(c.policy.theta_size(), 0.0);
    for (std::size_t r = 1; r <= horizon; ++r) {
      double q = 0;
      for (std::size_t k = 0; k < horizon; ++k) q += b[r - 1 + k].cost - jbar;
      const auto score = c.policy.grad_log_prob(b[r - 1].input(), b[r - 1].action);
      for (std::size_t j = 0; j < ref.size(); ++j) ref[j] += q * score[j] / horizon;
    }
    for (std::size_t j = 0; j < ref.size(); ++j) EXPECT_NEAR(got[j], ref[j], 1e-10 * (1 + std::abs(ref[j])));
  }
}

TEST(Estimators, GBarZeroWhenCostsConstant) {
  const auto c = oracle::random_grad_case(3, 8, 3, 1, 8);
  ExperienceBuffer b(3);
  for (int i = 0; i < 6; ++i) {
    Experience e;
    e.features.assign(8, 0.1);
    e.dk_mean.assign(3, 0.2);
    e.action.assign(3, 0.3);
    e.fixed_logs = c.policy.fixed_log_densities(e.input(), e.action);
    e.cost = 2.0;
    b.push(std::move(e));
  }
  for (double x : estimate_g_bar(b, c.policy, estimate_J_bar(b))) EXPECT_EQ(x, 0.0);
}

TEST(Estimators, IdenticalComponentsGiveEqualPGradients) {
  const auto base = oracle::random_grad_case(4, 8, 3, 0, 8);
  HybridPolicy pol(base.policy.fresh(), {base.policy.fresh(), base.policy.fresh()}, false, 0.05);
  pol.set_p(std::vector<double>{0.2, 0.5, 0.3});
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  ExperienceBuffer b(4);
  for (int i = 0; i < 8; ++i) {
    Experience e;
    for (int j = 0; j < 8; ++j) e.features.push_back(g(rng));
    e.dk_mean.assign(3, 0.0);
    for (int j = 0; j < 3; ++j) e.action.push_back(g(rng));
    e.fixed_logs = pol.fixed_log_densities(e.input(), e.action);
    e.cost = g(rng);
    b.push(std::move(e));
  }
  const auto gb = estimate_g_bar(b, pol, estimate_J_bar(b));
  EXPECT_NEAR(gb[0], gb[1], 1e-12);
  EXPECT_NEAR(gb[1], gb[2], 1e-12);
}

TEST(Smoothing, Examples) {
  const std::vector<double> prev{1.0, 2.0}, fresh{3.0, -2.0};
  auto s = smooth(5.0, prev, 7.0, fresh, 1.0);
  EXPECT_EQ(s.j, 7.0);
  EXPECT_EQ(s.g, fresh);
  s = smooth(5.0, prev, 7.0, fresh, 0.0);
  EXPECT_EQ(s.j, 5.0);
  EXPECT_EQ(s.g, prev);
  s = smooth(5.0, prev, 7.0, fresh, 0.5);
  EXPECT_EQ(s.j, 6.0);
  EXPECT_EQ(s.g, (std::vector<double>{2.0, 0.0}));
}

TEST(StepSizes, Schedule) {
  const auto s1 = step_sizes(1);
  EXPECT_EQ(s1.chi, 1.0);
  EXPECT_EQ(s1.eta, 1.0);
  const auto s = step_sizes(1024);
  EXPECT_DOUBLE_EQ(s.chi, std::pow(1024.0, -0.6));
  EXPECT_DOUBLE_EQ(s.eta, std::pow(1024.0, -0.7));
  EXPECT_NEAR(s.chi, 0.015625, 1e-15);  // 2^-6
  double ratio = 0;
  for (std::uint64_t l = 1; l <= 1000000; l = l * 3 / 2 + 1) {
    const auto t = step_sizes(l);
    EXPECT_GE(t.chi / t.eta, ratio);
    ratio = t.chi / t.eta;
  }
  EXPECT_THROW(step_sizes(0), std::invalid_argument);
}

TEST(StepSizes, ExponentValidation) {
  EXPECT_NO_THROW(validate_step_exponents(0.6, 0.7));
  EXPECT_NO_THROW(validate_step_exponents(0.6, 1.0));
  EXPECT_THROW(validate_step_exponents(0.7, 0.6), std::invalid_argument);
  EXPECT_THROW(validate_step_exponents(0.7, 0.7), std::invalid_argument);
  EXPECT_THROW(validate_step_exponents(0.5, 0.7), std::invalid_argument);
  EXPECT_THROW(validate_step_exponents(0.6, 1.1), std::invalid_argument);
}

TEST(ProjectSimplex, Examples) {
  EXPECT_EQ(project_simplex(std::vector<double>{2.0, 0.0}), (std::vector<double>{1.0, 0.0}));
  const std::vector<double> on{0.2, 0.3, 0.5};
  const auto p = project_simplex(on);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p[i], on[i], 1e-15);
  EXPECT_EQ(project_simplex(std::vector<double>{0.7}), (std::vector<double>{1.0}));
  EXPECT_THROW(project_simplex(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(project_simplex(std::vector<double>{NAN, 1.0}), std::invalid_argument);
}

TEST(ProjectSimplex, MatchesSupportEnumeration) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(3 + trial % 4);
    for (auto& v : x) v = g(rng);
    const auto got = project_simplex(x);
    const auto ref = oracle::simplex_projection(x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(got[i], ref[i], 1e-12);
  }
}

TEST(SolveSurrogate, ClosedForms) {
  const std::vector<double> theta{0.3, 0.7, 1.0, -2.0};
  EXPECT_EQ(solve_surrogate(theta, 2, std::vector<double>(4, 0.0), 1.0), theta);
  // Interior: p moves along a zero-sum direction, gamma stays in the box.
  const std::vector<double> g{0.1, -0.1, 0.4, -0.6};
  const auto c = solve_surrogate(theta, 2, g, 2.0);
  EXPECT_NEAR(c[0], 0.3 - 0.1 / 4, 1e-15);
  EXPECT_NEAR(c[1], 0.7 + 0.1 / 4, 1e-15);
  EXPECT_NEAR(c[2], 1.0 - 0.4 / 4, 1e-15);
  EXPECT_NEAR(c[3], -2.0 + 0.6 / 4, 1e-15);
  const auto clamped = solve_surrogate(std::vector<double>{1.0, 9.9}, 1, std::vector<double>{0.0, -1.0}, 1.0);
  EXPECT_EQ(clamped[1], kParamBox);
  EXPECT_THROW(solve_surrogate(theta, 2, g, 0.0), std::invalid_argument);
}

TEST(SolveSurrogate, BeatsRandomFeasiblePoints) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 3.0);
  std::uniform_real_distribution<double> box(-kParamBox, kParamBox);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n_p = 3 + trial % 3, n = n_p + 4;
    std::vector<double> theta = random_simplex_point(rng, n_p), grad(n);
    for (std::size_t i = n_p; i < n; ++i) theta.push_back(std::uniform_real_distribution<double>(-9, 9)(rng));
    for (auto& x : grad) x = g(rng);
    const double vs = 0.5 + trial % 3;
    const auto c = solve_surrogate(theta, n_p, grad, vs);
    const double best = surrogate_value(c, theta, 0.3, grad, vs);
    EXPECT_LE(best, surrogate_value(theta, theta, 0.3, grad, vs) + 1e-9);
    for (int k = 0; k < 1000; ++k) {
      auto y = random_simplex_point(rng, n_p);
      for (std::size_t i = n_p; i < n; ++i) y.push_back(box(rng));
      EXPECT_LE(best, surrogate_value(y, theta, 0.3, grad, vs) + 1e-9);
    }
  }
}

TEST(UpdateTheta, EndpointsAndSimplexAudit) {
  const std::vector<double> a{0.5, 0.5, 1.0}, b{0.1, 0.9, -1.0};
  EXPECT_EQ(update_theta(a, b, 0.0, 2), a);
  const auto one = update_theta(a, b, 1.0, 2);
  EXPECT_NEAR(one[0], 0.1, 1e-15);
  EXPECT_EQ(one[2], -1.0);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> theta = random_simplex_point(rng, 5);
  theta.push_back(0.0);
  for (int it = 0; it < 10000; ++it) {
    std::vector<double> grad(theta.size());
    for (auto& x : grad) x = g(rng);
    theta = update_theta(theta, solve_surrogate(theta, 5, grad, 1.0), u(rng), 5);
    double s = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      ASSERT_GE(theta[i], 0.0);
      ASSERT_LE(theta[i], 1.0);
      s += theta[i];
    }
    ASSERT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Trainer, RowsKeepPOnSimplexAndGammaInBox) {
  auto cfg = preset("desk");
  Environment env(cfg.env);
  Trainer t(env, HybridPolicy(initial_policy(cfg, 1), {}, true, cfg.trainer.sigma_dk), cfg.trainer, 1);
  std::uint64_t last = 0;
  t.run(3000, [&](const MetricsRow& r) {
    EXPECT_GT(r.slot, last);
    last = r.slot;
    double s = 0;
    for (double p : r.p) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
      s += p;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    for (double x : t.policy().fresh().params()) ASSERT_LE(std::abs(x), kParamBox);
  });
  EXPECT_EQ(last, 3000u);
}

TEST(Trainer, SameSeedSameStream) {
  auto cfg = preset("desk");
  auto run = [&] {
    Environment env(cfg.env);
    Trainer t(env, HybridPolicy(initial_policy(cfg, 3), {}, true, cfg.trainer.sigma_dk), cfg.trainer, 3);
    std::vector<MetricsRow> rows;
    t.run(1500, [&](const MetricsRow& r) { rows.push_back(r); });
    return rows;
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].reward, b[i].reward);
    EXPECT_EQ(a[i].p, b[i].p);
    EXPECT_EQ(a[i].j_tilde, b[i].j_tilde);
  }
}

TEST(Trainer, FrozenDkReducesToDkBaseline) {
  auto cfg = preset("desk");
  TrainerConfig tc = cfg.trainer;
  tc.batch_size = 2 * tc.horizon;
  tc.sigma_dk = 1e-12;
  tc.reuse_mode = ReuseMode::frozen;
  tc.initial_p = std::vector<double>{0.0, 1.0};
  Environment a(cfg.env), b(cfg.env);
  Trainer t(a, HybridPolicy(initial_policy(cfg, 1), {}, true, tc.sigma_dk), tc, 1);
  t.run(4000);
  const auto dk = run_dk_greedy(b, 4000);
  EXPECT_EQ(t.tracker().rewards(), dk.rewards);
}

TEST(Trainer, RejectsMismatchedPolicy) {
  auto cfg = preset("desk");
  Environment env(cfg.env);
  Rng rng(1);
  auto wrong = GaussianPolicy::random_init({5, 8, 8, 4}, rng);
  EXPECT_THROW(Trainer(env, HybridPolicy(wrong, {}, true, 0.05), cfg.trainer, 1), std::invalid_argument);
}

TEST(Trainer, ImprovesOverItsFirstSlots) {
  // The hybrid run ends above its own first 500 slots on at least 4 of 5 seeds.
  auto cfg = preset("desk");
  int better = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EnvConfig e = cfg.env;
    e.seed = seed;
    Environment env(e);
    Trainer t(env, HybridPolicy(initial_policy(cfg, seed), {}, true, cfg.trainer.sigma_dk), cfg.trainer, seed);
    t.run(cfg.slots);
    better += t.tracker().moving_average() > t.tracker().moving_average_at(500);
  }
  EXPECT_GE(better, 4);
}

TEST(TrainerConfig, Validation) {
  TrainerConfig c;
  EXPECT_NO_THROW(c.validate());
  c.kappa1 = 0.8;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.horizon = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.varsigma = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
