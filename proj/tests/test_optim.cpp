#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "fame/optim.hpp"
#include "fame/rng.hpp"

using namespace fame::optim;

namespace {

Vec random_grads(std::size_t n, fame::Rng& rng) {
  Vec g(n);
  for (auto& gi : g) gi = rng.normal();
  return g;
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

}  // namespace

TEST_CASE("first step from zero state lands on the hand-derived value") {
  FameHyperParams hp;
  FameState st(1);
  Vec params = {0.0};
  fame_step(st, params, {1.0}, hp);

  // Re-derive the same step with bare scalars.
  double m = (1.0 - hp.beta1) * 1.0;
  double v = (1.0 - hp.beta2) * 1.0;
  double dm = (1.0 - hp.beta3) * m;
  double dv = (1.0 - hp.beta5) * v;
  double tm = (1.0 - hp.beta4) * dm;
  double tv = (1.0 - hp.beta5) * dv;
  double m_hat = 3.0 * m - 3.0 * dm + tm;
  double v_hat = 3.0 * v - 3.0 * dv + tv;
  double expect = -hp.alpha * m_hat / std::sqrt(v_hat + hp.epsilon);

  CHECK(params[0] == expect);
  CHECK(std::fabs(params[0] - (-0.0025306)) < 1e-7);

  CHECK(st.m[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(st.v[0] == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(st.dm[0] == doctest::Approx(0.07).epsilon(1e-12));
  CHECK(st.dv[0] == doctest::Approx(0.0002).epsilon(1e-12));
  CHECK(st.tm[0] == doctest::Approx(0.035).epsilon(1e-12));
  CHECK(st.tv[0] == doctest::Approx(0.00004).epsilon(1e-12));
  CHECK(st.step_count == 1);
}

TEST_CASE("multi-element steps act per element") {
  FameHyperParams hp;
  FameState joint(3);
  Vec params = {0.5, -1.0, 2.0};
  fame::Rng rng(9);
  std::vector<Vec> grad_history;
  for (int t = 0; t < 20; ++t) grad_history.push_back(random_grads(3, rng));
  for (const auto& g : grad_history) fame_step(joint, params, g, hp);

  for (std::size_t i = 0; i < 3; ++i) {
    FameState solo(1);
    Vec p = {i == 0 ? 0.5 : (i == 1 ? -1.0 : 2.0)};
    for (const auto& g : grad_history) fame_step(solo, p, {g[i]}, hp);
    CHECK(p[0] == params[i]);
  }
}

TEST_CASE("order-3 generalized chain reproduces the direct form bitwise") {
  FameHyperParams hp;
  KemaFameParams kp;
  kp.order = 3;
  kp.m_betas = {hp.beta1, hp.beta3, hp.beta4};
  kp.v_betas = {hp.beta2, hp.beta5, hp.beta5};
  kp.alpha = hp.alpha;
  kp.epsilon = hp.epsilon;

  FameState fs(8);
  KemaFameState ks(3, 8);
  Vec pf(8, 0.25), pk(8, 0.25);
  fame::Rng rng(33);
  for (int t = 0; t < 500; ++t) {
    Vec g = random_grads(8, rng);
    fame_step(fs, pf, g, hp);
    kema_fame_step(ks, pk, g, kp);
    REQUIRE(pf == pk);
  }
  CHECK(fs.m == ks.m_stages[0]);
  CHECK(fs.dm == ks.m_stages[1]);
  CHECK(fs.tm == ks.m_stages[2]);
  CHECK(fs.v == ks.v_stages[0]);
  CHECK(fs.dv == ks.v_stages[1]);
  CHECK(fs.tv == ks.v_stages[2]);
}

TEST_CASE("order-3 equivalence also holds under both decay modes") {
  for (auto mode : {DecayMode::coupled, DecayMode::decoupled}) {
    FameHyperParams hp;
    hp.weight_decay = 0.05;
    hp.decay_mode = mode;
    KemaFameParams kp;
    kp.order = 3;
    kp.m_betas = {hp.beta1, hp.beta3, hp.beta4};
    kp.v_betas = {hp.beta2, hp.beta5, hp.beta5};
    kp.alpha = hp.alpha;
    kp.epsilon = hp.epsilon;
    kp.weight_decay = hp.weight_decay;
    kp.decay_mode = mode;

    FameState fs(4);
    KemaFameState ks(3, 4);
    Vec pf(4, 1.5), pk(4, 1.5);
    fame::Rng rng(34);
    for (int t = 0; t < 200; ++t) {
      Vec g = random_grads(4, rng);
      fame_step(fs, pf, g, hp);
      kema_fame_step(ks, pk, g, kp);
      REQUIRE(pf == pk);
    }
  }
}

TEST_CASE("unit deep betas collapse the chain onto uncorrected adam") {
  // With the three correction stages frozen at beta = 1 their buffers stay
  // at zero, so the combined moments are exactly 3m and 3v and each update
  // is the uncorrected-adam update scaled by sqrt(3).
  FameHyperParams hp;
  hp.beta3 = 1.0;
  hp.beta4 = 1.0;
  hp.beta5 = 1.0;
  hp.epsilon = 0.0;

  AdamParams ap;
  ap.lr = hp.alpha;
  ap.beta1 = hp.beta1;
  ap.beta2 = hp.beta2;
  ap.epsilon = 0.0;
  ap.bias_correction = false;

  const std::size_t n = 16;
  FameState fs(n);
  AdamState as(n);
  Vec pf(n, 0.0), pa(n, 0.0);
  fame::Rng rng(77);
  const double root3 = std::sqrt(3.0);
  for (int t = 0; t < 100; ++t) {
    Vec g = random_grads(n, rng);
    Vec pf_before = pf, pa_before = pa;
    fame_step(fs, pf, g, hp);
    adam_step(as, pa, g, ap);

    CHECK(fs.m == as.m);
    CHECK(fs.v == as.v);

    Vec uf(n), ua(n);
    for (std::size_t i = 0; i < n; ++i) {
      uf[i] = pf[i] - pf_before[i];
      ua[i] = pa[i] - pa_before[i];
    }
    double cosine = dot(uf, ua) / (norm(uf) * norm(ua));
    CHECK(std::fabs(cosine - 1.0) < 1e-10);
    CHECK(std::fabs(norm(uf) / norm(ua) - root3) < 1e-10);
  }
}

TEST_CASE("order-1 chain with zero epsilon is uncorrected adam bitwise") {
  KemaFameParams kp;
  kp.order = 1;
  kp.m_betas = {0.9};
  kp.v_betas = {0.999};
  kp.alpha = 1e-3;
  kp.epsilon = 0.0;

  AdamParams ap;
  ap.lr = 1e-3;
  ap.epsilon = 0.0;
  ap.bias_correction = false;

  KemaFameState ks(1, 4);
  AdamState as(4);
  Vec pk(4, -0.5), pa(4, -0.5);
  fame::Rng rng(78);
  for (int t = 0; t < 200; ++t) {
    Vec g = random_grads(4, rng);
    kema_fame_step(ks, pk, g, kp);
    adam_step(as, pa, g, ap);
    REQUIRE(pk == pa);
  }
}

TEST_CASE("partial chain corrects the numerator only") {
  FameHyperParams hp;
  PartialFameState st(1);
  Vec params = {0.0};
  double m = 0.0, v = 0.0, dm = 0.0, tm = 0.0, theta = 0.0;
  fame::Rng rng(55);
  for (int t = 0; t < 100; ++t) {
    double g = rng.normal();
    partial_fame_step(st, params, {g}, hp);
    m = hp.beta1 * m + (1.0 - hp.beta1) * g;
    v = hp.beta2 * v + (1.0 - hp.beta2) * (g * g);
    dm = hp.beta3 * dm + (1.0 - hp.beta3) * m;
    tm = hp.beta4 * tm + (1.0 - hp.beta4) * dm;
    double num = 3.0 * m - 3.0 * dm + tm;
    theta -= hp.alpha * num / std::sqrt(v + hp.epsilon);
    CHECK(params[0] == theta);
  }
}

TEST_CASE("negative combined second moment is clamped before the root") {
  // A sharp drop in squared gradients pushes 3v - 3dv + tv below zero when
  // the deep stages still remember the old scale; the update must clamp to
  // the bare epsilon floor and stay finite.
  FameHyperParams hp;
  hp.beta2 = 0.0;   // raw second moment reacts instantly
  hp.beta5 = 0.99;  // deep stages linger
  FameState st(1);
  Vec params = {0.0};
  fame_step(st, params, {100.0}, hp);
  fame_step(st, params, {1e-6}, hp);
  double probe_v = 3.0 * st.v[0] - 3.0 * st.dv[0] + st.tv[0];
  CHECK(probe_v < 0.0);
  CHECK(std::isfinite(params[0]));
}

TEST_CASE("coupled decay folds into the gradient") {
  FameHyperParams with_wd;
  with_wd.weight_decay = 0.1;
  FameHyperParams no_wd;

  FameState sa(1), sb(1);
  Vec pa = {0.5}, pb = {0.5};
  fame_step(sa, pa, {0.2}, with_wd);
  fame_step(sb, pb, {0.2 + 0.1 * 0.5}, no_wd);
  CHECK(pa[0] == pb[0]);
  CHECK(sa.m[0] == sb.m[0]);
  CHECK(sa.v[0] == sb.v[0]);
}

TEST_CASE("decoupled decay shrinks the parameter outside the moments") {
  FameHyperParams hp;
  hp.weight_decay = 0.1;
  hp.decay_mode = DecayMode::decoupled;
  FameHyperParams plain;

  FameState sa(1), sb(1);
  Vec pa = {2.0}, pb = {2.0};
  fame_step(sa, pa, {0.3}, hp);
  fame_step(sb, pb, {0.3}, plain);

  // Same moment buffers: decay never touches the gradient.
  CHECK(sa.m[0] == sb.m[0]);
  CHECK(sa.v[0] == sb.v[0]);
  double adaptive_part = 2.0 - pb[0];
  CHECK(pa[0] == doctest::Approx(2.0 - hp.alpha * 0.1 * 2.0 - adaptive_part)
                     .epsilon(1e-15));
}

TEST_CASE("adamw decays decoupled") {
  AdamWParams wp;
  wp.weight_decay = 0.1;
  AdamParams ap;
  ap.weight_decay = 0.0;

  AdamState sa(1), sb(1);
  Vec pa = {2.0}, pb = {2.0};
  adamw_step(sa, pa, {0.3}, wp);
  adam_step(sb, pb, {0.3}, ap);
  CHECK(sa.m[0] == sb.m[0]);
  CHECK(sa.v[0] == sb.v[0]);
  double adaptive_part = 2.0 - pb[0];
  CHECK(pa[0] ==
        doctest::Approx(2.0 - wp.lr * 0.1 * 2.0 - adaptive_part).epsilon(1e-12));
}

TEST_CASE("adam bias correction makes the first step a full learning-rate move") {
  AdamParams p;
  AdamState st(1);
  Vec params = {0.0};
  adam_step(st, params, {1.0}, p);
  CHECK(params[0] == doctest::Approx(-p.lr).epsilon(1e-6));

  AdamState st2(1);
  Vec params2 = {0.0};
  adam_step(st2, params2, {-0.01}, p);
  CHECK(params2[0] == doctest::Approx(p.lr).epsilon(1e-4));
}

TEST_CASE("uncorrected adam keeps the raw moment scale") {
  AdamParams p;
  p.bias_correction = false;
  p.epsilon = 0.0;
  AdamState st(1);
  Vec params = {0.0};
  adam_step(st, params, {1.0}, p);
  double expect = -p.lr * 0.1 / std::sqrt(0.001);
  CHECK(params[0] == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("sgd momentum accumulates the classic buffer") {
  SgdMomentumParams p;
  SgdMomentumState st(1);
  Vec params = {0.0};
  sgd_momentum_step(st, params, {1.0}, p);
  CHECK(st.buf[0] == 1.0);
  CHECK(params[0] == doctest::Approx(-0.01).epsilon(1e-15));
  sgd_momentum_step(st, params, {1.0}, p);
  CHECK(st.buf[0] == doctest::Approx(1.9).epsilon(1e-15));
  CHECK(params[0] == doctest::Approx(-0.029).epsilon(1e-12));
}

TEST_CASE("state memory accounting per optimizer") {
  const std::size_t n = 1000;
  auto check = [n](const OptimizerKind& kind, std::size_t buffers) {
    auto report = state_memory_report(kind, n);
    CHECK(report.buffers_per_param == buffers);
    CHECK(report.total_scalars == buffers * n);
    auto opt = make_optimizer(kind, n);
    CHECK(opt->state_scalar_count() == buffers * n);
  };
  check(SgdMomentum{}, 1);
  check(Adam{}, 2);
  check(AdamW{}, 2);
  check(Fame{}, 6);
  check(PartialFame{}, 4);
  KemaFameParams kp;
  kp.order = 5;
  kp.m_betas = {0.9, 0.3, 0.5, 0.5, 0.5};
  kp.v_betas = {0.999, 0.8, 0.8, 0.8, 0.8};
  check(KemaFame{kp}, 10);
}

TEST_CASE("kind names are stable") {
  CHECK(kind_name(SgdMomentum{}) == "sgd_momentum");
  CHECK(kind_name(Adam{}) == "adam");
  CHECK(kind_name(AdamW{}) == "adamw");
  CHECK(kind_name(Fame{}) == "fame");
  CHECK(kind_name(PartialFame{}) == "partial_fame");
  CHECK(kind_name(KemaFame{}) == "kema_fame");
  CHECK(make_optimizer(Fame{}, 4)->name() == "fame");
}

TEST_CASE("type-erased stepper matches the free function") {
  FameHyperParams hp;
  auto opt = make_optimizer(Fame{hp}, 3);
  FameState st(3);
  Vec pa = {1.0, 2.0, 3.0}, pb = {1.0, 2.0, 3.0};
  fame::Rng rng(91);
  for (int t = 0; t < 50; ++t) {
    Vec g = random_grads(3, rng);
    opt->step(pa, g);
    fame_step(st, pb, g, hp);
    REQUIRE(pa == pb);
  }
}

TEST_CASE("hyper-parameter validation rejects bad values") {
  FameHyperParams hp;
  hp.alpha = 0.0;
  CHECK_THROWS_AS(validate(hp), std::invalid_argument);
  hp = {};
  hp.beta2 = 1.5;
  CHECK_THROWS_AS(validate(hp), std::invalid_argument);
  hp = {};
  hp.beta3 = -0.1;
  CHECK_THROWS_AS(validate(hp), std::invalid_argument);
  hp = {};
  hp.epsilon = -1e-8;
  CHECK_THROWS_AS(validate(hp), std::invalid_argument);
  hp = {};
  hp.weight_decay = -0.01;
  CHECK_THROWS_AS(validate(hp), std::invalid_argument);
  hp = {};
  hp.epsilon = 0.0;
  CHECK_NOTHROW(validate(hp));

  AdamParams ap;
  ap.lr = -1.0;
  CHECK_THROWS_AS(validate(ap), std::invalid_argument);

  SgdMomentumParams sp;
  sp.momentum = 1.2;
  CHECK_THROWS_AS(validate(sp), std::invalid_argument);

  KemaFameParams kp;
  kp.order = 0;
  CHECK_THROWS_AS(validate(kp), std::invalid_argument);
  kp.order = 17;
  CHECK_THROWS_AS(validate(kp), std::invalid_argument);
  kp.order = 2;
  kp.m_betas = {0.9};
  kp.v_betas = {0.999, 0.8};
  CHECK_THROWS_AS(validate(kp), std::invalid_argument);
  kp.m_betas = {0.9, 0.5};
  CHECK_NOTHROW(validate(kp));
  CHECK_THROWS_AS(make_optimizer(KemaFame{KemaFameParams{}}, 2),
                  std::invalid_argument);  // default betas are empty
}

TEST_CASE("failed steps leave parameters and state untouched") {
  FameHyperParams hp;
  FameState st(2);
  Vec params = {1.0, 2.0};
  fame_step(st, params, {0.1, 0.2}, hp);
  Vec params_snapshot = params;
  Vec m_snapshot = st.m, v_snapshot = st.v;

  CHECK_THROWS_AS(fame_step(st, params, {0.1}, hp), std::invalid_argument);
  CHECK_THROWS_AS(
      fame_step(st, params, {0.1, std::numeric_limits<double>::quiet_NaN()}, hp),
      std::invalid_argument);
  CHECK_THROWS_AS(
      fame_step(st, params, {0.1, std::numeric_limits<double>::infinity()}, hp),
      std::invalid_argument);
  CHECK(params == params_snapshot);
  CHECK(st.m == m_snapshot);
  CHECK(st.v == v_snapshot);
  CHECK(st.step_count == 1);

  KemaFameParams kp;
  kp.order = 2;
  kp.m_betas = {0.9, 0.3};
  kp.v_betas = {0.999, 0.8};
  KemaFameState ks(3, 2);
  Vec p2 = {0.0, 0.0};
  CHECK_THROWS_AS(kema_fame_step(ks, p2, {0.1, 0.2}, kp),
                  std::invalid_argument);  // state order mismatch
}

TEST_CASE("constant gradient drives every optimizer downhill") {
  std::vector<OptimizerKind> kinds = {SgdMomentum{}, Adam{}, AdamW{}, Fame{},
                                      PartialFame{}};
  KemaFameParams kp;
  kp.order = 3;
  kp.m_betas = {0.9, 0.3, 0.5};
  kp.v_betas = {0.999, 0.8, 0.8};
  kinds.push_back(KemaFame{kp});

  for (const auto& kind : kinds) {
    auto opt = make_optimizer(kind, 1);
    Vec params = {0.0};
    Vec g = {1.0};
    for (int t = 0; t < 200; ++t) opt->step(params, g);
    INFO("optimizer ", kind_name(kind));
    CHECK(params[0] < -1e-4);
  }
}
