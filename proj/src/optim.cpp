#include "fame/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fame/kema.hpp"

namespace fame::optim {

namespace {

void check_range01(double b, const char* name) {
  if (!(b >= 0.0 && b <= 1.0)) {
    throw std::invalid_argument(std::string(name) + " must lie in [0, 1], got " +
                                std::to_string(b));
  }
}

void check_positive(double x, const char* name) {
  if (!(x > 0.0)) {
    throw std::invalid_argument(std::string(name) + " must be positive, got " +
                                std::to_string(x));
  }
}

void check_nonnegative(double x, const char* name) {
  if (!(x >= 0.0)) {
    throw std::invalid_argument(std::string(name) +
                                " must be non-negative, got " +
                                std::to_string(x));
  }
}

void check_shapes(std::size_t state_n, const Vec& params, const Vec& grads,
                  const char* who) {
  if (params.size() != state_n || grads.size() != state_n) {
    throw std::invalid_argument(
        std::string(who) + ": shape mismatch (state " + std::to_string(state_n) +
        ", params " + std::to_string(params.size()) + ", grads " +
        std::to_string(grads.size()) + ")");
  }
}

// Rejecting before any state is touched keeps a failed step side-effect free.
void check_grads_finite(const Vec& grads, const char* who) {
  for (double g : grads) {
    if (!std::isfinite(g)) {
      throw std::invalid_argument(std::string(who) +
                                  ": non-finite gradient rejected");
    }
  }
}

// Shared tail of every triple-chain update; the raw second-moment estimate
// can undershoot below zero, so it is clamped before epsilon is added
// inside the square root.
inline void adaptive_update(double& theta, double numerator, double raw_denom,
                            double alpha, double epsilon) {
  double den = raw_denom < 0.0 ? 0.0 : raw_denom;
  theta -= alpha * numerator / std::sqrt(den + epsilon);
}

}  // namespace

void validate(const FameHyperParams& hp) {
  check_positive(hp.alpha, "alpha");
  check_range01(hp.beta1, "beta1");
  check_range01(hp.beta2, "beta2");
  check_range01(hp.beta3, "beta3");
  check_range01(hp.beta4, "beta4");
  check_range01(hp.beta5, "beta5");
  check_nonnegative(hp.epsilon, "epsilon");
  check_nonnegative(hp.weight_decay, "weight_decay");
}

void fame_step(FameState& st, Vec& params, const Vec& grads,
               const FameHyperParams& hp) {
  validate(hp);
  check_shapes(st.size(), params, grads, "fame");
  check_grads_finite(grads, "fame");
  const double b1 = hp.beta1, b2 = hp.beta2, b3 = hp.beta3, b4 = hp.beta4,
               b5 = hp.beta5;
  const bool coupled = hp.weight_decay != 0.0 && hp.decay_mode == DecayMode::coupled;
  const bool decoupled =
      hp.weight_decay != 0.0 && hp.decay_mode == DecayMode::decoupled;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    if (coupled) g += hp.weight_decay * params[i];
    st.m[i] = b1 * st.m[i] + (1.0 - b1) * g;
    st.v[i] = b2 * st.v[i] + (1.0 - b2) * (g * g);
    st.dm[i] = b3 * st.dm[i] + (1.0 - b3) * st.m[i];
    st.dv[i] = b5 * st.dv[i] + (1.0 - b5) * st.v[i];
    st.tm[i] = b4 * st.tm[i] + (1.0 - b4) * st.dm[i];
    st.tv[i] = b5 * st.tv[i] + (1.0 - b5) * st.dv[i];
    double m_fame = 3.0 * st.m[i] - 3.0 * st.dm[i] + st.tm[i];
    double v_fame = 3.0 * st.v[i] - 3.0 * st.dv[i] + st.tv[i];
    if (decoupled) params[i] -= hp.alpha * hp.weight_decay * params[i];
    adaptive_update(params[i], m_fame, v_fame, hp.alpha, hp.epsilon);
  }
  ++st.step_count;
}

void partial_fame_step(PartialFameState& st, Vec& params, const Vec& grads,
                       const FameHyperParams& hp) {
  validate(hp);
  check_shapes(st.size(), params, grads, "partial_fame");
  check_grads_finite(grads, "partial_fame");
  const double b1 = hp.beta1, b2 = hp.beta2, b3 = hp.beta3, b4 = hp.beta4;
  const bool coupled = hp.weight_decay != 0.0 && hp.decay_mode == DecayMode::coupled;
  const bool decoupled =
      hp.weight_decay != 0.0 && hp.decay_mode == DecayMode::decoupled;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    if (coupled) g += hp.weight_decay * params[i];
    st.m[i] = b1 * st.m[i] + (1.0 - b1) * g;
    st.v[i] = b2 * st.v[i] + (1.0 - b2) * (g * g);
    st.dm[i] = b3 * st.dm[i] + (1.0 - b3) * st.m[i];
    st.tm[i] = b4 * st.tm[i] + (1.0 - b4) * st.dm[i];
    double m_fame = 3.0 * st.m[i] - 3.0 * st.dm[i] + st.tm[i];
    if (decoupled) params[i] -= hp.alpha * hp.weight_decay * params[i];
    adaptive_update(params[i], m_fame, st.v[i], hp.alpha, hp.epsilon);
  }
  ++st.step_count;
}

void validate(const KemaFameParams& p) {
  if (p.order < 1 || p.order > kema::kMaxOrder) {
    throw std::invalid_argument("kema_fame: order must lie in [1, " +
                                std::to_string(kema::kMaxOrder) + "], got " +
                                std::to_string(p.order));
  }
  if (static_cast<int>(p.m_betas.size()) != p.order ||
      static_cast<int>(p.v_betas.size()) != p.order) {
    throw std::invalid_argument(
        "kema_fame: m_betas and v_betas must each hold exactly " +
        std::to_string(p.order) + " values");
  }
  for (double b : p.m_betas) check_range01(b, "m_betas");
  for (double b : p.v_betas) check_range01(b, "v_betas");
  check_positive(p.alpha, "alpha");
  check_nonnegative(p.epsilon, "epsilon");
  check_nonnegative(p.weight_decay, "weight_decay");
}

KemaFameState::KemaFameState(int order, std::size_t n) {
  if (order < 1 || order > kema::kMaxOrder) {
    throw std::invalid_argument("kema_fame: order must lie in [1, " +
                                std::to_string(kema::kMaxOrder) + "], got " +
                                std::to_string(order));
  }
  m_stages.assign(static_cast<std::size_t>(order), Vec(n, 0.0));
  v_stages.assign(static_cast<std::size_t>(order), Vec(n, 0.0));
}

void kema_fame_step(KemaFameState& st, Vec& params, const Vec& grads,
                    const KemaFameParams& p) {
  validate(p);
  if (static_cast<int>(st.m_stages.size()) != p.order) {
    throw std::invalid_argument("kema_fame: state order " +
                                std::to_string(st.m_stages.size()) +
                                " does not match params order " +
                                std::to_string(p.order));
  }
  check_shapes(st.size(), params, grads, "kema_fame");
  check_grads_finite(grads, "kema_fame");
  auto ints = kema::kema_coefficients(p.order);
  std::vector<double> coeff(ints.begin(), ints.end());
  const std::size_t k = static_cast<std::size_t>(p.order);
  const bool coupled = p.weight_decay != 0.0 && p.decay_mode == DecayMode::coupled;
  const bool decoupled =
      p.weight_decay != 0.0 && p.decay_mode == DecayMode::decoupled;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    if (coupled) g += p.weight_decay * params[i];
    double in = g;
    for (std::size_t s = 0; s < k; ++s) {
      st.m_stages[s][i] = p.m_betas[s] * st.m_stages[s][i] + (1.0 - p.m_betas[s]) * in;
      in = st.m_stages[s][i];
    }
    in = g * g;
    for (std::size_t s = 0; s < k; ++s) {
      st.v_stages[s][i] = p.v_betas[s] * st.v_stages[s][i] + (1.0 - p.v_betas[s]) * in;
      in = st.v_stages[s][i];
    }
    double num = 0.0;
    for (std::size_t j = 0; j < k; ++j) num += coeff[j] * st.m_stages[j][i];
    double den = 0.0;
    for (std::size_t j = 0; j < k; ++j) den += coeff[j] * st.v_stages[j][i];
    if (decoupled) params[i] -= p.alpha * p.weight_decay * params[i];
    adaptive_update(params[i], num, den, p.alpha, p.epsilon);
  }
  ++st.step_count;
}

void validate(const AdamParams& p) {
  check_nonnegative(p.lr, "lr");
  check_range01(p.beta1, "beta1");
  check_range01(p.beta2, "beta2");
  check_nonnegative(p.epsilon, "epsilon");
  check_nonnegative(p.weight_decay, "weight_decay");
}

void adam_step(AdamState& st, Vec& params, const Vec& grads,
               const AdamParams& p) {
  validate(p);
  check_shapes(st.size(), params, grads, "adam");
  check_grads_finite(grads, "adam");
  ++st.step_count;
  const double t = static_cast<double>(st.step_count);
  const double c1 = 1.0 - std::pow(p.beta1, t);
  const double c2 = 1.0 - std::pow(p.beta2, t);
  const bool coupled = p.weight_decay != 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    if (coupled) g += p.weight_decay * params[i];
    st.m[i] = p.beta1 * st.m[i] + (1.0 - p.beta1) * g;
    st.v[i] = p.beta2 * st.v[i] + (1.0 - p.beta2) * (g * g);
    double mh = p.bias_correction ? st.m[i] / c1 : st.m[i];
    double vh = p.bias_correction ? st.v[i] / c2 : st.v[i];
    params[i] -= p.lr * mh / (std::sqrt(vh) + p.epsilon);
  }
}

void validate(const AdamWParams& p) {
  check_nonnegative(p.lr, "lr");
  check_range01(p.beta1, "beta1");
  check_range01(p.beta2, "beta2");
  check_nonnegative(p.epsilon, "epsilon");
  check_nonnegative(p.weight_decay, "weight_decay");
}

void adamw_step(AdamState& st, Vec& params, const Vec& grads,
                const AdamWParams& p) {
  validate(p);
  check_shapes(st.size(), params, grads, "adamw");
  check_grads_finite(grads, "adamw");
  ++st.step_count;
  const double t = static_cast<double>(st.step_count);
  const double c1 = 1.0 - std::pow(p.beta1, t);
  const double c2 = 1.0 - std::pow(p.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    st.m[i] = p.beta1 * st.m[i] + (1.0 - p.beta1) * g;
    st.v[i] = p.beta2 * st.v[i] + (1.0 - p.beta2) * (g * g);
    params[i] -= p.lr * p.weight_decay * params[i];
    params[i] -= p.lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + p.epsilon);
  }
}

void validate(const SgdMomentumParams& p) {
  check_nonnegative(p.lr, "lr");
  check_range01(p.momentum, "momentum");
  check_nonnegative(p.weight_decay, "weight_decay");
}

void sgd_momentum_step(SgdMomentumState& st, Vec& params, const Vec& grads,
                       const SgdMomentumParams& p) {
  validate(p);
  check_shapes(st.size(), params, grads, "sgd_momentum");
  check_grads_finite(grads, "sgd_momentum");
  const bool coupled = p.weight_decay != 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    if (coupled) g += p.weight_decay * params[i];
    st.buf[i] = p.momentum * st.buf[i] + g;
    params[i] -= p.lr * st.buf[i];
  }
  ++st.step_count;
}

void validate(const OptimizerKind& kind) {
  std::visit([](const auto& k) { validate(k.params); }, kind);
}

std::string kind_name(const OptimizerKind& kind) {
  struct Namer {
    std::string operator()(const SgdMomentum&) const { return "sgd_momentum"; }
    std::string operator()(const Adam&) const { return "adam"; }
    std::string operator()(const AdamW&) const { return "adamw"; }
    std::string operator()(const Fame&) const { return "fame"; }
    std::string operator()(const PartialFame&) const { return "partial_fame"; }
    std::string operator()(const KemaFame&) const { return "kema_fame"; }
  };
  return std::visit(Namer{}, kind);
}

MemoryReport state_memory_report(const OptimizerKind& kind,
                                 std::size_t param_count) {
  struct Counter {
    std::size_t operator()(const SgdMomentum&) const { return 1; }
    std::size_t operator()(const Adam&) const { return 2; }
    std::size_t operator()(const AdamW&) const { return 2; }
    std::size_t operator()(const Fame&) const { return 6; }
    std::size_t operator()(const PartialFame&) const { return 4; }
    std::size_t operator()(const KemaFame& k) const {
      return 2 * static_cast<std::size_t>(k.params.order);
    }
  };
  MemoryReport report;
  report.buffers_per_param = std::visit(Counter{}, kind);
  report.total_scalars = report.buffers_per_param * param_count;
  return report;
}

namespace {

template <typename State, typename Params, void (*StepFn)(State&, Vec&, const Vec&, const Params&)>
class BasicOptimizer final : public Optimizer {
 public:
  BasicOptimizer(std::string name, State state, Params params)
      : name_(std::move(name)), state_(std::move(state)), params_(std::move(params)) {}

  void step(Vec& params, const Vec& grads) override {
    StepFn(state_, params, grads, params_);
  }

  std::size_t state_scalar_count() const override {
    return state_.scalar_count();
  }

  std::string name() const override { return name_; }

 private:
  std::string name_;
  State state_;
  Params params_;
};

}  // namespace

std::unique_ptr<Optimizer> make_optimizer(const OptimizerKind& kind,
                                          std::size_t param_count) {
  validate(kind);
  struct Factory {
    std::size_t n;
    std::unique_ptr<Optimizer> operator()(const SgdMomentum& k) const {
      return std::make_unique<BasicOptimizer<SgdMomentumState, SgdMomentumParams,
                                             sgd_momentum_step>>(
          "sgd_momentum", SgdMomentumState(n), k.params);
    }
    std::unique_ptr<Optimizer> operator()(const Adam& k) const {
      return std::make_unique<BasicOptimizer<AdamState, AdamParams, adam_step>>(
          "adam", AdamState(n), k.params);
    }
    std::unique_ptr<Optimizer> operator()(const AdamW& k) const {
      return std::make_unique<BasicOptimizer<AdamState, AdamWParams, adamw_step>>(
          "adamw", AdamState(n), k.params);
    }
    std::unique_ptr<Optimizer> operator()(const Fame& k) const {
      return std::make_unique<BasicOptimizer<FameState, FameHyperParams, fame_step>>(
          "fame", FameState(n), k.params);
    }
    std::unique_ptr<Optimizer> operator()(const PartialFame& k) const {
      return std::make_unique<BasicOptimizer<PartialFameState, FameHyperParams,
                                             partial_fame_step>>(
          "partial_fame", PartialFameState(n), k.params);
    }
    std::unique_ptr<Optimizer> operator()(const KemaFame& k) const {
      return std::make_unique<BasicOptimizer<KemaFameState, KemaFameParams,
                                             kema_fame_step>>(
          "kema_fame", KemaFameState(k.params.order, n), k.params);
    }
  };
  return std::visit(Factory{param_count}, kind);
}

}  // namespace fame::optim
