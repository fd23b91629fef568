#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace fame::optim {

using Vec = std::vector<double>;

enum class DecayMode { coupled, decoupled };

// Hyper-parameters of the triple-chain adaptive estimator. beta1/beta2
// smooth the raw first and second moments, beta3/beta4 the deeper stages of
// the first-moment chain, and beta5 both deeper stages of the second-moment
// chain. All state is zero-initialized with no bias correction.
struct FameHyperParams {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double beta3 = 0.3;
  double beta4 = 0.5;
  double beta5 = 0.8;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  DecayMode decay_mode = DecayMode::coupled;
};

void validate(const FameHyperParams& hp);

struct FameState {
  Vec m, v, dm, dv, tm, tv;
  long step_count = 0;
  explicit FameState(std::size_t n)
      : m(n, 0.0), v(n, 0.0), dm(n, 0.0), dv(n, 0.0), tm(n, 0.0), tv(n, 0.0) {}
  std::size_t size() const { return m.size(); }
  std::size_t scalar_count() const { return 6 * m.size(); }
};

void fame_step(FameState& st, Vec& params, const Vec& grads,
               const FameHyperParams& hp);

// Ablation: triple-chain first moment, plain EMA second moment.
struct PartialFameState {
  Vec m, dm, tm, v;
  long step_count = 0;
  explicit PartialFameState(std::size_t n)
      : m(n, 0.0), dm(n, 0.0), tm(n, 0.0), v(n, 0.0) {}
  std::size_t size() const { return m.size(); }
  std::size_t scalar_count() const { return 4 * m.size(); }
};

void partial_fame_step(PartialFameState& st, Vec& params, const Vec& grads,
                       const FameHyperParams& hp);

// Generalization to chains of arbitrary order k in [1, 16]; k = 3 with
// betas (beta1, beta3, beta4 | beta2, beta5, beta5) reproduces fame_step
// bit for bit, k = 1 is Adam without bias correction up to the epsilon
// placement.
struct KemaFameParams {
  int order = 3;
  std::vector<double> m_betas;
  std::vector<double> v_betas;
  double alpha = 1e-3;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  DecayMode decay_mode = DecayMode::coupled;
};

void validate(const KemaFameParams& p);

struct KemaFameState {
  std::vector<Vec> m_stages, v_stages;
  long step_count = 0;
  KemaFameState(int order, std::size_t n);
  std::size_t size() const { return m_stages.empty() ? 0 : m_stages[0].size(); }
  std::size_t scalar_count() const {
    return (m_stages.size() + v_stages.size()) * size();
  }
};

void kema_fame_step(KemaFameState& st, Vec& params, const Vec& grads,
                    const KemaFameParams& p);

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // coupled L2
  bool bias_correction = true;
};

void validate(const AdamParams& p);

struct AdamWParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;  // decoupled
};

void validate(const AdamWParams& p);

struct AdamState {
  Vec m, v;
  long step_count = 0;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
  std::size_t size() const { return m.size(); }
  std::size_t scalar_count() const { return 2 * m.size(); }
};

void adam_step(AdamState& st, Vec& params, const Vec& grads,
               const AdamParams& p);
void adamw_step(AdamState& st, Vec& params, const Vec& grads,
                const AdamWParams& p);

struct SgdMomentumParams {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;  // coupled L2
};

void validate(const SgdMomentumParams& p);

struct SgdMomentumState {
  Vec buf;
  long step_count = 0;
  explicit SgdMomentumState(std::size_t n) : buf(n, 0.0) {}
  std::size_t size() const { return buf.size(); }
  std::size_t scalar_count() const { return buf.size(); }
};

void sgd_momentum_step(SgdMomentumState& st, Vec& params, const Vec& grads,
                       const SgdMomentumParams& p);

// Tagged optimizer configurations, the unit the harness works in.
struct SgdMomentum {
  SgdMomentumParams params;
};
struct Adam {
  AdamParams params;
};
struct AdamW {
  AdamWParams params;
};
struct Fame {
  FameHyperParams params;
};
struct PartialFame {
  FameHyperParams params;
};
struct KemaFame {
  KemaFameParams params;
};

using OptimizerKind =
    std::variant<SgdMomentum, Adam, AdamW, Fame, PartialFame, KemaFame>;

void validate(const OptimizerKind& kind);
std::string kind_name(const OptimizerKind& kind);

struct MemoryReport {
  std::size_t buffers_per_param = 0;
  std::size_t total_scalars = 0;
};

MemoryReport state_memory_report(const OptimizerKind& kind,
                                 std::size_t param_count);

// Type-erased stepper over a flat parameter vector.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(Vec& params, const Vec& grads) = 0;
  virtual std::size_t state_scalar_count() const = 0;
  virtual std::string name() const = 0;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerKind& kind,
                                          std::size_t param_count);

}  // namespace fame::optim
