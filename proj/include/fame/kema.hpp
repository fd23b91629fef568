#pragma once

#include <cstdint>
#include <vector>

namespace fame::kema {

// Orders above this would still fit in 64-bit coefficients, but the
// alternating sums lose float precision; capped and documented.
inline constexpr int kMaxOrder = 16;

// Exponential moving average with zero initialization and no bias
// correction: value <- beta * value + (1 - beta) * x.
class Ema {
 public:
  explicit Ema(double beta);

  // Returns the updated value. Non-finite samples are rejected and leave
  // the state untouched.
  double step(double x);

  double value() const { return value_; }
  double beta() const { return beta_; }
  bool initialized() const { return initialized_; }

 private:
  double beta_;
  double value_ = 0.0;
  bool initialized_ = false;
};

// Elementwise EMA over a fixed-size vector signal, one shared beta.
class VecEma {
 public:
  VecEma(double beta, std::size_t size);
  const std::vector<double>& step(const std::vector<double>& x);
  const std::vector<double>& values() const { return values_; }
  double beta() const { return beta_; }

 private:
  double beta_;
  std::vector<double> values_;
};

// Signed integer coefficients b_{k,j} = (-1)^(j-1) * C(k, j) of the k-th
// order lag-corrected average over the EMA chain, j = 1..k. They sum to 1.
std::vector<std::int64_t> kema_coefficients(int order);

// Coefficients a_{k,j} = (-1)^(j-1) * C(k-1, j-1) of the k-th difference
// term over the EMA chain, j = 1..k.
std::vector<std::int64_t> delta_coefficients(int order);

// k-th order lag-corrected average: a chain of k EMA stages (stage j
// re-smooths stage j-1's output) combined with kema_coefficients. Order 1
// is a plain EMA, order 3 the classic triple-EMA form.
class Kema {
 public:
  explicit Kema(std::vector<double> betas);
  static Kema with_uniform_beta(int order, double beta);

  double step(double x);

  double value() const { return value_; }
  int order() const { return static_cast<int>(stages_.size()); }
  const std::vector<Ema>& stages() const { return stages_; }
  const std::vector<std::int64_t>& coefficients() const { return coeffs_int_; }

 private:
  std::vector<Ema> stages_;
  std::vector<std::int64_t> coeffs_int_;
  std::vector<double> coeffs_;
  double value_ = 0.0;
};

// Elementwise Kema over a fixed-size vector signal, one shared beta per stage.
class VecKema {
 public:
  VecKema(std::vector<double> betas, std::size_t size);
  const std::vector<double>& step(const std::vector<double>& x);
  const std::vector<double>& values() const { return values_; }
  int order() const { return static_cast<int>(stages_.size()); }

 private:
  std::vector<VecEma> stages_;
  std::vector<double> coeffs_;
  std::vector<double> values_;
};

// Applies the EMA recursion over a whole sequence, returning every
// intermediate value.
std::vector<double> ema_sequence(const std::vector<double>& xs, double beta);

// Whole-sequence reference implementation built from the defining
// recursion rather than the binomial closed form: depth-j chain outputs are
// produced by literally re-smoothing the previous depth's full sequence,
// and the combination weights come from the difference recursion
//   d_1 = smoothed input,  d_k = d_{k-1} - EMA(d_{k-1}),
//   total_k = total_{k-1} + d_k,
// where smoothing a depth-j term deepens it to depth j+1.
std::vector<double> kema_recursive_oracle(const std::vector<double>& betas,
                                          const std::vector<double>& xs,
                                          int order);

}  // namespace fame::kema
