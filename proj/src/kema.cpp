#include "fame/kema.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace fame::kema {

namespace {

void check_sample(double x) {
  if (!std::isfinite(x)) {
    throw std::invalid_argument("ema: non-finite input sample");
  }
}

void check_beta(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("ema: beta must lie in [0, 1], got " +
                                std::to_string(beta));
  }
}

void check_order(int order) {
  if (order < 1 || order > kMaxOrder) {
    throw std::invalid_argument("kema: order must lie in [1, " +
                                std::to_string(kMaxOrder) + "], got " +
                                std::to_string(order));
  }
}

// Exact for the small arguments used here (order <= 16).
std::int64_t binomial(int n, int r) {
  if (r < 0 || r > n) return 0;
  if (r > n - r) r = n - r;
  std::int64_t out = 1;
  for (int i = 1; i <= r; ++i) {
    out = out * (n - r + i) / i;
  }
  return out;
}

}  // namespace

Ema::Ema(double beta) : beta_(beta) { check_beta(beta); }

double Ema::step(double x) {
  check_sample(x);
  value_ = beta_ * value_ + (1.0 - beta_) * x;
  initialized_ = true;
  return value_;
}

VecEma::VecEma(double beta, std::size_t size) : beta_(beta), values_(size, 0.0) {
  check_beta(beta);
}

const std::vector<double>& VecEma::step(const std::vector<double>& x) {
  if (x.size() != values_.size()) {
    throw std::invalid_argument("ema: input size " + std::to_string(x.size()) +
                                " does not match state size " +
                                std::to_string(values_.size()));
  }
  for (double xi : x) check_sample(xi);
  for (std::size_t i = 0; i < x.size(); ++i) {
    values_[i] = beta_ * values_[i] + (1.0 - beta_) * x[i];
  }
  return values_;
}

std::vector<std::int64_t> kema_coefficients(int order) {
  check_order(order);
  std::vector<std::int64_t> out(order);
  for (int j = 1; j <= order; ++j) {
    std::int64_t sign = (j % 2 == 1) ? 1 : -1;
    out[j - 1] = sign * binomial(order, j);
  }
  return out;
}

std::vector<std::int64_t> delta_coefficients(int order) {
  check_order(order);
  std::vector<std::int64_t> out(order);
  for (int j = 1; j <= order; ++j) {
    std::int64_t sign = (j % 2 == 1) ? 1 : -1;
    out[j - 1] = sign * binomial(order - 1, j - 1);
  }
  return out;
}

Kema::Kema(std::vector<double> betas) {
  check_order(static_cast<int>(betas.size()));
  stages_.reserve(betas.size());
  for (double b : betas) stages_.emplace_back(b);
  coeffs_int_ = kema_coefficients(static_cast<int>(betas.size()));
  coeffs_.assign(coeffs_int_.begin(), coeffs_int_.end());
}

Kema Kema::with_uniform_beta(int order, double beta) {
  check_order(order);
  return Kema(std::vector<double>(static_cast<std::size_t>(order), beta));
}

double Kema::step(double x) {
  check_sample(x);
  double in = x;
  for (auto& stage : stages_) in = stage.step(in);
  double acc = 0.0;
  for (std::size_t j = 0; j < stages_.size(); ++j) {
    acc += coeffs_[j] * stages_[j].value();
  }
  value_ = acc;
  return value_;
}

VecKema::VecKema(std::vector<double> betas, std::size_t size) {
  check_order(static_cast<int>(betas.size()));
  stages_.reserve(betas.size());
  for (double b : betas) stages_.emplace_back(b, size);
  auto ints = kema_coefficients(static_cast<int>(betas.size()));
  coeffs_.assign(ints.begin(), ints.end());
  values_.assign(size, 0.0);
}

const std::vector<double>& VecKema::step(const std::vector<double>& x) {
  const std::vector<double>* in = &x;
  for (auto& stage : stages_) in = &stage.step(*in);
  for (std::size_t i = 0; i < values_.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < stages_.size(); ++j) {
      acc += coeffs_[j] * stages_[j].values()[i];
    }
    values_[i] = acc;
  }
  return values_;
}

std::vector<double> ema_sequence(const std::vector<double>& xs, double beta) {
  check_beta(beta);
  std::vector<double> out;
  out.reserve(xs.size());
  double value = 0.0;
  for (double x : xs) {
    check_sample(x);
    value = beta * value + (1.0 - beta) * x;
    out.push_back(value);
  }
  return out;
}

std::vector<double> kema_recursive_oracle(const std::vector<double>& betas,
                                          const std::vector<double>& xs,
                                          int order) {
  check_order(order);
  if (static_cast<int>(betas.size()) != order) {
    throw std::invalid_argument("kema: expected " + std::to_string(order) +
                                " betas, got " + std::to_string(betas.size()));
  }

  std::vector<std::vector<double>> depth(static_cast<std::size_t>(order) + 1);
  depth[0] = xs;
  for (int j = 1; j <= order; ++j) {
    depth[j] = ema_sequence(depth[j - 1], betas[j - 1]);
  }

  // Difference recursion over depths; smoothing depth j yields depth j+1.
  std::vector<std::int64_t> diff = {1};
  std::vector<std::int64_t> total = {1};
  for (int k = 2; k <= order; ++k) {
    std::vector<std::int64_t> next(static_cast<std::size_t>(k), 0);
    for (std::size_t j = 0; j < diff.size(); ++j) {
      next[j] += diff[j];
      next[j + 1] -= diff[j];
    }
    diff = std::move(next);
    total.resize(static_cast<std::size_t>(k), 0);
    for (int j = 0; j < k; ++j) total[j] += diff[j];
  }

  std::vector<double> out(xs.size(), 0.0);
  for (std::size_t t = 0; t < xs.size(); ++t) {
    double acc = 0.0;
    for (int j = 1; j <= order; ++j) {
      acc += static_cast<double>(total[j - 1]) * depth[j][t];
    }
    out[t] = acc;
  }
  return out;
}

}  // namespace fame::kema
