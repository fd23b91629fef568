#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fame/optim.hpp"

namespace fame::nn {

using Vec = std::vector<double>;

enum class Activation { identity, relu, tanh };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation act);

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return data.size(); }
};

struct Layer {
  Matrix weights;  // out_dim x in_dim
  Vec biases;      // out_dim
  Activation activation = Activation::identity;
};

struct Batch {
  std::vector<Vec> inputs;
  std::vector<int> labels;
};

struct GradReport {
  std::vector<Matrix> weight_grads;
  std::vector<Vec> bias_grads;
  double flat_variance = 0.0;  // population variance over every component
  int epoch = 0;

  Vec flatten() const;
  const std::vector<double>& last_layer_weight_grads() const {
    return weight_grads.back().data;
  }
};

// Fully connected feed-forward classifier; forward yields raw logits that
// feed a max-subtracted softmax cross-entropy.
class Network {
 public:
  explicit Network(std::vector<Layer> layers);

  // dims = {in, hidden..., out}; hidden layers get hidden_act, the final
  // layer stays linear. Weights are fan-in scaled uniform, biases zero.
  static Network random(const std::vector<int>& dims, Activation hidden_act,
                        std::uint64_t seed);

  int input_dim() const;
  int output_dim() const;
  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t param_count() const;

  Vec get_params() const;
  void set_params(const Vec& flat);

  Vec forward(const Vec& x) const;  // logits
  double loss(const Batch& batch) const;
  std::pair<double, GradReport> forward_backward(const Batch& batch) const;

 private:
  std::vector<Layer> layers_;
};

Vec softmax(const Vec& logits);

// Max relative error between backprop and central finite differences over
// every parameter, with denominator max(|a|, |b|, 1e-8).
double check_gradients(const Network& net, const Batch& batch, double h);

// Smallest |pre-activation| over the relu layers; +inf if there are none.
// Useful to keep finite-difference probes away from the kink.
double min_abs_relu_preactivation(const Network& net, const Batch& batch);

struct Dataset {
  std::vector<Vec> inputs;
  std::vector<int> labels;
  int num_classes = 2;
  std::string generator;
  std::uint64_t seed = 0;
};

struct DatasetPair {
  Dataset train;
  Dataset test;
};

// generator is one of "two_moons", "spirals", "gaussian_blobs"; train and
// test are drawn from one seeded stream so a pair is one reproducible unit.
DatasetPair make_dataset(const std::string& generator, int train_size,
                         int test_size, double noise, std::uint64_t seed,
                         int num_classes = 2);

double accuracy(const Network& net, const Dataset& data);

struct TrainOptions {
  int epochs = 1;
  int batch_size = 32;
  std::uint64_t seed = 0;  // drives per-epoch shuffling only
};

struct EpochRow {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double test_acc = 0.0;
  double grad_var_last_layer = 0.0;  // epoch mean of per-batch variances
};

struct TrainResult {
  std::vector<EpochRow> rows;
  bool diverged = false;
};

// Minibatch training of net in place. A non-finite batch loss truncates
// the schedule and flags the result; rows cover completed epochs only.
TrainResult train(Network& net, const DatasetPair& data,
                  const optim::OptimizerKind& kind, const TrainOptions& opts);

}  // namespace fame::nn
