#include "fame/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fame/rng.hpp"
#include "fame/stats.hpp"

namespace fame::nn {

namespace {

double apply_activation(Activation act, double z) {
  switch (act) {
    case Activation::identity:
      return z;
    case Activation::relu:
      return z > 0.0 ? z : 0.0;
    case Activation::tanh:
      return std::tanh(z);
  }
  return z;
}

double activation_derivative(Activation act, double z) {
  switch (act) {
    case Activation::identity:
      return 1.0;
    case Activation::relu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      double t = std::tanh(z);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

void check_batch(const Network& net, const Batch& batch) {
  if (batch.inputs.empty()) {
    throw std::invalid_argument("nn: empty batch");
  }
  if (batch.inputs.size() != batch.labels.size()) {
    throw std::invalid_argument("nn: batch inputs and labels differ in length");
  }
  for (const auto& x : batch.inputs) {
    if (static_cast<int>(x.size()) != net.input_dim()) {
      throw std::invalid_argument("nn: input dimension mismatch");
    }
  }
  for (int y : batch.labels) {
    if (y < 0 || y >= net.output_dim()) {
      throw std::invalid_argument("nn: label out of range");
    }
  }
}

// loss = logsumexp(z) - z[label], stabilized by subtracting max(z).
double sample_loss(const Vec& logits, int label, Vec* probs_out) {
  double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - zmax);
  double lse = zmax + std::log(sum);
  if (probs_out) {
    probs_out->resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
      (*probs_out)[i] = std::exp(logits[i] - zmax) / sum;
    }
  }
  return lse - logits[static_cast<std::size_t>(label)];
}

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument("nn: unknown activation '" + name + "'");
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::identity:
      return "identity";
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
  }
  return "identity";
}

Vec GradReport::flatten() const {
  Vec flat;
  std::size_t total = 0;
  for (std::size_t l = 0; l < weight_grads.size(); ++l) {
    total += weight_grads[l].size() + bias_grads[l].size();
  }
  flat.reserve(total);
  for (std::size_t l = 0; l < weight_grads.size(); ++l) {
    flat.insert(flat.end(), weight_grads[l].data.begin(), weight_grads[l].data.end());
    flat.insert(flat.end(), bias_grads[l].begin(), bias_grads[l].end());
  }
  return flat;
}

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) {
    throw std::invalid_argument("nn: network needs at least one layer");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    if (layer.weights.rows <= 0 || layer.weights.cols <= 0) {
      throw std::invalid_argument("nn: layer dimensions must be positive");
    }
    if (static_cast<int>(layer.biases.size()) != layer.weights.rows) {
      throw std::invalid_argument("nn: bias length must match weight rows");
    }
    if (l > 0 && layers_[l - 1].weights.rows != layer.weights.cols) {
      throw std::invalid_argument("nn: consecutive layer shapes do not chain");
    }
  }
}

Network Network::random(const std::vector<int>& dims, Activation hidden_act,
                        std::uint64_t seed) {
  if (dims.size() < 2) {
    throw std::invalid_argument("nn: need input and output dimensions");
  }
  Rng rng(seed);
  std::vector<Layer> layers;
  layers.reserve(dims.size() - 1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    int in = dims[l];
    int out = dims[l + 1];
    if (in <= 0 || out <= 0) {
      throw std::invalid_argument("nn: layer dimensions must be positive");
    }
    Layer layer;
    layer.weights = Matrix(out, in);
    double limit = std::sqrt(6.0 / static_cast<double>(in));
    for (double& w : layer.weights.data) w = rng.uniform(-limit, limit);
    layer.biases.assign(static_cast<std::size_t>(out), 0.0);
    layer.activation =
        (l + 2 == dims.size()) ? Activation::identity : hidden_act;
    layers.push_back(std::move(layer));
  }
  return Network(std::move(layers));
}

int Network::input_dim() const { return layers_.front().weights.cols; }
int Network::output_dim() const { return layers_.back().weights.rows; }

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    n += layer.weights.size() + layer.biases.size();
  }
  return n;
}

Vec Network::get_params() const {
  Vec flat;
  flat.reserve(param_count());
  for (const auto& layer : layers_) {
    flat.insert(flat.end(), layer.weights.data.begin(), layer.weights.data.end());
    flat.insert(flat.end(), layer.biases.begin(), layer.biases.end());
  }
  return flat;
}

void Network::set_params(const Vec& flat) {
  if (flat.size() != param_count()) {
    throw std::invalid_argument("nn: flat parameter size mismatch");
  }
  std::size_t pos = 0;
  for (auto& layer : layers_) {
    std::copy_n(flat.begin() + pos, layer.weights.size(), layer.weights.data.begin());
    pos += layer.weights.size();
    std::copy_n(flat.begin() + pos, layer.biases.size(), layer.biases.begin());
    pos += layer.biases.size();
  }
}

Vec Network::forward(const Vec& x) const {
  if (static_cast<int>(x.size()) != input_dim()) {
    throw std::invalid_argument("nn: input dimension mismatch");
  }
  Vec act = x;
  for (const auto& layer : layers_) {
    Vec next(static_cast<std::size_t>(layer.weights.rows));
    for (int r = 0; r < layer.weights.rows; ++r) {
      double z = layer.biases[static_cast<std::size_t>(r)];
      for (int c = 0; c < layer.weights.cols; ++c) {
        z += layer.weights.at(r, c) * act[static_cast<std::size_t>(c)];
      }
      next[static_cast<std::size_t>(r)] = apply_activation(layer.activation, z);
    }
    act = std::move(next);
  }
  return act;
}

double Network::loss(const Batch& batch) const {
  check_batch(*this, batch);
  double total = 0.0;
  for (std::size_t s = 0; s < batch.inputs.size(); ++s) {
    total += sample_loss(forward(batch.inputs[s]), batch.labels[s], nullptr);
  }
  return total / static_cast<double>(batch.inputs.size());
}

std::pair<double, GradReport> Network::forward_backward(const Batch& batch) const {
  check_batch(*this, batch);
  const std::size_t L = layers_.size();
  GradReport report;
  report.weight_grads.reserve(L);
  report.bias_grads.reserve(L);
  for (const auto& layer : layers_) {
    report.weight_grads.emplace_back(layer.weights.rows, layer.weights.cols);
    report.bias_grads.emplace_back(layer.biases.size(), 0.0);
  }

  double total_loss = 0.0;
  std::vector<Vec> pre(L);        // pre-activations per layer
  std::vector<Vec> activ(L + 1);  // activ[0] is the input
  Vec probs;
  for (std::size_t s = 0; s < batch.inputs.size(); ++s) {
    activ[0] = batch.inputs[s];
    for (std::size_t l = 0; l < L; ++l) {
      const Layer& layer = layers_[l];
      pre[l].assign(static_cast<std::size_t>(layer.weights.rows), 0.0);
      activ[l + 1].assign(static_cast<std::size_t>(layer.weights.rows), 0.0);
      for (int r = 0; r < layer.weights.rows; ++r) {
        double z = layer.biases[static_cast<std::size_t>(r)];
        for (int c = 0; c < layer.weights.cols; ++c) {
          z += layer.weights.at(r, c) * activ[l][static_cast<std::size_t>(c)];
        }
        pre[l][static_cast<std::size_t>(r)] = z;
        activ[l + 1][static_cast<std::size_t>(r)] =
            apply_activation(layer.activation, z);
      }
    }

    total_loss += sample_loss(activ[L], batch.labels[s], &probs);

    // delta holds dLoss/dz for the current layer, starting at the top;
    // the final layer is linear, so the softmax gradient is used directly.
    Vec delta = probs;
    delta[static_cast<std::size_t>(batch.labels[s])] -= 1.0;
    for (std::size_t li = L; li-- > 0;) {
      const Layer& layer = layers_[li];
      if (li + 1 < L || layer.activation != Activation::identity) {
        for (std::size_t r = 0; r < delta.size(); ++r) {
          delta[r] *= activation_derivative(layer.activation, pre[li][r]);
        }
      }
      for (int r = 0; r < layer.weights.rows; ++r) {
        double d = delta[static_cast<std::size_t>(r)];
        for (int c = 0; c < layer.weights.cols; ++c) {
          report.weight_grads[li].at(r, c) += d * activ[li][static_cast<std::size_t>(c)];
        }
        report.bias_grads[li][static_cast<std::size_t>(r)] += d;
      }
      if (li > 0) {
        Vec prev(static_cast<std::size_t>(layer.weights.cols), 0.0);
        for (int c = 0; c < layer.weights.cols; ++c) {
          double acc = 0.0;
          for (int r = 0; r < layer.weights.rows; ++r) {
            acc += layer.weights.at(r, c) * delta[static_cast<std::size_t>(r)];
          }
          prev[static_cast<std::size_t>(c)] = acc;
        }
        delta = std::move(prev);
      }
    }
  }

  const double inv_b = 1.0 / static_cast<double>(batch.inputs.size());
  for (std::size_t l = 0; l < L; ++l) {
    for (double& g : report.weight_grads[l].data) g *= inv_b;
    for (double& g : report.bias_grads[l]) g *= inv_b;
  }
  Vec flat = report.flatten();
  report.flat_variance = stats::population_variance(flat);
  return {total_loss * inv_b, report};
}

Vec softmax(const Vec& logits) {
  if (logits.empty()) {
    throw std::invalid_argument("nn: softmax of empty vector");
  }
  Vec probs;
  sample_loss(logits, 0, &probs);
  return probs;
}

double check_gradients(const Network& net, const Batch& batch, double h) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("nn: finite-difference step must be positive");
  }
  auto [loss0, report] = net.forward_backward(batch);
  (void)loss0;
  Vec analytic = report.flatten();
  Vec params = net.get_params();
  Network probe = net;
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double saved = params[i];
    params[i] = saved + h;
    probe.set_params(params);
    double up = probe.loss(batch);
    params[i] = saved - h;
    probe.set_params(params);
    double down = probe.loss(batch);
    params[i] = saved;
    double fd = (up - down) / (2.0 * h);
    double denom = std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-8});
    worst = std::max(worst, std::fabs(fd - analytic[i]) / denom);
  }
  return worst;
}

double min_abs_relu_preactivation(const Network& net, const Batch& batch) {
  check_batch(net, batch);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& x : batch.inputs) {
    Vec act = x;
    for (const auto& layer : net.layers()) {
      Vec next(static_cast<std::size_t>(layer.weights.rows));
      for (int r = 0; r < layer.weights.rows; ++r) {
        double z = layer.biases[static_cast<std::size_t>(r)];
        for (int c = 0; c < layer.weights.cols; ++c) {
          z += layer.weights.at(r, c) * act[static_cast<std::size_t>(c)];
        }
        if (layer.activation == Activation::relu) {
          best = std::min(best, std::fabs(z));
        }
        next[static_cast<std::size_t>(r)] = apply_activation(layer.activation, z);
      }
      act = std::move(next);
    }
  }
  return best;
}

double accuracy(const Network& net, const Dataset& data) {
  if (data.inputs.empty()) {
    throw std::invalid_argument("nn: accuracy over empty dataset");
  }
  std::size_t hits = 0;
  for (std::size_t s = 0; s < data.inputs.size(); ++s) {
    Vec logits = net.forward(data.inputs[s]);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
      if (logits[i] > logits[arg]) arg = i;
    }
    if (static_cast<int>(arg) == data.labels[s]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.inputs.size());
}

TrainResult train(Network& net, const DatasetPair& data,
                  const optim::OptimizerKind& kind, const TrainOptions& opts) {
  if (opts.epochs < 1) throw std::invalid_argument("nn: epochs must be >= 1");
  if (opts.batch_size < 1) throw std::invalid_argument("nn: batch_size must be >= 1");
  if (data.train.inputs.empty()) throw std::invalid_argument("nn: empty training set");
  if (data.train.inputs.size() != data.train.labels.size()) {
    throw std::invalid_argument("nn: training inputs and labels differ in length");
  }

  auto opt = optim::make_optimizer(kind, net.param_count());
  Vec params = net.get_params();
  Rng shuffle_rng(opts.seed);
  std::vector<std::size_t> order(data.train.inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  result.rows.reserve(static_cast<std::size_t>(opts.epochs));
  const std::size_t n = order.size();
  const std::size_t bs = static_cast<std::size_t>(opts.batch_size);

  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    double var_sum = 0.0;
    std::size_t batches = 0;
    bool blew_up = false;
    for (std::size_t start = 0; start < n; start += bs) {
      std::size_t stop = std::min(n, start + bs);
      Batch batch;
      batch.inputs.reserve(stop - start);
      batch.labels.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        batch.inputs.push_back(data.train.inputs[order[i]]);
        batch.labels.push_back(data.train.labels[order[i]]);
      }
      auto [batch_loss, report] = net.forward_backward(batch);
      Vec flat_grads = report.flatten();
      bool finite = std::isfinite(batch_loss);
      for (double g : flat_grads) {
        if (!std::isfinite(g)) {
          finite = false;
          break;
        }
      }
      if (!finite) {
        blew_up = true;
        break;
      }
      loss_sum += batch_loss * static_cast<double>(stop - start);
      var_sum += stats::population_variance(report.last_layer_weight_grads());
      ++batches;
      opt->step(params, flat_grads);
      net.set_params(params);
    }
    if (blew_up) {
      result.diverged = true;
      break;
    }
    EpochRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(n);
    row.test_acc = accuracy(net, data.test);
    row.grad_var_last_layer = var_sum / static_cast<double>(batches);
    result.rows.push_back(row);
  }
  return result;
}

}  // namespace fame::nn
