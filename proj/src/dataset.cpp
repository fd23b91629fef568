#include <cmath>
#include <stdexcept>
#include <string>

#include "fame/nn.hpp"
#include "fame/rng.hpp"

namespace fame::nn {

namespace {

constexpr double kPi = 3.14159265358979323846;

void append_two_moons(Dataset& out, int n, double noise, Rng& rng) {
  for (int i = 0; i < n; ++i) {
    int label = i % 2;
    double t = rng.uniform(0.0, kPi);
    double x, y;
    if (label == 0) {
      x = std::cos(t);
      y = std::sin(t);
    } else {
      x = 1.0 - std::cos(t);
      y = 0.5 - std::sin(t);
    }
    x += noise * rng.normal();
    y += noise * rng.normal();
    out.inputs.push_back({x, y});
    out.labels.push_back(label);
  }
}

void append_spirals(Dataset& out, int n, double noise, Rng& rng) {
  for (int i = 0; i < n; ++i) {
    int label = i % 2;
    double t = rng.uniform();
    double r = 0.3 + 1.7 * t;
    double a = 3.0 * kPi * t + kPi * label;
    double x = r * std::cos(a) + noise * rng.normal();
    double y = r * std::sin(a) + noise * rng.normal();
    out.inputs.push_back({x, y});
    out.labels.push_back(label);
  }
}

void append_blobs(Dataset& out, int n, double noise,
                  const std::vector<std::pair<double, double>>& centers, Rng& rng) {
  int k = static_cast<int>(centers.size());
  for (int i = 0; i < n; ++i) {
    int label = i % k;
    double x = centers[static_cast<std::size_t>(label)].first + noise * rng.normal();
    double y = centers[static_cast<std::size_t>(label)].second + noise * rng.normal();
    out.inputs.push_back({x, y});
    out.labels.push_back(label);
  }
}

}  // namespace

DatasetPair make_dataset(const std::string& generator, int train_size,
                         int test_size, double noise, std::uint64_t seed,
                         int num_classes) {
  if (train_size < 1 || test_size < 1) {
    throw std::invalid_argument("dataset: train and test sizes must be >= 1");
  }
  if (!(noise >= 0.0)) {
    throw std::invalid_argument("dataset: noise must be non-negative");
  }
  DatasetPair pair;
  pair.train.generator = generator;
  pair.test.generator = generator;
  pair.train.seed = seed;
  pair.test.seed = seed;
  Rng rng(seed);
  if (generator == "two_moons") {
    pair.train.num_classes = pair.test.num_classes = 2;
    append_two_moons(pair.train, train_size, noise, rng);
    append_two_moons(pair.test, test_size, noise, rng);
  } else if (generator == "spirals") {
    pair.train.num_classes = pair.test.num_classes = 2;
    append_spirals(pair.train, train_size, noise, rng);
    append_spirals(pair.test, test_size, noise, rng);
  } else if (generator == "gaussian_blobs") {
    if (num_classes < 2) {
      throw std::invalid_argument("dataset: gaussian_blobs needs >= 2 classes");
    }
    pair.train.num_classes = pair.test.num_classes = num_classes;
    std::vector<std::pair<double, double>> centers;
    centers.reserve(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
      double cx = rng.uniform(-2.5, 2.5);
      double cy = rng.uniform(-2.5, 2.5);
      centers.emplace_back(cx, cy);
    }
    append_blobs(pair.train, train_size, noise, centers, rng);
    append_blobs(pair.test, test_size, noise, centers, rng);
  } else {
    throw std::invalid_argument("dataset: unknown generator '" + generator + "'");
  }
  return pair;
}

}  // namespace fame::nn
