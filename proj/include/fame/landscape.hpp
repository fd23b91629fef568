#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "fame/optim.hpp"
#include "fame/rng.hpp"

namespace fame::landscape {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// One negated Gaussian well: contributes -depth * exp(-r^2 / (2 width^2)).
struct Basin {
  Point center;
  double depth = 1.0;
  double width = 0.5;
};

struct Bounds {
  double xmin = -3.0, xmax = 3.0;
  double ymin = -3.0, ymax = 3.0;
};

// Smooth 2D mixture-of-wells surface with optional additive Gaussian noise
// on the gradient. The analytic value and gradient are exact; noise only
// ever enters through noisy_gradient.
class Landscape {
 public:
  Landscape(std::vector<Basin> basins, double noise_std, Bounds bounds = {});

  double value(Point p) const;
  Point gradient(Point p) const;
  std::pair<double, Point> eval(Point p) const;
  Point noisy_gradient(Point p, Rng& rng) const;

  // Index of the nearest basin if the point sits within sigma_multiple of
  // that basin's width; nullopt otherwise.
  std::optional<int> nearest_basin(Point p, double sigma_multiple = 3.0) const;

  const std::vector<Basin>& basins() const { return basins_; }
  double noise_std() const { return noise_std_; }
  const Bounds& bounds() const { return bounds_; }

 private:
  std::vector<Basin> basins_;
  double noise_std_;
  Bounds bounds_;
};

struct Trajectory {
  std::vector<Point> points;  // points[0] is the start
  std::vector<double> losses;
  std::optional<int> terminal_basin;
  bool diverged = false;
};

// Runs `steps` noisy-gradient updates from x0. A non-finite position
// truncates the trajectory and flags it; points and losses always stay
// finite and aligned.
Trajectory run_descent(const Landscape& surface, const optim::OptimizerKind& kind,
                       Point x0, int steps, std::uint64_t seed,
                       double attribution_sigma = 3.0);

}  // namespace fame::landscape
