#include "fame/landscape.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fame::landscape {

namespace {

void check_point(Point p, const char* who) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
    throw std::invalid_argument(std::string(who) + ": non-finite point");
  }
}

}  // namespace

Landscape::Landscape(std::vector<Basin> basins, double noise_std, Bounds bounds)
    : basins_(std::move(basins)), noise_std_(noise_std), bounds_(bounds) {
  if (basins_.empty()) {
    throw std::invalid_argument("landscape: at least one basin required");
  }
  for (const auto& b : basins_) {
    if (!(b.width > 0.0)) {
      throw std::invalid_argument("landscape: basin width must be positive");
    }
    if (!(b.depth > 0.0)) {
      throw std::invalid_argument("landscape: basin depth must be positive");
    }
    if (!std::isfinite(b.center.x) || !std::isfinite(b.center.y)) {
      throw std::invalid_argument("landscape: non-finite basin center");
    }
  }
  if (!(noise_std_ >= 0.0)) {
    throw std::invalid_argument("landscape: noise_std must be non-negative");
  }
}

double Landscape::value(Point p) const {
  check_point(p, "landscape value");
  double sum = 0.0;
  for (const auto& b : basins_) {
    double dx = p.x - b.center.x;
    double dy = p.y - b.center.y;
    double s2 = b.width * b.width;
    sum -= b.depth * std::exp(-(dx * dx + dy * dy) / (2.0 * s2));
  }
  return sum;
}

Point Landscape::gradient(Point p) const {
  check_point(p, "landscape gradient");
  Point g;
  for (const auto& b : basins_) {
    double dx = p.x - b.center.x;
    double dy = p.y - b.center.y;
    double s2 = b.width * b.width;
    double w = b.depth * std::exp(-(dx * dx + dy * dy) / (2.0 * s2)) / s2;
    g.x += w * dx;
    g.y += w * dy;
  }
  return g;
}

std::pair<double, Point> Landscape::eval(Point p) const {
  return {value(p), gradient(p)};
}

Point Landscape::noisy_gradient(Point p, Rng& rng) const {
  Point g = gradient(p);
  if (noise_std_ > 0.0) {
    g.x += noise_std_ * rng.normal();
    g.y += noise_std_ * rng.normal();
  }
  return g;
}

std::optional<int> Landscape::nearest_basin(Point p, double sigma_multiple) const {
  check_point(p, "landscape nearest_basin");
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < basins_.size(); ++i) {
    double dx = p.x - basins_[i].center.x;
    double dy = p.y - basins_[i].center.y;
    double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<int>(i);
    }
  }
  double radius = sigma_multiple * basins_[static_cast<std::size_t>(best)].width;
  if (best_d2 <= radius * radius) return best;
  return std::nullopt;
}

Trajectory run_descent(const Landscape& surface, const optim::OptimizerKind& kind,
                       Point x0, int steps, std::uint64_t seed,
                       double attribution_sigma) {
  check_point(x0, "run_descent");
  if (steps < 0) {
    throw std::invalid_argument("run_descent: steps must be non-negative");
  }
  Rng rng(seed);
  auto opt = optim::make_optimizer(kind, 2);
  Trajectory traj;
  traj.points.reserve(static_cast<std::size_t>(steps) + 1);
  traj.losses.reserve(static_cast<std::size_t>(steps) + 1);
  traj.points.push_back(x0);
  traj.losses.push_back(surface.value(x0));
  optim::Vec pos = {x0.x, x0.y};
  for (int t = 0; t < steps; ++t) {
    Point g = surface.noisy_gradient({pos[0], pos[1]}, rng);
    optim::Vec grads = {g.x, g.y};
    opt->step(pos, grads);
    if (!std::isfinite(pos[0]) || !std::isfinite(pos[1])) {
      traj.diverged = true;
      break;
    }
    Point p{pos[0], pos[1]};
    traj.points.push_back(p);
    traj.losses.push_back(surface.value(p));
  }
  traj.terminal_basin = surface.nearest_basin(traj.points.back(), attribution_sigma);
  return traj;
}

}  // namespace fame::landscape
