#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fem.hpp"

namespace lodelast {

inline constexpr std::uint64_t default_seed = 20160523;

inline CoefficientField constant_coefficients(double mu, double lambda) {
  if (!(mu > 0.0) || !(lambda > 0.0)) throw std::invalid_argument("Lame parameters must be positive");
  return CoefficientField(1, {mu}, {lambda});
}

/// mu and lambda drawn independently and uniformly from [lo, hi] per cell.
inline CoefficientField random_checkerboard(int grid_n, double lo, double hi, std::uint64_t seed = default_seed) {
  if (grid_n < 1) throw std::invalid_argument("checkerboard grid size must be positive");
  if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("checkerboard range must satisfy 0 < lo < hi");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  const auto cells = static_cast<std::size_t>(grid_n) * grid_n;
  std::vector<double> mu(cells), lambda(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    mu[c] = dist(rng);
    lambda[c] = dist(rng);
  }
  return CoefficientField(grid_n, std::move(mu), std::move(lambda));
}

/// Plain-text grid: grid_n, then grid_n rows of mu, then grid_n rows of lambda,
/// each row ordered by increasing x, rows by increasing y.
inline void write_coefficients(std::ostream& os, const CoefficientField& c) {
  const int n = c.grid_n();
  os << n << '\n' << std::setprecision(17);
  for (const auto* values : {&c.mu(), &c.lambda()})
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) os << (i ? " " : "") << (*values)[j * n + i];
      os << '\n';
    }
}

inline CoefficientField read_coefficients(std::istream& is) {
  int n = 0;
  if (!(is >> n) || n < 1) throw std::runtime_error("coefficient file: bad grid size");
  const auto cells = static_cast<std::size_t>(n) * n;
  std::vector<double> mu(cells), lambda(cells);
  for (auto* values : {&mu, &lambda})
    for (auto& x : *values)
      if (!(is >> x)) throw std::runtime_error("coefficient file: truncated");
  return CoefficientField(n, std::move(mu), std::move(lambda));
}

/**
 * Locking benchmark on the unit square with mu = 1 and homogeneous Dirichlet
 * data. The exact displacement is a divergence-free field plus a
 * sin(pi x) sin(pi y) / (1 + lambda) perturbation in both components.
 */
class BrennerBenchmark {
 public:
  explicit BrennerBenchmark(double lambda) : lambda_(lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  }

  double lambda() const { return lambda_; }
  double mu() const { return 1.0; }

  Vec2 displacement(const Point& x) const {
    using std::numbers::pi;
    const double s = std::sin(pi * x[0]) * std::sin(pi * x[1]) / (1.0 + lambda_);
    return {std::sin(2 * pi * x[1]) * (-1.0 + std::cos(2 * pi * x[0])) + s,
            std::sin(2 * pi * x[0]) * (1.0 - std::cos(2 * pi * x[1])) + s};
  }

  Vec2 body_force(const Point& x) const {
    using std::numbers::pi;
    const double common = -std::cos(pi * (x[0] + x[1])) + 2.0 / (1.0 + lambda_) * std::sin(pi * x[0]) * std::sin(pi * x[1]);
    return {pi * pi * (4 * std::sin(2 * pi * x[1]) * (-1.0 + 2 * std::cos(2 * pi * x[0])) + common),
            pi * pi * (4 * std::sin(2 * pi * x[0]) * (1.0 - 2 * std::cos(2 * pi * x[1])) + common)};
  }

  ProblemSpec problem() const {
    ProblemSpec p{constant_coefficients(mu(), lambda_)};
    p.body_force = VectorFunction([*this](const Point& x) { return body_force(x); });
    return p;
  }

  /// Lagrange nodal interpolant of the exact displacement.
  Vector nodal_interpolant(const Mesh& mesh) const {
    Vector u(static_cast<Eigen::Index>(2 * mesh.num_nodes()));
    for (int v = 0; v < static_cast<int>(mesh.num_nodes()); ++v) {
      const Vec2 d = displacement(mesh.node(v));
      u[dof(v, 0)] = d[0];
      u[dof(v, 1)] = d[1];
    }
    return u;
  }

 private:
  double lambda_;
};

inline BrennerBenchmark brenner_benchmark(double lambda) { return BrennerBenchmark(lambda); }

}  // namespace lodelast
