#pragma once

#include <algorithm>
#include <stdexcept>
#include <utility>
#include <vector>

namespace penest {

/// Piecewise-linear function of time given by (t_h, value) breakpoints.
/// Held constant before the first and after the last breakpoint.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;

  explicit PiecewiseLinear(std::vector<std::pair<double, double>> points) : points_(std::move(points)) {
    if (points_.empty()) {
      throw std::invalid_argument("profile: at least one breakpoint is required");
    }
    for (std::size_t i = 1; i < points_.size(); ++i) {
      if (!(points_[i].first > points_[i - 1].first)) {
        throw std::invalid_argument("profile: breakpoint times must be strictly increasing");
      }
    }
  }

  static PiecewiseLinear constant(double value) { return PiecewiseLinear({{0.0, value}}); }

  double operator()(double t_h) const {
    if (t_h < 0.0) {
      throw std::domain_error("profile: time must be non-negative");
    }
    if (points_.empty()) {
      return 0.0;
    }
    if (t_h <= points_.front().first) {
      return points_.front().second;
    }
    if (t_h >= points_.back().first) {
      return points_.back().second;
    }
    std::size_t hi = 1;
    while (points_[hi].first < t_h) {
      ++hi;
    }
    const auto& [t0, y0] = points_[hi - 1];
    const auto& [t1, y1] = points_[hi];
    const double w = (t_h - t0) / (t1 - t0);
    return y0 + w * (y1 - y0);
  }

  const std::vector<std::pair<double, double>>& points() const { return points_; }

  double min_value() const {
    double m = points_.empty() ? 0.0 : points_.front().second;
    for (const auto& p : points_) m = std::min(m, p.second);
    return m;
  }

  double max_value() const {
    double m = points_.empty() ? 0.0 : points_.front().second;
    for (const auto& p : points_) m = std::max(m, p.second);
    return m;
  }

 private:
  std::vector<std::pair<double, double>> points_;
};

/// Total demand at time t_h.
inline double demand_profile(double t_h, const PiecewiseLinear& profile) { return profile(t_h); }

/// A demand source: total flow profile plus the connected share of it.
struct DemandSource {
  PiecewiseLinear total;
  PiecewiseLinear share = PiecewiseLinear::constant(0.2);

  double flow(double t_h) const { return total(t_h); }
  double connected_flow(double t_h) const { return share(t_h) * total(t_h); }
};

}  // namespace penest
