#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

namespace lqm {

// Rates (vph) use IEEE infinity as the distinguished unbounded value, which
// absorbs min() exactly.
inline constexpr double unbounded = std::numeric_limits<double>::infinity();

inline bool is_unbounded(double r) { return std::isinf(r) && r > 0; }

/// Unimodal flow-density relation of one link. Units: miles, hours, mph,
/// vehicles/mile, vehicles/hour, network-wide.
class FundamentalDiagram {
 public:
  virtual ~FundamentalDiagram() = default;

  virtual double flow(double k) const = 0;
  virtual double demand(double k) const = 0;
  virtual double supply(double k) const = 0;
  virtual double inverse_supply(double s) const = 0;

  virtual double free_flow_speed() const = 0;
  virtual double backward_wave_speed() const = 0;
  virtual double critical_density() const = 0;
  virtual double jam_density() const = 0;
  virtual double capacity() const = 0;
};

/// Triangular fundamental diagram Q(k) = min{V k, W (n kj - k)}.
class TriangularFd final : public FundamentalDiagram {
 public:
  TriangularFd(double v_free, double w_back, double k_jam_per_lane, int lanes)
      : v_(v_free), w_(w_back), lanes_(lanes) {
    if (v_free <= 0 || w_back <= 0 || k_jam_per_lane <= 0 || lanes <= 0) {
      throw std::invalid_argument("TriangularFd: parameters must be positive");
    }
    k_jam_ = lanes * k_jam_per_lane;
    k_crit_ = w_ * k_jam_ / (v_ + w_);
    capacity_ = v_ * k_crit_;
  }

  double flow(double k) const override {
    k = checked(k);
    return std::min(v_ * k, w_ * (k_jam_ - k));
  }

  double demand(double k) const override {
    k = checked(k);
    return std::min(v_ * k, capacity_);
  }

  double supply(double k) const override {
    k = checked(k);
    return std::min(w_ * (k_jam_ - k), capacity_);
  }

  // Congested-branch inverse: the unique k >= k_crit with supply(k) = s.
  double inverse_supply(double s) const override {
    if (s < 0 || s > capacity_ * (1 + 1e-12)) {
      throw std::out_of_range("inverse_supply: s outside [0, capacity]");
    }
    s = std::min(s, capacity_);
    return std::max(k_crit_, k_jam_ - s / w_);
  }

  double free_flow_speed() const override { return v_; }
  double backward_wave_speed() const override { return w_; }
  double critical_density() const override { return k_crit_; }
  double jam_density() const override { return k_jam_; }
  double capacity() const override { return capacity_; }
  int lanes() const { return lanes_; }

 private:
  // Euler round-off within 1e-9*k_jam is clamped; larger excursions are bugs.
  double checked(double k) const {
    const double tol = 1e-9 * k_jam_;
    if (k < -tol || k > k_jam_ + tol) {
      throw std::out_of_range("density " + std::to_string(k) +
                              " outside [0, " + std::to_string(k_jam_) + "]");
    }
    return std::clamp(k, 0.0, k_jam_);
  }

  double v_, w_;
  int lanes_;
  double k_jam_, k_crit_, capacity_;
};

inline std::shared_ptr<const FundamentalDiagram> make_triangular_fd(
    double v_free, double w_back, double k_jam_per_lane, int lanes) {
  return std::make_shared<TriangularFd>(v_free, w_back, k_jam_per_lane, lanes);
}

/// Point-queue origin demand: unbounded while the queue is occupied.
inline double origin_demand_continuous(double queue, double arrival_rate) {
  if (queue < 0 || arrival_rate < 0) {
    throw std::invalid_argument("origin_demand_continuous: negative input");
  }
  return queue > 0 ? unbounded : arrival_rate;
}

/// Finite surrogate used by the discrete scheme: K/dt + f.
inline double origin_demand_discrete(double queue, double arrival_rate,
                                     double dt) {
  if (queue < 0 || arrival_rate < 0) {
    throw std::invalid_argument("origin_demand_discrete: negative input");
  }
  if (dt <= 0) throw std::invalid_argument("origin_demand_discrete: dt <= 0");
  return queue / dt + arrival_rate;
}

}  // namespace lqm
