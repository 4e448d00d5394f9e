#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "bfl/core.hpp"

namespace bfl {

class EmptyAggregationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InsufficientUpdatesError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense model or update vector.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}
  static ParamVector zeros(std::size_t dimension) {
    return ParamVector(std::vector<double>(dimension, 0.0));
  }

  std::size_t dimension() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  bool all_finite() const;

  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<double> values_;
};

Bytes canonical_encode(const ParamVector& v);
ParamVector decode_param_vector(std::span<const std::uint8_t> bytes);
HashKey hash_value(const ParamVector& v);

struct WeightedUpdate {
  ParamVector update;
  std::uint64_t weight = 1;
  ProcessId client;
  std::uint32_t round = 0;
};

/// Per-coordinate acceptance gap. A single component broadcasts to every
/// coordinate.
class EpsilonVector {
 public:
  EpsilonVector() = default;
  explicit EpsilonVector(double scalar);
  explicit EpsilonVector(std::vector<double> components);

  double at(std::size_t i) const { return components_.size() == 1 ? components_[0] : components_[i]; }
  bool is_scalar() const { return components_.size() == 1; }
  std::span<const double> components() const { return components_; }

 private:
  std::vector<double> components_{0.0};
};

/// w - sum_k (n_k / n) g_k, accumulated in the order `updates` is given.
ParamVector fedavg_step(const ParamVector& w, std::span<const WeightedUpdate> updates);

/// Per-coordinate median; the midpoint of the central pair for even counts.
ParamVector coordinate_median(std::span<const ParamVector> updates);

/// Per coordinate, drops the `trim` smallest and largest values and averages
/// the remainder.
ParamVector trimmed_mean(std::span<const ParamVector> updates, std::size_t trim);

/// w - coordinate_median(g). Weights are ignored.
ParamVector median_step(const ParamVector& w, std::span<const WeightedUpdate> updates);

/// w - trimmed_mean(g, trim). Weights are ignored.
ParamVector trimmed_mean_step(const ParamVector& w, std::span<const WeightedUpdate> updates,
                              std::size_t trim);

/// |a_i - b_i| <= eps_i for every coordinate.
bool epsilon_close(const ParamVector& a, const ParamVector& b, const EpsilonVector& eps);

/// max_i |a_i - b_i|.
double max_abs_difference(const ParamVector& a, const ParamVector& b);

}  // namespace bfl
