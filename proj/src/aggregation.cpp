#include "bfl/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bfl/encoding.hpp"

namespace bfl {

namespace {

void check_dimension(std::size_t expected, std::size_t actual) {
  if (expected != actual) {
    throw DimensionError("dimension mismatch: expected " + std::to_string(expected) + ", got " +
                         std::to_string(actual));
  }
}

std::size_t common_dimension(std::span<const ParamVector> updates) {
  if (updates.empty()) throw EmptyAggregationError("aggregation over an empty update list");
  const std::size_t d = updates.front().dimension();
  for (const auto& u : updates) check_dimension(d, u.dimension());
  return d;
}

std::vector<ParamVector> update_vectors(std::span<const WeightedUpdate> updates) {
  std::vector<ParamVector> out;
  out.reserve(updates.size());
  for (const auto& u : updates) out.push_back(u.update);
  return out;
}

ParamVector subtract(const ParamVector& w, const ParamVector& step) {
  check_dimension(w.dimension(), step.dimension());
  ParamVector out = w;
  for (std::size_t i = 0; i < out.dimension(); ++i) out[i] -= step[i];
  return out;
}

}  // namespace

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Bytes canonical_encode(const ParamVector& v) {
  Encoder enc(ValueKind::ParamVector);
  enc.f64s(v.values());
  return std::move(enc).take();
}

ParamVector decode_param_vector(std::span<const std::uint8_t> bytes) {
  Decoder dec(bytes);
  dec.expect_kind(ValueKind::ParamVector);
  ParamVector v(dec.f64s());
  dec.expect_done();
  return v;
}

HashKey hash_value(const ParamVector& v) { return sha256(canonical_encode(v)); }

EpsilonVector::EpsilonVector(double scalar) : components_{scalar} {
  if (!(scalar >= 0.0)) throw std::invalid_argument("epsilon must be non-negative");
}

EpsilonVector::EpsilonVector(std::vector<double> components) : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("epsilon vector must be non-empty");
  for (double c : components_) {
    if (!(c >= 0.0)) throw std::invalid_argument("epsilon components must be non-negative");
  }
}

ParamVector fedavg_step(const ParamVector& w, std::span<const WeightedUpdate> updates) {
  if (updates.empty()) throw EmptyAggregationError("fedavg over an empty update list");
  std::uint64_t total = 0;
  for (const auto& u : updates) {
    check_dimension(w.dimension(), u.update.dimension());
    if (u.weight == 0) throw std::invalid_argument("update weight must be >= 1");
    total += u.weight;
  }
  const double n = static_cast<double>(total);
  ParamVector step = ParamVector::zeros(w.dimension());
  for (const auto& u : updates) {
    const double share = static_cast<double>(u.weight) / n;
    for (std::size_t i = 0; i < step.dimension(); ++i) step[i] += share * u.update[i];
  }
  return subtract(w, step);
}

ParamVector coordinate_median(std::span<const ParamVector> updates) {
  const std::size_t d = common_dimension(updates);
  const std::size_t k = updates.size();
  ParamVector out = ParamVector::zeros(d);
  std::vector<double> column(k);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < k; ++j) column[j] = updates[j][i];
    const std::size_t mid = k / 2;
    std::nth_element(column.begin(), column.begin() + mid, column.end());
    const double upper = column[mid];
    if (k % 2 == 1) {
      out[i] = upper;
    } else {
      const double lower = *std::max_element(column.begin(), column.begin() + mid);
      out[i] = lower + (upper - lower) / 2.0;
    }
  }
  return out;
}

ParamVector trimmed_mean(std::span<const ParamVector> updates, std::size_t trim) {
  const std::size_t d = common_dimension(updates);
  const std::size_t k = updates.size();
  if (k <= 2 * trim) {
    throw InsufficientUpdatesError("trimmed mean needs more than " + std::to_string(2 * trim) +
                                   " updates, got " + std::to_string(k));
  }
  ParamVector out = ParamVector::zeros(d);
  std::vector<double> column(k);
  const double kept = static_cast<double>(k - 2 * trim);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < k; ++j) column[j] = updates[j][i];
    if (trim > 0) std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (std::size_t j = trim; j < k - trim; ++j) sum += column[j];
    out[i] = sum / kept;
  }
  return out;
}

ParamVector median_step(const ParamVector& w, std::span<const WeightedUpdate> updates) {
  if (updates.empty()) throw EmptyAggregationError("median over an empty update list");
  const auto vectors = update_vectors(updates);
  return subtract(w, coordinate_median(vectors));
}

ParamVector trimmed_mean_step(const ParamVector& w, std::span<const WeightedUpdate> updates,
                              std::size_t trim) {
  if (updates.empty()) throw EmptyAggregationError("trimmed mean over an empty update list");
  const auto vectors = update_vectors(updates);
  return subtract(w, trimmed_mean(vectors, trim));
}

bool epsilon_close(const ParamVector& a, const ParamVector& b, const EpsilonVector& eps) {
  check_dimension(a.dimension(), b.dimension());
  if (!eps.is_scalar()) check_dimension(a.dimension(), eps.components().size());
  for (std::size_t i = 0; i < a.dimension(); ++i) {
    if (!(std::abs(a[i] - b[i]) <= eps.at(i))) return false;
  }
  return true;
}

double max_abs_difference(const ParamVector& a, const ParamVector& b) {
  check_dimension(a.dimension(), b.dimension());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.dimension(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace bfl
