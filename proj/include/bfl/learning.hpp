#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "bfl/aggregation.hpp"
#include "bfl/rng.hpp"

namespace bfl {

class TrainingDivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MixCountError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class TaskKind : std::uint8_t { LinearRegression = 0, LogisticRegression = 1 };

// Logistic tasks are binary with one-hot labels (1-y, y); `Sample::y` holds
// the class-1 coordinate, which is all a two-class one-hot vector carries.
// Mixed (InstaHide) labels are therefore soft values in [0, 1].
//
// The logistic classifier scores feature magnitudes, sum_i w_i |x_i|. Its
// features are non-negative intensities (last coordinate a constant bias), so
// on clean data this is ordinary logistic regression, and a per-coordinate
// sign flip of an encoded sample leaves its score unchanged.
struct Sample {
  std::vector<double> x;
  double y = 0.0;
};

struct ClientDataset {
  std::vector<Sample> samples;
  std::size_t size() const { return samples.size(); }
};

struct SyntheticTask {
  TaskKind kind = TaskKind::LinearRegression;
  ParamVector theta_star;
  double noise = 0.0;

  std::size_t dimension() const { return theta_star.dimension(); }
};

enum class Partition : std::uint8_t { Iid = 0, LabelSkew = 1 };

struct LocalTrainConfig {
  std::uint32_t epochs = 1;
  std::uint32_t batch = 1;
  double learning_rate = 0.01;
};

struct InstaHideConfig {
  std::uint32_t mix_count = 1;
  std::uint64_t stream_id = 0;
};

/// One encoded sample's draws: source indices (the encoded sample first),
/// mixing coefficients, and the sign pattern.
struct InstaHideDraw {
  std::vector<std::size_t> sources;
  std::vector<double> lambdas;
  std::vector<std::int8_t> signs;
};

struct InstaHideResult {
  ClientDataset encoded;
  std::vector<InstaHideDraw> draws;
};

enum class AttackKind : std::uint8_t { None = 0, SignFlipBoost = 1 };

struct AttackConfig {
  AttackKind kind = AttackKind::None;
  double lambda_boost = 1.0;
};

SyntheticTask make_task(TaskKind kind, std::size_t dimension, double noise, Rng& rng);

ClientDataset sample_dataset(const SyntheticTask& task, std::size_t count, Rng& rng);

/// `clients` datasets of `samples_per_client` each. LabelSkew draws one pool
/// and deals it out in label order, so each client sees a narrow label range.
std::vector<ClientDataset> make_client_datasets(const SyntheticTask& task, std::size_t clients,
                                                std::size_t samples_per_client,
                                                Partition partition, Rng& rng);

/// Per-client objective: mean squared error (linear) or mean cross-entropy
/// (logistic).
double local_loss(TaskKind kind, const ClientDataset& data, const ParamVector& w);

/// sum_c (n_c / N) * local_loss_c(w).
double global_loss(TaskKind kind, std::span<const ClientDataset> datasets, const ParamVector& w);

/// Mean gradient of the per-client objective over the samples at `indices`.
ParamVector batch_gradient(TaskKind kind, const ClientDataset& data, const ParamVector& w,
                           std::span<const std::size_t> indices);

/// E epochs of minibatch SGD from w_t; returns g = w_t - w_local.
ParamVector local_update(TaskKind kind, const ClientDataset& data, const ParamVector& w_t,
                         const LocalTrainConfig& cfg, Rng& rng);

/// s non-negative coefficients summing to exactly 1: uniform on the simplex
/// via normalised exponentials, quantised to multiples of 2^-32 so that any
/// summation order gives 1.0.
std::vector<double> draw_mix_coefficients(std::size_t s, Rng& rng);

/// sigma o (sum_j lambda_j x_j), label sum_j lambda_j y_j.
Sample instahide_mix(std::span<const Sample* const> sources, std::span<const double> lambdas,
                     std::span<const std::int8_t> signs);

InstaHideResult instahide_encode(const ClientDataset& data, const InstaHideConfig& cfg, Rng& rng);

ParamVector apply_attack(const ParamVector& g, const AttackConfig& cfg);

}  // namespace bfl
