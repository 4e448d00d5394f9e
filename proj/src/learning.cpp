#include "bfl/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace bfl {

namespace {

double feature(TaskKind kind, double x) {
  return kind == TaskKind::LogisticRegression ? std::abs(x) : x;
}

double score(TaskKind kind, const ParamVector& w, const Sample& s) {
  double z = 0.0;
  for (std::size_t i = 0; i < s.x.size(); ++i) z += w[i] * feature(kind, s.x[i]);
  return z;
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_sample_dimension(const ParamVector& w, const Sample& s) {
  if (s.x.size() != w.dimension()) {
    throw DimensionError("sample dimension " + std::to_string(s.x.size()) +
                         " does not match model dimension " + std::to_string(w.dimension()));
  }
}

}  // namespace

SyntheticTask make_task(TaskKind kind, std::size_t dimension, double noise, Rng& rng) {
  if (dimension == 0) throw std::invalid_argument("task dimension must be >= 1");
  if (!(noise >= 0.0)) throw std::invalid_argument("task noise must be >= 0");
  SyntheticTask task;
  task.kind = kind;
  task.noise = noise;
  std::vector<double> theta(dimension);
  if (kind == TaskKind::LinearRegression) {
    for (auto& t : theta) t = rng.normal();
  } else if (dimension == 1) {
    theta[0] = rng.normal();
  } else {
    // Features are U[0,1]; centre the score with the bias coordinate.
    const double scale = 4.0 / std::sqrt(static_cast<double>(dimension - 1));
    double centre = 0.0;
    for (std::size_t i = 0; i + 1 < dimension; ++i) {
      theta[i] = scale * rng.normal();
      centre += 0.5 * theta[i];
    }
    theta[dimension - 1] = -centre;
  }
  task.theta_star = ParamVector(std::move(theta));
  return task;
}

ClientDataset sample_dataset(const SyntheticTask& task, std::size_t count, Rng& rng) {
  const std::size_t d = task.dimension();
  ClientDataset data;
  data.samples.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    Sample s;
    s.x.resize(d);
    if (task.kind == TaskKind::LinearRegression) {
      for (auto& v : s.x) v = rng.normal();
      s.y = score(task.kind, task.theta_star, s) + task.noise * rng.normal();
    } else {
      for (std::size_t i = 0; i + 1 < d; ++i) s.x[i] = rng.uniform01();
      s.x[d - 1] = 1.0;
      const double p = sigmoid(score(task.kind, task.theta_star, s));
      s.y = rng.uniform01() < p ? 1.0 : 0.0;
    }
    data.samples.push_back(std::move(s));
  }
  return data;
}

std::vector<ClientDataset> make_client_datasets(const SyntheticTask& task, std::size_t clients,
                                                std::size_t samples_per_client,
                                                Partition partition, Rng& rng) {
  if (samples_per_client == 0) throw std::invalid_argument("clients need at least one sample");
  std::vector<ClientDataset> out(clients);
  if (partition == Partition::Iid) {
    for (auto& c : out) c = sample_dataset(task, samples_per_client, rng);
    return out;
  }
  ClientDataset pool = sample_dataset(task, clients * samples_per_client, rng);
  std::stable_sort(pool.samples.begin(), pool.samples.end(),
                   [](const Sample& a, const Sample& b) { return a.y < b.y; });
  for (std::size_t c = 0; c < clients; ++c) {
    auto first = pool.samples.begin() + static_cast<std::ptrdiff_t>(c * samples_per_client);
    out[c].samples.assign(std::make_move_iterator(first),
                          std::make_move_iterator(first + static_cast<std::ptrdiff_t>(samples_per_client)));
  }
  return out;
}

double local_loss(TaskKind kind, const ClientDataset& data, const ParamVector& w) {
  if (data.samples.empty()) throw std::invalid_argument("loss over an empty dataset");
  double total = 0.0;
  for (const auto& s : data.samples) {
    check_sample_dimension(w, s);
    const double z = score(kind, w, s);
    if (kind == TaskKind::LinearRegression) {
      const double r = z - s.y;
      total += r * r;
    } else {
      total += s.y * softplus(-z) + (1.0 - s.y) * softplus(z);
    }
  }
  return total / static_cast<double>(data.samples.size());
}

double global_loss(TaskKind kind, std::span<const ClientDataset> datasets, const ParamVector& w) {
  if (datasets.empty()) throw std::invalid_argument("global loss over no datasets");
  std::size_t total = 0;
  for (const auto& d : datasets) total += d.size();
  double loss = 0.0;
  for (const auto& d : datasets) {
    loss += static_cast<double>(d.size()) / static_cast<double>(total) * local_loss(kind, d, w);
  }
  return loss;
}

ParamVector batch_gradient(TaskKind kind, const ClientDataset& data, const ParamVector& w,
                           std::span<const std::size_t> indices) {
  ParamVector grad = ParamVector::zeros(w.dimension());
  for (std::size_t idx : indices) {
    const Sample& s = data.samples.at(idx);
    check_sample_dimension(w, s);
    const double z = score(kind, w, s);
    const double coef = kind == TaskKind::LinearRegression ? 2.0 * (z - s.y) : sigmoid(z) - s.y;
    for (std::size_t i = 0; i < grad.dimension(); ++i) grad[i] += coef * feature(kind, s.x[i]);
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (std::size_t i = 0; i < grad.dimension(); ++i) grad[i] *= inv;
  return grad;
}

ParamVector local_update(TaskKind kind, const ClientDataset& data, const ParamVector& w_t,
                         const LocalTrainConfig& cfg, Rng& rng) {
  if (data.samples.empty()) throw std::invalid_argument("local update over an empty dataset");
  if (cfg.epochs == 0 || cfg.batch == 0) throw std::invalid_argument("epochs and batch must be >= 1");
  const std::size_t n = data.size();
  ParamVector w = w_t;
  std::vector<std::size_t> order(n);
  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      const std::size_t stop = std::min(n, start + cfg.batch);
      const auto grad = batch_gradient(kind, data, w,
                                       std::span<const std::size_t>(order).subspan(start, stop - start));
      for (std::size_t i = 0; i < w.dimension(); ++i) w[i] -= cfg.learning_rate * grad[i];
      if (!w.all_finite()) throw TrainingDivergedError("local SGD produced non-finite parameters");
    }
  }
  ParamVector g = w_t;
  for (std::size_t i = 0; i < g.dimension(); ++i) g[i] -= w[i];
  return g;
}

std::vector<double> draw_mix_coefficients(std::size_t s, Rng& rng) {
  if (s == 0) throw MixCountError("mix count must be >= 1");
  constexpr double kScale = 4294967296.0;  // 2^32
  std::vector<double> e(s);
  double total = 0.0;
  for (auto& v : e) {
    v = rng.exponential();
    total += v;
  }
  std::vector<std::uint64_t> quanta(s);
  std::uint64_t assigned = 0;
  std::size_t largest = 0;
  for (std::size_t j = 0; j < s; ++j) {
    quanta[j] = static_cast<std::uint64_t>(std::floor(e[j] / total * kScale));
    assigned += quanta[j];
    if (e[j] > e[largest]) largest = j;
  }
  quanta[largest] += (std::uint64_t{1} << 32) - assigned;
  std::vector<double> lambdas(s);
  for (std::size_t j = 0; j < s; ++j) lambdas[j] = static_cast<double>(quanta[j]) / kScale;
  return lambdas;
}

Sample instahide_mix(std::span<const Sample* const> sources, std::span<const double> lambdas,
                     std::span<const std::int8_t> signs) {
  if (sources.empty() || sources.size() != lambdas.size()) {
    throw std::invalid_argument("instahide_mix needs one coefficient per source");
  }
  const std::size_t d = sources.front()->x.size();
  if (signs.size() != d) throw DimensionError("sign pattern dimension mismatch");
  Sample out;
  out.x.assign(d, 0.0);
  for (std::size_t j = 0; j < sources.size(); ++j) {
    if (sources[j]->x.size() != d) throw DimensionError("mixed samples differ in dimension");
    for (std::size_t i = 0; i < d; ++i) out.x[i] += lambdas[j] * sources[j]->x[i];
    out.y += lambdas[j] * sources[j]->y;
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (signs[i] != 1 && signs[i] != -1) throw std::invalid_argument("sign pattern must be +-1");
    out.x[i] *= signs[i];
  }
  return out;
}

InstaHideResult instahide_encode(const ClientDataset& data, const InstaHideConfig& cfg, Rng& rng) {
  const std::size_t n = data.size();
  const std::size_t s = cfg.mix_count;
  if (s == 0 || s > n) {
    throw MixCountError("mix count " + std::to_string(s) + " invalid for a dataset of " +
                        std::to_string(n) + " samples");
  }
  InstaHideResult result;
  result.encoded.samples.reserve(n);
  result.draws.reserve(n);
  std::vector<std::size_t> others(n > 0 ? n - 1 : 0);
  for (std::size_t idx = 0; idx < n; ++idx) {
    InstaHideDraw draw;
    draw.sources.push_back(idx);
    // s-1 distinct partners other than idx: partial Fisher-Yates.
    for (std::size_t k = 0, v = 0; v < n; ++v) {
      if (v != idx) others[k++] = v;
    }
    for (std::size_t j = 0; j + 1 < s; ++j) {
      const std::size_t pick = j + rng.below(others.size() - j);
      std::swap(others[j], others[pick]);
      draw.sources.push_back(others[j]);
    }
    draw.lambdas = draw_mix_coefficients(s, rng);
    const std::size_t d = data.samples[idx].x.size();
    draw.signs.resize(d);
    for (auto& sg : draw.signs) sg = rng.coin() ? 1 : -1;

    std::vector<const Sample*> sources;
    for (std::size_t src : draw.sources) sources.push_back(&data.samples[src]);
    result.encoded.samples.push_back(instahide_mix(sources, draw.lambdas, draw.signs));
    result.draws.push_back(std::move(draw));
  }
  return result;
}

ParamVector apply_attack(const ParamVector& g, const AttackConfig& cfg) {
  if (cfg.kind == AttackKind::None) return g;
  ParamVector out = g;
  for (std::size_t i = 0; i < out.dimension(); ++i) out[i] = -cfg.lambda_boost * g[i];
  return out;
}

}  // namespace bfl
