// Copyright 2026 The hovsyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hovsyn/ccv_space.hpp"
#include "hovsyn/rng.hpp"

namespace hovsyn {

struct LearnerConfig {
  double learn_rate = 0.05;       // exponential decay per exposure
  double noise_sigma = -1.0;      // < 0: auto, 10% of median base difficulty
  double base_log_mean = std::log(0.02);  // log-normal difficulty, meters
  double base_log_sigma = 0.75;
};

/// Stand-in for a trained model: per-triplet error decays exponentially with
/// exposure count, plus folded-Gaussian observation noise. Hard triplets are
/// the log-normal tail.
struct SimulatedLearner {
  SpaceDims dims;
  std::vector<double> base_difficulty;  // meters, > 0
  double learn_rate = 0.05;
  double noise_sigma = 0.0;
  std::vector<std::uint32_t> exposures;

  static SimulatedLearner make(SpaceDims dims, const LearnerConfig& config, Rng& rng) {
    SimulatedLearner learner;
    learner.dims = dims;
    learner.learn_rate = config.learn_rate;
    learner.base_difficulty.resize(dims.total());
    for (auto& b : learner.base_difficulty)
      b = std::exp(config.base_log_mean + config.base_log_sigma * rng.normal());
    learner.exposures.assign(dims.total(), 0);
    if (config.noise_sigma >= 0.0) {
      learner.noise_sigma = config.noise_sigma;
    } else {
      std::vector<double> sorted = learner.base_difficulty;
      std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
      learner.noise_sigma = 0.1 * sorted[sorted.size() / 2];
    }
    return learner;
  }

  void reset_exposures() { exposures.assign(exposures.size(), 0); }

  /// Noise-free expected error over the whole space: the test-set analog,
  /// independent of what the sampler chose to draw.
  double evaluation_error() const {
    double sum = 0.0;
    for (std::size_t i = 0; i < base_difficulty.size(); ++i)
      sum += base_difficulty[i] * std::exp(-learn_rate * static_cast<double>(exposures[i]));
    return sum / static_cast<double>(base_difficulty.size());
  }
};

/// error = base * exp(-k * exposures) + |N(0, sigma)|, then the exposure
/// counter advances.
inline double learner_error(SimulatedLearner& learner, const TripletIndex& triplet, Rng& rng) {
  const std::uint64_t i = learner.dims.flat(triplet);
  const double error = learner.base_difficulty[i] *
                           std::exp(-learner.learn_rate * static_cast<double>(learner.exposures[i])) +
                       std::abs(rng.normal(0.0, learner.noise_sigma));
  ++learner.exposures[i];
  return error;
}

struct MixedItem {
  bool synthetic = false;
  std::uint64_t real_id = 0;
  TripletIndex triplet;
};

/// One mixed batch: round(batch_size * ratio / (1 + ratio)) synthetic items
/// and the remainder real, order shuffled deterministically by the rng.
inline std::vector<MixedItem> mix_batches(std::span<const std::uint64_t> real_pool,
                                          std::span<const TripletIndex> synthetic,
                                          std::uint64_t batch_size, double ratio, Rng& rng) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(ratio >= 0.0) || !std::isfinite(ratio)) throw std::invalid_argument("ratio must be finite and >= 0");
  const auto n_syn = static_cast<std::uint64_t>(std::llround(static_cast<double>(batch_size) * ratio / (1.0 + ratio)));
  const std::uint64_t n_real = batch_size - n_syn;
  if (synthetic.size() < n_syn || real_pool.size() < n_real)
    throw std::invalid_argument("pools are insufficient for the requested batch");

  std::vector<MixedItem> batch;
  batch.reserve(batch_size);
  for (std::uint64_t i = 0; i < n_syn; ++i) batch.push_back({true, 0, synthetic[i]});
  for (std::uint64_t i = 0; i < n_real; ++i) batch.push_back({false, real_pool[i], {}});
  for (std::uint64_t i = batch.size(); i > 1; --i) {
    const std::uint64_t j = rng.uniform_below(i);
    std::swap(batch[i - 1], batch[j]);
  }
  return batch;
}

struct EpochConfig {
  std::uint64_t samples = 256;   // synthetic triplets per epoch
  bool online = true;            // apply loss feedback to the weight map
  bool mixing = true;
  std::uint64_t batch_size = 64;
  double ratio = 1.0;            // synthetic : real
  std::uint64_t real_pool_size = 4096;
};

struct EpochReport {
  int epoch = 0;
  double mean_error = 0.0;
  std::vector<FeedbackRecord> records;
  std::uint64_t samples_drawn = 0;  // total items consumed (real + synthetic)
  std::uint64_t mix_real = 0;
  std::uint64_t mix_syn = 0;
};

/// One exploration epoch: weighted sampling without replacement, learner
/// feedback per synthetic sample, optional batch mixing bookkeeping, and —
/// when online — the percentile re-weighting pass.
inline EpochReport run_epoch(WeightMap& map, SimulatedLearner& learner, const EpochConfig& config,
                             Rng& rng, int epoch = 0) {
  if (config.samples > map.size()) throw std::invalid_argument("epoch samples exceed the space");
  EpochReport report;
  report.epoch = epoch;

  const std::vector<TripletIndex> triplets = sample_triplets(map, config.samples, rng);
  report.records.reserve(triplets.size());
  double sum = 0.0;
  for (const auto& t : triplets) {
    const double e = learner_error(learner, t, rng);
    report.records.push_back({t, e});
    sum += e;
  }
  report.mean_error = triplets.empty() ? 0.0 : sum / static_cast<double>(triplets.size());

  report.mix_syn = triplets.size();
  if (config.mixing && config.batch_size > 0) {
    const auto n_syn_per_batch = static_cast<std::uint64_t>(
        std::llround(static_cast<double>(config.batch_size) * config.ratio / (1.0 + config.ratio)));
    if (n_syn_per_batch > 0) {
      std::vector<std::uint64_t> real_pool(config.real_pool_size);
      std::iota(real_pool.begin(), real_pool.end(), 0);
      const std::uint64_t full_batches = triplets.size() / n_syn_per_batch;
      for (std::uint64_t b = 0; b < full_batches; ++b) {
        const auto batch = mix_batches(
            real_pool, std::span<const TripletIndex>(triplets).subspan(b * n_syn_per_batch, n_syn_per_batch),
            config.batch_size, config.ratio, rng);
        report.mix_real += config.batch_size - n_syn_per_batch;
        (void)batch;
      }
    }
  }
  report.samples_drawn = report.mix_real + report.mix_syn;

  if (config.online && !report.records.empty()) apply_epoch_feedback(map, report.records);
  return report;
}

struct ExperimentConfig {
  SpaceDims dims{4, 25, 24};
  int epochs = 50;
  EpochConfig epoch;
  LearnerConfig learner;
  bool online_enabled = true;    // when false the "online" scheme also fixes weights
  double target_error = 0.01;    // first-reach threshold, meters
};

struct ExperimentReport {
  std::vector<std::uint64_t> seeds;
  // [seed][epoch] whole-space evaluation error after the epoch's update.
  std::vector<std::vector<double>> online_curves;
  std::vector<std::vector<double>> uniform_curves;
  std::vector<double> online_mean;                  // across seeds, per epoch
  std::vector<double> uniform_mean;
  int online_first_reach = -1;   // epoch index, -1 when never reached
  int uniform_first_reach = -1;
  double sign_test_p = 1.0;      // one-sided: online below uniform at the end
  std::optional<WeightMap> online_final_map;   // first seed
  std::optional<WeightMap> uniform_final_map;
};

/// One-sided sign test: P(Binomial(n, 1/2) >= wins).
inline double sign_test_p_value(int wins, int n) {
  if (n <= 0) return 1.0;
  double p = 0.0;
  double coeff = 1.0;  // C(n, 0)
  std::vector<double> coeffs(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    coeffs[static_cast<std::size_t>(k)] = coeff;
    coeff = coeff * (n - k) / (k + 1);
  }
  double total = std::pow(2.0, static_cast<double>(n));
  for (int k = wins; k <= n; ++k) p += coeffs[static_cast<std::size_t>(k)] / total;
  return std::min(1.0, p);
}

/// Paired online-vs-uniform runs: both schemes share the learner
/// initialization per seed and differ only in re-weighting.
inline ExperimentReport run_experiment(const ExperimentConfig& config,
                                       std::span<const std::uint64_t> seeds) {
  if (seeds.size() < 2) throw std::invalid_argument("run_experiment needs at least 2 seeds");
  if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");

  ExperimentReport report;
  report.seeds.assign(seeds.begin(), seeds.end());

  auto run_scheme = [&](std::uint64_t seed, const SimulatedLearner& init, bool online,
                        const char* tag) {
    SimulatedLearner learner = init;
    learner.reset_exposures();
    WeightMap map(config.dims);
    Rng rng = Rng(seed).derive(tag);
    std::vector<double> curve;
    curve.reserve(static_cast<std::size_t>(config.epochs));
    EpochConfig epoch_cfg = config.epoch;
    epoch_cfg.online = online;
    for (int e = 0; e < config.epochs; ++e) {
      run_epoch(map, learner, epoch_cfg, rng, e);
      curve.push_back(learner.evaluation_error());
    }
    return std::pair{std::move(curve), std::move(map)};
  };

  for (std::size_t s = 0; s < seeds.size(); ++s) {
    Rng learner_rng = Rng(seeds[s]).derive("learner");
    const SimulatedLearner init = SimulatedLearner::make(config.dims, config.learner, learner_rng);
    auto [online_curve, online_map] = run_scheme(seeds[s], init, config.online_enabled, "online");
    auto [uniform_curve, uniform_map] = run_scheme(seeds[s], init, false, "uniform");
    if (s == 0) {
      report.online_final_map = std::move(online_map);
      report.uniform_final_map = std::move(uniform_map);
    }
    report.online_curves.push_back(std::move(online_curve));
    report.uniform_curves.push_back(std::move(uniform_curve));
  }

  report.online_mean.assign(static_cast<std::size_t>(config.epochs), 0.0);
  report.uniform_mean.assign(static_cast<std::size_t>(config.epochs), 0.0);
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    for (int e = 0; e < config.epochs; ++e) {
      report.online_mean[static_cast<std::size_t>(e)] += report.online_curves[s][static_cast<std::size_t>(e)];
      report.uniform_mean[static_cast<std::size_t>(e)] += report.uniform_curves[s][static_cast<std::size_t>(e)];
    }
  }
  for (int e = 0; e < config.epochs; ++e) {
    report.online_mean[static_cast<std::size_t>(e)] /= static_cast<double>(seeds.size());
    report.uniform_mean[static_cast<std::size_t>(e)] /= static_cast<double>(seeds.size());
    if (report.online_first_reach < 0 && report.online_mean[static_cast<std::size_t>(e)] <= config.target_error)
      report.online_first_reach = e;
    if (report.uniform_first_reach < 0 && report.uniform_mean[static_cast<std::size_t>(e)] <= config.target_error)
      report.uniform_first_reach = e;
  }

  int wins = 0, effective = 0;
  const auto last = static_cast<std::size_t>(config.epochs - 1);
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const double diff = report.uniform_curves[s][last] - report.online_curves[s][last];
    if (diff > 0.0) {
      ++wins;
      ++effective;
    } else if (diff < 0.0) {
      ++effective;
    }
  }
  report.sign_test_p = sign_test_p_value(wins, effective);
  return report;
}

}  // namespace hovsyn
