#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "lumiswap/data.hpp"
#include "lumiswap/error.hpp"
#include "lumiswap/losses.hpp"
#include "lumiswap/model.hpp"

namespace lumiswap {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected Adam update at step t ≥ 1. Moments are updated in place.
template <class T>
void adam_update(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v, std::int64_t t,
                 const AdamConfig& cfg) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
    throw DimensionError("adam_update: buffer sizes differ");
  }
  if (t < 1) throw ArgumentError("adam_update: step must be >= 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    if (cfg.learning_rate != 0.0) {
      params[i] = static_cast<T>(params[i] - cfg.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + cfg.epsilon));
    }
  }
}

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 8;
  int epochs = 1000;
  double lambda_f = 2.0;
  double alpha_margin = 0.08;
  std::uint64_t seed = 0;
  std::optional<int> crop;
  int checkpoint_every = 1000;  // steps; 0 writes only the final checkpoint
  std::filesystem::path log_path;  // empty: <out_dir>/train_log.jsonl, or no log without out_dir
  std::filesystem::path data_root;
  std::filesystem::path out_dir;  // empty: no checkpoints
  ArchSpec arch;

  std::optional<int> train_count;  // split override
  bool flip = true;
  bool patch_swap = true;
  PatchSwapOptions swap;
  std::optional<std::int64_t> max_steps;  // stop early, counted in total steps

  // Throws ConfigurationError.
  void validate() const;
  LossConfig losses() const { return {lambda_f, alpha_margin}; }
  AdamConfig adam() const { return {learning_rate}; }
  AugmentOptions augment() const;
};

// Batches are drawn from (seed, epoch, batch index), so the step counter and
// the seed are the whole random state.
struct TrainState {
  ModelParams params;
  std::vector<float> adam_m;
  std::vector<float> adam_v;
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  std::uint64_t seed = 0;
};

TrainState init_state(const ArchSpec& arch, std::uint64_t seed);

// Drops bottom rows and right columns so both sides are multiples of `stride`.
ImagePair trim_to_stride(const ImagePair& pair, int stride);

// Forward with the second encoding pass, losses, and backward for one pair.
// Adds weight·∂total/∂θ to grads.
LossReport sample_gradients(const ModelParams& params, const ImagePair& pair, const LossConfig& cfg, double weight,
                            ParamGrads& grads);
// Loss and gradient averaged over the batch.
LossReport batch_gradients(const ModelParams& params, std::span<const ImagePair> batch, const LossConfig& cfg,
                           ParamGrads& grads);

// One Adam step on the batch-averaged objective. Throws NumericError naming a
// non-finite loss term, or when the update produces non-finite weights.
LossReport train_step(TrainState& state, std::span<const ImagePair> batch, const TrainConfig& cfg);

// Random access to training pairs, loaded on demand.
struct PairSource {
  std::size_t count = 0;
  std::function<ImagePair(std::size_t)> get;

  static PairSource from_memory(std::vector<ImagePair> pairs);
  static PairSource from_files(std::vector<PairFiles> files);
};

// Called after every step; return false to stop.
using StepCallback = std::function<bool(const TrainState&, const LossReport&)>;

struct TrainResult {
  TrainState state;
  std::filesystem::path checkpoint;  // empty when out_dir is empty
  std::int64_t steps_run = 0;
  bool stopped = false;  // by max_steps or the callback
};

// Runs from `state` (fresh or resumed) to the end of cfg.epochs, appending one
// JSON line per step to the log.
TrainResult train_on(const PairSource& source, const TrainConfig& cfg, TrainState state,
                     const StepCallback& on_step = {});

// Loads the training split of cfg.data_root and trains, optionally resuming
// from a checkpoint. Returns the final checkpoint path.
std::filesystem::path train(const TrainConfig& cfg, const std::optional<std::filesystem::path>& resume = std::nullopt);

}  // namespace lumiswap
