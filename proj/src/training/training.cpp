#include "lumiswap/training.hpp"

#include <fstream>
#include <iostream>

#include "lumiswap/checkpoint.hpp"

namespace lumiswap {

namespace fs = std::filesystem;

namespace {

std::vector<double> widen(std::span<const float> v) { return {v.begin(), v.end()}; }

// Interleaved double image gradient to a CHW float tensor.
Tensor image_grad_to_tensor(std::span<const double> g, int height, int width) {
  Tensor t(3, height, width);
  const std::size_t n = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < 3; ++c) {
    float* dst = t.channel(c);
    for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<float>(g[3 * i + c]);
  }
  return t;
}

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

LossReport& accumulate(LossReport& acc, const LossReport& r, double w) {
  acc.l_r += w * r.l_r;
  acc.l_f_c += w * r.l_f_c;
  acc.l_f_l += w * r.l_f_l;
  acc.l_c_h += w * r.l_c_h;
  acc.l_c_s += w * r.l_c_s;
  acc.total += w * r.total;
  return acc;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigurationError("learning rate must be > 0");
  if (batch_size < 1) throw ConfigurationError("batch size must be >= 1");
  if (epochs < 1) throw ConfigurationError("epochs must be >= 1");
  if (crop && *crop < 1) throw ConfigurationError("crop must be >= 1");
  if (crop && *crop % arch.stride() != 0) {
    throw ConfigurationError("crop must be a multiple of " + std::to_string(arch.stride()));
  }
  if (checkpoint_every < 0) throw ConfigurationError("checkpoint interval must be >= 0");
  if (swap.size < 1) throw ConfigurationError("patch size must be >= 1");
  if (!(swap.probability >= 0.0 && swap.probability <= 1.0)) {
    throw ConfigurationError("patch probability must be in [0,1]");
  }
  losses().validate();
  arch.validate();
}

AugmentOptions TrainConfig::augment() const {
  AugmentOptions opts;
  opts.crop = crop;
  opts.flip = flip;
  opts.patch_swap = patch_swap;
  opts.swap = swap;
  return opts;
}

TrainState init_state(const ArchSpec& arch, std::uint64_t seed) {
  TrainState s;
  s.params = init_params(arch, seed);
  s.adam_m.assign(s.params.values().size(), 0.0f);
  s.adam_v.assign(s.params.values().size(), 0.0f);
  s.seed = seed;
  return s;
}

ImagePair trim_to_stride(const ImagePair& pair, int stride) {
  const int h = pair.low.height() / stride * stride;
  const int w = pair.low.width() / stride * stride;
  if (h == 0 || w == 0) {
    throw DimensionError("pair " + pair.id + " is smaller than the network stride " + std::to_string(stride));
  }
  if (h == pair.low.height() && w == pair.low.width()) return pair;
  return {crop(pair.low, 0, 0, h, w), crop(pair.ref, 0, 0, h, w), pair.id};
}

LossReport sample_gradients(const ModelParams& params, const ImagePair& pair, const LossConfig& cfg, double weight,
                            ParamGrads& grads) {
  const ArchSpec& arch = params.arch();
  const int cd = arch.content_dim();
  require_same_shape(pair.low, pair.ref, "training pair");

  EncoderTape enc_low, enc_ref, enc_pred;
  encode_forward(to_tensor(pair.low), params, enc_low);
  encode_forward(to_tensor(pair.ref), params, enc_ref);

  std::vector<float> fused(enc_low.latent.begin(), enc_low.latent.begin() + cd);
  fused.insert(fused.end(), enc_ref.latent.begin() + cd, enc_ref.latent.end());
  std::vector<float> channel_vector;
  Tensor map;
  expand_forward(fused, enc_low.bottleneck(), params, channel_vector, map);
  DecoderTape dec;
  const auto skips = skip_refs(enc_low);
  decode_forward(map, skips, params, dec);

  encode_forward(dec.output, params, enc_pred);

  const ImageRGB pred = to_image(dec.output);
  const auto lat_low = widen(enc_low.latent);
  const auto lat_ref = widen(enc_ref.latent);
  const auto lat_pred = widen(enc_pred.latent);
  const auto c = [cd](const std::vector<double>& v) { return std::span<const double>(v).first(cd); };
  const auto l = [cd](const std::vector<double>& v) { return std::span<const double>(v).subspan(cd); };
  const LossInputs in{pred, pair.low, pair.ref, c(lat_pred), c(lat_low), l(lat_pred), l(lat_ref), l(lat_low)};
  LossGradients lg;
  const LossReport report = evaluate_losses(in, cfg, &lg);

  // second pass: prediction → (c_p, l_p)
  std::vector<float> dlat_pred(arch.latent_dim);
  for (int i = 0; i < cd; ++i) dlat_pred[i] = static_cast<float>(weight * lg.c_p[i]);
  for (int i = cd; i < arch.latent_dim; ++i) dlat_pred[i] = static_cast<float>(weight * lg.l_p[i - cd]);
  Tensor dpred_from_features;
  encode_backward(enc_pred, params, dlat_pred, nullptr, grads, &dpred_from_features);

  std::vector<double> dpred_pixels(lg.pred.size());
  for (std::size_t i = 0; i < dpred_pixels.size(); ++i) dpred_pixels[i] = weight * lg.pred[i];
  Tensor dpred = image_grad_to_tensor(dpred_pixels, pred.height(), pred.width());
  add_into(dpred, dpred_from_features);

  Tensor dmap;
  std::vector<Tensor> dskips;
  decode_backward(dec, params, dpred, grads, dmap, dskips);
  std::vector<float> dfused(arch.latent_dim);
  expand_backward(fused, dmap, params, grads, dfused);

  std::vector<float> dlat_low(arch.latent_dim), dlat_ref(arch.latent_dim, 0.0f);
  for (int i = 0; i < cd; ++i) dlat_low[i] = dfused[i] + static_cast<float>(weight * lg.c_i[i]);
  for (int i = cd; i < arch.latent_dim; ++i) {
    dlat_low[i] = static_cast<float>(weight * lg.l_i[i - cd]);
    dlat_ref[i] = dfused[i] + static_cast<float>(weight * lg.l_r[i - cd]);
  }
  encode_backward(enc_low, params, dlat_low, &dskips, grads, nullptr);
  encode_backward(enc_ref, params, dlat_ref, nullptr, grads, nullptr);
  return report;
}

LossReport batch_gradients(const ModelParams& params, std::span<const ImagePair> batch, const LossConfig& cfg,
                           ParamGrads& grads) {
  if (batch.empty()) throw ArgumentError("empty batch");
  grads.assign(params.values().size(), 0.0f);
  const double w = 1.0 / static_cast<double>(batch.size());
  LossReport mean;
  for (const auto& pair : batch) accumulate(mean, sample_gradients(params, pair, cfg, w, grads), w);
  return mean;
}

LossReport train_step(TrainState& state, std::span<const ImagePair> batch, const TrainConfig& cfg) {
  ParamGrads grads;
  const LossReport report = batch_gradients(state.params, batch, cfg.losses(), grads);
  for (float g : grads) {
    if (!std::isfinite(g)) throw NumericError("non-finite gradient at step " + std::to_string(state.step + 1));
  }
  const std::int64_t t = state.step + 1;
  adam_update<float>(state.params.values(), grads, state.adam_m, state.adam_v, t, cfg.adam());
  if (!state.params.all_finite()) throw NumericError("non-finite weights after step " + std::to_string(t));
  state.step = t;
  state.params.step = t;
  return report;
}

PairSource PairSource::from_memory(std::vector<ImagePair> pairs) {
  auto shared = std::make_shared<const std::vector<ImagePair>>(std::move(pairs));
  return {shared->size(), [shared](std::size_t i) { return (*shared)[i]; }};
}

PairSource PairSource::from_files(std::vector<PairFiles> files) {
  auto shared = std::make_shared<const std::vector<PairFiles>>(std::move(files));
  return {shared->size(), [shared](std::size_t i) { return load_pairs(std::span(&(*shared)[i], 1)).front(); }};
}

TrainResult train_on(const PairSource& source, const TrainConfig& cfg, TrainState state, const StepCallback& on_step) {
  cfg.validate();
  if (source.count == 0) throw ArgumentError("training split is empty");
  if (!(state.params.arch() == cfg.arch)) {
    throw ConfigurationError("state architecture " + state.params.arch().summary() + " differs from config " +
                             cfg.arch.summary());
  }
  const std::size_t per_epoch = batches_per_epoch(source.count, cfg.batch_size);
  const std::int64_t total_steps = static_cast<std::int64_t>(per_epoch) * cfg.epochs;
  const std::int64_t stop_at = cfg.max_steps ? std::min(*cfg.max_steps, total_steps) : total_steps;

  fs::path log_path = cfg.log_path;
  if (log_path.empty() && !cfg.out_dir.empty()) log_path = cfg.out_dir / "train_log.jsonl";
  if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, state.step == 0 ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("cannot open training log " + log_path.string());
  }

  TrainResult result;
  const AugmentOptions aug = cfg.augment();
  std::vector<std::string> warnings;
  std::vector<std::vector<std::size_t>> plan;
  std::int64_t plan_epoch = -1;
  bool stop = false;
  while (state.step < stop_at && !stop) {
    const std::int64_t epoch = state.step / static_cast<std::int64_t>(per_epoch);
    const std::size_t b = static_cast<std::size_t>(state.step % static_cast<std::int64_t>(per_epoch));
    if (epoch != plan_epoch) {
      plan = epoch_batches(source.count, cfg.batch_size, state.seed, epoch);
      plan_epoch = epoch;
    }
    std::vector<ImagePair> members;
    for (std::size_t i : plan[b]) members.push_back(source.get(i));
    Rng rng(mix_seed(mix_seed(state.seed, static_cast<std::uint64_t>(epoch)), b + 0x1000));
    warnings.clear();
    auto batch = prepare_batch(members, aug, rng, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    for (auto& p : batch) p = trim_to_stride(p, cfg.arch.stride());

    const LossReport report = train_step(state, batch, cfg);
    state.epoch = state.step / static_cast<std::int64_t>(per_epoch);
    ++result.steps_run;
    if (log.is_open()) {
      log << to_json_line(state.step, report) << '\n';
      log.flush();
      if (!log) throw IoError("write failed on training log " + log_path.string());
    }
    if (on_step && !on_step(state, report)) stop = true;
    if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0) {
      result.checkpoint = checkpoint_name(cfg.out_dir, state.step);
      save_checkpoint(state, result.checkpoint);
    }
  }
  result.stopped = state.step < total_steps;
  if (!cfg.out_dir.empty()) {
    const fs::path final_path = checkpoint_name(cfg.out_dir, state.step);
    if (result.checkpoint != final_path) {
      save_checkpoint(state, final_path);
      result.checkpoint = final_path;
    }
  }
  result.state = std::move(state);
  return result;
}

fs::path train(const TrainConfig& cfg, const std::optional<fs::path>& resume) {
  cfg.validate();
  if (cfg.out_dir.empty()) throw ConfigurationError("training needs an output directory");
  const auto index = index_lol(cfg.data_root, cfg.train_count);
  if (index.train.empty()) throw ArgumentError("training split of " + cfg.data_root.string() + " is empty");
  TrainState state = resume ? load_checkpoint(*resume, cfg.arch) : init_state(cfg.arch, cfg.seed);
  if (resume && state.adam_m.empty()) {
    throw FormatError("checkpoint " + resume->string() + " has no optimizer moments; cannot resume");
  }
  return train_on(PairSource::from_files(index.train), cfg, std::move(state)).checkpoint;
}

}  // namespace lumiswap
