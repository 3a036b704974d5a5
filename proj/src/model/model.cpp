#include "lumiswap/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "lumiswap/error.hpp"
#include "lumiswap/kernels.hpp"

namespace lumiswap {

namespace k = kernels;

void ArchSpec::validate() const {
  if (depth < 1 || depth > 8) throw ConfigurationError("arch: depth must be in [1, 8], got " + std::to_string(depth));
  if (base_channels < 1) throw ConfigurationError("arch: base_channels must be positive");
  if (latent_dim < 2) throw ConfigurationError("arch: latent_dim must be at least 2");
  if (luminance_dim <= 0 || luminance_dim >= latent_dim) {
    throw ConfigurationError("arch: need 0 < luminance_dim < latent_dim, got luminance_dim=" +
                             std::to_string(luminance_dim) + " latent_dim=" + std::to_string(latent_dim));
  }
}

std::string ArchSpec::summary() const {
  return "depth=" + std::to_string(depth) + " base_channels=" + std::to_string(base_channels) +
         " latent_dim=" + std::to_string(latent_dim) + " luminance_dim=" + std::to_string(luminance_dim);
}

ModelParams::ModelParams(const ArchSpec& arch) : arch_(arch) {
  arch.validate();
  int in = 3;
  for (int s = 0; s < arch.depth; ++s) {
    const int ch = arch.stage_channels(s);
    const std::string p = "enc.s" + std::to_string(s);
    layout_.encoder.push_back({add_conv(p + ".conv1", in, ch, 3), add_conv(p + ".conv2", ch, ch, 3)});
    in = ch;
  }
  const int bc = arch.bottleneck_channels();
  layout_.middle = {add_conv("enc.mid.conv1", bc, bc, 3), add_conv("enc.mid.conv2", bc, bc, 3)};
  layout_.projection = add_linear("enc.proj", bc, arch.latent_dim);
  layout_.fc = add_linear("fc", arch.latent_dim, bc);
  layout_.up.resize(arch.depth);
  layout_.decoder.resize(arch.depth);
  int coarse = bc;
  for (int s = arch.depth - 1; s >= 0; --s) {
    const int ch = arch.stage_channels(s);
    const std::string p = "dec.s" + std::to_string(s);
    layout_.up[s] = add_conv(p + ".up", coarse, ch, 3);
    layout_.decoder[s] = {add_conv(p + ".conv1", 2 * ch, ch, 3), add_conv(p + ".conv2", ch, ch, 3)};
    coarse = ch;
  }
  layout_.output = add_conv("dec.out", arch.stage_channels(0), 3, 1);
}

std::size_t ModelParams::add(const std::string& name, std::vector<int> shape) {
  std::size_t size = 1;
  for (int d : shape) size *= static_cast<std::size_t>(d);
  entries_.push_back(ParamEntry{name, std::move(shape), values_.size(), size});
  values_.resize(values_.size() + size, 0.0f);
  return entries_.size() - 1;
}

ConvLayer ModelParams::add_conv(const std::string& name, int in, int out, int ksize) {
  const auto w = add(name + ".weight", {out, in, ksize, ksize});
  const auto b = add(name + ".bias", {out});
  return ConvLayer{w, b, in, out, ksize};
}

LinearLayer ModelParams::add_linear(const std::string& name, int in, int out) {
  const auto w = add(name + ".weight", {out, in});
  const auto b = add(name + ".bias", {out});
  return LinearLayer{w, b, in, out};
}

std::optional<std::size_t> ModelParams::find(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  return std::nullopt;
}

std::uint64_t ModelParams::checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(values_.data());
  for (std::size_t i = 0; i < values_.size() * sizeof(float); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

bool ModelParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](float v) { return std::isfinite(v); });
}

ModelParams init_params(const ArchSpec& arch, std::uint64_t seed) {
  ModelParams params(arch);
  std::mt19937_64 rng(seed);
  // 53 random bits to [0,1); avoids implementation-defined distributions.
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  const Layout& lay = params.layout();
  auto fill = [&](std::size_t entry, int fan_in, double gain) {
    const double bound = gain * std::sqrt(3.0 / fan_in);
    for (float& v : params.tensor(entry)) v = static_cast<float>((2.0 * uniform() - 1.0) * bound);
  };
  // He gain for the leaky activation that follows every conv except the last.
  const double leaky_gain = std::sqrt(2.0 / (1.0 + k::kLeakySlope * k::kLeakySlope));
  auto conv = [&](const ConvLayer& c, double gain) { fill(c.weight, c.in * c.ksize * c.ksize, gain); };
  for (const auto& stage : lay.encoder)
    for (const auto& c : stage) conv(c, leaky_gain);
  for (const auto& c : lay.middle) conv(c, leaky_gain);
  fill(lay.projection.weight, lay.projection.in, 1.0);
  fill(lay.fc.weight, lay.fc.in, 1.0);
  for (const auto& c : lay.up) conv(c, leaky_gain);
  for (const auto& stage : lay.decoder)
    for (const auto& c : stage) conv(c, leaky_gain);
  conv(lay.output, 1.0);
  return params;
}

namespace {

void conv_act(const Tensor& in, const ModelParams& p, const ConvLayer& layer, Tensor& out) {
  k::conv2d_forward(in, p.tensor(layer.weight), p.tensor(layer.bias), layer.out, layer.ksize, out);
  k::leaky_relu_forward(out);
}

// grad holds dL/d(output of conv_act); on return it is dL/d(input).
void conv_act_backward(const Tensor& in, const Tensor& out, const ModelParams& p, const ConvLayer& layer,
                       ParamGrads& grads, Tensor& grad, bool need_input_grad) {
  k::leaky_relu_backward(out, grad);
  Tensor din;
  k::conv2d_backward(in, p.tensor(layer.weight), layer.ksize, grad, need_input_grad ? &din : nullptr,
                     grad_of(grads, p, layer.weight), grad_of(grads, p, layer.bias));
  grad = std::move(din);
}

}  // namespace

void encode_forward(const Tensor& x, const ModelParams& params, EncoderTape& tape) {
  const ArchSpec& arch = params.arch();
  const Layout& lay = params.layout();
  if (x.channels != 3) throw DimensionError("encode: expected 3 channels");
  if (x.height % arch.stride() != 0 || x.width % arch.stride() != 0) {
    throw DimensionError("encode: sides " + std::to_string(x.height) + "x" + std::to_string(x.width) +
                         " not divisible by " + std::to_string(arch.stride()));
  }
  tape.stages.resize(arch.depth);
  tape.stages[0].input = x;
  for (int s = 0; s < arch.depth; ++s) {
    auto& st = tape.stages[s];
    conv_act(st.input, params, lay.encoder[s][0], st.act1);
    conv_act(st.act1, params, lay.encoder[s][1], st.act2);
    Tensor& next = s + 1 < arch.depth ? tape.stages[s + 1].input : tape.middle.input;
    k::maxpool2_forward(st.act2, next, st.argmax);
  }
  conv_act(tape.middle.input, params, lay.middle[0], tape.middle.act1);
  conv_act(tape.middle.act1, params, lay.middle[1], tape.middle.act2);
  tape.pooled = k::global_avg_pool_forward(tape.middle.act2);
  tape.latent.assign(arch.latent_dim, 0.0f);
  k::linear_forward(tape.pooled, params.tensor(lay.projection.weight), params.tensor(lay.projection.bias),
                    tape.latent);
}

void encode_backward(const EncoderTape& tape, const ModelParams& params, std::span<const float> dlatent,
                     const std::vector<Tensor>* dskips, ParamGrads& grads, Tensor* dinput) {
  const ArchSpec& arch = params.arch();
  const Layout& lay = params.layout();
  std::vector<float> dpooled(tape.pooled.size());
  k::linear_backward(tape.pooled, params.tensor(lay.projection.weight), dlatent, dpooled,
                     grad_of(grads, params, lay.projection.weight), grad_of(grads, params, lay.projection.bias));
  Tensor grad;
  k::global_avg_pool_backward(dpooled, tape.middle.act2.height, tape.middle.act2.width, grad);
  conv_act_backward(tape.middle.act1, tape.middle.act2, params, lay.middle[1], grads, grad, true);
  conv_act_backward(tape.middle.input, tape.middle.act1, params, lay.middle[0], grads, grad, true);

  for (int s = arch.depth - 1; s >= 0; --s) {
    const auto& st = tape.stages[s];
    Tensor dact2;
    k::maxpool2_backward(grad, st.argmax, st.act2.height, st.act2.width, dact2);
    if (dskips != nullptr && !(*dskips)[s].data.empty()) {
      const Tensor& ds = (*dskips)[s];
      if (!ds.same_shape(dact2)) throw DimensionError("encode_backward: skip gradient shape");
      for (std::size_t i = 0; i < dact2.size(); ++i) dact2.data[i] += ds.data[i];
    }
    grad = std::move(dact2);
    conv_act_backward(st.act1, st.act2, params, lay.encoder[s][1], grads, grad, true);
    const bool need_input = s > 0 || dinput != nullptr;
    conv_act_backward(st.input, st.act1, params, lay.encoder[s][0], grads, grad, need_input);
  }
  if (dinput != nullptr) *dinput = std::move(grad);
}

std::vector<const Tensor*> skip_refs(const EncoderTape& tape) {
  std::vector<const Tensor*> out;
  for (const auto& st : tape.stages) out.push_back(&st.act2);
  return out;
}

std::vector<const Tensor*> skip_refs(const SkipStack& skips) {
  std::vector<const Tensor*> out;
  for (const auto& m : skips.maps) out.push_back(&m);
  return out;
}

void decode_forward(const Tensor& map, std::span<const Tensor* const> skips, const ModelParams& params,
                    DecoderTape& tape) {
  const ArchSpec& arch = params.arch();
  const Layout& lay = params.layout();
  if (static_cast<int>(skips.size()) != arch.depth) throw DimensionError("decode: skip stack has wrong depth");
  for (int s = 0; s < arch.depth; ++s) {
    const Tensor& sk = *skips[s];
    if (sk.channels != arch.stage_channels(s) || sk.height != skips[0]->height >> s ||
        sk.width != skips[0]->width >> s) {
      throw DimensionError("decode: skip map " + std::to_string(s) + " has inconsistent shape");
    }
  }
  const Tensor& deepest = *skips[arch.depth - 1];
  if (map.channels != arch.bottleneck_channels() || map.height * 2 != deepest.height ||
      map.width * 2 != deepest.width) {
    throw DimensionError("decode: bottleneck map does not match the skip stack");
  }
  tape.stages.resize(arch.depth);
  const Tensor* cur = &map;
  for (int s = arch.depth - 1; s >= 0; --s) {
    auto& st = tape.stages[s];
    k::upsample2_forward(*cur, st.up);
    conv_act(st.up, params, lay.up[s], st.up_act);
    k::concat_channels(st.up_act, *skips[s], st.cat);
    conv_act(st.cat, params, lay.decoder[s][0], st.act1);
    conv_act(st.act1, params, lay.decoder[s][1], st.act2);
    cur = &st.act2;
  }
  const ConvLayer& out = lay.output;
  k::conv2d_forward(*cur, params.tensor(out.weight), params.tensor(out.bias), out.out, out.ksize, tape.output);
  k::sigmoid_forward(tape.output);
}

void decode_backward(const DecoderTape& tape, const ModelParams& params, const Tensor& dout, ParamGrads& grads,
                     Tensor& dmap, std::vector<Tensor>& dskips) {
  const ArchSpec& arch = params.arch();
  const Layout& lay = params.layout();
  Tensor grad = dout;
  k::sigmoid_backward(tape.output, grad);
  {
    const ConvLayer& out = lay.output;
    Tensor din;
    k::conv2d_backward(tape.stages[0].act2, params.tensor(out.weight), out.ksize, grad, &din,
                       grad_of(grads, params, out.weight), grad_of(grads, params, out.bias));
    grad = std::move(din);
  }
  dskips.resize(arch.depth);
  for (int s = 0; s < arch.depth; ++s) {
    const auto& st = tape.stages[s];
    conv_act_backward(st.act1, st.act2, params, lay.decoder[s][1], grads, grad, true);
    conv_act_backward(st.cat, st.act1, params, lay.decoder[s][0], grads, grad, true);
    Tensor dup_act;
    k::split_channels(grad, st.up_act.channels, dup_act, dskips[s]);
    conv_act_backward(st.up, st.up_act, params, lay.up[s], grads, dup_act, true);
    k::upsample2_backward(dup_act, grad);
  }
  dmap = std::move(grad);
}

void expand_forward(std::span<const float> latent, const BottleneckShape& shape, const ModelParams& params,
                    std::vector<float>& channel_vector, Tensor& map) {
  const LinearLayer& fc = params.layout().fc;
  if (static_cast<int>(latent.size()) != fc.in) throw DimensionError("expand: latent length mismatch");
  if (shape.channels != fc.out) throw DimensionError("expand: bottleneck channel mismatch");
  channel_vector.assign(fc.out, 0.0f);
  k::linear_forward(latent, params.tensor(fc.weight), params.tensor(fc.bias), channel_vector);
  k::broadcast_forward(channel_vector, shape.height, shape.width, map);
}

void expand_backward(std::span<const float> latent, const Tensor& dmap, const ModelParams& params,
                     ParamGrads& grads, std::span<float> dlatent) {
  const LinearLayer& fc = params.layout().fc;
  std::vector<float> dvec(fc.out);
  k::broadcast_backward(dmap, dvec);
  k::linear_backward(latent, params.tensor(fc.weight), dvec, dlatent, grad_of(grads, params, fc.weight),
                     grad_of(grads, params, fc.bias));
}

Tensor to_tensor(const ImageRGB& img) {
  Tensor t(3, img.height(), img.width());
  const auto px = img.values();
  const std::size_t n = img.pixel_count();
  for (int c = 0; c < 3; ++c) {
    float* dst = t.channel(c);
    for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<float>(px[3 * i + c]);
  }
  return t;
}

ImageRGB to_image(const Tensor& t) {
  if (t.channels != 3) throw DimensionError("to_image: expected 3 channels");
  ImageRGB img(t.height, t.width);
  auto px = img.values();
  const std::size_t n = img.pixel_count();
  for (int c = 0; c < 3; ++c) {
    const float* src = t.channel(c);
    for (std::size_t i = 0; i < n; ++i) px[3 * i + c] = src[i];
  }
  return img;
}

namespace {

// Mirror index without repeating the edge sample; period 2(n-1).
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

int round_up(int v, int multiple) { return (v + multiple - 1) / multiple * multiple; }

}  // namespace

ImageRGB reflect_pad(const ImageRGB& img, int multiple) {
  const int h = round_up(img.height(), multiple);
  const int w = round_up(img.width(), multiple);
  if (h == img.height() && w == img.width()) return img;
  ImageRGB out(h, w);
  for (int y = 0; y < h; ++y) {
    const int sy = reflect_index(y, img.height());
    for (int x = 0; x < w; ++x) {
      const int sx = reflect_index(x, img.width());
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

EncodeResult encode(const ImageRGB& img, const ModelParams& params) {
  EncoderTape tape;
  encode_forward(to_tensor(img), params, tape);
  EncodeResult r;
  r.latent = LatentVector{std::move(tape.latent), params.arch().content_dim()};
  r.bottleneck = tape.bottleneck();
  for (auto& st : tape.stages) r.skips.maps.push_back(std::move(st.act2));
  return r;
}

std::pair<std::vector<float>, std::vector<float>> split(const LatentVector& f) {
  const auto c = f.content();
  const auto l = f.luminance();
  return {std::vector<float>(c.begin(), c.end()), std::vector<float>(l.begin(), l.end())};
}

LatentVector concat_features(std::span<const float> content, std::span<const float> luminance) {
  if (content.empty() || luminance.empty()) throw DimensionError("concat_features: empty component");
  LatentVector f;
  f.values.reserve(content.size() + luminance.size());
  f.values.insert(f.values.end(), content.begin(), content.end());
  f.values.insert(f.values.end(), luminance.begin(), luminance.end());
  f.content_dim = static_cast<int>(content.size());
  return f;
}

LatentVector concat_features(std::span<const float> content, std::span<const float> luminance,
                             const ArchSpec& arch) {
  if (static_cast<int>(content.size()) != arch.content_dim() ||
      static_cast<int>(luminance.size()) != arch.luminance_dim) {
    throw DimensionError("concat_features: expected " + std::to_string(arch.content_dim()) + "+" +
                         std::to_string(arch.luminance_dim) + " entries, got " + std::to_string(content.size()) +
                         "+" + std::to_string(luminance.size()));
  }
  return concat_features(content, luminance);
}

Tensor expand(const LatentVector& f, const BottleneckShape& shape, const ModelParams& params) {
  std::vector<float> vec;
  Tensor map;
  expand_forward(f.values, shape, params, vec, map);
  return map;
}

ImageRGB decode(const Tensor& map, const SkipStack& skips, const ModelParams& params) {
  DecoderTape tape;
  const auto refs = skip_refs(skips);
  decode_forward(map, refs, params, tape);
  return to_image(tape.output);
}

std::vector<float> luminance_of(const ImageRGB& img, const ModelParams& params) {
  EncoderTape tape;
  encode_forward(to_tensor(reflect_pad(img, params.arch().stride())), params, tape);
  return std::vector<float>(tape.latent.begin() + params.arch().content_dim(), tape.latent.end());
}

ImageRGB enhance_with_luminance(const ImageRGB& low, std::span<const float> luminance, const ModelParams& params) {
  const ArchSpec& arch = params.arch();
  EncoderTape tape;
  encode_forward(to_tensor(reflect_pad(low, arch.stride())), params, tape);
  const auto z = concat_features(std::span<const float>(tape.latent).first(arch.content_dim()), luminance, arch);
  std::vector<float> vec;
  Tensor map;
  expand_forward(z.values, tape.bottleneck(), params, vec, map);
  DecoderTape dtape;
  const auto refs = skip_refs(tape);
  decode_forward(map, refs, params, dtape);
  const ImageRGB full = to_image(dtape.output);
  return crop(full, 0, 0, low.height(), low.width());
}

ImageRGB enhance(const ImageRGB& low, const ImageRGB& ref, const ModelParams& params) {
  const auto l_ref = luminance_of(ref, params);
  return enhance_with_luminance(low, l_ref, params);
}

}  // namespace lumiswap
