#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lumiswap/image.hpp"
#include "lumiswap/tensor.hpp"

namespace lumiswap {

// Shape of the U-shaped encoder/decoder. Stage s (0 = finest) has
// base_channels·2^s channels; the bottleneck keeps the deepest stage's width.
struct ArchSpec {
  int depth = 4;
  int base_channels = 32;
  int latent_dim = 256;
  int luminance_dim = 32;

  int content_dim() const noexcept { return latent_dim - luminance_dim; }
  int stage_channels(int stage) const noexcept { return base_channels << stage; }
  int bottleneck_channels() const noexcept { return stage_channels(depth - 1); }
  // Input sides must be a multiple of this.
  int stride() const noexcept { return 1 << depth; }

  // Throws ConfigurationError.
  void validate() const;
  std::string summary() const;

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

struct BottleneckShape {
  int height = 0;
  int width = 0;
  int channels = 0;
  friend bool operator==(const BottleneckShape&, const BottleneckShape&) = default;
};

// Latent feature f = [c ‖ l]: the first content_dim entries are the content
// component, the rest the luminance component.
struct LatentVector {
  std::vector<float> values;
  int content_dim = 0;

  std::span<const float> content() const { return std::span<const float>(values).first(content_dim); }
  std::span<const float> luminance() const { return std::span<const float>(values).subspan(content_dim); }
  int luminance_dim() const { return static_cast<int>(values.size()) - content_dim; }

  friend bool operator==(const LatentVector&, const LatentVector&) = default;
};

// Encoder activations handed to the decoder, finest stage first.
struct SkipStack {
  std::vector<Tensor> maps;
};

struct ParamEntry {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

struct ConvLayer {
  std::size_t weight = 0;  // entry indices
  std::size_t bias = 0;
  int in = 0;
  int out = 0;
  int ksize = 3;
};

struct LinearLayer {
  std::size_t weight = 0;
  std::size_t bias = 0;
  int in = 0;
  int out = 0;
};

struct Layout {
  std::vector<std::array<ConvLayer, 2>> encoder;  // per stage
  std::array<ConvLayer, 2> middle;                // bottleneck block
  LinearLayer projection;                         // pooled bottleneck -> latent
  LinearLayer fc;                                 // latent -> bottleneck channels
  std::vector<ConvLayer> up;                      // per decoder stage
  std::vector<std::array<ConvLayer, 2>> decoder;  // per decoder stage
  ConvLayer output;                               // 1×1 to RGB
};

// Every learnable weight in one flat float buffer, addressed by named entries.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(const ArchSpec& arch);

  const ArchSpec& arch() const noexcept { return arch_; }
  const Layout& layout() const noexcept { return layout_; }
  const std::vector<ParamEntry>& entries() const noexcept { return entries_; }

  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }
  std::span<float> tensor(std::size_t entry) { return values().subspan(entries_[entry].offset, entries_[entry].size); }
  std::span<const float> tensor(std::size_t entry) const {
    return values().subspan(entries_[entry].offset, entries_[entry].size);
  }
  std::optional<std::size_t> find(const std::string& name) const;

  // FNV-1a over the raw weight bytes.
  std::uint64_t checksum() const;
  bool all_finite() const;

  std::int64_t step = 0;

 private:
  std::size_t add(const std::string& name, std::vector<int> shape);
  ConvLayer add_conv(const std::string& name, int in, int out, int ksize);
  LinearLayer add_linear(const std::string& name, int in, int out);

  ArchSpec arch_;
  Layout layout_;
  std::vector<ParamEntry> entries_;
  std::vector<float> values_;
};

// Gradient buffer with the same layout as ModelParams::values().
using ParamGrads = std::vector<float>;

inline std::span<float> grad_of(ParamGrads& grads, const ModelParams& params, std::size_t entry) {
  const auto& e = params.entries()[entry];
  return std::span<float>(grads).subspan(e.offset, e.size);
}

// Fan-in scaled uniform weights, zero biases. Deterministic in (arch, seed).
ModelParams init_params(const ArchSpec& arch, std::uint64_t seed);

// Recorded forward activations needed by the backward passes.
struct EncoderTape {
  struct Stage {
    Tensor input;
    Tensor act1;
    Tensor act2;
    std::vector<std::int32_t> argmax;
  };
  std::vector<Stage> stages;
  Stage middle;
  std::vector<float> pooled;
  std::vector<float> latent;

  BottleneckShape bottleneck() const {
    return {middle.act2.height, middle.act2.width, middle.act2.channels};
  }
};

struct DecoderTape {
  struct Stage {
    Tensor up;
    Tensor up_act;
    Tensor cat;
    Tensor act1;
    Tensor act2;
  };
  std::vector<Stage> stages;  // indexed by stage, 0 = finest
  Tensor output;              // after the logistic
};

void encode_forward(const Tensor& x, const ModelParams& params, EncoderTape& tape);
// dskips may be null; dinput may be null when the input gradient is not needed.
void encode_backward(const EncoderTape& tape, const ModelParams& params, std::span<const float> dlatent,
                     const std::vector<Tensor>* dskips, ParamGrads& grads, Tensor* dinput);

// Skip maps of the content image, finest first.
std::vector<const Tensor*> skip_refs(const EncoderTape& tape);
std::vector<const Tensor*> skip_refs(const SkipStack& skips);

void decode_forward(const Tensor& map, std::span<const Tensor* const> skips, const ModelParams& params,
                    DecoderTape& tape);
void decode_backward(const DecoderTape& tape, const ModelParams& params, const Tensor& dout, ParamGrads& grads,
                     Tensor& dmap, std::vector<Tensor>& dskips);

void expand_forward(std::span<const float> latent, const BottleneckShape& shape, const ModelParams& params,
                    std::vector<float>& channel_vector, Tensor& map);
void expand_backward(std::span<const float> latent, const Tensor& dmap, const ModelParams& params,
                     ParamGrads& grads, std::span<float> dlatent);

Tensor to_tensor(const ImageRGB& img);
ImageRGB to_image(const Tensor& t);

// Mirror-pads bottom/right so both sides become multiples of `multiple`.
ImageRGB reflect_pad(const ImageRGB& img, int multiple);

struct EncodeResult {
  LatentVector latent;
  SkipStack skips;
  BottleneckShape bottleneck;
};

// Image sides must already be multiples of arch.stride().
EncodeResult encode(const ImageRGB& img, const ModelParams& params);

std::pair<std::vector<float>, std::vector<float>> split(const LatentVector& f);
LatentVector concat_features(std::span<const float> content, std::span<const float> luminance);
// Also checks the lengths against the architecture.
LatentVector concat_features(std::span<const float> content, std::span<const float> luminance,
                             const ArchSpec& arch);

// FC to a bottleneck-width vector, tiled over the bottleneck grid.
Tensor expand(const LatentVector& f, const BottleneckShape& shape, const ModelParams& params);
ImageRGB decode(const Tensor& map, const SkipStack& skips, const ModelParams& params);

// Content and skips from `low`, luminance from `ref`. Either image may have any
// size; the result has low's size.
ImageRGB enhance(const ImageRGB& low, const ImageRGB& ref, const ModelParams& params);
// Same, with the reference's luminance component already computed.
ImageRGB enhance_with_luminance(const ImageRGB& low, std::span<const float> luminance, const ModelParams& params);
// Luminance component of an arbitrary-size image.
std::vector<float> luminance_of(const ImageRGB& img, const ModelParams& params);

}  // namespace lumiswap
