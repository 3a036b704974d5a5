#include "lumiswap/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "lumiswap/error.hpp"
#include "lumiswap/image_io.hpp"

namespace lumiswap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<std::uint8_t> to_le_bytes(std::span<const float> values) {
  std::vector<std::uint8_t> out(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int k = 0; k < 4; ++k) out[4 * i + k] = static_cast<std::uint8_t>(bits >> (8 * k));
  }
  return out;
}

std::vector<float> from_le_bytes(std::span<const std::uint8_t> bytes) {
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(bytes[4 * i + k]) << (8 * k);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

json array_entry(const std::string& file, std::span<const std::uint8_t> bytes, std::size_t count) {
  return {{"file", file}, {"count", count}, {"fnv1a", hex64(fnv1a(bytes))}};
}

void write_checkpoint(const ModelParams& params, const std::vector<float>* m, const std::vector<float>* v,
                      std::int64_t step, std::int64_t epoch, std::uint64_t seed, const fs::path& dir) {
  const fs::path parent = dir.has_parent_path() ? dir.parent_path() : fs::path(".");
  std::error_code ec;
  if (!fs::is_directory(parent, ec)) throw IoError("checkpoint parent directory missing: " + parent.string());
  const fs::path tmp = parent / (dir.filename().string() + ".tmp");
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp);

  const ArchSpec& a = params.arch();
  json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["version"] = kCheckpointVersion;
  manifest["arch"] = {{"depth", a.depth},
                      {"base_channels", a.base_channels},
                      {"latent_dim", a.latent_dim},
                      {"luminance_dim", a.luminance_dim}};
  manifest["step"] = step;
  manifest["epoch"] = epoch;
  manifest["rng"] = {{"seed", seed}, {"scheme", "mix(seed, epoch, batch)"}};
  json tensors = json::array();
  for (const auto& e : params.entries()) {
    tensors.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", e.offset}, {"size", e.size}});
  }
  manifest["tensors"] = tensors;

  json arrays;
  const auto put = [&](const char* key, const char* file, std::span<const float> values) {
    const auto bytes = to_le_bytes(values);
    write_file_atomic(tmp / file, bytes);
    arrays[key] = array_entry(file, bytes, values.size());
  };
  put("params", "params.bin", params.values());
  if (m != nullptr && v != nullptr) {
    put("adam_m", "adam_m.bin", *m);
    put("adam_v", "adam_v.bin", *v);
  }
  manifest["arrays"] = arrays;
  write_file_atomic(tmp / "manifest.json", manifest.dump(2) + "\n");

  // Swap the finished directory into place.
  if (fs::exists(dir)) {
    const fs::path old = parent / (dir.filename().string() + ".old");
    fs::remove_all(old, ec);
    fs::rename(dir, old);
    fs::rename(tmp, dir);
    fs::remove_all(old, ec);
  } else {
    fs::rename(tmp, dir);
  }
}

const json& field(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) throw FormatError("checkpoint manifest: missing field '" + path + "'");
  return obj.at(key);
}

template <class T>
T number_field(const json& obj, const std::string& path, const char* key) {
  const json& v = field(obj, path, key);
  if (!v.is_number_integer()) throw FormatError("checkpoint manifest: field '" + path + "' must be an integer");
  return v.get<T>();
}

std::string string_field(const json& obj, const std::string& path, const char* key) {
  const json& v = field(obj, path, key);
  if (!v.is_string()) throw FormatError("checkpoint manifest: field '" + path + "' must be a string");
  return v.get<std::string>();
}

struct Loaded {
  ArchSpec arch;
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  std::uint64_t seed = 0;
  std::vector<float> params, m, v;
};

std::vector<float> read_array(const fs::path& dir, const json& arrays, const std::string& key,
                              std::size_t expected) {
  const std::string path = "arrays." + key;
  const json& entry = field(arrays, path, key.c_str());
  const std::string file = string_field(entry, path + ".file", "file");
  const auto count = number_field<std::size_t>(entry, path + ".count", "count");
  const std::string sum = string_field(entry, path + ".fnv1a", "fnv1a");
  if (count != expected) {
    throw FormatError("checkpoint manifest: field '" + path + ".count' is " + std::to_string(count) +
                      ", architecture needs " + std::to_string(expected));
  }
  if (file.find('/') != std::string::npos || file.find("..") != std::string::npos) {
    throw FormatError("checkpoint manifest: field '" + path + ".file' must be a plain file name");
  }
  const auto bytes = read_file_bytes(dir / file);
  if (bytes.size() != count * 4) {
    throw IntegrityError("checkpoint array " + (dir / file).string() + " has " + std::to_string(bytes.size()) +
                         " bytes, expected " + std::to_string(count * 4));
  }
  if (hex64(fnv1a(bytes)) != sum) throw IntegrityError("checkpoint array " + (dir / file).string() + " checksum mismatch");
  return from_le_bytes(bytes);
}

Loaded read_checkpoint(const fs::path& dir, bool with_moments) {
  const fs::path manifest_path = dir / "manifest.json";
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw NotFoundError("checkpoint not found: " + dir.string());
  const auto bytes = read_file_bytes(manifest_path);
  json manifest;
  try {
    manifest = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw FormatError("checkpoint manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
  }
  if (string_field(manifest, "format", "format") != kCheckpointFormat) {
    throw FormatError("checkpoint manifest: field 'format' is not " + std::string(kCheckpointFormat));
  }
  if (number_field<int>(manifest, "version", "version") != kCheckpointVersion) {
    throw FormatError("checkpoint manifest: field 'version' is unsupported");
  }
  Loaded out;
  const json& arch = field(manifest, "arch", "arch");
  out.arch.depth = number_field<int>(arch, "arch.depth", "depth");
  out.arch.base_channels = number_field<int>(arch, "arch.base_channels", "base_channels");
  out.arch.latent_dim = number_field<int>(arch, "arch.latent_dim", "latent_dim");
  out.arch.luminance_dim = number_field<int>(arch, "arch.luminance_dim", "luminance_dim");
  try {
    out.arch.validate();
  } catch (const ConfigurationError& e) {
    throw FormatError(std::string("checkpoint manifest: field 'arch' is invalid: ") + e.what());
  }
  out.step = number_field<std::int64_t>(manifest, "step", "step");
  out.epoch = number_field<std::int64_t>(manifest, "epoch", "epoch");
  if (out.step < 0 || out.epoch < 0) throw FormatError("checkpoint manifest: field 'step' or 'epoch' is negative");
  out.seed = number_field<std::uint64_t>(field(manifest, "rng", "rng"), "rng.seed", "seed");

  const std::size_t n = ModelParams(out.arch).values().size();
  const json& arrays = field(manifest, "arrays", "arrays");
  out.params = read_array(dir, arrays, "params", n);
  if (with_moments && arrays.contains("adam_m")) {
    out.m = read_array(dir, arrays, "adam_m", n);
    out.v = read_array(dir, arrays, "adam_v", n);
  }
  return out;
}

ModelParams to_params(const Loaded& l) {
  ModelParams p(l.arch);
  std::copy(l.params.begin(), l.params.end(), p.values().begin());
  p.step = l.step;
  return p;
}

}  // namespace

void save_checkpoint(const TrainState& state, const fs::path& dir) {
  const std::size_t n = state.params.values().size();
  if (state.adam_m.size() != n || state.adam_v.size() != n) {
    throw DimensionError("save_checkpoint: optimizer moments do not match the parameters");
  }
  write_checkpoint(state.params, &state.adam_m, &state.adam_v, state.step, state.epoch, state.seed, dir);
}

void save_model(const ModelParams& params, const fs::path& dir) {
  write_checkpoint(params, nullptr, nullptr, params.step, 0, 0, dir);
}

TrainState load_checkpoint(const fs::path& dir) {
  Loaded l = read_checkpoint(dir, true);
  TrainState s;
  s.params = to_params(l);
  s.adam_m = std::move(l.m);
  s.adam_v = std::move(l.v);
  s.step = l.step;
  s.epoch = l.epoch;
  s.seed = l.seed;
  return s;
}

TrainState load_checkpoint(const fs::path& dir, const ArchSpec& expected) {
  TrainState s = load_checkpoint(dir);
  if (!(s.params.arch() == expected)) {
    throw ConfigurationError("checkpoint " + dir.string() + " has architecture " + s.params.arch().summary() +
                             ", expected " + expected.summary());
  }
  return s;
}

ModelParams load_model(const fs::path& dir) { return to_params(read_checkpoint(dir, false)); }

fs::path checkpoint_name(const fs::path& out_dir, std::int64_t step) {
  std::ostringstream os;
  os << "ckpt-" << std::setw(8) << std::setfill('0') << step;
  return out_dir / os.str();
}

}  // namespace lumiswap
