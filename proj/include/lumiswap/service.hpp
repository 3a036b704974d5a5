#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "lumiswap/image.hpp"
#include "lumiswap/model.hpp"

namespace lumiswap {

struct ServiceConfig {
  std::filesystem::path checkpoint;
  std::filesystem::path references;
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::size_t max_upload_mb = 16;
  std::string cors_origin = "*";
  int thumbnail_side = 96;
};

struct ReferenceEntry {
  std::string id;  // file name within the library
  ImageRGB thumbnail;
  double mean_v = 0.0;
  std::vector<float> luminance;  // cached l_r
};

// Longest side scaled to at most `side` by box averaging; smaller images are copied.
ImageRGB make_thumbnail(const ImageRGB& img, int side);
std::string base64_encode(std::span<const std::uint8_t> bytes);

// HTTP front end:
//   GET  /health      200 {"status":"ok",...} once loaded, 503 before
//   GET  /references  entries sorted by mean_v
//   POST /enhance     multipart "low" plus exactly one of "ref_id" / "ref"
class Service {
 public:
  explicit Service(ServiceConfig cfg);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Reads the checkpoint and reference library; /health turns 200 afterwards.
  void load();
  bool loaded() const noexcept { return ready_.load(); }

  // Binds the socket; returns the bound port.
  int bind();
  // Serves until stop(). bind() must have been called.
  void listen();
  void stop();

  const std::vector<ReferenceEntry>& references() const noexcept { return refs_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  struct Impl;
  ServiceConfig cfg_;
  std::unique_ptr<Impl> impl_;
  ModelParams params_;
  std::vector<ReferenceEntry> refs_;
  std::vector<std::string> warnings_;
  std::atomic<bool> ready_{false};
};

}  // namespace lumiswap
