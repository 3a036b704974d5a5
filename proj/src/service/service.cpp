#include "lumiswap/service.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>

#include "httplib.h"
#include "json.hpp"
#include "lumiswap/checkpoint.hpp"
#include "lumiswap/data.hpp"
#include "lumiswap/error.hpp"
#include "lumiswap/image_io.hpp"

namespace lumiswap {

using nlohmann::json;

namespace {

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", kind}, {"message", message}}.dump(), "application/json");
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

ImageRGB make_thumbnail(const ImageRGB& img, int side) {
  const int longest = std::max(img.height(), img.width());
  if (longest <= side) return img;
  const double scale = static_cast<double>(longest) / side;
  const int h = std::max(1, static_cast<int>(img.height() / scale));
  const int w = std::max(1, static_cast<int>(img.width() / scale));
  ImageRGB out(h, w);
  for (int y = 0; y < h; ++y) {
    const int y0 = y * img.height() / h, y1 = std::max(y0 + 1, (y + 1) * img.height() / h);
    for (int x = 0; x < w; ++x) {
      const int x0 = x * img.width() / w, x1 = std::max(x0 + 1, (x + 1) * img.width() / w);
      for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (int yy = y0; yy < y1; ++yy)
          for (int xx = x0; xx < x1; ++xx) sum += img.at(yy, xx, c);
        out.at(y, x, c) = sum / ((y1 - y0) * (x1 - x0));
      }
    }
  }
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    for (int s = 18; s >= 0; s -= 6) out += kAlphabet[(n >> s) & 63];
  }
  if (i + 1 == bytes.size()) {
    const std::uint32_t n = bytes[i] << 16;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

struct Service::Impl {
  httplib::Server server;
  json references_json = json::array();
  int port = -1;
};

Service::Service(ServiceConfig cfg) : cfg_(std::move(cfg)), impl_(std::make_unique<Impl>()) {
  auto& srv = impl_->server;
  srv.set_payload_max_length(cfg_.max_upload_mb * 1024 * 1024);
  srv.set_default_headers({{"Access-Control-Allow-Origin", cfg_.cors_origin},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Expose-Headers", "X-Mean-V"}});

  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    if (!ready_) {
      res.status = 503;
      res.set_content(json{{"status", "loading"}}.dump(), "application/json");
      return;
    }
    res.set_content(json{{"status", "ok"},
                         {"ckpt", cfg_.checkpoint.filename().string()},
                         {"step", params_.step},
                         {"arch", params_.arch().summary()},
                         {"references", refs_.size()}}
                        .dump(),
                    "application/json");
  });

  srv.Get("/references", [this](const httplib::Request&, httplib::Response& res) {
    if (!ready_) return send_error(res, 503, "unavailable", "model is still loading");
    res.set_content(impl_->references_json.dump(), "application/json");
  });

  srv.Post("/enhance", [this](const httplib::Request& req, httplib::Response& res) {
    if (!ready_) return send_error(res, 503, "unavailable", "model is still loading");
    if (!req.is_multipart_form_data()) return send_error(res, 400, "argument", "expected multipart/form-data");
    if (!req.has_file("low")) return send_error(res, 400, "argument", "missing file field 'low'");
    const bool has_id = req.has_file("ref_id");
    const bool has_file = req.has_file("ref");
    if (has_id == has_file) {
      return send_error(res, 400, "argument", "supply exactly one of 'ref_id' or 'ref'");
    }
    try {
      const auto& low_part = req.get_file_value("low");
      const ImageRGB low = decode_image(as_bytes(low_part.content), "low");
      ImageRGB out;
      if (has_id) {
        const std::string id = req.get_file_value("ref_id").content;
        const auto it = std::find_if(refs_.begin(), refs_.end(), [&](const ReferenceEntry& r) { return r.id == id; });
        if (it == refs_.end()) return send_error(res, 404, "not_found", "unknown reference '" + id + "'");
        out = enhance_with_luminance(low, it->luminance, params_);
      } else {
        const ImageRGB ref = decode_image(as_bytes(req.get_file_value("ref").content), "ref");
        out = enhance_with_luminance(low, luminance_of(ref, params_), params_);
      }
      const auto png = encode_png(out);
      char mean_v[32];
      std::snprintf(mean_v, sizeof mean_v, "%.6f", mean_value_channel(out));
      res.set_header("X-Mean-V", mean_v);
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    } catch (const Error& e) {
      const int status = e.kind() == ErrorKind::kDecode || e.kind() == ErrorKind::kDimension ? 400 : 500;
      send_error(res, status, to_string(e.kind()), e.what());
    }
  });

  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const char* kind = res.status == 404 ? "not_found" : res.status == 413 ? "payload_too_large" : "http";
    res.set_content(json{{"error", kind}, {"status", res.status}}.dump(), "application/json");
  });
}

Service::~Service() { stop(); }

void Service::load() {
  params_ = load_model(cfg_.checkpoint);
  std::error_code ec;
  if (!std::filesystem::is_directory(cfg_.references, ec)) {
    throw NotFoundError("reference library not found: " + cfg_.references.string());
  }
  std::vector<ReferenceEntry> refs;
  std::vector<std::string> warnings;
  for (const auto& entry : std::filesystem::directory_iterator(cfg_.references)) {
    if (!entry.is_regular_file()) continue;
    if (!has_image_extension(entry.path())) {
      warnings.push_back("skipping non-image " + entry.path().string());
      continue;
    }
    try {
      const ImageRGB img = load_image(entry.path());
      refs.push_back({entry.path().filename().string(), make_thumbnail(img, cfg_.thumbnail_side),
                      mean_value_channel(img), luminance_of(img, params_)});
    } catch (const DecodeError& e) {
      warnings.push_back("skipping undecodable " + entry.path().string() + ": " + e.what());
    }
  }
  std::sort(refs.begin(), refs.end(), [](const ReferenceEntry& a, const ReferenceEntry& b) {
    return a.mean_v != b.mean_v ? a.mean_v < b.mean_v : a.id < b.id;
  });
  json list = json::array();
  for (const auto& r : refs) {
    list.push_back({{"id", r.id}, {"mean_v", r.mean_v}, {"thumbnail", base64_encode(encode_png(r.thumbnail))}});
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  refs_ = std::move(refs);
  warnings_ = std::move(warnings);
  impl_->references_json = std::move(list);
  ready_ = true;
}

int Service::bind() {
  auto& srv = impl_->server;
  const int port = cfg_.port == 0 ? srv.bind_to_any_port(cfg_.host) : (srv.bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1);
  if (port < 0) throw IoError("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
  impl_->port = port;
  return port;
}

void Service::listen() {
  if (impl_->port < 0) throw ArgumentError("Service::listen called before bind");
  impl_->server.listen_after_bind();
}

void Service::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace lumiswap
