// lumiswap: reference-guided low-light enhancement.
//
//   lumiswap enhance --low dark.png --ref bright.png --ckpt run/ckpt-00060625 --out out.png
//   lumiswap multilevel --ckpt ... --low dark.png --refs refs/ --out outputs/
//   lumiswap train --data LOL --out run --epochs 1000 --batch 8
//   lumiswap eval --ckpt ... --data LOL --out report.csv
//   lumiswap diag hsv-recombine --data LOL
//   lumiswap serve --ckpt ... --refs refs/ --port 8080
//
// Any subcommand accepts --config FILE with key=value lines supplying
// defaults for its flags. Failures print one JSON line on stderr:
//   {"error":"<kind>","message":"..."}
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lumiswap/checkpoint.hpp"
#include "lumiswap/data.hpp"
#include "lumiswap/error.hpp"
#include "lumiswap/evalharness.hpp"
#include "lumiswap/image_io.hpp"
#include "lumiswap/losses.hpp"
#include "lumiswap/service.hpp"
#include "lumiswap/synthetic.hpp"
#include "lumiswap/training.hpp"

namespace fs = std::filesystem;
using namespace lumiswap;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitInput = 2;

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo:
    case ErrorKind::kNumeric:
      return kExitRuntime;
    default:
      return kExitInput;
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// key=value lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("config file not found: " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config " + path.string() + " line " + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    out.emplace_back(key, value);
  }
  return out;
}

// Appends config entries as flags for options not already on the command line.
std::vector<std::string> apply_config(CLI::App& app, std::vector<std::string> args) {
  std::optional<fs::path> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (!config) return args;

  CLI::App* sub = &app;
  for (const auto& a : args) {
    if (a.rfind("-", 0) == 0) break;
    CLI::App* next = sub->get_subcommand_no_throw(a);
    if (next == nullptr) break;
    sub = next;
  }
  for (const auto& [key, value] : read_config(*config)) {
    if (key == "config") continue;
    const std::string flag = "--" + key;
    bool given = false;
    for (const auto& a : args) given = given || a == flag || a.rfind(flag + "=", 0) == 0;
    if (given) continue;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (opt == nullptr) throw ArgumentError("config key '" + key + "' is not an option of " + sub->get_name());
    if (opt->get_expected_min() == 0) {
      if (value == "true" || value == "1") args.push_back(flag);
    } else {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

struct Options {
  fs::path low, ref, ckpt, out, gt, refs, data, resume, config;
  std::uint64_t seed = 0;
  int epochs = 1000, batch = 8, crop = 0, train_count = -1, checkpoint_every = 1000, print_every = 10;
  std::int64_t max_steps = 0;
  double lr = 1e-4, lambda = 2.0, alpha = 0.08, patch_prob = 0.5;
  int patch_size = 100;
  bool no_flip = false, no_patch_swap = false;
  ArchSpec arch;
  std::string split = "test";
  int pairs = 20, count = 20, height = 400, width = 600;
  std::string host = "127.0.0.1", cors = "*";
  int port = 8080;
  std::size_t max_upload_mb = 16;
};

std::vector<ImagePair> load_split(const Options& o) {
  const auto index = index_lol(o.data, o.train_count >= 0 ? std::optional<int>(o.train_count) : std::nullopt);
  if (o.split == "train") return load_pairs(index.train);
  if (o.split == "test") return load_pairs(index.test);
  auto all = load_pairs(index.train);
  auto test = load_pairs(index.test);
  all.insert(all.end(), std::make_move_iterator(test.begin()), std::make_move_iterator(test.end()));
  return all;
}

int cmd_enhance(const Options& o) {
  const ModelParams params = load_model(o.ckpt);
  const ImageRGB low = load_image(o.low);
  const ImageRGB ref = load_image(o.ref);
  const ImageRGB out = enhance(low, ref, params);
  save_image(out, o.out);
  if (!o.gt.empty()) {
    const ImageRGB gt = load_image(o.gt);
    const MetricReport m = compare(load_image(o.out), gt);
    std::printf("psnr_db=%.4f ssim=%.4f\n", m.psnr_db, m.ssim);
  }
  return 0;
}

int cmd_multilevel(const Options& o) {
  const ModelParams params = load_model(o.ckpt);
  const ImageRGB low = load_image(o.low);
  std::vector<NamedImage> refs;
  for (const auto& p : list_image_files(o.refs)) refs.push_back({p.stem().string(), load_image(p)});
  if (refs.empty()) throw ArgumentError("no reference images in " + o.refs.string());
  const fs::path out_dir = o.out.empty() ? fs::path("multilevel") : o.out;
  fs::create_directories(out_dir);
  const auto rows = enhance_each(params, low, refs);
  std::string csv = "ref,ref_mean_v,output_mean_v,output\n";
  for (const auto& r : rows) {
    const std::string name = o.low.stem().string() + "__" + r.ref_id + ".png";
    save_image(r.output, out_dir / name);
    char line[256];
    std::snprintf(line, sizeof line, ",%.6f,%.6f,", r.ref_mean_v, r.output_mean_v);
    csv += r.ref_id + line + name + "\n";
  }
  write_file_atomic(out_dir / "summary.csv", csv);
  std::fputs(to_table(rows).c_str(), stdout);
  return 0;
}

int cmd_train(const Options& o) {
  TrainConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.batch_size = o.batch;
  cfg.epochs = o.epochs;
  cfg.lambda_f = o.lambda;
  cfg.alpha_margin = o.alpha;
  cfg.seed = o.seed;
  if (o.crop > 0) cfg.crop = o.crop;
  cfg.checkpoint_every = o.checkpoint_every;
  cfg.data_root = o.data;
  cfg.out_dir = o.out;
  cfg.arch = o.arch;
  if (o.train_count >= 0) cfg.train_count = o.train_count;
  cfg.flip = !o.no_flip;
  cfg.patch_swap = !o.no_patch_swap;
  cfg.swap = {o.patch_size, o.patch_prob};
  if (o.max_steps > 0) cfg.max_steps = o.max_steps;
  cfg.validate();
  if (cfg.out_dir.empty()) throw ConfigurationError("--out is required");

  const auto index = index_lol(cfg.data_root, cfg.train_count);
  TrainState state = o.resume.empty() ? init_state(cfg.arch, cfg.seed) : load_checkpoint(o.resume, cfg.arch);
  if (!o.resume.empty() && state.adam_m.empty()) {
    throw FormatError("checkpoint " + o.resume.string() + " has no optimizer moments; cannot resume");
  }
  const int every = std::max(1, o.print_every);
  const auto result = train_on(PairSource::from_files(index.train), cfg, std::move(state),
                               [every](const TrainState& s, const LossReport& r) {
                                 if (s.step % every == 0) std::cout << to_json_line(s.step, r) << std::endl;
                                 return true;
                               });
  std::cout << "checkpoint=" << result.checkpoint.string() << std::endl;
  return 0;
}

int cmd_eval(const Options& o) {
  const auto split = load_split(o);
  const auto report = evaluate(o.ckpt, split);
  if (!o.out.empty()) write_file_atomic(o.out, to_csv(report));
  std::fputs(to_table(report).c_str(), stdout);
  return 0;
}

int cmd_recombine(const Options& o) {
  const auto report = hsv_recombination_check(load_split(o));
  std::fputs(to_table(report).c_str(), stdout);
  return 0;
}

int cmd_calibrate(const Options& o) {
  const ModelParams params = load_model(o.ckpt);
  auto split = load_split(o);
  if (static_cast<int>(split.size()) > o.pairs) split.resize(static_cast<std::size_t>(o.pairs));
  std::vector<std::pair<ImageRGB, ImageRGB>> pairs;
  for (auto& p : split) pairs.emplace_back(std::move(p.low), std::move(p.ref));
  std::printf("alpha=%.6f pairs=%zu\n", calibrate_margin(pairs, params), pairs.size());
  return 0;
}

int cmd_synth(const Options& o) {
  synthetic::SceneOptions opts;
  opts.height = o.height;
  opts.width = o.width;
  synthetic::write_dataset(o.out, o.count, o.seed, opts);
  return 0;
}

Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

int cmd_serve(const Options& o) {
  ServiceConfig cfg;
  cfg.checkpoint = o.ckpt;
  cfg.references = o.refs;
  cfg.host = o.host;
  cfg.port = o.port;
  cfg.max_upload_mb = o.max_upload_mb;
  cfg.cors_origin = o.cors;
  Service service(cfg);
  const int port = service.bind();
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::thread server([&service] { service.listen(); });
  std::cout << "listening on http://" << cfg.host << ":" << port << std::endl;
  try {
    service.load();
  } catch (...) {
    service.stop();
    server.join();
    throw;
  }
  std::cout << "ready: " << service.references().size() << " references" << std::endl;
  server.join();
  g_service = nullptr;
  return 0;
}

void add_arch(CLI::App* cmd, Options& o) {
  cmd->add_option("--depth", o.arch.depth, "encoder stages")->capture_default_str();
  cmd->add_option("--base-channels", o.arch.base_channels, "channels of the first stage")->capture_default_str();
  cmd->add_option("--latent-dim", o.arch.latent_dim)->capture_default_str();
  cmd->add_option("--luminance-dim", o.arch.luminance_dim)->capture_default_str();
}

void add_split(CLI::App* cmd, Options& o) {
  cmd->add_option("--split", o.split, "train, test or all")
      ->check(CLI::IsMember({"train", "test", "all"}))
      ->capture_default_str();
  cmd->add_option("--train-count", o.train_count, "override the number of training pairs");
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Reference-guided low-light image enhancement"};
  app.require_subcommand(1);
  const auto config_opt = [&o](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "key=value file with defaults for these flags");
  };

  auto* enhance_cmd = app.add_subcommand("enhance", "enhance one image using a brightness reference");
  enhance_cmd->add_option("--low", o.low, "low-light input")->required();
  enhance_cmd->add_option("--ref", o.ref, "brightness reference")->required();
  enhance_cmd->add_option("--ckpt", o.ckpt, "checkpoint directory")->required();
  enhance_cmd->add_option("--out", o.out, "output PNG")->required();
  enhance_cmd->add_option("--gt", o.gt, "ground truth; prints psnr_db and ssim");
  enhance_cmd->add_option("--seed", o.seed, "ignored at inference");
  config_opt(enhance_cmd);

  auto* multi_cmd = app.add_subcommand("multilevel", "enhance one image with every reference in a directory");
  multi_cmd->add_option("--ckpt", o.ckpt)->required();
  multi_cmd->add_option("--low", o.low)->required();
  multi_cmd->add_option("--refs", o.refs, "directory of reference images")->required();
  multi_cmd->add_option("--out", o.out, "output directory (default: multilevel)");
  multi_cmd->add_option("--seed", o.seed, "ignored at inference");
  config_opt(multi_cmd);

  auto* train_cmd = app.add_subcommand("train", "train on a LoL-layout dataset");
  train_cmd->add_option("--data", o.data, "dataset root with low/ and high/")->required();
  train_cmd->add_option("--out", o.out, "run directory for checkpoints and the loss log")->required();
  train_cmd->add_option("--epochs", o.epochs)->capture_default_str();
  train_cmd->add_option("--batch", o.batch)->capture_default_str();
  train_cmd->add_option("--lr", o.lr)->capture_default_str();
  train_cmd->add_option("--lambda", o.lambda, "feature loss weight")->capture_default_str();
  train_cmd->add_option("--alpha", o.alpha, "triplet margin")->capture_default_str();
  train_cmd->add_option("--crop", o.crop, "random square crop side; 0 trains on whole images")->capture_default_str();
  train_cmd->add_option("--seed", o.seed)->capture_default_str();
  train_cmd->add_option("--resume", o.resume, "checkpoint to continue from");
  train_cmd->add_option("--train-count", o.train_count, "override the number of training pairs");
  train_cmd->add_option("--checkpoint-every", o.checkpoint_every, "steps; 0 keeps only the final one")
      ->capture_default_str();
  train_cmd->add_option("--max-steps", o.max_steps, "stop after this many total steps");
  train_cmd->add_option("--print-every", o.print_every)->capture_default_str();
  train_cmd->add_option("--patch-size", o.patch_size)->capture_default_str();
  train_cmd->add_option("--patch-prob", o.patch_prob)->capture_default_str();
  train_cmd->add_flag("--no-flip", o.no_flip);
  train_cmd->add_flag("--no-patch-swap", o.no_patch_swap);
  add_arch(train_cmd, o);
  config_opt(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM of enhance(low, GT) over a split");
  eval_cmd->add_option("--ckpt", o.ckpt)->required();
  eval_cmd->add_option("--data", o.data)->required();
  eval_cmd->add_option("--out", o.out, "CSV report path");
  add_split(eval_cmd, o);
  config_opt(eval_cmd);

  auto* diag_cmd = app.add_subcommand("diag", "diagnostics");
  diag_cmd->require_subcommand(1);
  auto* recombine_cmd = diag_cmd->add_subcommand("hsv-recombine", "PSNR of (H_low, S_low, V_gt) against GT");
  recombine_cmd->add_option("--data", o.data)->required();
  add_split(recombine_cmd, o);
  config_opt(recombine_cmd);

  auto* calibrate_cmd = app.add_subcommand("calibrate", "mean luminance distance between low and GT");
  calibrate_cmd->add_option("--ckpt", o.ckpt)->required();
  calibrate_cmd->add_option("--data", o.data)->required();
  calibrate_cmd->add_option("--pairs", o.pairs)->capture_default_str();
  add_split(calibrate_cmd, o);
  config_opt(calibrate_cmd);

  auto* synth_cmd = app.add_subcommand("synth", "write a procedural low/high dataset");
  synth_cmd->add_option("--out", o.out)->required();
  synth_cmd->add_option("--count", o.count)->capture_default_str();
  synth_cmd->add_option("--seed", o.seed)->capture_default_str();
  synth_cmd->add_option("--height", o.height)->capture_default_str();
  synth_cmd->add_option("--width", o.width)->capture_default_str();
  config_opt(synth_cmd);

  auto* serve_cmd = app.add_subcommand("serve", "HTTP inference service");
  serve_cmd->add_option("--ckpt", o.ckpt)->required();
  serve_cmd->add_option("--refs", o.refs, "reference library directory")->required();
  serve_cmd->add_option("--port", o.port)->capture_default_str();
  serve_cmd->add_option("--host", o.host)->capture_default_str();
  serve_cmd->add_option("--max-upload-mb", o.max_upload_mb)->capture_default_str();
  serve_cmd->add_option("--cors-origin", o.cors)->capture_default_str();
  config_opt(serve_cmd);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = apply_config(app, std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return kExitInput;
  } catch (const Error& e) {
    print_error(to_string(e.kind()), e.what());
    return exit_code(e.kind());
  }

  try {
    if (*enhance_cmd) return cmd_enhance(o);
    if (*multi_cmd) return cmd_multilevel(o);
    if (*train_cmd) return cmd_train(o);
    if (*eval_cmd) return cmd_eval(o);
    if (*recombine_cmd) return cmd_recombine(o);
    if (*calibrate_cmd) return cmd_calibrate(o);
    if (*synth_cmd) return cmd_synth(o);
    if (*serve_cmd) return cmd_serve(o);
  } catch (const Error& e) {
    print_error(to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    print_error("io", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return kExitRuntime;
  }
  return kExitInput;
}
