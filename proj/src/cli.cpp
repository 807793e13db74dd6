// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#include "plksr/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include "plksr/atomic_file.hpp"
#include "plksr/bench.hpp"
#include "plksr/image.hpp"
#include "plksr/metrics.hpp"
#include "plksr/model.hpp"
#include "plksr/nnops.hpp"
#include "plksr/reparam.hpp"
#include "plksr/weights_io.hpp"

namespace plksr::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

constexpr double kMergeResidualLimit = 1e-3;

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string fmt_db(double db) { return std::isinf(db) ? std::string("inf") : fmt("%.4f", db); }

std::vector<std::size_t> parse_dims(const std::string& text, std::size_t count, const char* flag) {
  std::vector<std::size_t> dims;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != part.size() || part.empty() || v == 0) {
      throw UsageError(std::string(flag) + ": expected " + (count == 3 ? "CxHxW" : "HxW") + ", got '" + text + "'");
    }
    dims.push_back(static_cast<std::size_t>(v));
  }
  if (dims.size() != count) {
    throw UsageError(std::string(flag) + ": expected " + (count == 3 ? "CxHxW" : "HxW") + ", got '" + text + "'");
  }
  return dims;
}

/// Writes to --out atomically, or to stdout when no path was given.
void emit(const std::string& out_path, const std::string& text, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
  } else {
    write_file_atomic(out_path, std::span<const char>(text.data(), text.size()));
  }
}

void apply_threads(int threads) {
  if (threads < 1) throw UsageError("--threads must be >= 1");
  set_num_threads(threads);
}

LoadedModel load_checked(const std::string& path, const std::string& preset, std::optional<std::size_t> scale) {
  LoadedModel m = load_weights(path);
  if (!preset.empty()) {
    const auto expected = ModelConfig::preset(preset, m.config.scale);
    if (!expected) throw UsageError("unknown preset '" + preset + "'");
    if (*expected != m.config) {
      throw ShapeError(path + ": weights do not match preset " + preset);
    }
  }
  if (scale && *scale != m.config.scale) {
    throw ShapeError(path + ": weights are for x" + std::to_string(m.config.scale) + ", --scale is " +
                     std::to_string(*scale));
  }
  return m;
}

// ---------------------------------------------------------------------------

struct UpscaleArgs {
  std::string input, output, weights, preset;
  std::size_t scale = 0;
  int threads = 1;
};

int cmd_upscale(const UpscaleArgs& a, std::ostream& out) {
  apply_threads(a.threads);
  const LoadedModel m = load_checked(a.weights, a.preset, a.scale ? std::optional(a.scale) : std::nullopt);
  const ImageU8 lr = read_png(a.input);
  const ImageU8 sr = from_tensor(model_forward(to_tensor(lr), m.weights, m.config));
  write_png(a.output, sr);
  out << a.output << ": " << sr.width << "x" << sr.height << " (x" << m.config.scale << ")\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string source, weights, preset;
  std::size_t scale = 0;
  int threads = 1;
};

struct EvalPair {
  std::string name;
  fs::path lr;
  fs::path hr;
};

std::vector<EvalPair> resolve_pairs(const fs::path& source, std::size_t scale) {
  std::vector<EvalPair> pairs;
  if (fs::is_directory(source)) {
    // <name>.png (HR) paired with <name>x<r>.png (LR) in the same directory.
    const std::string suffix = "x" + std::to_string(scale);
    std::map<std::string, fs::path> hr, lr;
    for (const auto& entry : fs::directory_iterator(source)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
      const std::string stem = entry.path().stem().string();
      if (stem.size() > suffix.size() && stem.ends_with(suffix)) {
        lr[stem.substr(0, stem.size() - suffix.size())] = entry.path();
      } else {
        hr[stem] = entry.path();
      }
    }
    for (const auto& [name, path] : lr) {
      if (!hr.contains(name)) throw Error("missing HR image " + (source / (name + ".png")).string());
    }
    for (const auto& [name, path] : hr) {
      const auto it = lr.find(name);
      if (it == lr.end()) throw Error("missing LR image " + (source / (name + suffix + ".png")).string());
      pairs.push_back({name, it->second, path});
    }
    if (pairs.empty()) throw Error("no image pairs found in " + source.string());
    return pairs;
  }

  std::ifstream in(source);
  if (!in) throw Error("cannot open manifest " + source.string());
  const fs::path base = source.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(source.string() + ":" + std::to_string(line_no) + ": expected 'lr_path,hr_path'");
    }
    fs::path lr = line.substr(0, comma);
    fs::path hr = line.substr(comma + 1);
    if (lr.is_relative()) lr = base / lr;
    if (hr.is_relative()) hr = base / hr;
    for (const auto& p : {lr, hr}) {
      if (!fs::exists(p)) throw Error("missing image " + p.string() + " (manifest line " + std::to_string(line_no) + ")");
    }
    pairs.push_back({hr.stem().string(), lr, hr});
  }
  if (pairs.empty()) throw Error("manifest " + source.string() + " lists no pairs");
  return pairs;
}

/// Top-left crop of `img` to height x width.
ImageU8 crop_to(const ImageU8& img, std::size_t height, std::size_t width) {
  ImageU8 out = ImageU8::blank(height, width);
  for (std::size_t y = 0; y < height; ++y) std::copy_n(img.pixel(y, 0), 3 * width, out.pixel(y, 0));
  return out;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  apply_threads(a.threads);
  std::optional<LoadedModel> model;
  if (!a.weights.empty()) model = load_checked(a.weights, a.preset, a.scale ? std::optional(a.scale) : std::nullopt);
  const std::size_t scale = a.scale ? a.scale : (model ? model->config.scale : 0);
  if (scale == 0) throw UsageError("eval: --scale is required when no --weights are given");

  const auto pairs = resolve_pairs(a.source, scale);
  std::ostringstream table;
  table << "name,psnr_db,ssim\n";
  double psnr_sum = 0.0;
  double ssim_sum = 0.0;
  for (const auto& p : pairs) {
    const ImageU8 lr = read_png(p.lr);
    ImageU8 hr = read_png(p.hr);
    const ImageU8 sr = model ? from_tensor(model_forward(to_tensor(lr), model->weights, model->config)) : lr;
    // HR images not divisible by the scale are mod-cropped to the SR size.
    if ((hr.height != sr.height || hr.width != sr.width) && hr.height >= sr.height && hr.width >= sr.width &&
        hr.height - sr.height < scale && hr.width - sr.width < scale) {
      hr = crop_to(hr, sr.height, sr.width);
    }
    if (hr.height != sr.height || hr.width != sr.width) {
      throw Error(p.name + ": restored image is " + std::to_string(sr.width) + "x" + std::to_string(sr.height) +
                  " but HR " + p.hr.string() + " is " + std::to_string(hr.width) + "x" + std::to_string(hr.height));
    }
    const QualityScore q = evaluate_y(sr, hr, scale);
    psnr_sum += q.psnr_db;
    ssim_sum += q.ssim;
    table << p.name << "," << fmt_db(q.psnr_db) << "," << fmt("%.6f", q.ssim) << "\n";
  }
  const double n = static_cast<double>(pairs.size());
  table << "mean," << fmt_db(psnr_sum / n) << "," << fmt("%.6f", ssim_sum / n) << "\n";
  out << table.str();
  return kOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::vector<std::size_t> channels{4, 8, 16, 32, 64};
  std::vector<std::size_t> kernels{5, 9, 13, 17};
  std::string shape = "64x640x360";
  std::string hw = "180x320";
  std::size_t split = 16;
  std::size_t warmup = 3;
  std::size_t iters = 9;
  std::uint64_t seed = 0;
  std::string preset = "plksr";
  std::size_t scale = 2;
  std::string out_path;
  int threads = 1;
  bool csv = true;
};

Shape parse_shape(const std::string& text) {
  const auto d = parse_dims(text, 3, "--shape");
  return Shape{d[0], d[1], d[2]};
}

void check_timing(const BenchArgs& a) {
  if (a.iters < 5) throw UsageError("--iters must be >= 5");
  if (a.warmup < 1) throw UsageError("--warmup must be >= 1");
}

int cmd_bench_sweep(const BenchArgs& a, std::ostream& out) {
  apply_threads(a.threads);
  check_timing(a);
  const Shape shape = parse_shape(a.shape);
  if (a.channels.empty() || a.kernels.empty()) throw UsageError("--channels and --kernels must be non-empty");
  for (std::size_t k : a.kernels) {
    if (k % 2 == 0) throw UsageError("--kernels: kernel size " + std::to_string(k) + " is even; sizes must be odd");
  }
  for (std::size_t c : a.channels) {
    if (c < 1 || c > shape.channels) {
      throw UsageError("--channels: " + std::to_string(c) + " outside [1, " + std::to_string(shape.channels) + "]");
    }
  }
  std::ostringstream csv;
  bench::write_csv_header(csv);
  for (const auto& r : bench::run_conv_sweep(a.channels, a.kernels, shape, a.warmup, a.iters, a.seed)) {
    bench::write_csv_row(csv, r);
  }
  emit(a.out_path, csv.str(), out);
  return kOk;
}

int cmd_bench_stack(const BenchArgs& a, std::ostream& out) {
  apply_threads(a.threads);
  check_timing(a);
  const Shape shape = parse_shape(a.shape);
  if (a.split < 1 || a.split > shape.channels) throw UsageError("--split outside [1, channels]");
  const auto cmp = bench::run_stack_vs_single(shape, a.split, a.warmup, a.iters, a.seed);
  std::ostringstream csv;
  bench::write_csv_header(csv);
  bench::write_csv_row(csv, cmp.single);
  bench::write_csv_row(csv, cmp.stacked);
  bench::write_csv_row(csv, cmp.stacked_gelu);
  csv << "# receptive_field: 6 stacked 3x3 = " << cmp.receptive_field << "x" << cmp.receptive_field
      << " = single kernel\n";
  csv << "# ratio stacked/single: " << fmt("%.4f", cmp.stacked_over_single) << "\n";
  csv << "# ratio stacked_gelu/single: " << fmt("%.4f", cmp.stacked_gelu_over_single) << "\n";
  csv << "# all convolutions carry biases\n";
  emit(a.out_path, csv.str(), out);
  return kOk;
}

int cmd_bench_model(const BenchArgs& a, std::ostream& out) {
  apply_threads(a.threads);
  check_timing(a);
  const auto cfg = ModelConfig::preset(a.preset, a.scale);
  if (!cfg) throw UsageError("unknown preset '" + a.preset + "'");
  const auto hw = parse_dims(a.hw, 2, "--hw");
  const auto res = bench::run_model_bench(*cfg, hw[0], hw[1], a.warmup, a.iters, a.seed);
  std::ostringstream csv;
  bench::write_csv_header(csv);
  bench::write_csv_row(csv, res.record);
  csv << "# preset: " << a.preset << " x" << a.scale << "\n";
  csv << "# params: " << res.params << "\n";
  csv << "# flops: " << res.flops << "\n";
  csv << "# flops_formula: " << flops_formula() << "\n";
  emit(a.out_path, csv.str(), out);
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_inspect(const std::string& path, bool csv, std::ostream& out) {
  if (path.empty()) throw UsageError("inspect: a weight file is required");
  const LoadedModel m = load_weights(path);
  const auto& cfg = m.config;
  const auto slots = kernel_layout(cfg);
  std::uint64_t total = 0;
  for_each_kernel(m.weights, [&](const ConvKernel& k) { total += k.param_count(); });

  std::ostringstream os;
  if (csv) {
    os << "name,out,in,k,params\n";
  } else {
    os << "file: " << path << " (" << fs::file_size(path) << " bytes)\n";
    os << "preset: " << preset_name(cfg).value_or("custom") << "\n";
    os << "scale: " << cfg.scale << "\nblocks: " << cfg.n_blocks << "\nwidth: " << cfg.width
       << "\nsplit: " << cfg.split << "\nkernel: " << cfg.kernel << "\nmixer: " << to_string(cfg.mixer)
       << "\nea: " << (cfg.use_ea ? "yes" : "no") << "\nlayers:\n";
  }
  for (const auto& s : slots) {
    const std::uint64_t params = s.weight_count() + s.out_channels;
    if (csv) {
      os << s.name << "," << s.out_channels << "," << s.in_channels << "," << s.k << "," << params << "\n";
    } else {
      os << "  " << s.name << " (" << s.out_channels << ", " << s.in_channels << ", " << s.k << "x" << s.k
         << ") " << params << "\n";
    }
  }
  if (!csv) {
    os << "params: " << total << "\n";
    os << "count_params: " << count_params(cfg) << "\n";
  }
  out << os.str();
  if (total != count_params(cfg)) throw NumericalFailure("parameter enumeration disagrees with count_params");
  return kOk;
}

// ---------------------------------------------------------------------------

struct InitArgs {
  std::string preset = "plksr";
  std::size_t scale = 4;
  std::uint64_t seed = 0;
  bool zero = false;
  std::string out_path;
};

int cmd_init(const InitArgs& a, std::ostream& out) {
  const auto cfg = ModelConfig::preset(a.preset, a.scale);
  if (!cfg) throw UsageError("unknown preset '" + a.preset + "'");
  const ModelWeights w = a.zero ? zero_init(*cfg) : random_init(*cfg, a.seed);
  save_weights(w, *cfg, a.out_path);
  out << a.out_path << ": " << a.preset << " x" << a.scale << ", " << count_params(*cfg) << " params"
      << (a.zero ? " (all zero)" : "") << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct MergeArgs {
  std::vector<std::string> inputs;
  std::vector<std::size_t> dilations;
  std::size_t target_k = 0;
  std::uint64_t seed = 0;
  std::string out_path;
};

int cmd_merge(const MergeArgs& a, std::ostream& out) {
  std::vector<BranchSpec> branches;
  for (const auto& path : a.inputs) {
    for (auto& k : load_kernel_container(path)) branches.push_back({std::move(k), 1});
  }
  if (!a.dilations.empty()) {
    if (a.dilations.size() != branches.size()) {
      throw UsageError("--dilations lists " + std::to_string(a.dilations.size()) + " values for " +
                       std::to_string(branches.size()) + " branch kernels");
    }
    for (std::size_t i = 0; i < branches.size(); ++i) {
      if (a.dilations[i] == 0) throw UsageError("--dilations: values must be >= 1");
      branches[i].dilation = a.dilations[i];
    }
  }
  std::size_t target = a.target_k;
  if (target == 0) {
    for (const auto& b : branches) target = std::max({target, b.effective_height(), b.effective_width()});
  }
  if (target % 2 == 0) throw UsageError("--target-k must be odd");

  const ConvKernel merged = merge_branches(branches, target);

  std::mt19937_64 rng(a.seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  Tensor x = Tensor::zeros(merged.in_channels, 32, 32);
  for (float& v : x.data()) v = dist(rng);
  const double residual = max_abs_diff(conv2d_naive(x, merged), multi_branch_conv2d(x, branches));

  out << "branches: " << branches.size() << "\n";
  out << "merged: (" << merged.out_channels << ", " << merged.in_channels << ", " << merged.k << "x" << merged.k
      << ")\n";
  out << "residual: " << fmt("%.3g", residual) << "\n";
  if (!(residual <= kMergeResidualLimit)) {
    throw NumericalFailure("merged kernel deviates from the branch sum by " + fmt("%.3g", residual) +
                           " (limit 1e-3); nothing written");
  }
  const RectKernel merged_rect = RectKernel::from_square(merged);
  save_kernel_container(a.out_path, std::span<const RectKernel>(&merged_rect, 1));
  out << "wrote: " << a.out_path << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"PLKSR super-resolution engine: upscaling, evaluation, benchmarks, weight tools", "plksr"};
  app.require_subcommand(1);

  UpscaleArgs up;
  auto* upscale = app.add_subcommand("upscale", "Upscale a PNG with a .plkw weight file");
  upscale->add_option("input", up.input, "Input PNG (8-bit RGB or gray; alpha is stripped)")->required();
  upscale->add_option("output", up.output, "Output PNG path")->required();
  upscale->add_option("--weights", up.weights, "Weight file (.plkw)")->required();
  upscale->add_option("--preset", up.preset, "Require the weights to match a preset")
      ->check(CLI::IsMember({"plksr", "plksr-tiny"}));
  upscale->add_option("--scale", up.scale, "Require the weights to upscale by this factor")
      ->check(CLI::IsMember({2, 3, 4}));
  upscale->add_option("--threads", up.threads, "GEMM worker threads")->capture_default_str();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Y-channel PSNR/SSIM over LR/HR pairs");
  eval->add_option("source", ev.source,
                   "Manifest (one 'lr_path,hr_path' per line) or directory with <name>.png and <name>x<r>.png")
      ->required();
  eval->add_option("--weights", ev.weights, "Weight file; without it the LR image is scored as-is");
  eval->add_option("--preset", ev.preset, "Require the weights to match a preset")
      ->check(CLI::IsMember({"plksr", "plksr-tiny"}));
  eval->add_option("--scale", ev.scale, "Scale factor; also the border crop in pixels")
      ->check(CLI::IsMember({1, 2, 3, 4}));
  eval->add_option("--threads", ev.threads, "GEMM worker threads")->capture_default_str();

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Convolution and model micro-benchmarks (CSV output)");
  bench->require_subcommand(1);
  auto add_timing = [&ba](CLI::App* cmd) {
    cmd->add_option("--warmup", ba.warmup, "Untimed warmup iterations (>= 1)")->capture_default_str();
    cmd->add_option("--iters", ba.iters, "Timed iterations (>= 5)")->capture_default_str();
    cmd->add_option("--seed", ba.seed, "Seed for inputs and weights")->capture_default_str();
    cmd->add_option("--threads", ba.threads, "GEMM worker threads (1 = single-threaded timing)")
        ->capture_default_str();
    cmd->add_option("--out", ba.out_path, "Write CSV here instead of stdout");
    cmd->add_flag("--csv", ba.csv, "CSV output (always on; accepted for scripts)");
  };
  auto* sweep = bench->add_subcommand("sweep", "Partial conv latency over split channels x kernel sizes");
  sweep->add_option("--channels", ba.channels, "Split channel counts")->delimiter(',')->capture_default_str();
  sweep->add_option("--kernels", ba.kernels, "Odd kernel sizes")->delimiter(',')->capture_default_str();
  sweep->add_option("--shape", ba.shape, "Feature map CxHxW")->capture_default_str();
  add_timing(sweep);
  auto* stack = bench->add_subcommand("stack", "Six stacked 3x3 partial convs vs one 13x13 partial conv");
  stack->add_option("--shape", ba.shape, "Feature map CxHxW")->capture_default_str();
  stack->add_option("--split", ba.split, "Convolved channels")->capture_default_str();
  add_timing(stack);
  auto* model = bench->add_subcommand("model", "End-to-end forward pass with random weights");
  model->add_option("--preset", ba.preset, "Model preset")
      ->check(CLI::IsMember({"plksr", "plksr-tiny"}))
      ->capture_default_str();
  model->add_option("--scale", ba.scale, "Upscale factor")->check(CLI::IsMember({2, 3, 4}))->capture_default_str();
  model->add_option("--hw", ba.hw, "Input HxW")->capture_default_str();
  add_timing(model);

  std::string inspect_path;
  bool inspect_csv = false;
  auto* inspect = app.add_subcommand("inspect", "Print config, layer shapes and parameter totals of a .plkw file");
  inspect->add_option("weights,--weights", inspect_path, "Weight file (.plkw), positional or --weights");
  inspect->add_flag("--csv", inspect_csv, "Per-layer CSV listing");

  MergeArgs mg;
  auto* merge = app.add_subcommand("merge", "Merge parallel (dilated) kernels into one equivalent kernel");
  merge->add_option("branches", mg.inputs, "Kernel container files (.plkt)")->required();
  merge->add_option("--target-k", mg.target_k, "Merged kernel size (odd); default: largest effective size");
  merge->add_option("--dilations", mg.dilations, "Dilation per branch kernel, in file order")->delimiter(',');
  merge->add_option("--seed", mg.seed, "Seed of the equivalence check input")->capture_default_str();
  merge->add_option("-o,--out", mg.out_path, "Merged kernel container")->required();

  InitArgs in;
  auto* init = app.add_subcommand("init", "Write a seeded random or all-zero .plkw for a preset");
  init->add_option("--preset", in.preset, "Model preset")
      ->check(CLI::IsMember({"plksr", "plksr-tiny"}))
      ->capture_default_str();
  init->add_option("--scale", in.scale, "Upscale factor")->check(CLI::IsMember({2, 3, 4}))->capture_default_str();
  init->add_option("--seed", in.seed, "random_init seed")->capture_default_str();
  init->add_flag("--zero", in.zero, "All weights and biases zero (nearest-neighbor model)");
  init->add_option("--out", in.out_path, "Output .plkw path")->required();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (upscale->parsed()) return cmd_upscale(up, out);
    if (eval->parsed()) return cmd_eval(ev, out);
    if (sweep->parsed()) return cmd_bench_sweep(ba, out);
    if (stack->parsed()) return cmd_bench_stack(ba, out);
    if (model->parsed()) return cmd_bench_model(ba, out);
    if (inspect->parsed()) return cmd_inspect(inspect_path, inspect_csv, out);
    if (merge->parsed()) return cmd_merge(mg, out);
    if (init->parsed()) return cmd_init(in, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalFailure& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace plksr::cli
