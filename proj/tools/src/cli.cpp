// Copyright 2026 The mossq Authors.
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

#include "mossq_cli/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "mossq/adamw.hpp"
#include "mossq/autoscale.hpp"
#include "mossq/error.hpp"
#include "mossq/fp8.hpp"
#include "mossq/qgemm.hpp"
#include "mossq/quantize.hpp"
#include "mossq/random.hpp"
#include "mossq/snr.hpp"
#include "mossq/tensor_io.hpp"
#include "mossq/toytrain.hpp"
#include "mossq/version.hpp"

namespace mossq::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "e4m3";
};

struct RandnOpts {
  std::vector<std::size_t> shape{4096};
  std::string dist = "gaussian";
  double outlier_rate = 0.001;
  double outlier_magnitude = 50.0;
};

struct QuantizeOpts {
  std::string scheme = "mx2";
  std::string in;
  std::string meta;
  std::string scales_out;
  std::size_t group_size = kDefaultGroupSize;
  std::string rounding = "ceil";
  std::size_t level1_span = 0;
};

struct DequantizeOpts {
  std::string in;
  std::string meta;
};

struct SnrOpts {
  std::size_t trials = 1000;
  std::size_t size = 4096;
  std::string dist = "gaussian";
  double outlier_rate = 0.001;
  double outlier_magnitude = 50.0;
  std::size_t group_size = kDefaultGroupSize;
  std::string rounding = "ceil";
};

struct BoundOpts {
  std::size_t steps = 200;
  std::size_t trials = 10000;
  bool adversarial = false;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-30;
  double eta = 1e-3;
};

struct AutoscaleOpts {
  std::size_t steps = 2000;
  std::size_t interval = kDefaultRescaleInterval;
  std::string eta_schedule = "cosine";
  double eta = 1e-3;
  std::size_t warmup = 100;
  std::size_t size = 4096;
  double weight_decay = 0.1;
  std::vector<std::size_t> sweep;
};

struct GemmOpts {
  std::size_t m = 64;
  std::size_t n = 64;
  std::size_t k = 64;
  std::string scheme = "mx2";
  bool verify = false;
  bool counters = false;
  std::size_t trials = 1;
  std::size_t group_size = kDefaultGroupSize;
};

struct TrainOpts {
  std::string quant = "on";
  TrainConfig config;
};

struct Options {
  RandnOpts randn;
  QuantizeOpts quantize;
  DequantizeOpts dequantize;
  SnrOpts snr;
  BoundOpts bound;
  AutoscaleOpts autoscale;
  GemmOpts gemm;
  TrainOpts train;
};

// Shortest round-trip decimal form; inf/nan spelled out for CSV.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(Errc::io, "cannot open " + path.string() + " for writing");
  f << text;
  if (!f) fail(Errc::io, "write to " + path.string() + " failed");
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) fail(Errc::io, "cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    fail(Errc::invalid_value, path.string() + ": " + e.what());
  }
}

class Run {
 public:
  Run(std::string subcommand, const Globals& g) : subcommand_(std::move(subcommand)), g_(g) {}

  json& config() { return config_; }

  void add_output(const fs::path& p) { outputs_.push_back(p.string()); }

  /// Writes one run manifest next to the primary (first) output.
  void write_manifest() const {
    if (outputs_.empty()) return;
    json m;
    m["subcommand"] = subcommand_;
    m["version"] = std::string(kVersion);
    m["seed"] = g_.seed;
    m["format"] = g_.format;
    m["config"] = config_;
    m["outputs"] = outputs_;
    const std::string text = m.dump(2) + "\n";
    write_text(outputs_.front() + ".manifest.json", text);
  }

  /// Text goes to --out when given (with a manifest), otherwise to `out`.
  void emit(const std::string& text, std::ostream& out) {
    if (g_.out.empty()) {
      out << text;
      return;
    }
    write_text(g_.out, text);
    add_output(g_.out);
    write_manifest();
  }

 private:
  std::string subcommand_;
  const Globals& g_;
  json config_ = json::object();
  std::vector<std::string> outputs_;
};

Distribution parse_distribution(const std::string& name, double rate, double magnitude) {
  if (name == "gaussian") return Gaussian{};
  if (name == "laplace") return Laplace{};
  if (name == "outlier") return OutlierInjected{rate, magnitude};
  fail(Errc::invalid_argument, "unknown distribution '" + name + "'");
}

std::string class_of(std::uint8_t bits, Fp8Format fmt) {
  const float v = fp8_decode(bits, fmt);
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return "inf";
  if (v == 0.0f) return "zero";
  const int mbits = spec(fmt).mantissa_bits;
  return ((bits & 0x7f) >> mbits) == 0 ? "subnormal" : "normal";
}

// ---------------------------------------------------------------- codec-table

void add_codec_table(CLI::App& app, const Globals& g, std::function<void(std::ostream&)>& action) {
  auto* sub = app.add_subcommand("codec-table", "Dump all 256 codes of an FP8 format as CSV");
  sub->fallthrough();
  sub->callback([&g, &action] {
    action = [&g](std::ostream& out) {
      const Fp8Format fmt = parse_fp8_format(g.format);
      const int mbits = spec(fmt).mantissa_bits;
      std::ostringstream csv;
      csv << "code,hex,sign,exponent,mantissa,value,class\n";
      for (int c = 0; c < 256; ++c) {
        const auto bits = static_cast<std::uint8_t>(c);
        char hex[8];
        std::snprintf(hex, sizeof hex, "0x%02X", c);
        csv << c << ',' << hex << ',' << (c >> 7) << ',' << ((c & 0x7f) >> mbits) << ',' << (c & ((1 << mbits) - 1))
            << ',' << num(fp8_decode(bits, fmt)) << ',' << class_of(bits, fmt) << '\n';
      }
      Run run("codec-table", g);
      run.emit(csv.str(), out);
    };
  });
}

// ---------------------------------------------------------------- randn

void add_randn(CLI::App& app, const Globals& g, Options& opts, std::function<void(std::ostream&)>& action) {
  RandnOpts& o = opts.randn;
  auto* sub = app.add_subcommand("randn", "Write a seeded synthetic f32 tensor");
  sub->fallthrough();
  sub->add_option("--shape", o.shape, "Comma-separated dimensions")->delimiter(',')->capture_default_str();
  sub->add_option("--dist", o.dist, "gaussian | laplace | outlier")->capture_default_str()->check(CLI::IsMember({"gaussian", "laplace", "outlier"}));
  sub->add_option("--outlier-rate", o.outlier_rate)->capture_default_str();
  sub->add_option("--outlier-magnitude", o.outlier_magnitude)->capture_default_str();
  sub->callback([&g, &action, &o] {
    action = [&g, &o](std::ostream& out) {
      if (g.out.empty()) fail(Errc::invalid_argument, "randn requires --out");
      const Tensor t = tensor_randn(o.shape, g.seed, parse_distribution(o.dist, o.outlier_rate, o.outlier_magnitude));
      write_tensor(g.out, t);
      Run run("randn", g);
      run.config() = {{"shape", o.shape}, {"dist", o.dist}, {"outlier_rate", o.outlier_rate},
                      {"outlier_magnitude", o.outlier_magnitude}};
      run.add_output(g.out);
      run.write_manifest();
      out << "wrote " << t.size() << " elements to " << g.out << "\n";
    };
  });
}

// ------------------------------------------------------------ quantize / dequantize

std::string relative_to(const fs::path& target, const fs::path& base_file) {
  const fs::path base = fs::absolute(base_file).parent_path();
  return fs::absolute(target).lexically_relative(base).generic_string();
}

void add_quantize(CLI::App& app, const Globals& g, Options& opts, std::function<void(std::ostream&)>& action) {
  QuantizeOpts& o = opts.quantize;
  auto* sub = app.add_subcommand("quantize", "Quantize a .mosst f32 tensor to FP8 codes plus scale metadata");
  sub->fallthrough();
  sub->add_option("--scheme", o.scheme, "tensor | group | mx2")->check(CLI::IsMember({"tensor", "group", "mx2"}))->capture_default_str();
  sub->add_option("--in", o.in, "Input f32 tensor file")->required()->check(CLI::ExistingFile);
  sub->add_option("--meta", o.meta, "Metadata JSON path (default <out>.json)");
  sub->add_option("--scales-out", o.scales_out, "E8M0 micro-scale file for mx2 (default <out>.ss.mosst)");
  sub->add_option("--group-size", o.group_size, "Group size for the group scheme")->capture_default_str();
  sub->add_option("--rounding", o.rounding, "E8M0 rounding for mx2: ceil | nearest")->capture_default_str();
  sub->add_option("--level1-span", o.level1_span, "mx2 level-1 span along the last axis (0 = whole tensor)")->capture_default_str();
  sub->callback([&g, &action, &o] {
    action = [&g, &o](std::ostream& out) {
      if (g.out.empty()) fail(Errc::invalid_argument, "quantize requires --out");
      const Fp8Format fmt = parse_fp8_format(g.format);
      const Scheme scheme = parse_scheme(o.scheme);
      const Tensor x = read_tensor(o.in);
      SchemeParams params;
      params.group_size = o.group_size;
      params.two_level = TwoLevelOptions{parse_scale_rounding(o.rounding), o.level1_span};
      const QuantizedTensor q = quantize(x, scheme, fmt, params);

      const fs::path out_path = g.out;
      const fs::path meta_path = o.meta.empty() ? fs::path(g.out + ".json") : fs::path(o.meta);
      Run run("quantize", g);
      run.config() = {{"scheme", o.scheme}, {"in", o.in}, {"group_size", o.group_size}, {"rounding", o.rounding},
                      {"level1_span", o.level1_span}};

      json meta;
      meta["scheme"] = o.scheme;
      meta["format"] = g.format;
      meta["shape"] = x.shape();
      meta["codes_path"] = relative_to(out_path, meta_path);
      std::size_t clipped = 0;
      std::visit(
          [&](const auto& qq) {
            using T = std::decay_t<decltype(qq)>;
            write_codes(out_path, CodeArray{code_dtype(fmt), qq.shape, qq.codes});
            run.add_output(out_path);
            clipped = qq.clipped;
            if constexpr (std::is_same_v<T, PerTensorQuant>) {
              meta["scale"] = qq.scale;
            } else if constexpr (std::is_same_v<T, PerGroupQuant>) {
              meta["group_size"] = qq.group_size;
              meta["scales"] = qq.scales;
            } else {
              meta["rounding"] = std::string(to_string(qq.options.rounding));
              meta["level1_span"] = qq.options.level1_span;
              meta["global_scales"] = qq.global_scales;
              const fs::path ss_path = o.scales_out.empty() ? fs::path(g.out + ".ss.mosst") : fs::path(o.scales_out);
              Shape ss_shape = qq.shape;
              ss_shape.back() /= kMicroBlock;
              std::vector<std::uint8_t> bits(qq.micro_scales.size());
              for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = qq.micro_scales[i].bits;
              write_codes(ss_path, CodeArray{DType::e8m0, ss_shape, std::move(bits)});
              run.add_output(ss_path);
              meta["micro_scales_path"] = relative_to(ss_path, meta_path);
            }
          },
          q);
      meta["clipped"] = clipped;
      write_text(meta_path, meta.dump(2) + "\n");
      run.add_output(meta_path);
      run.write_manifest();
      out << "quantized " << x.size() << " elements (" << o.scheme << ", " << g.format << "), clipped " << clipped
          << "\n";
    };
  });
}

CodeArray read_codes(const fs::path& p, DType expected) {
  TensorFile f = read_tensor_file(p);
  auto* c = std::get_if<CodeArray>(&f);
  if (c == nullptr || c->dtype != expected) fail(Errc::unsupported_dtype, p.string() + " does not hold the expected codes");
  return std::move(*c);
}

void add_dequantize(CLI::App& app, const Globals& g, Options& opts, std::function<void(std::ostream&)>& action) {
  DequantizeOpts& o = opts.dequantize;
  auto* sub = app.add_subcommand("dequantize", "Rebuild an f32 tensor from quantize output");
  sub->fallthrough();
  sub->add_option("--meta", o.meta, "Metadata JSON written by quantize")->required()->check(CLI::ExistingFile);
  sub->add_option("--in", o.in, "Code file (default: codes_path from the metadata)");
  sub->callback([&g, &action, &o] {
    action = [&g, &o](std::ostream& out) {
      if (g.out.empty()) fail(Errc::invalid_argument, "dequantize requires --out");
      const json meta = read_json(o.meta);
      const fs::path base = fs::absolute(o.meta).parent_path();
      try {
        const Fp8Format fmt = parse_fp8_format(meta.at("format").get<std::string>());
        const Scheme scheme = parse_scheme(meta.at("scheme").get<std::string>());
        const fs::path codes_path = o.in.empty() ? base / meta.at("codes_path").get<std::string>() : fs::path(o.in);
        CodeArray codes = read_codes(codes_path, code_dtype(fmt));
        const Shape shape = meta.at("shape").get<Shape>();
        if (codes.shape != shape) fail(Errc::shape_mismatch, "code file shape differs from metadata");
        Tensor x;
        switch (scheme) {
          case Scheme::per_tensor: {
            PerTensorQuant q{shape, fmt, std::move(codes.codes), meta.at("scale").get<float>(), 0};
            x = dequantize(q);
            break;
          }
          case Scheme::per_group: {
            PerGroupQuant q{shape, fmt, meta.at("group_size").get<std::size_t>(), std::move(codes.codes),
                            meta.at("scales").get<std::vector<float>>(), 0};
            if (q.group_size == 0 || q.scales.size() != (q.codes.size() / shape.back()) * q.groups_per_row()) {
              fail(Errc::shape_mismatch, "scale count does not match the group layout");
            }
            x = dequantize(q);
            break;
          }
          case Scheme::two_level: {
            TwoLevelQuant q;
            q.shape = shape;
            q.format = fmt;
            q.options = TwoLevelOptions{parse_scale_rounding(meta.at("rounding").get<std::string>()),
                                        meta.at("level1_span").get<std::size_t>()};
            const std::size_t span = q.options.level1_span;
            if (shape.back() % kMicroBlock != 0 || (span != 0 && (span % kMicroBlock != 0 || shape.back() % span != 0))) {
              fail(Errc::invalid_value, "metadata describes an invalid two-level layout");
            }
            q.codes = std::move(codes.codes);
            q.global_scales = meta.at("global_scales").get<std::vector<float>>();
            const CodeArray ss = read_codes(base / meta.at("micro_scales_path").get<std::string>(), DType::e8m0);
            if (ss.codes.size() != (q.codes.size() / shape.back()) * q.blocks_per_row() ||
                q.global_scales.size() != q.global_scale_count()) {
              fail(Errc::shape_mismatch, "scale counts do not match the two-level layout");
            }
            for (std::uint8_t b : ss.codes) {
              if (b == 255) fail(Errc::invalid_value, "micro-scale code 255 is reserved");
              q.micro_scales.push_back(E8m0Code{b});
            }
            x = dequantize(q);
            break;
          }
        }
        write_tensor(g.out, x);
      } catch (const json::exception& e) {
        fail(Errc::invalid_value, o.meta + ": " + e.what());
      }
      Run run("dequantize", g);
      run.config() = {{"meta", o.meta}, {"in", o.in}};
      run.add_output(g.out);
      run.write_manifest();
      out << "wrote " << g.out << "\n";
    };
  });
}

// ---------------------------------------------------------------- snr

void add_snr(CLI::App& app, const Globals& g, Options& opts, std::function<void(std::ostream&)>& action) {
  SnrOpts& o = opts.snr;
  auto* sub = app.add_subcommand("snr", "Per-trial empirical and model SNR for all three schemes");
  sub->fallthrough();
  sub->add_option("--trials", o.trials)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--size", o.size)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--dist", o.dist, "gaussian | laplace | outlier")->capture_default_str()->check(CLI::IsMember({"gaussian", "laplace", "outlier"}));
  sub->add_option("--outlier-rate", o.outlier_rate)->capture_default_str();
  sub->add_option("--outlier-magnitude", o.outlier_magnitude)->capture_default_str();
  sub->add_option("--group-size", o.group_size)->capture_default_str();
  sub->add_option("--rounding", o.rounding, "E8M0 rounding: ceil | nearest")->capture_default_str();
  sub->callback([&g, &action, &o] {
    action = [&g, &o](std::ostream& out) {
      Theorem1Config cfg;
      cfg.trials = o.trials;
      cfg.size = o.size;
      cfg.dist = parse_distribution(o.dist, o.outlier_rate, o.outlier_magnitude);
      cfg.format = parse_fp8_format(g.format);
      cfg.seed = g.seed;
      cfg.params.group_size = o.group_size;
      cfg.params.two_level.rounding = parse_scale_rounding(o.rounding);
      if (o.size % kMicroBlock != 0) fail(Errc::invalid_argument, "--size must be a multiple of 32 for mx2");
      const Theorem1Summary s = theorem1_harness(cfg);

      std::ostringstream csv;
      csv << "trial,scheme,empirical_db,model_db\n";
      for (std::size_t t = 0; t < s.trials.size(); ++t) {
        for (const SnrReport& r : s.trials[t].reports) {
          csv << t << ',' << to_string(r.scheme) << ',' << num(r.empirical_db) << ',' << num(r.model_db) << '\n';
        }
      }
      Run run("snr", g);
      run.config() = {{"trials", o.trials},        {"size", o.size},
                      {"dist", o.dist},            {"outlier_rate", o.outlier_rate},
                      {"outlier_magnitude", o.outlier_magnitude}, {"group_size", o.group_size},
                      {"rounding", o.rounding}};
      run.emit(csv.str(), out);
      if (!g.out.empty()) {
        out << "mean empirical SNR dB: tensor " << num(s.mean_empirical_db[0]) << ", group "
            << num(s.mean_empirical_db[1]) << ", mx2 " << num(s.mean_empirical_db[2]) << "; ordered in "
            << num(s.ordered_fraction) << " of trials\n";
      }
    };
  });
}

// ---------------------------------------------------------------- bound-check

void add_bound_check(CLI::App& app, const Globals& g, Options& opts, std::function<void(std::ostream&)>& action) {
  BoundOpts& o = opts.bound;
  auto* sub = app.add_subcommand("bound-check", "Max |update|/eta per gradient sequence under Adam");
  sub->fallthrough();
  sub->add_option("--steps", o.steps)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--trials", o.trials, "Random Gaussian sequences")->capture_default_str();
  sub->add_flag("--adversarial", o.adversarial, "Also run the sparse-spike family");
  sub->add_option("--beta1", o.beta1)->capture_default_str();
  sub->add_option("--beta2", o.beta2)->capture_default_str();
  sub->add_option("--eps", o.eps)->capture_default_str();
  sub->add_option("--eta", o.eta)->capture_default_str();
  sub->callback([&g, &action, &o] {
    action = [&g, &o](std::ostream& out) {
      const BoundCheckParams params{o.beta1, o.beta2, o.eps, o.eta};
      std::ostringstream csv;
      csv << "family,trial,max_ratio,max_ratio_over_bound,violations\n";
      std::size_t violations = 0;
      double worst = 0.0;
      auto dump = [&](const char* family, const BoundReport& r) {
        for (std::size_t i = 0; i < r.elements; ++i) {
          csv << family << ',' << i << ',' << num(r.element_max_ratio[i]) << ','
              << num(r.element_max_ratio_over_bound[i]) << ',' << r.element_violations[i] << '\n';
        }
        violations += r.violations;
        worst = std::max(worst, r.max_ratio_over_bound);
      };
      if (o.trials > 0) dump("gaussian", theorem2_check(gaussian_gradient_sequences(o.trials, o.steps, g.seed), params));
      if (o.adversarial) dump("spike", theorem2_check(sparse_spike_sequences(o.steps), params));
      Run run("bound-check", g);
      run.config() = {{"steps", o.steps}, {"trials", o.trials}, {"adversarial", o.adversarial}, {"beta1", o.beta1},
                      {"beta2", o.beta2}, {"eps", o.eps},       {"eta", o.eta}};
      run.emit(csv.str(), out);
      if (!g.out.empty()) out << "violations " << violations << ", worst ratio/bound " << num(worst) << "\n";
    };
  });
}

// ---------------------------------------------------------------- autoscale

void add_autoscale(CLI::App& app, const Globals& g, Options& opts, std::function<void(std::ostream&)>& action) {
  AutoscaleOpts& o = opts.autoscale;
  auto* sub = app.add_subcommand("autoscale", "Predicted vs just-in-time weight scale along an AdamW trajectory");
  sub->fallthrough();
  sub->add_option("--steps", o.steps)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--interval", o.interval)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--eta-schedule", o.eta_schedule, "const | cosine")->capture_default_str()->check(CLI::IsMember({"const", "cosine"}));
  sub->add_option("--eta", o.eta, "Peak learning rate")->capture_default_str();
  sub->add_option("--warmup", o.warmup)->capture_default_str();
  sub->add_option("--size", o.size, "Weight tensor elements")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--weight-decay", o.weight_decay)->capture_default_str();
  sub->add_option("--sweep", o.sweep, "Emit an interval sweep table for these intervals instead")->delimiter(',');
  sub->callback([&g, &action, &o] {
    action = [&g, &o](std::ostream& out) {
      TrajectorySpec spec;
      spec.size = o.size;
      spec.steps = o.steps;
      spec.lr = LrSchedule{parse_lr_kind(o.eta_schedule), o.eta, o.warmup, o.steps, 0.1};
      spec.weight_decay = o.weight_decay;
      spec.seed = g.seed;
      spec.format = parse_fp8_format(g.format);
      const WeightTrajectory traj = simulate_trajectory(spec);

      std::ostringstream csv;
      if (o.sweep.empty()) {
        const ScaleTrace tr = trace_schedule(traj, o.interval, spec.format);
        csv << "t,s_auto,s_jit\n";
        for (std::size_t t = 0; t < tr.s_auto.size(); ++t) csv << t << ',' << num(tr.s_auto[t]) << ',' << num(tr.s_jit[t]) << '\n';
      } else {
        csv << "interval,rescale_count,mean_overshoot,max_overshoot,min_headroom,dominance_violations\n";
        for (const IntervalRow& r : interval_sweep(o.sweep, traj, spec.format)) {
          csv << r.interval << ',' << r.rescale_count << ',' << num(r.mean_overshoot) << ',' << num(r.max_overshoot) << ','
              << num(r.min_headroom) << ',' << r.dominance_violations << '\n';
        }
      }
      Run run("autoscale", g);
      run.config() = {{"steps", o.steps}, {"interval", o.interval}, {"eta_schedule", o.eta_schedule},
                      {"eta", o.eta},     {"warmup", o.warmup},     {"size", o.size},
                      {"weight_decay", o.weight_decay}, {"sweep", o.sweep}};
      run.emit(csv.str(), out);
    };
  });
}

// ---------------------------------------------------------------- gemm

void add_gemm(CLI::App& app, const Globals& g, Options& opts, std::function<void(std::ostream&)>& action) {
  GemmOpts& o = opts.gemm;
  auto* sub = app.add_subcommand("gemm", "Quantized GEMM: oracle check and scale-multiply counters");
  sub->fallthrough();
  sub->add_option("--m", o.m)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--n", o.n)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--k", o.k)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--scheme", o.scheme, "mx2 | pergroup")->capture_default_str()->check(CLI::IsMember({"mx2", "pergroup"}));
  sub->add_flag("--verify", o.verify, "Run the kernel on random operands and compare with the oracle");
  sub->add_flag("--counters", o.counters, "Report scale-multiply counters");
  sub->add_option("--trials", o.trials, "Random instances when verifying")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--group-size", o.group_size, "Group size for pergroup")->capture_default_str();
  sub->callback([&g, &action, &o] {
    action = [&g, &o](std::ostream& out) {
      const Fp8Format fmt = parse_fp8_format(g.format);
      const GemmKind kind = o.scheme == "mx2" ? GemmKind::mx_epilogue : GemmKind::pergroup_mainloop;
      const GemmCounters predicted = predicted_counters(kind, o.m, o.n, o.k, o.group_size);

      json report;
      report["scheme"] = o.scheme;
      report["m"] = o.m;
      report["n"] = o.n;
      report["k"] = o.k;
      GemmCounters counters = predicted;
      std::string source = "predicted";
      if (o.verify) {
        double max_err = 0.0, sum_err = 0.0, sum_fp_err = 0.0;
        for (std::size_t t = 0; t < o.trials; ++t) {
          const Tensor a = tensor_randn({o.m, o.k}, Rng::derive_seed(g.seed, 2 * t));
          const Tensor b = tensor_randn({o.n, o.k}, Rng::derive_seed(g.seed, 2 * t + 1));
          GemmResult r;
          MatrixF64 ref;
          if (kind == GemmKind::mx_epilogue) {
            const MxGemmOperands ops(quantize_two_level(a, fmt), quantize_per_tensor(b, fmt));
            r = gemm_mx_epilogue(ops);
            ref = gemm_oracle(dequantize_f64(ops.activation()), dequantize_f64(ops.weight()), o.m, o.n, o.k, kMicroBlock);
          } else {
            const PerGroupQuant qa = quantize_per_group(a, fmt, o.group_size);
            const PerGroupQuant qb = quantize_per_group(b, fmt, o.group_size);
            r = gemm_pergroup_mainloop(qa, qb);
            ref = gemm_oracle(dequantize_f64(qa), dequantize_f64(qb), o.m, o.n, o.k, o.group_size);
          }
          const double err = relative_frobenius_error(r.output, ref);
          max_err = std::max(max_err, err);
          sum_err += err;
          sum_fp_err += relative_frobenius_error(r.output, gemm_oracle(a, b));
          if (t == 0) counters = r.counters;
          if (r.counters != predicted) fail(Errc::invalid_value, "kernel counters differ from the counting model");
        }
        source = "measured";
        report["trials"] = o.trials;
        report["max_rel_error"] = max_err;
        report["mean_rel_error"] = sum_err / static_cast<double>(o.trials);
        report["mean_rel_error_vs_full_precision"] = sum_fp_err / static_cast<double>(o.trials);
      }
      if (o.counters || o.verify) {
        report["counters_source"] = source;
        report["counters"] = {{"mainloop_dequant_multiplies", counters.mainloop_dequant_multiplies},
                              {"epilogue_dequant_multiplies", counters.epilogue_dequant_multiplies},
                              {"tensor_path_scale_applications", counters.tensor_path_scale_applications},
                              {"mac_count", counters.mac_count}};
      }
      Run run("gemm", g);
      run.config() = {{"m", o.m},         {"n", o.n},           {"k", o.k},           {"scheme", o.scheme},
                      {"verify", o.verify}, {"counters", o.counters}, {"trials", o.trials}, {"group_size", o.group_size}};
      run.emit(report.dump(2) + "\n", out);
    };
  });
}

// ---------------------------------------------------------------- train

void add_train(CLI::App& app, const Globals& g, Options& opts, std::function<void(std::ostream&)>& action) {
  TrainOpts& o = opts.train;
  auto* sub = app.add_subcommand("train", "Toy MLP training with or without FP8 forward quantization");
  sub->fallthrough();
  TrainConfig& c = o.config;
  sub->add_option("--quant", o.quant, "on | off")->capture_default_str()->check(CLI::IsMember({"on", "off"}));
  sub->add_option("--steps", c.steps)->capture_default_str();
  sub->add_option("--interval", c.rescale_interval, "Weight re-scale interval")->capture_default_str();
  sub->add_option("--batch", c.batch)->capture_default_str();
  sub->add_option("--hidden", c.hidden_dim)->capture_default_str();
  sub->add_option("--peak-lr", c.peak_lr)->capture_default_str();
  sub->add_option("--warmup", c.warmup)->capture_default_str();
  sub->add_option("--weight-decay", c.weight_decay)->capture_default_str();
  sub->add_option("--eval-size", c.eval_size)->capture_default_str();
  sub->callback([&g, &action, &o] {
    action = [&g, &o](std::ostream& out) {
      TrainConfig cfg = o.config;
      cfg.quantize = o.quant == "on";
      cfg.seed = g.seed;
      cfg.format = parse_fp8_format(g.format);
      const TrainLog log = train(cfg);

      std::ostringstream csv;
      csv << "step,lr,eval_loss,train_loss";
      for (const auto& w : log.weights) csv << ",s_auto_" << w.name << ",s_jit_" << w.name;
      csv << ",violation\n";
      for (std::size_t t = 0; t < log.eval_loss.size(); ++t) {
        csv << t << ',' << (t == 0 ? std::string() : num(log.lr[t - 1])) << ',' << num(log.eval_loss[t]) << ','
            << (t == 0 ? std::string() : num(log.train_loss[t - 1]));
        bool violated = false;
        for (const auto& w : log.weights) {
          csv << ',' << num(w.s_auto[t]) << ',' << num(w.s_jit[t]);
          violated = violated || w.violated[t] != 0;
        }
        csv << ',' << (violated ? 1 : 0) << '\n';
      }
      Run run("train", g);
      run.config() = {{"quant", o.quant},           {"steps", cfg.steps},           {"interval", cfg.rescale_interval},
                      {"batch", cfg.batch},         {"input_dim", cfg.input_dim},   {"hidden_dim", cfg.hidden_dim},
                      {"output_dim", cfg.output_dim}, {"peak_lr", cfg.peak_lr},     {"warmup", cfg.warmup},
                      {"min_lr_fraction", cfg.min_lr_fraction}, {"beta1", cfg.beta1}, {"beta2", cfg.beta2},
                      {"eps", cfg.eps},             {"weight_decay", cfg.weight_decay}, {"eval_size", cfg.eval_size},
                      {"label_noise", cfg.label_noise}};
      run.emit(csv.str(), out);
      if (!g.out.empty()) {
        out << "final smoothed loss " << num(log.smoothed_final_loss()) << ", dominance violations "
            << log.dominance_violations() << ", clipped weight codes " << log.clipped_elements() << "\n";
      }
    };
  });
}

void print_error(std::ostream& err, const std::string& code, const std::string& message) {
  err << json{{"error", code}, {"message", message}}.dump() << "\n";
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Globals g;
  CLI::App app{"FP8 microscaling and automatic weight scaling toolkit", "mossq"};
  app.set_version_flag("--version", std::string(kVersion));
  app.add_option("--seed", g.seed, "Seed for all randomness")->capture_default_str();
  app.add_option("--out", g.out, "Output path (stdout when omitted for text outputs)");
  app.add_option("--format", g.format, "FP8 element format: e4m3 | e5m2")->capture_default_str()->check(CLI::IsMember({"e4m3", "e5m2"}));
  app.require_subcommand(1);

  Options opts;
  std::function<void(std::ostream&)> action;
  add_codec_table(app, g, action);
  add_randn(app, g, opts, action);
  add_quantize(app, g, opts, action);
  add_dequantize(app, g, opts, action);
  add_snr(app, g, opts, action);
  add_bound_check(app, g, opts, action);
  add_autoscale(app, g, opts, action);
  add_gemm(app, g, opts, action);
  add_train(app, g, opts, action);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (dynamic_cast<const CLI::CallForVersion*>(&e) ? std::string(kVersion) + "\n" : app.help());
      return 0;
    }
    print_error(err, "usage", e.what());
    err << app.help();
    return 2;
  }

  try {
    action(out);
  } catch (const Error& e) {
    print_error(err, std::string(to_string(e.code())), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace mossq::cli
