/* Copyright 2026 The taperfx Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// taperfx command-line tool: inspect, fixture, quantize, evaluate, sweep,
// simulate. Failures exit nonzero with a JSON error object on stderr.

#include <taperfx/taperfx.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace taperfx;
using taperfx::sim::format_number;

struct Options {
  std::string model;
  std::string dataset;
  std::string bits;
  std::string formats;
  std::size_t calib_size = 256;
  std::size_t samples = 1000;
  std::string array = "16x16";
  std::string mem;
  std::string costs;
  double clock = 200e6;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string descriptor;
  std::size_t train_count = 2000;
};

std::vector<int> parse_bits(const std::string& text) {
  int lo = 0;
  int hi = 0;
  try {
    const auto dots = text.find("..");
    std::size_t used = 0;
    if (dots == std::string::npos) {
      lo = hi = std::stoi(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } else {
      lo = std::stoi(text.substr(0, dots), &used);
      if (used != dots) throw std::invalid_argument(text);
      hi = std::stoi(text.substr(dots + 2), &used);
      if (used != text.size() - dots - 2) throw std::invalid_argument(text);
    }
  } catch (const std::invalid_argument&) {
    fail(ErrorCode::ParseError, "bits '" + text + "' is not <n> or <a>..<b>");
  } catch (const std::out_of_range&) {
    fail(ErrorCode::ParseError, "bits '" + text + "' out of range");
  }
  if (lo > hi) fail(ErrorCode::ParseError, "bits range '" + text + "' is empty");
  std::vector<int> out;
  for (int n = lo; n <= hi; ++n) {
    if (n < kMinBits || n > kMaxBits) {
      fail(ErrorCode::UnsupportedWidth, "bit width " + std::to_string(n) + " outside [2, 16]");
    }
    out.push_back(n);
  }
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) fail(ErrorCode::ParseError, "empty format list");
  return out;
}

void emit(const Options& opt, const std::string& file_name, const std::string& text) {
  std::cout << text;
  if (!opt.out.empty()) {
    std::filesystem::create_directories(opt.out);
    nn::write_text(std::filesystem::path(opt.out) / file_name, text);
  }
}

/// Float model ready for quantization (batchnorm folded).
nn::Model load_float_model(const Options& opt) {
  if (opt.model.empty()) fail(ErrorCode::InvalidArgument, "--model is required");
  nn::Model m = nn::load_model(opt.model);
  const bool has_bn = std::any_of(m.layers.begin(), m.layers.end(),
                                  [](const nn::Layer& l) { return l.kind == nn::LayerKind::BatchNorm; });
  return has_bn ? nn::fold_batchnorm(m) : m;
}

nn::Dataset load_data(const Options& opt, const nn::Model& m) {
  const std::string spec = opt.dataset.empty() ? "synth:" + std::to_string(opt.seed.value_or(1)) : opt.dataset;
  return nn::load_dataset(nn::DatasetSpec::parse(spec), m, std::max(opt.samples, opt.calib_size));
}

struct QualityRow {
  nn::FormatFamily family;
  int bits;
  std::string policy;
  nn::EvalReport report;
};

/// Quantizes and evaluates every (format, n) point; explicit descriptors
/// contribute one point each regardless of the bit range.
std::vector<QualityRow> quality_sweep(const Options& opt, const nn::Model& m, const nn::Dataset& data,
                                      const std::vector<int>& bits) {
  if (opt.calib_size == 0) fail(ErrorCode::EmptyBatch, "--calib-size must be positive");
  const nn::Calibration cal = nn::calibrate(m, data.head(opt.calib_size));
  const nn::Dataset eval = data.head(opt.samples);
  std::vector<QualityRow> rows;
  for (const auto& fmt : split_list(opt.formats.empty() ? "tfx:auto,fxp:auto" : opt.formats)) {
    const bool automatic = fmt == "tfx:auto" || fmt == "fxp:auto";
    for (const int n : automatic ? bits : std::vector<int>{0}) {
      const nn::FormatPolicy policy = nn::FormatPolicy::parse(fmt, n);
      const nn::QuantizedModel qm = nn::quantize_model(m, policy, cal);
      rows.push_back({qm.family, qm.bits, qm.policy, nn::evaluate(qm, eval)});
    }
  }
  return rows;
}

std::string quality_csv(const std::vector<QualityRow>& rows) {
  std::string out = "format,n,policy,top1,mean_mse,samples\n";
  for (const auto& r : rows) {
    out += nn::to_string(r.family) + "," + std::to_string(r.bits) + "," + r.policy + "," + format_number(r.report.top1) +
           "," + format_number(r.report.mean_mse()) + "," + std::to_string(r.report.samples) + "\n";
  }
  return out;
}

int cmd_inspect(const Options& opt) {
  const Format fmt = Format::parse(opt.descriptor);
  const FormatExtremes ext = extremes(fmt);
  const DynamicRange dr = dynamic_range(fmt);
  std::string out = "# format " + fmt.descriptor() + "\n";
  out += "# max_pos " + format_number(ext.max_pos) + "\n";
  out += "# min_neg " + format_number(ext.min_neg) + "\n";
  out += "# min_pos " + format_number(ext.min_pos) + "\n";
  out += "# dynamic_range " + format_number(dr.ratio()) + "\n";
  out += "code,bits,value\n";
  const int n = fmt.bits();
  for (Code c = 0; c < (Code{1} << n); ++c) {
    std::string bit_string;
    for (int b = n - 1; b >= 0; --b) bit_string += ((c >> b) & 1U) ? '1' : '0';
    out += std::to_string(c) + "," + bit_string + "," + format_number(fmt.value(c)) + "\n";
  }
  emit(opt, "inspect.csv", out);
  return 0;
}

int cmd_fixture(const Options& opt) {
  if (opt.out.empty()) fail(ErrorCode::InvalidArgument, "--out is required");
  const nn::Model m = nn::make_tiny_convnet({opt.seed.value_or(7), opt.train_count});
  nn::save_model(m, opt.out);
  std::cout << (std::filesystem::path(opt.out) / "model.json").string() << "\n";
  return 0;
}

int cmd_quantize(const Options& opt) {
  const auto bits = parse_bits(opt.bits.empty() ? "8" : opt.bits);
  if (opt.out.empty()) fail(ErrorCode::InvalidArgument, "--out is required");
  if (bits.size() != 1) fail(ErrorCode::InvalidArgument, "quantize takes a single bit width");
  const auto formats = split_list(opt.formats.empty() ? "tfx:auto" : opt.formats);
  if (formats.size() != 1) fail(ErrorCode::InvalidArgument, "quantize takes a single --format");
  const nn::Model m = load_float_model(opt);
  const nn::Dataset data = load_data(opt, m);
  if (opt.calib_size == 0) fail(ErrorCode::EmptyBatch, "--calib-size must be positive");
  const nn::Calibration cal = nn::calibrate(m, data.head(opt.calib_size));
  const nn::QuantizedModel qm = nn::quantize_model(m, nn::FormatPolicy::parse(formats[0], bits[0]), cal);
  nn::save_quantized(qm, opt.out);
  emit(opt, "selection.csv", nn::selection_report_csv(qm));
  return 0;
}

int cmd_evaluate(const Options& opt) {
  if (opt.model.empty()) fail(ErrorCode::InvalidArgument, "--model is required");
  if (nn::is_quantized_manifest(opt.model)) {
    const nn::QuantizedModel qm = nn::load_quantized(opt.model);
    const nn::Dataset data = load_data(opt, qm.model).head(opt.samples);
    emit(opt, "evaluate.csv", quality_csv({{qm.family, qm.bits, qm.policy, nn::evaluate(qm, data)}}));
    return 0;
  }
  const nn::Model m = load_float_model(opt);
  const nn::Dataset data = load_data(opt, m);
  if (opt.bits.empty()) {
    const nn::EvalReport r = nn::evaluate(m, data.head(opt.samples));
    emit(opt, "evaluate.csv",
         "format,n,policy,top1,mean_mse,samples\nfloat32,32,none," + format_number(r.top1) + ",0," +
             std::to_string(r.samples) + "\n");
    return 0;
  }
  emit(opt, "evaluate.csv", quality_csv(quality_sweep(opt, m, data, parse_bits(opt.bits))));
  return 0;
}

int cmd_sweep(const Options& opt) {
  const auto bits = parse_bits(opt.bits.empty() ? "5..8" : opt.bits);
  const nn::Model m = load_float_model(opt);
  const nn::Dataset data = load_data(opt, m);
  emit(opt, "sweep.csv", quality_csv(quality_sweep(opt, m, data, bits)));
  return 0;
}

int cmd_simulate(const Options& opt) {
  const auto array = sim::ArrayConfig::parse(opt.array);
  const auto mem = opt.mem.empty() ? sim::MemoryConfig{} : sim::MemoryConfig::from_json(nn::read_json(opt.mem));
  sim::CostTable costs;
  if (opt.costs.empty()) {
    std::cerr << "WARN: no --costs given; using the illustrative default cost table\n";
  } else {
    costs = sim::CostTable::from_json(nn::read_json(opt.costs));
  }

  std::vector<sim::SweepPoint> points;
  nn::Model structure;
  if (!opt.model.empty() && nn::is_quantized_manifest(opt.model)) {
    const nn::QuantizedModel qm = nn::load_quantized(opt.model);
    const nn::EvalReport r = nn::evaluate(qm, load_data(opt, qm.model).head(opt.samples));
    points.push_back({qm.family, qm.bits, qm.policy, r.top1, r.mean_mse()});
    structure = qm.model;
  } else {
    const auto bits = parse_bits(opt.bits.empty() ? "5..8" : opt.bits);
    structure = load_float_model(opt);
    for (const auto& r : quality_sweep(opt, structure, load_data(opt, structure), bits)) {
      points.push_back({r.family, r.bits, r.policy, r.report.top1, r.report.mean_mse()});
    }
  }
  const auto rows = sim::edp_sweep(structure, points, array, mem, costs, opt.clock);
  emit(opt, "sim.csv", sim::sweep_csv(rows));
  if (!opt.out.empty()) nn::write_text(std::filesystem::path(opt.out) / "edp_vs_error.dat", sim::edp_error_table(rows));
  return 0;
}

void report_error(const std::string& code, const std::string& message) {
  const nlohmann::json j{{"code", code}, {"message", message}};
  std::cerr << "error: " << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"Tapered fixed-point quantization toolkit"};
  app.require_subcommand(1);

  const auto add_model_flags = [&](CLI::App* cmd) {
    cmd->add_option("--model", opt.model, "Model manifest (float or quantized)");
    cmd->add_option("--dataset", opt.dataset, "idx:<dir> | cifar10:<dir> | synth:<seed> (default synth:<--seed>)");
    cmd->add_option("--calib-size", opt.calib_size, "Calibration samples (first N of the dataset)");
    cmd->add_option("--samples", opt.samples, "Evaluation samples (first N of the dataset)");
    cmd->add_option("--seed", opt.seed, "Seed for synthetic data (default 1)");
    cmd->add_option("--out", opt.out, "Output directory");
  };

  auto* inspect = app.add_subcommand("inspect", "Dump every code of a format with its value");
  inspect->add_option("descriptor", opt.descriptor, "tfx:<n>/<IS>/<SC> or fxp:<n>/<frac>")->required();
  inspect->add_option("--out", opt.out, "Output directory");

  auto* fixture = app.add_subcommand("fixture", "Write the seeded tiny ConvNet");
  fixture->add_option("--out", opt.out, "Output directory")->required();
  fixture->add_option("--seed", opt.seed, "Weight seed (default 7)");
  fixture->add_option("--train-count", opt.train_count, "Synthetic samples used to fit the readout");

  auto* quantize = app.add_subcommand("quantize", "Quantize a float model");
  add_model_flags(quantize);
  quantize->add_option("--bits", opt.bits, "Bit width");
  quantize->add_option("--format", opt.formats, "tfx:auto (default) | fxp:auto | explicit descriptor");

  auto* evaluate = app.add_subcommand("evaluate", "Top-1 accuracy of a float or quantized model");
  add_model_flags(evaluate);
  evaluate->add_option("--bits", opt.bits, "Bit width or range a..b (quantizes a float model first)");
  evaluate->add_option("--format,--formats", opt.formats, "Comma-separated format policies");

  auto* sweep = app.add_subcommand("sweep", "Accuracy and MSE over formats x bit widths");
  add_model_flags(sweep);
  sweep->add_option("--bits", opt.bits, "Bit range a..b (default 5..8)");
  sweep->add_option("--format,--formats", opt.formats, "Comma-separated format policies");

  auto* simulate = app.add_subcommand("simulate", "Systolic-array cost sweep");
  add_model_flags(simulate);
  simulate->add_option("--bits", opt.bits, "Bit range a..b (default 5..8)");
  simulate->add_option("--format,--formats", opt.formats, "Comma-separated format policies");
  simulate->add_option("--array", opt.array, "PE array RxC");
  simulate->add_option("--mem", opt.mem, "Memory config JSON");
  simulate->add_option("--costs", opt.costs, "Cost table JSON");
  simulate->add_option("--clock", opt.clock, "Clock in Hz");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("ParseError", e.what());
    return 2;
  }

  try {
    if (*inspect) return cmd_inspect(opt);
    if (*fixture) return cmd_fixture(opt);
    if (*quantize) return cmd_quantize(opt);
    if (*evaluate) return cmd_evaluate(opt);
    if (*sweep) return cmd_sweep(opt);
    if (*simulate) return cmd_simulate(opt);
  } catch (const taperfx::Error& e) {
    const std::string what = e.what();
    const std::string prefix = std::string(taperfx::to_string(e.code())) + ": ";
    report_error(std::string(taperfx::to_string(e.code())),
                 what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what);
    return 1;
  } catch (const std::exception& e) {
    report_error("IoError", e.what());
    return 1;
  }
  return 2;
}
