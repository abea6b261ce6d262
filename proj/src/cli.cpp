// Copyright 2026 The proxyfl Authors. All Rights Reserved.
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
// =============================================================================

#include "proxyfl/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "proxyfl/config.hpp"
#include "proxyfl/errors.hpp"
#include "proxyfl/fed_protocol.hpp"
#include "proxyfl/metrics_io.hpp"
#include "proxyfl/wire_format.hpp"

namespace proxyfl {

namespace fs = std::filesystem;

namespace {

// Thrown for option combinations CLI11 cannot express; maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::optional<int> parse_bits(const std::string& text) {
  if (text == "off") return std::nullopt;
  int bits = 0;
  try {
    std::size_t used = 0;
    bits = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw UsageError("--bits must be an integer in [1, 8] or \"off\", got \"" + text + "\"");
  }
  if (bits < 1 || bits > 8) throw UsageError("--bits must be in [1, 8] or \"off\"");
  return bits;
}

std::string read_text(const fs::path& path) {
  const Bytes bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_adapters(const fs::path& dir, const std::string& prefix, const AdapterSet& set) {
  for (const auto& ad : set) {
    const auto stem = prefix + "_layer" + std::to_string(ad.layer);
    write_file_atomic(dir / (stem + "_B.flpf"), serialize(ad.b));
    write_file_atomic(dir / (stem + "_A.flpf"), serialize(ad.a));
  }
}

void write_broadcast(const fs::path& dir, const std::string& prefix, const Broadcast& sent) {
  for (const auto& l : sent.layers) {
    const auto ext = payload_kind(l.b) == PayloadKind::kQuantized ? ".flpq" : ".flpf";
    const auto stem = prefix + "_layer" + std::to_string(l.layer);
    write_file_atomic(dir / (stem + "_B" + ext), l.b);
    write_file_atomic(dir / (stem + "_A" + ext), l.a);
  }
}

nlohmann::json run_report(const ExperimentConfig& cfg, std::uint64_t seed,
                          const TrainingResult& result) {
  const SeedHistory run{seed, result.history};
  CommunicationStats cumulative;
  for (const auto& c : result.communication) cumulative += c;
  nlohmann::json alignment = nlohmann::json::object();
  for (const auto& [round, value] : result.gradient_alignment) {
    alignment[std::to_string(round)] = value;
  }
  return {{"label", cfg.quantizer.label()},
          {"seed", seed},
          {"privacy", to_json(privacy_gap_report(std::span(&run, 1), cfg.quantizer.label()))},
          {"communication",
           {{"per_round", result.communication.empty() ? nlohmann::json()
                                                       : to_json(result.communication.front())},
            {"cumulative", to_json(cumulative)}}},
          {"gradient_alignment", alignment},
          {"events", result.events}};
}

void write_run(const fs::path& out_dir, const ExperimentConfig& cfg, std::uint64_t seed,
               const TrainingResult& result) {
  fs::create_directories(out_dir / "snapshots");
  write_file_atomic(out_dir / "metrics.csv", metrics_csv(result.history));
  write_file_atomic(out_dir / "report.json", run_report(cfg, seed, result).dump(2) + "\n");
  write_file_atomic(out_dir / "config.json", to_json(cfg).dump(2) + "\n");
  const auto snapshots = out_dir / "snapshots";
  write_adapters(snapshots, "final_global", result.final_global);
  write_adapters(snapshots, "best_global", result.best_global);
  write_broadcast(snapshots, "best_proxy", result.best_proxy);
}

struct CommonRunOptions {
  std::string config;
  std::string out;
  std::optional<std::string> bits;
  std::optional<std::size_t> block;
  std::optional<std::size_t> threads;
};

ExperimentConfig resolve_config(const CommonRunOptions& o) {
  ExperimentConfig cfg = load_config(o.config);
  if (o.bits) cfg.quantizer.bits = parse_bits(*o.bits);
  if (o.block) cfg.quantizer.block_size = *o.block;
  if (o.threads) cfg.round.threads = *o.threads;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonRunOptions& o) {
  cmd->add_option("--config", o.config, "experiment config (JSON)")->required();
  cmd->add_option("--out", o.out, "output directory")->required();
  cmd->add_option("--bits", o.bits, "quantization bit-width 1..8, or off");
  cmd->add_option("--block", o.block, "quantization block size")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", o.threads, "client worker threads")->check(CLI::PositiveNumber);
}

int do_run(const CommonRunOptions& o, std::optional<std::uint64_t> seed, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(o);
  const std::uint64_t s = seed.value_or(cfg.seeds.front());
  const auto result = run_training(cfg, s);
  write_run(o.out, cfg, s, result);
  for (const auto& e : result.events) out << "event: " << e << "\n";
  const auto& last = result.history.back();
  out << cfg.quantizer.label() << " seed " << s << ": " << result.history.size()
      << " rounds, final global val loss " << format_real(last.global_val_loss)
      << ", proxy val loss " << format_real(last.proxy_val_loss) << "\n";
  return kExitOk;
}

int do_sweep(const CommonRunOptions& o, std::ostream& out) {
  if (o.bits) throw UsageError("sweep covers bits 1, 2, 3 and off; --bits conflicts with it");
  ExperimentConfig base = resolve_config(o);
  nlohmann::json reports = nlohmann::json::array();
  for (std::optional<int> bits : {std::optional<int>(1), std::optional<int>(2),
                                  std::optional<int>(3), std::optional<int>()}) {
    ExperimentConfig cfg = base;
    cfg.quantizer.bits = bits;
    std::vector<SeedHistory> runs;
    for (auto seed : cfg.seeds) {
      const auto result = run_training(cfg, seed);
      write_run(fs::path(o.out) / cfg.quantizer.label() / ("seed-" + std::to_string(seed)), cfg,
                seed, result);
      runs.push_back({seed, result.history});
    }
    const auto report = privacy_gap_report(runs, cfg.quantizer.label());
    out << report.label << ": median val-loss gap " << format_real(report.medians.front().gap)
        << ", privacy in " << report.seeds_with_privacy << "/" << runs.size() << " seeds\n";
    reports.push_back(to_json(report));
  }
  fs::create_directories(o.out);
  write_file_atomic(fs::path(o.out) / "report.json",
                    nlohmann::json{{"reports", reports}}.dump(2) + "\n");
  return kExitOk;
}

std::uint64_t seed_from_path(const fs::path& csv, std::uint64_t fallback) {
  const auto dir = csv.parent_path().filename().string();
  if (dir.rfind("seed-", 0) == 0) {
    try {
      return std::stoull(dir.substr(5));
    } catch (const std::exception&) {
    }
  }
  return fallback;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated LoRA simulator with quantized proxy broadcasts", "proxyfl"};
  app.require_subcommand(1);

  CommonRunOptions run_opts;
  std::optional<std::uint64_t> run_seed;
  auto* run = app.add_subcommand("run", "train one seed and write metrics, report and snapshots");
  add_common(run, run_opts);
  run->add_option("--seed", run_seed, "run seed (defaults to the first config seed)");

  CommonRunOptions sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "run bits {1,2,3,off} x config seeds");
  add_common(sweep, sweep_opts);

  std::string q_in, q_out, q_bits = "2";
  std::optional<std::size_t> q_block;
  auto* quant = app.add_subcommand("quantize", "FLPF matrix -> FLPQ payload");
  quant->add_option("--in", q_in, "input FLPF matrix")->required();
  quant->add_option("--out", q_out, "output path")->required();
  quant->add_option("--bits", q_bits, "bit-width 1..8, or off");
  quant->add_option("--block", q_block, "block size")->check(CLI::PositiveNumber);

  std::string d_in, d_out;
  auto* dequant = app.add_subcommand("dequantize", "FLPQ payload -> FLPF matrix");
  dequant->add_option("--in", d_in, "input payload")->required();
  dequant->add_option("--out", d_out, "output FLPF matrix")->required();

  std::vector<std::string> r_in;
  std::string r_out, r_label;
  auto* report = app.add_subcommand("report", "privacy-gap report over several metrics.csv files");
  report->add_option("--in", r_in, "metrics.csv (repeatable, one per seed)")->required();
  report->add_option("--out", r_out, "output JSON")->required();
  report->add_option("--label", r_label, "label stored in the report");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run->parsed()) return do_run(run_opts, run_seed, out);
    if (sweep->parsed()) return do_sweep(sweep_opts, out);
    if (quant->parsed()) {
      const auto bits = parse_bits(q_bits);
      const Matrix m = decode_matrix(read_file(q_in));
      if (!bits) {
        if (q_block) throw UsageError("--block has no meaning with --bits off");
        write_file_atomic(q_out, serialize(m));
      } else {
        const auto q = quantize(m, build_standard_set(*bits), q_block.value_or(kDefaultBlockSize));
        write_file_atomic(q_out, serialize(q));
      }
      return kExitOk;
    }
    if (dequant->parsed()) {
      write_file_atomic(d_out, serialize(decode_matrix(read_file(d_in))));
      return kExitOk;
    }
    if (report->parsed()) {
      std::vector<SeedHistory> runs;
      for (std::size_t i = 0; i < r_in.size(); ++i) {
        runs.push_back({seed_from_path(r_in[i], i), parse_metrics_csv(read_text(r_in[i]))});
        if (runs.back().history.empty()) throw FormatError(r_in[i] + " has no rounds");
      }
      const auto rep = privacy_gap_report(runs, r_label);
      write_file_atomic(r_out, to_json(rep).dump(2) + "\n");
      out << "model privacy " << (rep.model_privacy_achieved ? "achieved" : "not achieved")
          << " (" << rep.seeds_with_privacy << "/" << runs.size() << " seeds)\n";
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace proxyfl
