// Copyright 2026 The transclip Authors
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

// Command-line front end: run, eval, synth and bench subcommands.
//
// Exit codes: 0 success, 1 input or configuration error, 2 numeric failure.

#include <sys/resource.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "transclip/affinity.hpp"
#include "transclip/config.hpp"
#include "transclip/errors.hpp"
#include "transclip/eval.hpp"
#include "transclip/io.hpp"
#include "transclip/parallel.hpp"
#include "transclip/solver.hpp"
#include "transclip/synth.hpp"

namespace fs = std::filesystem;
using namespace transclip;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitNumeric = 2;

double peak_rss_mb() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return static_cast<double>(usage.ru_maxrss) / 1024.0;
}

// Working-set estimate of one solve: features, N x K double buffers, graph and
// candidate lists, and one similarity block per worker.
double estimate_solver_mb(std::size_t n, std::size_t d, std::size_t k, std::size_t knn,
                          std::size_t threads) {
  const double features = static_cast<double>(n) * d * sizeof(float);
  const double nk = static_cast<double>(n) * k * sizeof(double) * 8;
  const double graph = static_cast<double>(n) * knn * (sizeof(double) + sizeof(std::int32_t)) +
                       static_cast<double>(n) * (knn + 8) * 8 + static_cast<double>(n) * 64;
  const double blocks = static_cast<double>(threads) * 1024 * 1024 * sizeof(float);
  return (features + nk + graph + blocks) / (1024.0 * 1024.0);
}

void require_readable(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw FormatError(what + " file not found: '" + p.string() + "'");
  std::ifstream probe(p, std::ios::binary);
  if (!probe) throw FormatError(what + " file is not readable: '" + p.string() + "'");
}

void require_writable_parent(const fs::path& p, const std::string& what) {
  const fs::path parent = p.has_parent_path() ? p.parent_path() : fs::path(".");
  if (!fs::is_directory(parent)) {
    throw FormatError(what + " directory does not exist: '" + parent.string() + "'");
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

void apply_threads(std::optional<std::size_t> flag) {
  if (flag) {
    set_thread_count(*flag);
  } else if (const char* env = std::getenv("TRANSCLIP_THREADS")) {
    try {
      set_thread_count(static_cast<std::size_t>(std::stoul(env)));
    } catch (const std::exception&) {
      throw ConfigError(std::string("TRANSCLIP_THREADS is not a number: '") + env + "'");
    }
  }
}

struct RunFlags {
  std::optional<std::string> config;
  std::optional<std::string> features, anchors, labels;
  std::optional<double> temperature, laplacian_weight, tolerance;
  std::optional<std::size_t> knn, inner_iters, outer_iters, n_confident, prompts_per_class;
  std::optional<std::int64_t> seed;
  std::optional<std::string> screening;
  std::optional<std::string> out_assignments, out_report, dump_pseudo, dump_gmm, dump_graph;
};

RunConfig merge(const RunFlags& f) {
  RunConfig c = f.config ? RunConfig::load(*f.config) : RunConfig{};
  if (f.features) c.features_path = *f.features;
  if (f.anchors) c.anchors_path = *f.anchors;
  if (f.labels) c.labels_path = fs::path(*f.labels);
  if (f.temperature) c.temperature = *f.temperature;
  if (f.laplacian_weight) c.solver.laplacian_weight = *f.laplacian_weight;
  if (f.tolerance) c.solver.tolerance = *f.tolerance;
  if (f.knn) c.solver.knn = *f.knn;
  if (f.inner_iters) c.solver.inner_iters = *f.inner_iters;
  if (f.outer_iters) c.solver.outer_iters = *f.outer_iters;
  if (f.n_confident) c.solver.n_confident = *f.n_confident;
  if (f.prompts_per_class) c.prompts_per_class = *f.prompts_per_class;
  if (f.seed) c.solver.seed = *f.seed;
  if (f.screening) c.solver.screening = parse_screening(*f.screening);
  return c;
}

int run_command(const RunFlags& flags) {
  const RunConfig cfg = merge(flags);
  if (cfg.features_path.empty()) throw ConfigError("no features path (use --features or features_path)");
  if (cfg.anchors_path.empty()) throw ConfigError("no anchors path (use --anchors or anchors_path)");
  if (!cfg.temperature) throw ConfigError("no temperature (use --temperature or temperature)");
  cfg.solver.validate();
  require_readable(cfg.features_path, "features");
  require_readable(cfg.anchors_path, "anchors");
  if (cfg.labels_path) require_readable(*cfg.labels_path, "labels");
  for (const auto& [out, what] : {std::pair{flags.out_assignments, "assignments"},
                                  std::pair{flags.out_report, "report"},
                                  std::pair{flags.dump_pseudo, "pseudo-label dump"},
                                  std::pair{flags.dump_gmm, "gmm dump"},
                                  std::pair{flags.dump_graph, "graph dump"}}) {
    if (out) require_writable_parent(*out, what);
  }

  const FeatureMatrix features = FeatureMatrix::ingest(load_matrix(cfg.features_path));
  const FMatrix raw_anchors = load_matrix(cfg.anchors_path);
  if (raw_anchors.cols() != features.d()) {
    throw ShapeError(fmt::format("dimension mismatch: features '{}' have D={}, anchors '{}' have D={}",
                                 cfg.features_path.string(), features.d(),
                                 cfg.anchors_path.string(), raw_anchors.cols()));
  }
  const ClassAnchors anchors =
      cfg.prompts_per_class > 1
          ? average_class_prompts(split_prompt_blocks(raw_anchors, cfg.prompts_per_class),
                                  *cfg.temperature, cfg.class_names)
          : ClassAnchors::ingest(raw_anchors, *cfg.temperature, cfg.class_names);
  std::optional<LabelVector> labels;
  if (cfg.labels_path) {
    labels = load_labels(*cfg.labels_path);
    if (labels->size() != features.n()) {
      throw ShapeError(fmt::format("labels '{}' hold {} entries for {} patches",
                                   cfg.labels_path->string(), labels->size(), features.n()));
    }
    validate_labels(*labels, anchors.k());
  }

  const SolveReport report = solve(features, anchors, cfg.solver);
  const EvalReport eval = labels ? compare(report.y_hat.probs, report.z_final, *labels)
                                 : compare(report.y_hat.probs, report.z_final);

  if (flags.out_assignments) save_matrix(*flags.out_assignments, report.z_final.cast<float>());
  if (flags.dump_pseudo) save_matrix(*flags.dump_pseudo, report.y_hat.probs.cast<float>());
  if (flags.dump_gmm) {
    save_matrix(*flags.dump_gmm + "_mu.npy", report.gmm.mu.cast<float>());
    save_matrix(*flags.dump_gmm + "_sigma.npy",
                FMatrix(1, report.gmm.d(), std::vector<float>(report.gmm.sigma_diag.begin(),
                                                              report.gmm.sigma_diag.end())));
  }
  if (flags.dump_graph) save_graph(*flags.dump_graph, report.graph);
  if (flags.out_report) {
    nlohmann::json j;
    j["objective_trace"] = report.objective_trace;
    j["descent_trace"] = report.descent_trace;
    j["outer_iterations_run"] = report.outer_iterations_run;
    j["converged"] = report.converged;
    j["graph_screening"] = screening_name(report.graph_stats.screening);
    j["graph_fallback_rows"] = report.graph_stats.fallback_rows;
    j["timings_ms"] = {{"pseudo_labels", report.timings.pseudo_labels_ms},
                       {"graph", report.timings.graph_ms},
                       {"solve", report.timings.solve_ms}};
    j["warnings"] = report.warnings;
    j["class_names"] = anchors.class_names;
    j["eval"] = to_json(eval);
    write_json(*flags.out_report, j);
  }

  std::string accuracy;
  if (eval.has_truth) {
    accuracy = fmt::format(" zero_shot_acc={:.2f} transductive_acc={:.2f} delta={:+.2f}",
                           eval.zero_shot_acc, eval.transductive_acc, eval.delta);
  } else {
    accuracy = fmt::format(" agreement={:.2f}", eval.agreement);
  }
  std::cout << fmt::format(
                   "N={} K={} D={}{} outer_iters={} converged={} pseudo_ms={:.1f} graph_ms={:.1f} "
                   "solve_ms={:.1f}",
                   features.n(), anchors.k(), features.d(), accuracy, report.outer_iterations_run,
                   report.converged, report.timings.pseudo_labels_ms, report.timings.graph_ms,
                   report.timings.solve_ms)
            << std::endl;
  return 0;
}

struct EvalFlags {
  std::string pseudo_labels;
  std::string assignments;
  std::optional<std::string> labels;
  std::optional<std::string> out;
  std::string name = "task";
};

int eval_command(const EvalFlags& flags) {
  const FMatrix y = load_matrix(flags.pseudo_labels);
  const FMatrix z = load_matrix(flags.assignments);
  EvalReport r;
  if (flags.labels) {
    r = compare(y.cast<double>(), z.cast<double>(), load_labels(*flags.labels));
  } else {
    r = compare(y.cast<double>(), z.cast<double>());
  }
  if (flags.out) write_json(*flags.out, to_json(r));
  std::cout << format_row(flags.name, r) << std::endl;
  return 0;
}

struct SynthFlags {
  std::string out_dir;
  SynthSpec spec;
  SolverConfig solver;
};

int synth_command(const SynthFlags& flags) {
  const SynthTask task = generate(flags.spec);
  const fs::path dir(flags.out_dir);
  fs::create_directories(dir);
  save_matrix(dir / "features.npy", task.features.matrix());
  save_matrix(dir / "anchors.npy", task.anchors.anchors);
  save_labels(dir / "labels.npy", task.labels);
  RunConfig cfg;
  cfg.features_path = "features.npy";
  cfg.anchors_path = "anchors.npy";
  cfg.labels_path = fs::path("labels.npy");
  cfg.temperature = flags.spec.temperature;
  cfg.class_names = task.anchors.class_names;
  cfg.solver = flags.solver;
  cfg.solver.seed = static_cast<std::int64_t>(flags.spec.seed);
  std::ofstream(dir / "config.toml") << cfg.to_toml();
  std::cout << fmt::format("wrote N={} K={} D={} task to {}", flags.spec.n, flags.spec.k_classes,
                           flags.spec.d, dir.string())
            << std::endl;
  return 0;
}

struct BenchFlags {
  std::vector<std::size_t> sizes{100, 1000, 10000, 100000};
  SynthSpec spec;
  SolverConfig solver;
  std::size_t seeds = 1;
  bool json = false;
};

Screening summary_screening(Screening s) {
  if (s != Screening::kAuto) return s;
  return bf16_screening_available() ? Screening::kBf16Tiles : Screening::kFloat32;
}

int bench_command(const BenchFlags& flags) {
  nlohmann::json rows = nlohmann::json::array();
  if (!flags.json) {
    std::cout << fmt::format("{:>9} {:>10} {:>10} {:>10} {:>10} {:>10} {:>9} {:>9} {:>9} {:>8}\n",
                             "#Patches", "pseudo_ms", "graph_ms", "solve_ms", "total_s", "rss_MB",
                             "est_MB", "zero-shot", "transduc", "delta");
  }
  for (std::size_t n : flags.sizes) {
    SynthSpec spec = flags.spec;
    spec.n = n;
    std::vector<std::uint64_t> seeds;
    for (std::size_t s = 0; s < flags.seeds; ++s) seeds.push_back(flags.spec.seed + s);
    const BenchmarkSummary summary = benchmark_suite(seeds, spec, flags.solver);
    StageTimings mean;
    for (const StageTimings& t : summary.timings) {
      mean.pseudo_labels_ms += t.pseudo_labels_ms / static_cast<double>(seeds.size());
      mean.graph_ms += t.graph_ms / static_cast<double>(seeds.size());
      mean.solve_ms += t.solve_ms / static_cast<double>(seeds.size());
    }
    const double rss = peak_rss_mb();
    const double est = estimate_solver_mb(n, spec.d, spec.k_classes, flags.solver.knn, thread_count());
    const double input_mb = static_cast<double>(n) * spec.d * sizeof(float) / (1024.0 * 1024.0);
    rows.push_back({{"n", n},
                    {"d", spec.d},
                    {"k", spec.k_classes},
                    {"seeds", seeds.size()},
                    {"threads", thread_count()},
                    {"screening", screening_name(summary_screening(flags.solver.screening))},
                    {"pseudo_labels_ms", mean.pseudo_labels_ms},
                    {"graph_ms", mean.graph_ms},
                    {"solve_ms", mean.solve_ms},
                    {"total_ms", mean.total_ms()},
                    {"peak_rss_mb", rss},
                    {"estimated_mb", est},
                    {"input_features_mb", input_mb},
                    {"zero_shot_acc", summary.mean_zero_shot},
                    {"transductive_acc", summary.mean_transductive},
                    {"mean_delta", summary.mean_delta},
                    {"min_delta", summary.min_delta},
                    {"max_delta", summary.max_delta}});
    if (!flags.json) {
      std::cout << fmt::format(
                       "{:>9} {:>10.1f} {:>10.1f} {:>10.1f} {:>10.2f} {:>10.1f} {:>9.1f} {:>9.2f} "
                       "{:>9.2f} {:>+8.2f}",
                       n, mean.pseudo_labels_ms, mean.graph_ms, mean.solve_ms,
                       mean.total_ms() / 1000.0, rss, est, summary.mean_zero_shot,
                       summary.mean_transductive, summary.mean_delta)
                << std::endl;
    }
  }
  if (flags.json) std::cout << rows.dump(2) << std::endl;
  return 0;
}

void add_solver_options(CLI::App* cmd, SolverConfig& s) {
  cmd->add_option("--knn", s.knn, "Neighbors per patch")->capture_default_str();
  cmd->add_option("--inner-iters", s.inner_iters, "Assignment passes per outer iteration")
      ->capture_default_str();
  cmd->add_option("--outer-iters", s.outer_iters, "Outer iterations")->capture_default_str();
  cmd->add_option("--laplacian-weight", s.laplacian_weight, "Laplacian weight")->capture_default_str();
  cmd->add_option("--tolerance", s.tolerance, "Convergence tolerance")->capture_default_str();
  cmd->add_option_function<std::string>(
         "--screening", [&s](const std::string& v) { s.screening = parse_screening(v); },
         "Neighbor screening kernel: auto, fp32 or bf16")
      ->check(CLI::IsMember({"auto", "fp32", "bf16"}));
}

void add_synth_options(CLI::App* cmd, SynthSpec& spec) {
  cmd->add_option("--d", spec.d, "Embedding dimension")->capture_default_str();
  cmd->add_option("--k", spec.k_classes, "Number of classes")->capture_default_str();
  cmd->add_option("--intra-spread", spec.intra_spread, "Within-class noise std")->capture_default_str();
  cmd->add_option("--anchor-noise", spec.anchor_noise, "Anchor noise std")->capture_default_str();
  cmd->add_option("--seed", spec.seed, "Random seed")->capture_default_str();
  cmd->add_option("--temperature", spec.temperature, "Softmax temperature")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("transclip"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Transductive refinement of zero-shot predictions over patch embeddings"};
  app.require_subcommand(1);
  std::optional<std::size_t> threads;
  bool verbose = false;
  app.add_option("--threads", threads, "Worker threads (default: TRANSCLIP_THREADS or all cores)");
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  RunFlags run;
  auto* run_cmd = app.add_subcommand("run", "Refine predictions for one task");
  run_cmd->add_option("--config", run.config, "TOML run configuration");
  run_cmd->add_option("--features", run.features, "N x D feature matrix (.npy)");
  run_cmd->add_option("--anchors", run.anchors, "K x D (or K*P x D) text embeddings (.npy)");
  run_cmd->add_option("--labels", run.labels, "Ground-truth labels (.npy), optional");
  run_cmd->add_option("--temperature", run.temperature, "Softmax temperature");
  run_cmd->add_option("--knn", run.knn, "Neighbors per patch");
  run_cmd->add_option("--screening", run.screening, "Neighbor screening kernel: auto, fp32 or bf16")
      ->check(CLI::IsMember({"auto", "fp32", "bf16"}));
  run_cmd->add_option("--laplacian-weight", run.laplacian_weight, "Laplacian weight");
  run_cmd->add_option("--inner-iters", run.inner_iters, "Assignment passes per outer iteration");
  run_cmd->add_option("--outer-iters", run.outer_iters, "Outer iterations");
  run_cmd->add_option("--tolerance", run.tolerance, "Convergence tolerance");
  run_cmd->add_option("--n-confident", run.n_confident, "Patches per class for mean initialization");
  run_cmd->add_option("--prompts-per-class", run.prompts_per_class, "Prompt rows per class in the anchor file");
  run_cmd->add_option("--seed", run.seed, "Seed");
  run_cmd->add_option("--out-assignments", run.out_assignments, "Write N x K assignments (.npy)");
  run_cmd->add_option("--out-report", run.out_report, "Write JSON report");
  run_cmd->add_option("--dump-pseudo-labels", run.dump_pseudo, "Write N x K pseudo-labels (.npy)");
  run_cmd->add_option("--dump-gmm", run.dump_gmm, "Write <prefix>_mu.npy and <prefix>_sigma.npy");
  run_cmd->add_option("--dump-graph", run.dump_graph, "Write <prefix>_indices.npy and <prefix>_weights.npy");

  EvalFlags eval;
  auto* eval_cmd = app.add_subcommand("eval", "Compare dumped pseudo-labels and assignments");
  eval_cmd->add_option("--pseudo-labels", eval.pseudo_labels, "N x K pseudo-labels (.npy)")->required();
  eval_cmd->add_option("--assignments", eval.assignments, "N x K assignments (.npy)")->required();
  eval_cmd->add_option("--labels", eval.labels, "Ground-truth labels (.npy)");
  eval_cmd->add_option("--out", eval.out, "Write JSON report");
  eval_cmd->add_option("--name", eval.name, "Row name")->capture_default_str();

  SynthFlags synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic task directory");
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--n", synth.spec.n, "Patch count")->capture_default_str();
  add_synth_options(synth_cmd, synth.spec);
  add_solver_options(synth_cmd, synth.solver);

  BenchFlags bench;
  bench.spec.d = 512;
  bench.spec.k_classes = 9;
  auto* bench_cmd = app.add_subcommand("bench", "Time the pipeline on synthetic tasks");
  bench_cmd->add_option("--sizes", bench.sizes, "Patch counts")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--seeds", bench.seeds, "Seeds per size")->capture_default_str();
  bench_cmd->add_flag("--json", bench.json, "Print JSON instead of a table");
  add_synth_options(bench_cmd, bench.spec);
  add_solver_options(bench_cmd, bench.solver);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);

  try {
    apply_threads(threads);
    if (run_cmd->parsed()) return run_command(run);
    if (eval_cmd->parsed()) return eval_command(eval);
    if (synth_cmd->parsed()) return synth_command(synth);
    if (bench_cmd->parsed()) {
      if (bench.seeds < 1) throw ConfigError("--seeds must be >= 1");
      return bench_command(bench);
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return e.is_numeric() ? kExitNumeric : kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  }
  return kExitInput;
}
