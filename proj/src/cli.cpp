#include "twdtw/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <omp.h>

#include "twdtw/bench.hpp"
#include "twdtw/data_io.hpp"
#include "twdtw/dba.hpp"
#include "twdtw/random.hpp"
#include "twdtw/trainer.hpp"
#include "twdtw/warp_kernel.hpp"

namespace twdtw::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Raised for flag combinations CLI11 cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
      return kExitUsage;
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::DegenerateProbability:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

void set_workers(int workers) {
  if (workers > 0) omp_set_num_threads(workers);
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::IoError, p.string() + ": cannot open");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json config_json(const TrainConfig& cfg) {
  json j = json::object();
  std::istringstream in(cfg.canonical());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    j[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return j;
}

json eval_json(const EvalResult& ev, const std::vector<std::string>& names) {
  json per_class = json::array();
  for (std::size_t c = 0; c < ev.per_class.size(); ++c) {
    const auto& pc = ev.per_class[c];
    per_class.push_back({{"class", c < names.size() ? names[c] : std::to_string(c)},
                         {"count", pc.count},
                         {"correct", pc.correct},
                         {"accuracy", pc.count ? static_cast<double>(pc.correct) /
                                                     static_cast<double>(pc.count)
                                               : 0.0}});
  }
  return {{"top1", ev.top1}, {"topk", ev.topk}, {"k", ev.k}, {"per_class", per_class}};
}

// --- gen-synth -------------------------------------------------------------

struct GenSynthArgs {
  std::string out;
  std::string preset = "default";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> classes, features, distractors, train_per_class, val_per_class,
      min_len, max_len, centroid_len;
  std::optional<double> noise, warp, separation, spike, distractor_noise;
  bool no_baseline = false;
  int workers = 0;
};

int cmd_gen_synth(const GenSynthArgs& a, std::ostream& out) {
  set_workers(a.workers);
  SynthSpec spec;
  if (a.preset == "weight-sensitive") spec = weight_sensitive_spec(spec.seed);
  if (a.seed) spec.seed = *a.seed;
  if (a.classes) spec.n_classes = *a.classes;
  if (a.features) spec.n_features = *a.features;
  if (a.distractors) spec.distractor_features = *a.distractors;
  if (a.train_per_class) spec.samples_per_class = *a.train_per_class;
  if (a.val_per_class) spec.val_per_class = *a.val_per_class;
  if (a.min_len) spec.min_len = *a.min_len;
  if (a.max_len) spec.max_len = *a.max_len;
  if (a.centroid_len) spec.centroid_len = *a.centroid_len;
  if (a.noise) spec.noise_sigma = *a.noise;
  if (a.warp) spec.warp_strength = *a.warp;
  if (a.separation) spec.class_separation = *a.separation;
  if (a.spike) spec.spike_amplitude = *a.spike;
  if (a.distractor_noise) spec.distractor_sigma = *a.distractor_noise;

  const Dataset data = generate_synthetic(spec);
  const fs::path dir(a.out);
  write_dataset(dir, data);

  json info = {{"type", "synth"},
               {"preset", a.preset},
               {"seed", spec.seed},
               {"n_classes", spec.n_classes},
               {"n_features", spec.n_features},
               {"distractor_features", spec.distractor_features},
               {"centroid_len", spec.centroid_len},
               {"train_per_class", spec.samples_per_class},
               {"val_per_class", spec.val_per_class},
               {"min_len", spec.min_len},
               {"max_len", spec.max_len},
               {"warp_strength", spec.warp_strength},
               {"noise_sigma", spec.noise_sigma},
               {"class_separation", spec.class_separation},
               {"spike_amplitude", spec.spike_amplitude},
               {"distractor_sigma", spec.distractor_sigma < 0 ? spec.noise_sigma
                                                              : spec.distractor_sigma},
               {"train_samples", data.train.size()},
               {"val_samples", data.val.size()}};
  if (!a.no_baseline) {
    // Unweighted nearest-centroid accuracy of DBA centroids on validation.
    TrainConfig cfg;
    cfg.seed = spec.seed;
    cfg.centroid_len = spec.centroid_len;
    const ModelState st = initial_state(data.train, data.n_classes(), cfg);
    const EvalResult ev = evaluate(st, data.val, cfg.warp_options(), cfg.topk);
    info["baseline_top1"] = ev.top1;
    std::ofstream(dir / "baseline.json") << json{{"baseline_top1", ev.top1},
                                                  {"method", "dba-unweighted-nearest-centroid"},
                                                  {"seed", spec.seed}}
                                                .dump()
                                         << "\n";
  }
  out << info.dump() << "\n";
  return kExitOk;
}

// --- init-centroids --------------------------------------------------------

struct InitArgs {
  std::string data;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t samples_per_class = 50;
  std::size_t iterations = 100;
  std::size_t centroid_len = kDefaultCentroidLength;
  std::string weight_init = "one";
  int workers = 0;
};

int cmd_init(const InitArgs& a, std::ostream& out) {
  set_workers(a.workers);
  const Dataset data = load_dataset(a.data);
  TrainConfig cfg;
  cfg.seed = a.seed;
  cfg.dba_samples_per_class = a.samples_per_class;
  cfg.dba_iterations = a.iterations;
  cfg.centroid_len = a.centroid_len;
  cfg.set("weight_init", a.weight_init);
  const ModelState st = initial_state(data.train, data.n_classes(), cfg);
  save_checkpoint(a.out, st, cfg.hash());
  const EvalResult ev = evaluate(st, data.val, cfg.warp_options(), cfg.topk);
  out << json{{"type", "init"},
              {"checkpoint", a.out},
              {"n_classes", st.n_classes()},
              {"centroid_len", a.centroid_len},
              {"val_top1", ev.top1}}
             .dump()
      << "\n";
  return kExitOk;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out;
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> lr, lr_ratio;
  std::optional<std::string> weight_init;
  std::optional<std::uint64_t> seed;
  bool freeze_weights = false;
  bool freeze_centroids = false;
  bool diagonal = false;
  bool no_fecw = false;
  std::string init;
  std::string resume;
  int workers = 0;
};

TrainConfig resolve_config(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config_file.empty()) apply_config_text(cfg, read_text(a.config_file));
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.lr) cfg.lr_logw = *a.lr;
  if (a.lr_ratio) cfg.lr_centroid_ratio = *a.lr_ratio;
  if (a.weight_init) cfg.set("weight_init", *a.weight_init);
  if (a.seed) cfg.seed = *a.seed;
  if (a.freeze_weights) cfg.freeze_weights = true;
  if (a.freeze_centroids) cfg.freeze_centroids = true;
  if (a.diagonal) cfg.allow_diagonal = true;
  if (a.no_fecw) cfg.fecw = false;
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  set_workers(a.workers);
  if (!a.init.empty() && !a.resume.empty()) {
    throw UsageError("--init and --resume are mutually exclusive");
  }
  const TrainConfig cfg = resolve_config(a);
  const Dataset data = load_dataset(a.data);

  std::optional<ModelState> init;
  if (!a.resume.empty()) {
    init = load_checkpoint_for_resume(a.resume, cfg.hash());
  } else if (!a.init.empty()) {
    Checkpoint ck = load_checkpoint(a.init);
    init = ModelState::fresh(std::move(ck.state.centroids), std::move(ck.state.log_weights));
  }

  const fs::path dir(a.out);
  fs::create_directories(dir);
  std::ofstream report(dir / "report.jsonl");
  std::ofstream losses(dir / "losses.tsv");
  if (!report || !losses) throw Error(ErrorCode::IoError, dir.string() + ": cannot write reports");

  const json cfg_record = {{"type", "config"},
                           {"config", config_json(cfg)},
                           {"config_hash", hex64(cfg.hash())},
                           {"data", a.data}};
  report << cfg_record.dump() << "\n";
  out << cfg_record.dump() << "\n";
  losses << "epoch\ttrain_loss\tval_top1\tval_topk\n";

  auto on_epoch = [&](const EpochRecord& r) {
    const json rec = {{"type", "epoch"},       {"epoch", r.epoch},
                      {"train_loss", r.train_loss}, {"val_top1", r.val_top1},
                      {"val_topk", r.val_topk}, {"lr_logw", r.lr_logw},
                      {"lr_centroid", r.lr_centroid}, {"seconds", r.seconds}};
    report << rec.dump() << "\n" << std::flush;
    out << rec.dump() << "\n" << std::flush;
    losses << r.epoch << '\t' << exact(r.train_loss) << '\t' << exact(r.val_top1) << '\t'
           << exact(r.val_topk) << "\n";
  };

  const TrainingReport rep = run_training(data, cfg, std::move(init), on_epoch);
  save_checkpoint(dir / "best.tsck", rep.best_state, cfg.hash());
  save_checkpoint(dir / "final.tsck", rep.final_state, cfg.hash());

  const json summary = {{"type", "summary"},
                        {"initial_loss", rep.initial_loss},
                        {"epochs", rep.epochs.size()},
                        {"best_epoch", rep.best_epoch},
                        {"best_top1", rep.best_top1},
                        {"best_topk", rep.best_topk},
                        {"fecw", cfg.fecw},
                        {"allow_diagonal", cfg.allow_diagonal},
                        {"freeze_weights", cfg.freeze_weights},
                        {"freeze_centroids", cfg.freeze_centroids},
                        {"weight_init", cfg.weight_init == WeightInit::One ? "one" : "random"}};
  report << summary.dump() << "\n";
  out << summary.dump() << "\n";
  return kExitOk;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string split = "val";
  std::size_t topk = 5;
  bool diagonal = false;
  int workers = 0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  set_workers(a.workers);
  const Dataset data = load_dataset(a.data);
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  if (ck.state.n_classes() != data.n_classes() ||
      ck.state.centroids.data.features() != data.n_features) {
    throw Error(ErrorCode::ShapeMismatch, "checkpoint does not match dataset shape");
  }
  const WarpOptions opts{a.diagonal ? Engine::Reference : Engine::Wavefront, a.diagonal};
  const EvalResult ev =
      evaluate(ck.state, a.split == "train" ? data.train : data.val, opts, a.topk);
  json j = eval_json(ev, data.class_names);
  j["type"] = "eval";
  j["split"] = a.split;
  out << j.dump() << "\n";
  return kExitOk;
}

// --- dist ------------------------------------------------------------------

struct DistArgs {
  std::string file_a;
  std::string file_b;
  std::string weights;
  std::string engine = "reference";
  bool diagonal = false;
  bool path = false;
};

int cmd_dist(const DistArgs& a, std::ostream& out) {
  if (a.diagonal && a.engine == "wavefront") {
    throw UsageError("--diagonal is only supported by the reference engine");
  }
  const Tse ta = read_tse(a.file_a);
  const Tse tb = read_tse(a.file_b);
  Matrix u;
  if (!a.weights.empty()) {
    u = read_tse(a.weights).data;
    for (double v : u.values()) {
      if (!(v > 0)) throw Error(ErrorCode::NonFiniteValue, a.weights + ": weights must be > 0");
    }
  }
  const WarpOptions opts{a.engine == "wavefront" ? Engine::Wavefront : Engine::Reference,
                         a.diagonal};
  const Alignment al = align(ta.data.view(), tb.data.view(),
                             u.empty() ? MatrixView{} : u.view(), opts);
  out << std::fixed << std::setprecision(12) << al.distance << "\n";
  if (a.path) {
    for (std::size_t k = 0; k < al.path.cells.size(); ++k) {
      out << (k ? " " : "") << "(" << al.path.cells[k].i << "," << al.path.cells[k].j << ")";
    }
    out << "\n";
  }
  return kExitOk;
}

// --- bench -----------------------------------------------------------------

struct BenchArgs {
  BenchConfig cfg;
  std::string dtype = "f64";
  int workers = 0;
};

int cmd_bench(BenchArgs a, std::ostream& out) {
  set_workers(a.workers);
  a.cfg.single_precision = a.dtype == "f32";
  const BenchResult r = run_bench(a.cfg);
  if (!r.agree) {
    std::ostringstream msg;
    msg << "engines disagree: max relative difference " << r.max_rel_diff;
    throw NumericFailure(msg.str());
  }
  out << "engine\tthreads\tmean_seconds\n";
  out << "reference\t1\t" << std::setprecision(6) << r.reference_seconds << "\n";
  out << "wavefront\t" << r.threads << "\t" << r.wavefront_seconds << "\n";
  out << "speedup\t" << std::fixed << std::setprecision(2) << r.speedup << "\n";
  out << "max_rel_diff\t" << std::scientific << std::setprecision(3) << r.max_rel_diff << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time-weighted DTW nearest-centroid classifier for variable-length "
               "multivariate sequences",
               "twdtw"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  GenSynthArgs gs;
  auto* gen = app.add_subcommand("gen-synth", "Generate a seeded synthetic dataset");
  gen->add_option("--out", gs.out, "Output dataset directory")->required();
  gen->add_option("--preset", gs.preset, "Generator preset")
      ->check(CLI::IsMember({"default", "weight-sensitive"}))
      ->capture_default_str();
  gen->add_option("--seed", gs.seed, "Root seed (default 7)");
  gen->add_option("--classes", gs.classes, "Number of classes")->check(CLI::PositiveNumber);
  gen->add_option("--features", gs.features, "Features per timestep")->check(CLI::PositiveNumber);
  gen->add_option("--distractors", gs.distractors, "Trailing distractor features");
  gen->add_option("--train-per-class", gs.train_per_class, "Training samples per class")
      ->check(CLI::PositiveNumber);
  gen->add_option("--val-per-class", gs.val_per_class, "Validation samples per class");
  gen->add_option("--min-len", gs.min_len, "Shortest sample length")->check(CLI::PositiveNumber);
  gen->add_option("--max-len", gs.max_len, "Longest sample length")->check(CLI::PositiveNumber);
  gen->add_option("--centroid-len", gs.centroid_len, "Template length")
      ->check(CLI::PositiveNumber);
  gen->add_option("--noise", gs.noise, "Gaussian noise sigma")->check(CLI::NonNegativeNumber);
  gen->add_option("--warp", gs.warp, "Time-warp strength")->check(CLI::NonNegativeNumber);
  gen->add_option("--separation", gs.separation, "Scale of the class-specific template part")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--spike", gs.spike, "Height of the per-class distractor spike");
  gen->add_option("--distractor-noise", gs.distractor_noise, "Noise sigma of distractor features")
      ->check(CLI::NonNegativeNumber);
  gen->add_flag("--no-baseline", gs.no_baseline, "Skip the unweighted baseline measurement");
  gen->add_option("--workers", gs.workers, "Worker threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber);

  InitArgs ia;
  auto* ini = app.add_subcommand("init-centroids", "Barycenter-average class centroids");
  ini->add_option("data", ia.data, "Dataset directory")->required();
  ini->add_option("--out", ia.out, "Checkpoint file to write")->required();
  ini->add_option("--seed", ia.seed, "Root seed")->capture_default_str();
  ini->add_option("--samples-per-class", ia.samples_per_class, "Samples averaged per class")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ini->add_option("--iterations", ia.iterations, "Averaging iterations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ini->add_option("--centroid-len", ia.centroid_len, "Centroid length")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ini->add_option("--weight-init", ia.weight_init, "Initial weights")
      ->check(CLI::IsMember({"one", "random"}))
      ->capture_default_str();
  ini->add_option("--workers", ia.workers, "Worker threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber);

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Learn centroids and time-varying feature weights");
  tr->add_option("data", ta.data, "Dataset directory")->required();
  tr->add_option("--out", ta.out, "Output directory for reports and checkpoints")->required();
  tr->add_option("--config", ta.config_file, "key = value config file");
  tr->add_option("--set", ta.sets, "Config override key=value (repeatable)");
  tr->add_option("--epochs", ta.epochs, "Training epochs (default 36)")
      ->check(CLI::PositiveNumber);
  tr->add_option("--batch-size", ta.batch_size, "Batch size (default 48)")
      ->check(CLI::PositiveNumber);
  tr->add_option("--lr", ta.lr, "Log-weight learning rate (default 1e-3)")
      ->check(CLI::PositiveNumber);
  tr->add_option("--lr-centroid-ratio", ta.lr_ratio, "Centroid lr / log-weight lr (default 1/3)")
      ->check(CLI::PositiveNumber);
  tr->add_option("--weight-init", ta.weight_init, "Initial weights: one or random")
      ->check(CLI::IsMember({"one", "random"}));
  tr->add_option("--seed", ta.seed, "Root seed (default 0)");
  tr->add_flag("--freeze-weights", ta.freeze_weights, "Keep weights fixed");
  tr->add_flag("--freeze-centroids", ta.freeze_centroids, "Keep centroids fixed");
  tr->add_flag("--diagonal", ta.diagonal, "Allow diagonal transitions (reference engine)");
  tr->add_flag("--no-fecw", ta.no_fecw, "Compute paths from live parameters every batch");
  tr->add_option("--init", ta.init, "Start from the parameters in this checkpoint");
  tr->add_option("--resume", ta.resume, "Resume from a checkpoint written with the same config");
  tr->add_option("--workers", ta.workers, "Worker threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber);

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  ev->add_option("data", ea.data, "Dataset directory")->required();
  ev->add_option("--checkpoint", ea.checkpoint, "Checkpoint file")->required();
  ev->add_option("--split", ea.split, "Split to evaluate")
      ->check(CLI::IsMember({"train", "val"}))
      ->capture_default_str();
  ev->add_option("--topk", ea.topk, "k for top-k accuracy")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ev->add_flag("--diagonal", ea.diagonal, "Allow diagonal transitions (reference engine)");
  ev->add_option("--workers", ea.workers, "Worker threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber);

  DistArgs da;
  auto* di = app.add_subcommand("dist", "Warp distance between two sample files");
  di->add_option("file_a", da.file_a, "First sequence (carries the weights)")->required();
  di->add_option("file_b", da.file_b, "Second sequence")->required();
  di->add_option("--weights", da.weights, "Positive weights file shaped like file_a");
  di->add_option("--engine", da.engine, "DP engine")
      ->check(CLI::IsMember({"reference", "wavefront"}))
      ->capture_default_str();
  di->add_flag("--diagonal", da.diagonal, "Allow diagonal transitions (reference engine)");
  di->add_flag("--path", da.path, "Print the optimal warping path");

  BenchArgs ba;
  auto* be = app.add_subcommand("bench", "Time parallel anti-diagonal vs row-major evaluation");
  be->add_option("--n", ba.cfg.n, "Rows of the first sequence")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  be->add_option("--m", ba.cfg.m, "Rows of the second sequence")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  be->add_option("--nf", ba.cfg.nf, "Features per row")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  be->add_option("--pairs", ba.cfg.pairs, "Sequence pairs per batch")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  be->add_option("--repeat", ba.cfg.repeat, "Timed repetitions")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  be->add_option("--dtype", ba.dtype, "Floating-point width")
      ->check(CLI::IsMember({"f64", "f32"}))
      ->capture_default_str();
  be->add_option("--seed", ba.cfg.seed, "Data seed")->capture_default_str();
  be->add_option("--workers", ba.workers, "Worker threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber);

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& s : args) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_synth(gs, out);
    if (ini->parsed()) return cmd_init(ia, out);
    if (tr->parsed()) return cmd_train(ta, out);
    if (ev->parsed()) return cmd_eval(ea, out);
    if (di->parsed()) return cmd_dist(da, out);
    if (be->parsed()) return cmd_bench(ba, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericFailure& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace twdtw::cli
