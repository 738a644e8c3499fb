#include "twdtw/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "twdtw/random.hpp"
#include "twdtw/warp_grad.hpp"

namespace twdtw {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorCode::InvalidArgument, "invalid value '" + value + "' for " + key);
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v);
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v);
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    bad_value(key, v);
  }
  return out;
}

bool parse_flag(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  bad_value(key, v);
}

std::string real_text(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

void check_finite_loss(double loss, const Matrix& logits, std::size_t epoch,
                       std::size_t batch) {
  if (std::isfinite(loss)) return;
  long bad_class = -1;
  for (std::size_t s = 0; s < logits.rows() && bad_class < 0; ++s) {
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      if (!std::isfinite(logits(s, c))) {
        bad_class = static_cast<long>(c);
        break;
      }
    }
  }
  std::ostringstream msg;
  msg << "non-finite loss at epoch " << epoch << ", batch " << batch
      << ", offending class " << bad_class;
  throw Error(ErrorCode::NonFiniteLoss, msg.str());
}

bool all_finite(const Tensor3& t) {
  return std::all_of(t.values().begin(), t.values().end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace

// --- config ------------------------------------------------------------------

void TrainConfig::validate() const {
  if (epochs == 0) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 1");
  if (batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (!(lr_logw > 0) || !(lr_centroid_ratio > 0)) {
    throw Error(ErrorCode::InvalidArgument, "learning rates must be > 0");
  }
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw Error(ErrorCode::InvalidArgument, "betas must lie in [0, 1)");
  }
  if (topk == 0 || centroid_len == 0 || dba_iterations == 0 || dba_samples_per_class == 0) {
    throw Error(ErrorCode::InvalidArgument, "counts must be >= 1");
  }
}

void TrainConfig::set(const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string v = trim(raw_value);
  if (key == "epochs") epochs = parse_count(key, v);
  else if (key == "batch_size") batch_size = parse_count(key, v);
  else if (key == "lr_logw" || key == "lr") lr_logw = parse_real(key, v);
  else if (key == "lr_centroid_ratio") lr_centroid_ratio = parse_real(key, v);
  else if (key == "beta1") beta1 = parse_real(key, v);
  else if (key == "beta2") beta2 = parse_real(key, v);
  else if (key == "adam_eps") adam_eps = parse_real(key, v);
  else if (key == "weight_decay") weight_decay = parse_real(key, v);
  else if (key == "weight_init") {
    if (v == "one") weight_init = WeightInit::One;
    else if (v == "random") weight_init = WeightInit::Random;
    else bad_value(key, v);
  }
  else if (key == "freeze_weights") freeze_weights = parse_flag(key, v);
  else if (key == "freeze_centroids") freeze_centroids = parse_flag(key, v);
  else if (key == "allow_diagonal" || key == "diagonal") allow_diagonal = parse_flag(key, v);
  else if (key == "fecw") fecw = parse_flag(key, v);
  else if (key == "topk") topk = parse_count(key, v);
  else if (key == "dba_samples_per_class") dba_samples_per_class = parse_count(key, v);
  else if (key == "dba_iterations") dba_iterations = parse_count(key, v);
  else if (key == "centroid_len") centroid_len = parse_count(key, v);
  else if (key == "seed") seed = parse_u64(key, v);
  else throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
}

std::string TrainConfig::canonical() const {
  std::map<std::string, std::string> kv{
      {"adam_eps", real_text(adam_eps)},
      {"allow_diagonal", allow_diagonal ? "true" : "false"},
      {"batch_size", std::to_string(batch_size)},
      {"beta1", real_text(beta1)},
      {"beta2", real_text(beta2)},
      {"centroid_len", std::to_string(centroid_len)},
      {"dba_iterations", std::to_string(dba_iterations)},
      {"dba_samples_per_class", std::to_string(dba_samples_per_class)},
      {"epochs", std::to_string(epochs)},
      {"fecw", fecw ? "true" : "false"},
      {"freeze_centroids", freeze_centroids ? "true" : "false"},
      {"freeze_weights", freeze_weights ? "true" : "false"},
      {"lr_centroid_ratio", real_text(lr_centroid_ratio)},
      {"lr_logw", real_text(lr_logw)},
      {"seed", std::to_string(seed)},
      {"topk", std::to_string(topk)},
      {"weight_decay", real_text(weight_decay)},
      {"weight_init", weight_init == WeightInit::One ? "one" : "random"},
  };
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::uint64_t TrainConfig::hash() const { return fnv1a(canonical()); }

WarpOptions TrainConfig::warp_options() const {
  return {allow_diagonal ? Engine::Reference : Engine::Wavefront, allow_diagonal};
}

DbaConfig TrainConfig::dba_config() const {
  return {dba_samples_per_class, dba_iterations, centroid_len, derive_seed(seed, "dba")};
}

void apply_config_text(TrainConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidArgument,
                  "config line " + std::to_string(lineno) + ": expected key = value");
    }
    cfg.set(line.substr(0, eq), line.substr(eq + 1));
  }
}

// --- optimizer ---------------------------------------------------------------

double cosine_lr(double base, std::size_t epoch, std::size_t epochs) {
  return base * 0.5 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) /
                         static_cast<double>(epochs)));
}

void AdamW::update(Tensor3& param, const Tensor3& grad, AdamMoments& moments,
                   std::uint64_t step) const {
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  auto& p = param.values();
  const auto& g = grad.values();
  auto& m = moments.m.values();
  auto& v = moments.v.values();
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (weight_decay != 0.0) p[k] *= 1.0 - lr * weight_decay;
    m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
    v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
    const double m_hat = m[k] / bc1;
    const double v_hat = v[k] / bc2;
    p[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

// --- model -------------------------------------------------------------------

ModelState initial_state(std::span<const Tse> train, std::size_t n_classes,
                         const TrainConfig& cfg) {
  cfg.validate();
  CentroidSet centroids = init_all_centroids(train, n_classes, cfg.dba_config());
  const Tensor3& C = centroids.data;
  LogWeightSet logw{Tensor3(C.classes(), C.steps(), C.features(), 0.0)};
  if (cfg.weight_init == WeightInit::Random) {
    Rng rng = make_rng(cfg.seed, "weight_init");
    std::normal_distribution<double> gauss(0.0, 0.01);
    for (double& v : logw.log_data.values()) v = gauss(rng);
  }
  return ModelState::fresh(std::move(centroids), std::move(logw));
}

Prediction predict(const Tse& sample, const CentroidSet& centroids, const Tensor3& weights,
                   const WarpOptions& opts) {
  const Matrix z = batch_distances(std::span<const Tse>(&sample, 1), centroids, weights, opts);
  Prediction p;
  p.logits.assign(z.row(0).begin(), z.row(0).end());
  p.probs = softmin(standardize(p.logits));
  return p;
}

double dataset_loss(const ModelState& state, std::span<const Tse> samples,
                    const TrainConfig& cfg) {
  if (samples.empty()) return 0.0;
  const Tensor3 U = state.log_weights.weights();
  const BackwardResult r = full_backward(samples, state.centroids, U, state.centroids,
                                         state.log_weights, cfg.warp_options());
  return r.loss;
}

EpochStats train_epoch(ModelState& state, std::span<const Tse> train,
                       const TrainConfig& cfg) {
  // Learning rates are not range-checked here so a zero-rate epoch can be run.
  if (cfg.epochs == 0 || cfg.batch_size == 0) {
    throw Error(ErrorCode::InvalidArgument, "epochs and batch_size must be >= 1");
  }
  const std::size_t epoch = state.epoch;
  const WarpOptions opts = cfg.warp_options();
  const double lr_w = cosine_lr(cfg.lr_logw, epoch, cfg.epochs);
  const double lr_c = cosine_lr(cfg.lr_logw * cfg.lr_centroid_ratio, epoch, cfg.epochs);
  const AdamW opt_w{lr_w, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay};
  const AdamW opt_c{lr_c, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay};

  // Paths for the whole epoch come from this snapshot when FECW is on.
  const CentroidSet frozen_c = state.centroids;
  const Tensor3 frozen_u = state.log_weights.weights();

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(cfg.seed, "shuffle", epoch);
  std::shuffle(order.begin(), order.end(), rng);

  EpochStats stats;
  double loss_sum = 0.0;
  std::vector<Tse> batch;
  for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
    const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
    batch.clear();
    for (std::size_t k = begin; k < end; ++k) batch.push_back(train[order[k]]);

    BackwardResult r;
    if (cfg.fecw) {
      r = full_backward(batch, frozen_c, frozen_u, state.centroids, state.log_weights, opts);
    } else {
      const Tensor3 live_u = state.log_weights.weights();
      r = full_backward(batch, state.centroids, live_u, state.centroids, state.log_weights,
                        opts);
    }
    check_finite_loss(r.loss, r.logits, epoch, stats.batches);
    loss_sum += r.loss * static_cast<double>(batch.size());

    ++state.step;
    if (!cfg.freeze_weights) {
      opt_w.update(state.log_weights.log_data, r.dLogU, state.weight_moments, state.step);
      state.log_weights.clamp();
    }
    if (!cfg.freeze_centroids) {
      opt_c.update(state.centroids.data, r.grads.dC, state.centroid_moments, state.step);
    }
    if (!all_finite(state.centroids.data) || !all_finite(state.log_weights.log_data)) {
      check_finite_loss(std::numeric_limits<double>::quiet_NaN(), r.logits, epoch,
                        stats.batches);
    }
    ++stats.batches;
  }
  stats.mean_loss = train.empty() ? 0.0 : loss_sum / static_cast<double>(train.size());
  ++state.epoch;
  return stats;
}

EvalResult evaluate(const ModelState& state, std::span<const Tse> samples,
                    const WarpOptions& opts, std::size_t k) {
  const std::size_t n_classes = state.n_classes();
  EvalResult out;
  out.k = std::min(k, n_classes);
  out.per_class.assign(n_classes, {});
  if (samples.empty()) return out;

  const Tensor3 U = state.log_weights.weights();
  const Matrix z = batch_distances(samples, state.centroids, U, opts);
  std::size_t hit1 = 0;
  std::size_t hitk = 0;
  std::vector<std::size_t> order(n_classes);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const std::vector<double> zn = standardize(z.row(s));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return zn[a] < zn[b]; });
    const int label = samples[s].label.value_or(-1);
    if (label >= 0 && static_cast<std::size_t>(label) < n_classes) {
      const auto lab = static_cast<std::size_t>(label);
      ++out.per_class[lab].count;
      if (order.front() == lab) {
        ++hit1;
        ++out.per_class[lab].correct;
      }
      if (std::find(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(out.k), lab) !=
          order.begin() + static_cast<std::ptrdiff_t>(out.k)) {
        ++hitk;
      }
    }
  }
  out.top1 = static_cast<double>(hit1) / static_cast<double>(samples.size());
  out.topk = static_cast<double>(hitk) / static_cast<double>(samples.size());
  return out;
}

TrainingReport run_training(const Dataset& data, const TrainConfig& cfg,
                            std::optional<ModelState> init,
                            const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (data.n_classes() < 2) {
    throw Error(ErrorCode::InvalidArgument, "training needs at least two classes");
  }
  ModelState state = init ? std::move(*init) : initial_state(data.train, data.n_classes(), cfg);
  if (state.n_classes() != data.n_classes() ||
      state.centroids.data.features() != data.n_features) {
    throw Error(ErrorCode::ShapeMismatch, "initial state does not match the dataset");
  }
  const WarpOptions opts = cfg.warp_options();

  TrainingReport report;
  report.initial_loss = dataset_loss(state, data.train, cfg);
  report.best_state = state;
  bool have_best = false;
  while (state.epoch < cfg.epochs) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.lr_logw = cosine_lr(cfg.lr_logw, state.epoch, cfg.epochs);
    rec.lr_centroid = cosine_lr(cfg.lr_logw * cfg.lr_centroid_ratio, state.epoch, cfg.epochs);
    rec.train_loss = train_epoch(state, data.train, cfg).mean_loss;
    rec.epoch = state.epoch;
    const EvalResult ev = evaluate(state, data.val, opts, cfg.topk);
    rec.val_top1 = ev.top1;
    rec.val_topk = ev.topk;
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!have_best || rec.val_top1 > report.best_top1) {
      have_best = true;
      report.best_top1 = rec.val_top1;
      report.best_topk = rec.val_topk;
      report.best_epoch = rec.epoch;
      report.best_state = state;
    }
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  report.final_state = std::move(state);
  return report;
}

}  // namespace twdtw
