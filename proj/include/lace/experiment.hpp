#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lace/data.hpp"
#include "lace/losses.hpp"
#include "lace/matrix.hpp"
#include "lace/metrics.hpp"
#include "lace/network.hpp"
#include "lace/optim.hpp"
#include "lace/rng.hpp"

namespace lace {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  int classes = 10;
  int per_class = 200;
  int dim = 32;
  double spread = 0.15;
  double train_fraction = 0.8;
};

struct Cifar100Spec {
  std::string train_path;
  std::string test_path;
};

struct DatasetSpec {
  enum class Type { kSynthetic, kCifar100 };
  Type type = Type::kSynthetic;
  SyntheticSpec synthetic;
  Cifar100Spec cifar;
};

/// Epoch window for trial aggregation; negative bounds mean "the last 10
/// epochs of the run".
struct WindowSpec {
  int start = -1;
  int end = -1;
};

/// Everything a run needs. Defaults follow the reference recipe: 200 epochs,
/// batch 100, SGD(lr 0.1, momentum 0.9, weight decay 5e-4) with step decay
/// 0.1x every 50 epochs, 5 trials.
struct ExperimentConfig {
  DatasetSpec dataset;
  std::vector<std::size_t> model_dims;  // empty -> [feature_dim, 64, classes]
  LossKind loss = LossKind::kCrossEntropy;
  int epochs = 200;
  std::size_t batch_size = 100;
  SgdConfig sgd;
  int trials = 5;
  std::uint64_t base_seed = 42;
  WindowSpec window;
  std::string out_dir = "results";
  int threads = 1;
};

inline void validate(const ExperimentConfig& cfg) {
  validate(cfg.sgd);
  if (cfg.epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
  if (cfg.batch_size == 0) throw std::invalid_argument("config: batch_size must be >= 1");
  if (cfg.trials < 1) throw std::invalid_argument("config: trials must be >= 1");
  if (cfg.threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  if (!cfg.model_dims.empty() && cfg.model_dims.size() < 2) {
    throw std::invalid_argument("config: model.dims needs at least [input, output]");
  }
  if (cfg.dataset.type == DatasetSpec::Type::kSynthetic) {
    const SyntheticSpec& s = cfg.dataset.synthetic;
    if (s.classes < 2 || s.per_class < 1 || s.dim < 1 || !(s.spread > 0.0)) {
      throw std::invalid_argument("config: invalid synthetic dataset parameters");
    }
    if (!(s.train_fraction > 0.0 && s.train_fraction < 1.0)) {
      throw std::invalid_argument("config: train_fraction must be in (0, 1)");
    }
  } else {
    if (cfg.dataset.cifar.train_path.empty() || cfg.dataset.cifar.test_path.empty()) {
      throw std::invalid_argument("config: cifar100 dataset needs train_path and test_path");
    }
  }
  if ((cfg.window.start < 0) != (cfg.window.end < 0)) {
    throw std::invalid_argument("config: window start/end must be set together");
  }
  if (cfg.window.start >= 0 &&
      !(cfg.window.start < cfg.window.end && cfg.window.end <= cfg.epochs)) {
    throw std::invalid_argument("config: window must satisfy 0 <= start < end <= epochs");
  }
}

namespace detail {

inline void require_known_keys(const nlohmann::json& obj,
                               std::initializer_list<const char*> known,
                               const std::string& where) {
  for (const auto& item : obj.items()) {
    bool found = false;
    for (const char* key : known) {
      if (item.key() == key) {
        found = true;
        break;
      }
    }
    if (!found) {
      throw std::invalid_argument("config: unknown key '" + item.key() + "' in " + where);
    }
  }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  detail::require_known_keys(j,
                             {"dataset", "model", "loss", "epochs", "batch_size", "sgd",
                              "trials", "base_seed", "window", "out_dir", "threads"},
                             "config");
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    detail::require_known_keys(d,
                               {"type", "classes", "per_class", "dim", "spread",
                                "train_fraction", "train_path", "test_path"},
                               "dataset");
    const std::string type = d.value("type", "synthetic");
    if (type == "synthetic") {
      cfg.dataset.type = DatasetSpec::Type::kSynthetic;
      auto& s = cfg.dataset.synthetic;
      s.classes = d.value("classes", s.classes);
      s.per_class = d.value("per_class", s.per_class);
      s.dim = d.value("dim", s.dim);
      s.spread = d.value("spread", s.spread);
      s.train_fraction = d.value("train_fraction", s.train_fraction);
    } else if (type == "cifar100") {
      cfg.dataset.type = DatasetSpec::Type::kCifar100;
      cfg.dataset.cifar.train_path = d.value("train_path", "");
      cfg.dataset.cifar.test_path = d.value("test_path", "");
    } else {
      throw std::invalid_argument("config: dataset.type must be synthetic or cifar100");
    }
  }
  if (j.contains("model")) {
    detail::require_known_keys(j.at("model"), {"dims"}, "model");
    cfg.model_dims = j.at("model").value("dims", std::vector<std::size_t>{});
  }
  if (j.contains("loss")) cfg.loss = loss_kind_from_name(j.at("loss").get<std::string>());
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  if (j.contains("sgd")) {
    const auto& s = j.at("sgd");
    detail::require_known_keys(
        s, {"lr0", "momentum", "weight_decay", "step_size", "gamma", "decay_biases"},
        "sgd");
    cfg.sgd.lr0 = s.value("lr0", cfg.sgd.lr0);
    cfg.sgd.momentum = s.value("momentum", cfg.sgd.momentum);
    cfg.sgd.weight_decay = s.value("weight_decay", cfg.sgd.weight_decay);
    cfg.sgd.step_size = s.value("step_size", cfg.sgd.step_size);
    cfg.sgd.gamma = s.value("gamma", cfg.sgd.gamma);
    cfg.sgd.decay_biases = s.value("decay_biases", cfg.sgd.decay_biases);
  }
  cfg.trials = j.value("trials", cfg.trials);
  cfg.base_seed = j.value("base_seed", cfg.base_seed);
  if (j.contains("window")) {
    const auto& w = j.at("window");
    detail::require_known_keys(w, {"start", "end"}, "window");
    cfg.window.start = w.value("start", -1);
    cfg.window.end = w.value("end", -1);
  }
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.threads = j.value("threads", cfg.threads);
  validate(cfg);
  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config file " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

/// Aggregation window for a run: explicit bounds, otherwise the last 10
/// epochs.
inline std::pair<int, int> resolve_window(const ExperimentConfig& cfg) {
  if (cfg.window.start >= 0) return {cfg.window.start, cfg.window.end};
  return {std::max(0, cfg.epochs - 10), cfg.epochs};
}

// ---------------------------------------------------------------------------
// Data loading
// ---------------------------------------------------------------------------

struct LoadedData {
  Dataset train;
  Dataset test;
  MeanImage mean;
};

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

/// Build train/test plus the training mean. Synthetic data comes from child
/// stream 0 of the base seed, so every trial and both losses see the same
/// corpus; trial k uses child stream k+1.
inline LoadedData load_dataset(const ExperimentConfig& cfg) {
  LoadedData data;
  if (cfg.dataset.type == DatasetSpec::Type::kSynthetic) {
    const SyntheticSpec& s = cfg.dataset.synthetic;
    Rng data_rng = Rng(cfg.base_seed).child(0);
    Dataset all = synthetic_blobs(data_rng, s.classes, s.per_class, s.dim, s.spread);
    auto [train, test] = split_dataset(all, s.train_fraction, data_rng);
    data.train = std::move(train);
    data.test = std::move(test);
  } else {
    auto train_bytes = read_file_bytes(cfg.dataset.cifar.train_path);
    auto test_bytes = read_file_bytes(cfg.dataset.cifar.test_path);
    auto [train, test] = parse_cifar100(train_bytes, test_bytes);
    data.train = std::move(train);
    data.test = std::move(test);
  }
  data.mean = compute_mean(data.train);
  return data;
}

inline std::vector<std::size_t> resolve_model_dims(const ExperimentConfig& cfg,
                                                   const LoadedData& data) {
  std::vector<std::size_t> dims = cfg.model_dims;
  if (dims.empty()) {
    dims = {data.train.feature_dim(), 64,
            static_cast<std::size_t>(data.train.num_classes)};
  }
  if (dims.front() != data.train.feature_dim()) {
    throw std::invalid_argument("config: model input dim " + std::to_string(dims.front()) +
                                " does not match feature dim " +
                                std::to_string(data.train.feature_dim()));
  }
  if (dims.back() != static_cast<std::size_t>(data.train.num_classes)) {
    throw std::invalid_argument("config: model output dim " + std::to_string(dims.back()) +
                                " does not match class count " +
                                std::to_string(data.train.num_classes));
  }
  return dims;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                             std::uint64_t hash = 1469598103934665603ULL) {
  for (unsigned char b : bytes) {
    hash ^= b;
    hash *= 1099511628211ULL;
  }
  return hash;
}

/// Order-sensitive checksum of an epoch's batch indices; equal checksums
/// across paired runs prove identical data order.
inline std::uint64_t batch_order_checksum(
    const std::vector<std::vector<std::int32_t>>& batches) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (const auto& batch : batches) {
    for (std::int32_t idx : batch) {
      unsigned char bytes[4];
      for (int b = 0; b < 4; ++b) {
        bytes[b] = static_cast<unsigned char>((static_cast<std::uint32_t>(idx) >> (8 * b)) & 0xff);
      }
      hash = fnv1a64(std::span<const unsigned char>(bytes, 4), hash);
    }
  }
  return hash;
}

/// Test-set metrics: (top-1 accuracy, top-k error) with k = min(5, C).
inline std::pair<double, double> evaluate_model(MlpModel& model, const Dataset& test,
                                                const MeanImage& mean,
                                                std::size_t batch_size) {
  const int k = std::min(5, test.num_classes);
  std::size_t top1_misses = 0;
  std::size_t topk_misses = 0;
  for (std::size_t begin = 0; begin < test.size(); begin += batch_size) {
    const std::size_t end = std::min(begin + batch_size, test.size());
    std::vector<std::int32_t> indices(end - begin);
    std::iota(indices.begin(), indices.end(), static_cast<std::int32_t>(begin));
    Batch batch = gather(test, indices);
    subtract_mean_rows(batch.features, mean);
    Matrix logits = model.forward(batch.features);
    const double rows = static_cast<double>(end - begin);
    top1_misses += static_cast<std::size_t>(
        std::llround(top_k_error(logits, batch.labels, 1) * rows));
    topk_misses += static_cast<std::size_t>(
        std::llround(top_k_error(logits, batch.labels, k) * rows));
  }
  const double n = static_cast<double>(test.size());
  return {1.0 - static_cast<double>(top1_misses) / n,
          static_cast<double>(topk_misses) / n};
}

struct TrialRun {
  TrialReport report;
  std::uint64_t epoch0_batch_checksum = 0;
};

/// One seeded training trial. The trial generator is child stream
/// trial_index+1 of the base seed and drives, in order: weight init, each
/// epoch's shuffle, and per-image augmentation draws. The loss never touches
/// the generator, so paired runs of both losses share initial weights and
/// batch order exactly.
inline TrialRun run_trial(const ExperimentConfig& cfg, const LoadedData& data,
                          LossKind loss, int trial_index) {
  const std::vector<std::size_t> dims = resolve_model_dims(cfg, data);
  Rng rng = Rng(cfg.base_seed).child(static_cast<std::uint64_t>(trial_index) + 1);
  MlpModel model = init_model(dims, rng);
  auto params = model.param_views();
  SgdState state(params);

  TrialRun run;
  run.report.seed = cfg.base_seed;
  run.report.loss_name = loss_name(loss);

  const bool is_image = data.train.kind == DataKind::kImage32x32x3;
  const std::size_t n = data.train.size();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = step_lr(cfg.sgd, epoch);
    auto batches = epoch_batches(n, cfg.batch_size, rng);
    if (epoch == 0) run.epoch0_batch_checksum = batch_order_checksum(batches);

    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      try {
        Batch batch = gather(data.train, batches[b]);
        if (is_image) {
          for (std::size_t r = 0; r < batch.features.rows(); ++r) {
            auto row = batch.features.row(r);
            const std::vector<double> augmented = augment(row, data.train.kind, rng);
            std::copy(augmented.begin(), augmented.end(), row.begin());
          }
        }
        subtract_mean_rows(batch.features, data.mean);
        Matrix logits = model.forward(batch.features);
        BatchLoss bl = batch_loss(loss, logits, batch.labels);
        if (!std::isfinite(bl.mean_value)) {
          throw std::runtime_error("non-finite training loss");
        }
        ParamGrads grads = model.backward(bl.grad_logits);
        auto grad_views = grads.views();
        sgd_step(params, grad_views, state, cfg.sgd, lr);
        loss_sum += bl.mean_value * static_cast<double>(batches[b].size());
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("trial " + std::to_string(trial_index) + ", epoch " +
                                 std::to_string(epoch) + ", batch " + std::to_string(b) +
                                 ": " + e.what());
      }
    }

    std::pair<double, double> test_metrics;
    try {
      test_metrics = evaluate_model(model, data.test, data.mean, cfg.batch_size);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("trial " + std::to_string(trial_index) + ", epoch " +
                               std::to_string(epoch) + ", test evaluation after batch " +
                               std::to_string(batches.size() - 1) + ": " + e.what());
    }
    const auto [top1_acc, top5_err] = test_metrics;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.test_top1_acc = top1_acc;
    rec.test_top5_err = top5_err;
    run.report.records.push_back(rec);
  }
  return run;
}

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

/// Shortest round-trippable decimal form, so identical runs give
/// byte-identical files.
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trial_csv_name(LossKind loss, int trial_index) {
  return std::string(loss_name(loss)) + "_trial" + std::to_string(trial_index) + ".csv";
}

inline void write_trial_csv(const std::string& path, const TrialReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write CSV: " + path);
  out << "epoch,lr,train_loss,test_top1_acc,test_top5_err\n";
  for (const EpochRecord& rec : report.records) {
    out << rec.epoch << ',' << fmt_g17(rec.lr) << ',' << fmt_g17(rec.train_loss) << ','
        << fmt_g17(rec.test_top1_acc) << ',' << fmt_g17(rec.test_top5_err) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing CSV: " + path);
}

struct TrainCommandResult {
  TrialRun run;
  std::string csv_path;
};

/// `train`: one seeded trial (trial index 0), CSV written to the output
/// directory.
inline TrainCommandResult run_train_command(const ExperimentConfig& cfg) {
  validate(cfg);
  LoadedData data = load_dataset(cfg);
  TrialRun run = run_trial(cfg, data, cfg.loss, 0);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string path =
      (std::filesystem::path(cfg.out_dir) / trial_csv_name(cfg.loss, 0)).string();
  write_trial_csv(path, run.report);
  return {std::move(run), path};
}

struct CompareResult {
  std::vector<TrialRun> cross_entropy_runs;
  std::vector<TrialRun> adaptive_runs;
  WindowStat cross_entropy_top5;
  WindowStat adaptive_top5;
  WindowStat cross_entropy_top1;
  WindowStat adaptive_top1;
  int window_start = 0;
  int window_end = 0;
  bool batch_order_paired = false;
  bool adaptive_mean_top5_le_cross_entropy = false;
  std::string summary_path;
};

namespace detail {

inline std::vector<TrialReport> reports_of(const std::vector<TrialRun>& runs) {
  std::vector<TrialReport> out;
  out.reserve(runs.size());
  for (const TrialRun& run : runs) out.push_back(run.report);
  return out;
}

inline std::string hex_checksum(std::uint64_t value) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace detail

/// `compare`: `trials` paired runs per loss. Trial i of both losses shares
/// child stream i+1, so only the loss gradient differs between the paired
/// runs; the epoch-0 batch checksums in the report prove it.
inline CompareResult run_compare(const ExperimentConfig& cfg) {
  validate(cfg);
  if (cfg.trials < 2) {
    throw std::invalid_argument("compare: needs trials >= 2 for mean/std aggregation");
  }
  if (cfg.epochs < 1) {
    throw std::invalid_argument("compare: needs epochs >= 1 to aggregate a window");
  }
  const LoadedData data = load_dataset(cfg);

  struct Job {
    LossKind loss;
    int trial;
  };
  std::vector<Job> jobs;
  for (int t = 0; t < cfg.trials; ++t) jobs.push_back({LossKind::kCrossEntropy, t});
  for (int t = 0; t < cfg.trials; ++t) jobs.push_back({LossKind::kAdaptive, t});
  std::vector<std::optional<TrialRun>> slots(jobs.size());

  if (cfg.threads <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      slots[i] = run_trial(cfg, data, jobs[i].loss, jobs[i].trial);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        try {
          slots[i] = run_trial(cfg, data, jobs[i].loss, jobs[i].trial);
        } catch (...) {
          std::scoped_lock lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    const std::size_t num_threads =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), jobs.size());
    for (std::size_t i = 0; i < num_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  CompareResult result;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!slots[i]) throw std::runtime_error("compare: trial worker produced no result");
    if (jobs[i].loss == LossKind::kCrossEntropy) {
      result.cross_entropy_runs.push_back(std::move(*slots[i]));
    } else {
      result.adaptive_runs.push_back(std::move(*slots[i]));
    }
  }

  result.batch_order_paired = true;
  for (int t = 0; t < cfg.trials; ++t) {
    if (result.cross_entropy_runs[static_cast<std::size_t>(t)].epoch0_batch_checksum !=
        result.adaptive_runs[static_cast<std::size_t>(t)].epoch0_batch_checksum) {
      result.batch_order_paired = false;
    }
  }
  if (!result.batch_order_paired) {
    throw std::runtime_error("compare: paired trials saw different batch orders");
  }

  auto [wstart, wend] = resolve_window(cfg);
  result.window_start = wstart;
  result.window_end = wend;
  const auto ce_reports = detail::reports_of(result.cross_entropy_runs);
  const auto ad_reports = detail::reports_of(result.adaptive_runs);
  result.cross_entropy_top5 =
      aggregate_trials(ce_reports, wstart, wend, TrialMetric::kTestTop5Err);
  result.adaptive_top5 =
      aggregate_trials(ad_reports, wstart, wend, TrialMetric::kTestTop5Err);
  result.cross_entropy_top1 =
      aggregate_trials(ce_reports, wstart, wend, TrialMetric::kTestTop1Acc);
  result.adaptive_top1 =
      aggregate_trials(ad_reports, wstart, wend, TrialMetric::kTestTop1Acc);
  result.adaptive_mean_top5_le_cross_entropy =
      result.adaptive_top5.mean <= result.cross_entropy_top5.mean;

  std::filesystem::create_directories(cfg.out_dir);
  for (int t = 0; t < cfg.trials; ++t) {
    const auto& ce = result.cross_entropy_runs[static_cast<std::size_t>(t)];
    const auto& ad = result.adaptive_runs[static_cast<std::size_t>(t)];
    write_trial_csv((std::filesystem::path(cfg.out_dir) /
                     trial_csv_name(LossKind::kCrossEntropy, t))
                        .string(),
                    ce.report);
    write_trial_csv(
        (std::filesystem::path(cfg.out_dir) / trial_csv_name(LossKind::kAdaptive, t))
            .string(),
        ad.report);
  }

  nlohmann::json summary;
  summary["window"] = {wstart, wend};
  summary["trials"] = cfg.trials;
  summary["base_seed"] = cfg.base_seed;
  summary["paired_batch_order"] = result.batch_order_paired;
  summary["adaptive_mean_top5_le_cross_entropy"] =
      result.adaptive_mean_top5_le_cross_entropy;
  auto loss_block = [&](const WindowStat& top5, const WindowStat& top1,
                        const std::vector<TrialRun>& runs) {
    nlohmann::json block;
    block["top5_err"] = {{"mean", top5.mean},
                         {"sample_std", top5.sample_std},
                         {"per_trial", top5.per_trial}};
    block["top1_acc"] = {{"mean", top1.mean},
                         {"sample_std", top1.sample_std},
                         {"per_trial", top1.per_trial}};
    std::vector<std::string> checksums;
    for (const TrialRun& run : runs) {
      checksums.push_back(detail::hex_checksum(run.epoch0_batch_checksum));
    }
    block["epoch0_batch_checksums"] = checksums;
    return block;
  };
  summary["cross_entropy"] = loss_block(result.cross_entropy_top5,
                                        result.cross_entropy_top1,
                                        result.cross_entropy_runs);
  summary["adaptive"] =
      loss_block(result.adaptive_top5, result.adaptive_top1, result.adaptive_runs);

  result.summary_path =
      (std::filesystem::path(cfg.out_dir) / "compare_summary.json").string();
  std::ofstream out(result.summary_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write summary: " + result.summary_path);
  out << summary.dump(2) << '\n';
  return result;
}

/// Text table in the two-block layout: per loss one mean-and-std row, then
/// one row per trial with its batch-order checksum.
inline std::string format_compare_table(const CompareResult& result) {
  std::ostringstream out;
  auto line = [&](const std::string& a, const std::string& b, const std::string& c) {
    out << a;
    if (a.size() < 24) out << std::string(24 - a.size(), ' ');
    out << b;
    if (b.size() < 28) out << std::string(28 - b.size(), ' ');
    out << c << '\n';
  };
  line("loss function", "top-5 error", "trial no.");
  out << std::string(72, '-') << '\n';
  auto block = [&](const char* name, const WindowStat& top5,
                   const std::vector<TrialRun>& runs) {
    char mean_std[64];
    std::snprintf(mean_std, sizeof mean_std, "%.4f +/- %.4f", top5.mean,
                  top5.sample_std);
    line(name, mean_std, "mean and std");
    for (std::size_t t = 0; t < runs.size(); ++t) {
      char value[32];
      std::snprintf(value, sizeof value, "%.4f", top5.per_trial[t]);
      line("", value,
           "trial " + std::to_string(t) + "  [batch order " +
               detail::hex_checksum(runs[t].epoch0_batch_checksum) + "]");
    }
  };
  block("cross_entropy", result.cross_entropy_top5, result.cross_entropy_runs);
  block("adaptive", result.adaptive_top5, result.adaptive_runs);
  out << std::string(72, '-') << '\n';
  out << "window: epochs [" << result.window_start << ", " << result.window_end
      << ")\n";
  out << "paired batch order: " << (result.batch_order_paired ? "yes" : "NO") << '\n';
  out << "adaptive mean top-5 error <= cross entropy mean: "
      << (result.adaptive_mean_top5_le_cross_entropy ? "yes" : "no")
      << "  (trend, informational)\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

struct GradCheckOptions {
  std::vector<int> class_counts = {2, 5, 100};
  int samples = 1000;
  std::uint64_t seed = 1;
  double fd_step = 1e-6;
  double rtol = 1e-5;
  double atol = 1e-8;
  double logit_range = 4.0;
  bool corrupt_hook = false;  // testing hook: breaks the analytic gradient
};

struct GradCheckEntry {
  int classes = 0;
  std::string loss;
  double max_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_error = 0.0;
  double rtol = 0.0;
  bool passed = false;
};

/// Central-difference check of both losses' analytic logit gradients over
/// random logits. A coordinate passes when |analytic - numeric| <= atol +
/// rtol * max(|analytic|, |numeric|); the reported error is scaled so that
/// the threshold is exactly rtol.
inline GradCheckReport run_gradcheck(const GradCheckOptions& opts) {
  if (opts.samples < 1) throw std::invalid_argument("gradcheck: samples must be >= 1");
  for (int c : opts.class_counts) {
    if (c < 2) throw std::invalid_argument("gradcheck: class counts must be >= 2");
  }
  GradCheckReport report;
  report.rtol = opts.rtol;
  const double denom_offset = opts.atol / opts.rtol;
  Rng rng(opts.seed);
  for (int num_classes : opts.class_counts) {
    for (LossKind kind : {LossKind::kCrossEntropy, LossKind::kAdaptive}) {
      double worst = 0.0;
      std::vector<double> logits(static_cast<std::size_t>(num_classes));
      for (int s = 0; s < opts.samples; ++s) {
        for (double& z : logits) z = rng.uniform(-opts.logit_range, opts.logit_range);
        const int true_class = static_cast<int>(rng.below(
            static_cast<std::uint64_t>(num_classes)));
        LossOutput analytic = evaluate_loss(kind, logits, true_class);
        if (opts.corrupt_hook) analytic.grad_logits[0] += 1e-3;
        for (std::size_t i = 0; i < logits.size(); ++i) {
          const double saved = logits[i];
          logits[i] = saved + opts.fd_step;
          const double f_plus = evaluate_loss(kind, logits, true_class).value;
          logits[i] = saved - opts.fd_step;
          const double f_minus = evaluate_loss(kind, logits, true_class).value;
          logits[i] = saved;
          const double numeric = (f_plus - f_minus) / (2.0 * opts.fd_step);
          const double a = analytic.grad_logits[i];
          const double err =
              std::abs(a - numeric) /
              (denom_offset + std::max(std::abs(a), std::abs(numeric)));
          worst = std::max(worst, err);
        }
      }
      report.entries.push_back({num_classes, loss_name(kind), worst});
      report.max_error = std::max(report.max_error, worst);
    }
  }
  report.passed = report.max_error <= opts.rtol;
  return report;
}

inline std::string format_gradcheck(const GradCheckReport& report) {
  std::ostringstream out;
  for (const GradCheckEntry& entry : report.entries) {
    out << "C=" << entry.classes << "  " << entry.loss << "  max relative error "
        << fmt_g17(entry.max_error) << '\n';
  }
  out << "overall max relative error " << fmt_g17(report.max_error) << " (tolerance "
      << fmt_g17(report.rtol) << "): " << (report.passed ? "PASS" : "FAIL") << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Loss evaluation
// ---------------------------------------------------------------------------

struct EvalLossReport {
  std::vector<double> q;
  LossOutput cross_entropy;
  LossOutput adaptive;
  double scale_factor = 0.0;
};

/// `eval-loss`: both losses, their gradients, and k(q_c) for one logits
/// vector.
inline EvalLossReport eval_loss(std::span<const double> logits, int true_class) {
  EvalLossReport report;
  report.q = softmax(logits).values();
  report.cross_entropy = lace::cross_entropy(logits, true_class);
  report.adaptive = adaptive_cross_entropy(logits, true_class);
  const double q_true = std::max(report.q[static_cast<std::size_t>(true_class)],
                                 kProbFloor);
  report.scale_factor = gradient_scale_factor(q_true);
  return report;
}

inline std::string format_eval_loss(const EvalLossReport& report) {
  auto vec = [](const std::vector<double>& values) {
    std::string out = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i > 0) out += ", ";
      out += fmt_g17(values[i]);
    }
    return out + "]";
  };
  auto sum = [](const std::vector<double>& values) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  };
  std::ostringstream out;
  out << "q = " << vec(report.q) << '\n';
  out << "cross_entropy  value = " << fmt_g17(report.cross_entropy.value) << '\n';
  out << "cross_entropy  grad  = " << vec(report.cross_entropy.grad_logits)
      << "  (sum " << fmt_g17(sum(report.cross_entropy.grad_logits)) << ")\n";
  out << "adaptive       value = " << fmt_g17(report.adaptive.value) << '\n';
  out << "adaptive       grad  = " << vec(report.adaptive.grad_logits) << "  (sum "
      << fmt_g17(sum(report.adaptive.grad_logits)) << ")\n";
  out << "k(q_c)         = " << fmt_g17(report.scale_factor) << '\n';
  return out.str();
}

}  // namespace lace
