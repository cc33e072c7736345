// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one PASS/FAIL line each. Exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lace/experiment.hpp"

namespace {

namespace fs = std::filesystem;

struct Criterion {
  std::string name;
  std::function<std::string()> run;  // returns detail text; throws on failure
};

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

// --- 1. gradient correctness --------------------------------------------

std::string check_gradients() {
  const auto start = std::chrono::steady_clock::now();
  lace::GradCheckOptions opts;  // C in {2,5,100}, 1000 samples, h=1e-6
  const lace::GradCheckReport report = lace::run_gradcheck(opts);
  const double seconds = elapsed_seconds(start);
  for (const auto& entry : report.entries) {
    require(entry.max_error <= opts.rtol,
            entry.loss + " C=" + std::to_string(entry.classes) + " max error " +
                lace::fmt_g17(entry.max_error) + " > 1e-5");
  }
  require(seconds < 10.0, "runtime " + std::to_string(seconds) + "s >= 10s");
  return "max rel error " + lace::fmt_g17(report.max_error) + " over 6000 samples, " +
         std::to_string(seconds).substr(0, 4) + "s";
}

// --- 2. derivation identities ---------------------------------------------

std::string check_identities() {
  lace::Rng rng(20250809);
  constexpr int kCases = 10000;
  double worst_bound = 0.0;
  double worst_decomp = 0.0;
  double worst_prop = 0.0;
  double worst_sum = 0.0;
  for (int i = 0; i < kCases; ++i) {
    const std::size_t num_classes = 2 + rng.below(99);
    std::vector<double> z(num_classes);
    for (double& v : z) v = rng.uniform(-4.0, 4.0);
    const int c = static_cast<int>(rng.below(num_classes));
    const lace::ProbVector q = lace::softmax(z);
    const double q_c = q[static_cast<std::size_t>(c)];
    const auto ce = lace::cross_entropy(z, c);
    const auto adp = lace::adaptive_cross_entropy(z, c);

    worst_bound = std::max(worst_bound, std::abs(adp.value - (1.0 - q_c) * ce.value));
    require(std::abs(adp.value - (1.0 - q_c) * ce.value) <= 1e-12,
            "Adp != (1-q_c)*CE within 1e-12");

    const auto [forward_term, reverse_term] = lace::jeffreys_one_hot_decomposition(q, c);
    worst_decomp = std::max(worst_decomp,
                            std::abs(forward_term + reverse_term - adp.value));
    require(std::abs(forward_term + reverse_term - adp.value) <= 1e-12,
            "decomposition pair does not sum to Adp");

    const double k = lace::gradient_scale_factor(q_c);
    double ce_sum = 0.0;
    double adp_sum = 0.0;
    for (std::size_t j = 0; j < num_classes; ++j) {
      worst_prop = std::max(worst_prop,
                            std::abs(adp.grad_logits[j] - k * ce.grad_logits[j]));
      require(std::abs(adp.grad_logits[j] - k * ce.grad_logits[j]) <= 1e-10,
              "adaptive grad != k(q_c) * CE grad within 1e-10");
      ce_sum += ce.grad_logits[j];
      adp_sum += adp.grad_logits[j];
    }
    worst_sum = std::max({worst_sum, std::abs(ce_sum), std::abs(adp_sum)});
    require(std::abs(ce_sum) <= 1e-9 && std::abs(adp_sum) <= 1e-9,
            "gradient entries do not sum to 0 within 1e-9");

    require(adp.value <= ce.value + 1e-15, "Adp > CE");
    if (q_c < 1.0 - 1e-9) {
      require(adp.value < ce.value, "Adp == CE away from q_c = 1");
    }
  }
  std::ostringstream detail;
  detail << kCases << " cases; max |Adp-(1-q)CE| " << lace::fmt_g17(worst_bound)
         << ", decomp " << lace::fmt_g17(worst_decomp) << ", proportionality "
         << lace::fmt_g17(worst_prop) << ", grad-sum " << lace::fmt_g17(worst_sum);
  return detail.str();
}

// --- 3. scale-factor extremes ----------------------------------------------

std::string check_scale_factor_extremes() {
  require(lace::gradient_scale_factor(1.0) == 0.0, "k(1) != 0");
  const double near_zero = std::abs(lace::gradient_scale_factor(1e-12) - 1.0);
  require(near_zero < 1e-10, "|k(1e-12) - 1| = " + lace::fmt_g17(near_zero));

  constexpr int kPoints = 100000;
  double best_q = 0.0;
  double best_k = -1.0;
  for (int i = 1; i <= kPoints; ++i) {
    const double q = static_cast<double>(i) / kPoints;
    const double k = lace::gradient_scale_factor(q);
    if (k > best_k) {
      best_k = k;
      best_q = q;
    }
  }
  const double q_star = std::exp(-2.0);
  const double k_star = 1.0 + std::exp(-2.0);
  require(std::abs(best_q - q_star) <= 1e-4,
          "grid argmax " + lace::fmt_g17(best_q) + " not within 1e-4 of e^-2");
  require(std::abs(best_k - k_star) <= 1e-8,
          "grid max " + lace::fmt_g17(best_k) + " not within 1e-8 of 1+e^-2");
  return "k(1)=0, |k(1e-12)-1|=" + lace::fmt_g17(near_zero) + ", argmax " +
         lace::fmt_g17(best_q) + ", max " + lace::fmt_g17(best_k);
}

// --- 4. epsilon-convergence --------------------------------------------

std::string check_eps_convergence() {
  lace::Rng rng(513);
  constexpr int kClasses = 10;
  constexpr int kCases = 100;
  double worst_ratio = 0.0;  // gap / bound
  for (int i = 0; i < kCases; ++i) {
    std::vector<double> z(kClasses);
    for (double& v : z) v = rng.uniform(-4.0, 4.0);
    const int c = static_cast<int>(rng.below(kClasses));
    const lace::ProbVector q = lace::softmax(z);
    const double ce = lace::cross_entropy(z, c).value;
    double previous_gap = std::numeric_limits<double>::infinity();
    for (double eps : {1e-4, 1e-6, 1e-8}) {
      const lace::ProbVector p_eps = lace::smoothed_one_hot(c, kClasses, eps);
      const double gap = std::abs(lace::kl_divergence(p_eps, q) - ce);
      const double bound = 2.0 * kClasses * eps * std::abs(std::log(eps));
      require(gap <= bound, "|D(P_eps,Q) - CE| = " + lace::fmt_g17(gap) +
                                " exceeds bound " + lace::fmt_g17(bound) + " at eps " +
                                lace::fmt_g17(eps));
      require(gap < previous_gap, "gap not strictly decreasing at eps " +
                                      lace::fmt_g17(eps));
      worst_ratio = std::max(worst_ratio, gap / bound);
      previous_gap = gap;
    }
  }
  return std::to_string(kCases) + " cases x 3 eps levels; worst gap/bound " +
         lace::fmt_g17(worst_ratio);
}

// --- 5. aggregation oracle ------------------------------------------

std::string check_aggregation_oracle() {
  auto report_with = [](std::uint64_t seed, double value) {
    lace::TrialReport report;
    report.seed = seed;
    report.loss_name = "cross_entropy";
    for (int e = 0; e < 10; ++e) {
      lace::EpochRecord rec;
      rec.epoch = e;
      rec.test_top5_err = value;
      report.records.push_back(rec);
    }
    return report;
  };
  std::vector<lace::TrialReport> first;
  for (double v : {6.8, 6.6, 6.8, 6.6, 6.7}) first.push_back(report_with(first.size(), v));
  const lace::WindowStat stat1 = lace::aggregate_trials(first, 0, 10);
  require(std::abs(stat1.mean - 6.7) <= 0.005,
          "first block mean " + lace::fmt_g17(stat1.mean));
  require(std::abs(stat1.sample_std - 0.1) <= 0.005,
          "first block std " + lace::fmt_g17(stat1.sample_std));

  std::vector<lace::TrialReport> second;
  for (double v : {6.2, 6.2, 6.1, 6.5, 6.2}) second.push_back(report_with(second.size(), v));
  const lace::WindowStat stat2 = lace::aggregate_trials(second, 0, 10);
  require(std::abs(stat2.mean - 6.24) <= 0.005,
          "second block mean " + lace::fmt_g17(stat2.mean));
  require(std::abs(stat2.sample_std - 0.152) <= 0.005,
          "second block std " + lace::fmt_g17(stat2.sample_std));
  return "6.7 +/- 0.1 and " + lace::fmt_g17(stat2.mean) + " +/- " +
         lace::fmt_g17(stat2.sample_std) + " reproduced";
}

// --- 6. scheduler exactness -------------------------------------------

std::string check_scheduler() {
  const lace::SgdConfig cfg;
  const std::vector<std::pair<int, double>> expected = {
      {0, 0.1}, {50, 0.01}, {100, 0.001}, {150, 0.0001}};
  for (const auto& [epoch, value] : expected) {
    const double lr = lace::step_lr(cfg, epoch);
    require(std::abs(lr - value) <= 1e-14 * value,
            "epoch " + std::to_string(epoch) + " lr " + lace::fmt_g17(lr));
    for (int e = epoch; e < epoch + 50; ++e) {
      require(lace::step_lr(cfg, e) == lr,
              "lr not constant inside band at epoch " + std::to_string(e));
    }
  }
  return "0.1 / 0.01 / 0.001 / 0.0001 on the four 50-epoch bands";
}

// --- 7. parser ------------------------------------------------------

std::string check_parser() {
  // Round trip a synthetic record set bit-exactly.
  lace::Rng rng(41);
  std::vector<unsigned char> stream;
  std::vector<int> labels;
  std::vector<std::vector<double>> pixels;
  for (int r = 0; r < 7; ++r) {
    std::vector<double> row(lace::kCifarImageBytes);
    for (double& p : row) p = static_cast<double>(rng.below(256)) / 255.0;
    const int fine = static_cast<int>(rng.below(100));
    lace::encode_cifar100_record(static_cast<unsigned char>(rng.below(20)),
                                 static_cast<unsigned char>(fine), row, stream);
    labels.push_back(fine);
    pixels.push_back(std::move(row));
  }
  const lace::Dataset ds = lace::parse_cifar100_records(stream);
  require(ds.size() == 7, "round trip lost records");
  for (std::size_t r = 0; r < 7; ++r) {
    require(ds.labels[r] == labels[r], "round trip changed a label");
    for (std::size_t i = 0; i < lace::kCifarImageBytes; ++i) {
      require(ds.features(r, i) == pixels[r][i], "round trip changed a pixel");
    }
  }

  // Malformed length is rejected and names the offset.
  bool rejected = false;
  try {
    lace::parse_cifar100_records(std::vector<unsigned char>(lace::kCifarRecordBytes + 5, 0));
  } catch (const std::runtime_error& e) {
    rejected = std::string(e.what()).find("offset 3074") != std::string::npos;
  }
  require(rejected, "truncated stream not rejected with its offset");

  // Real files, when present locally.
  std::string detail = "fixture round trip bit-exact; malformed length rejected";
  fs::path dir;
  if (const char* env = std::getenv("CIFAR100_DIR")) {
    dir = env;
  } else if (fs::exists("data/cifar-100-binary/train.bin")) {
    dir = "data/cifar-100-binary";
  }
  if (!dir.empty() && fs::exists(dir / "train.bin") && fs::exists(dir / "test.bin")) {
    const auto train_bytes = lace::read_file_bytes((dir / "train.bin").string());
    const auto test_bytes = lace::read_file_bytes((dir / "test.bin").string());
    const auto [train, test] = lace::parse_cifar100(train_bytes, test_bytes);
    require(train.size() == 50000, "train.bin does not hold 50000 records");
    require(test.size() == 10000, "test.bin does not hold 10000 records");
    for (int label : train.labels) require(label < 100, "train label >= 100");
    for (int label : test.labels) require(label < 100, "test label >= 100");
    detail += "; real CIFAR-100 files verified (50000/10000)";
  } else {
    detail += "; real CIFAR-100 files not present, skipped";
  }
  return detail;
}

// --- 8/9. desk-scale comparison and the full-scale trend note ------------

lace::CompareResult desk_scale_compare(double* seconds_out) {
  lace::ExperimentConfig cfg;
  cfg.dataset.synthetic = {.classes = 10, .per_class = 200, .dim = 32, .spread = 0.15,
                           .train_fraction = 0.8};
  cfg.model_dims = {32, 64, 10};
  cfg.epochs = 30;
  cfg.batch_size = 100;
  cfg.trials = 5;
  cfg.base_seed = 2024;
  cfg.threads = 1;
  cfg.out_dir = "acceptance_out";
  fs::remove_all(cfg.out_dir);
  const auto start = std::chrono::steady_clock::now();
  lace::CompareResult result = lace::run_compare(cfg);
  *seconds_out = elapsed_seconds(start);
  return result;
}

std::string check_desk_scale(const lace::CompareResult& result, double seconds) {
  require(seconds < 300.0, "compare took " + std::to_string(seconds) + "s >= 5 min");
  require(result.batch_order_paired, "paired trials diverged in batch order");
  require(result.cross_entropy_top1.mean >= 0.90,
          "cross entropy mean top-1 " + lace::fmt_g17(result.cross_entropy_top1.mean));
  require(result.adaptive_top1.mean >= 0.90,
          "adaptive mean top-1 " + lace::fmt_g17(result.adaptive_top1.mean));

  // The written report must carry the pairing proof.
  std::ifstream in(result.summary_path);
  require(static_cast<bool>(in), "summary file missing");
  nlohmann::json summary;
  in >> summary;
  const auto& ce_sums = summary.at("cross_entropy").at("epoch0_batch_checksums");
  const auto& ad_sums = summary.at("adaptive").at("epoch0_batch_checksums");
  require(ce_sums.size() == 5 && ad_sums.size() == 5, "checksum lists incomplete");
  for (std::size_t t = 0; t < 5; ++t) {
    require(ce_sums[t] == ad_sums[t], "checksum mismatch at trial " + std::to_string(t));
  }
  std::ostringstream detail;
  detail << "5 paired trials, 30 epochs in " << std::to_string(seconds).substr(0, 5)
         << "s; mean top-1 ce " << lace::fmt_g17(result.cross_entropy_top1.mean)
         << ", adaptive " << lace::fmt_g17(result.adaptive_top1.mean)
         << "; checksums paired";
  return detail.str();
}

std::string check_trend_reporting(const lace::CompareResult& result) {
  // Benchmark-scale image results are out of desk scope; the harness instead
  // records the top-5 trend without hard-failing it, and the README documents
  // the optional long CIFAR-100 recipe.
  std::ifstream in(result.summary_path);
  require(static_cast<bool>(in), "summary file missing");
  nlohmann::json summary;
  in >> summary;
  require(summary.contains("adaptive_mean_top5_le_cross_entropy"),
          "trend flag missing from the compare summary");
  const bool trend = summary.at("adaptive_mean_top5_le_cross_entropy").get<bool>();
  std::ostringstream detail;
  detail << "top-5 trend recorded (adaptive <= cross entropy: "
         << (trend ? "yes" : "no") << ", informational); desk-scale blob mean top-5: "
         << "adaptive " << lace::fmt_g17(result.adaptive_top5.mean) << " vs ce "
         << lace::fmt_g17(result.cross_entropy_top5.mean);
  return detail.str();
}

}  // namespace

int main() {
  double compare_seconds = 0.0;
  lace::CompareResult compare_result;
  bool compare_ran = false;

  const std::vector<Criterion> criteria = {
      {"gradient-correctness", check_gradients},
      {"derivation-identities", check_identities},
      {"scale-factor-extremes", check_scale_factor_extremes},
      {"eps-convergence", check_eps_convergence},
      {"table-aggregation-oracle", check_aggregation_oracle},
      {"scheduler-exactness", check_scheduler},
      {"cifar-parser", check_parser},
      {"desk-scale-training",
       [&] {
         compare_result = desk_scale_compare(&compare_seconds);
         compare_ran = true;
         return check_desk_scale(compare_result, compare_seconds);
       }},
      {"full-scale-trend-reporting",
       [&] {
         require(compare_ran, "desk-scale compare did not run");
         return check_trend_reporting(compare_result);
       }},
  };

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    try {
      const std::string detail = criterion.run();
      std::cout << "[PASS] " << criterion.name << " — " << detail << '\n';
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "[FAIL] " << criterion.name << " — " << e.what() << '\n';
    }
  }
  std::cout << (failures == 0 ? "all criteria passed"
                              : std::to_string(failures) + " criteria failed")
            << '\n';
  return failures;
}
