#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lace/matrix.hpp"

namespace lace {

/// Fraction of rows whose true label is NOT among the k largest logits.
/// Ties rank the lower class index first, so results are deterministic.
inline double top_k_error(const Matrix& logits, std::span<const int> labels, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > logits.cols()) {
    throw std::invalid_argument("top_k_error: k=" + std::to_string(k) +
                                " outside [1, " + std::to_string(logits.cols()) + "]");
  }
  if (logits.rows() != labels.size()) {
    throw std::invalid_argument("top_k_error: " + std::to_string(logits.rows()) +
                                " rows vs " + std::to_string(labels.size()) +
                                " labels");
  }
  std::size_t misses = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= row.size()) {
      throw std::invalid_argument("top_k_error: label " + std::to_string(label) +
                                  " out of range at row " + std::to_string(r));
    }
    const std::size_t c = static_cast<std::size_t>(label);
    std::size_t rank = 0;  // classes ranked above the true one
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] > row[c] || (row[j] == row[c] && j < c)) ++rank;
    }
    if (rank >= static_cast<std::size_t>(k)) ++misses;
  }
  return static_cast<double>(misses) / static_cast<double>(logits.rows());
}

/// One epoch's worth of metrics from a training run.
struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double test_top1_acc = 0.0;
  double test_top5_err = 0.0;
};

/// Full per-epoch series for one seeded trial; records are dense in epoch
/// index 0..E-1.
struct TrialReport {
  std::uint64_t seed = 0;
  std::string loss_name;
  std::vector<EpochRecord> records;
};

enum class TrialMetric { kTestTop5Err, kTestTop1Acc, kTrainLoss };

struct WindowStat {
  double mean = 0.0;
  double sample_std = 0.0;
  std::vector<double> per_trial;
};

/// Per trial: average the chosen metric over epochs [window_start,
/// window_end). Across trials: mean and sample standard deviation (n-1
/// denominator). Needs at least 2 trials for the std to exist.
inline WindowStat aggregate_trials(std::span<const TrialReport> reports,
                                   int window_start, int window_end,
                                   TrialMetric metric = TrialMetric::kTestTop5Err) {
  if (reports.size() < 2) {
    throw std::invalid_argument("aggregate_trials: need at least 2 trials, got " +
                                std::to_string(reports.size()));
  }
  WindowStat stat;
  stat.per_trial.reserve(reports.size());
  for (const TrialReport& report : reports) {
    const int num_epochs = static_cast<int>(report.records.size());
    if (window_start < 0 || window_end <= window_start || window_end > num_epochs) {
      throw std::invalid_argument("aggregate_trials: window [" +
                                  std::to_string(window_start) + ", " +
                                  std::to_string(window_end) +
                                  ") outside epoch range [0, " +
                                  std::to_string(num_epochs) + ")");
    }
    double acc = 0.0;
    for (int e = window_start; e < window_end; ++e) {
      const EpochRecord& rec = report.records[static_cast<std::size_t>(e)];
      switch (metric) {
        case TrialMetric::kTestTop5Err: acc += rec.test_top5_err; break;
        case TrialMetric::kTestTop1Acc: acc += rec.test_top1_acc; break;
        case TrialMetric::kTrainLoss: acc += rec.train_loss; break;
      }
    }
    stat.per_trial.push_back(acc / static_cast<double>(window_end - window_start));
  }
  double sum = 0.0;
  for (double v : stat.per_trial) sum += v;
  stat.mean = sum / static_cast<double>(stat.per_trial.size());
  double sq = 0.0;
  for (double v : stat.per_trial) sq += (v - stat.mean) * (v - stat.mean);
  stat.sample_std = std::sqrt(sq / static_cast<double>(stat.per_trial.size() - 1));
  return stat;
}

}  // namespace lace
