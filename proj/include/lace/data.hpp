#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lace/matrix.hpp"
#include "lace/rng.hpp"

namespace lace {

enum class DataKind { kImage32x32x3, kFlat };

/// Labeled examples: one feature row per example, integer class labels in
/// [0, num_classes). Immutable once built; share const references freely.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  int num_classes = 0;
  DataKind kind = DataKind::kFlat;

  std::size_t size() const { return labels.size(); }
  std::size_t feature_dim() const { return features.cols(); }
};

/// Per-feature mean of the training split, the thing subtracted from every
/// split. Never compute it from test data.
struct MeanImage {
  std::vector<double> values;
};

// CIFAR-100 binary layout: per record one coarse label byte, one fine label
// byte, then 3072 pixel bytes as channel-major planes (R, G, B), each plane
// a row-major 32x32 grid.
inline constexpr std::size_t kCifarImageSide = 32;
inline constexpr std::size_t kCifarImageBytes = 3 * kCifarImageSide * kCifarImageSide;
inline constexpr std::size_t kCifarRecordBytes = 2 + kCifarImageBytes;
inline constexpr int kCifarNumClasses = 100;

/// Parse one CIFAR-100 binary stream. Pixels are scaled to [0, 1]; the fine
/// label becomes the class and the coarse label is discarded.
inline Dataset parse_cifar100_records(std::span<const unsigned char> bytes) {
  if (bytes.size() % kCifarRecordBytes != 0) {
    const std::size_t partial_offset = (bytes.size() / kCifarRecordBytes) * kCifarRecordBytes;
    throw std::runtime_error(
        "parse_cifar100: stream length " + std::to_string(bytes.size()) +
        " is not a multiple of " + std::to_string(kCifarRecordBytes) +
        "; partial record starts at offset " + std::to_string(partial_offset));
  }
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  Dataset ds;
  ds.kind = DataKind::kImage32x32x3;
  ds.num_classes = kCifarNumClasses;
  ds.labels.resize(n);
  if (n > 0) ds.features = Matrix(n, kCifarImageBytes);
  for (std::size_t r = 0; r < n; ++r) {
    const unsigned char* rec = bytes.data() + r * kCifarRecordBytes;
    const unsigned char fine = rec[1];  // rec[0] is the coarse label
    if (fine >= kCifarNumClasses) {
      throw std::runtime_error("parse_cifar100: record " + std::to_string(r) +
                               " has fine label " + std::to_string(fine) +
                               " >= " + std::to_string(kCifarNumClasses));
    }
    ds.labels[r] = fine;
    auto row = ds.features.row(r);
    for (std::size_t k = 0; k < kCifarImageBytes; ++k) {
      row[k] = static_cast<double>(rec[2 + k]) / 255.0;
    }
  }
  return ds;
}

inline std::pair<Dataset, Dataset> parse_cifar100(
    std::span<const unsigned char> train_bytes,
    std::span<const unsigned char> test_bytes) {
  return {parse_cifar100_records(train_bytes), parse_cifar100_records(test_bytes)};
}

/// Append one record in the binary layout above; pixels in [0, 1] are
/// rounded back to bytes. Used to build fixtures and round-trip checks.
inline void encode_cifar100_record(unsigned char coarse, unsigned char fine,
                                   std::span<const double> pixels,
                                   std::vector<unsigned char>& out) {
  if (pixels.size() != kCifarImageBytes) {
    throw std::invalid_argument("encode_cifar100_record: expected " +
                                std::to_string(kCifarImageBytes) + " pixels, got " +
                                std::to_string(pixels.size()));
  }
  out.push_back(coarse);
  out.push_back(fine);
  for (double v : pixels) {
    const double scaled = std::clamp(v, 0.0, 1.0) * 255.0;
    out.push_back(static_cast<unsigned char>(std::lround(scaled)));
  }
}

/// Gaussian class blobs: centers drawn uniformly in [-1,1]^dim, rejected
/// until pairwise separation is at least 4*spread, then per_class points per
/// center with N(0, spread) noise. The desk-scale stand-in corpus.
inline Dataset synthetic_blobs(Rng& rng, int num_classes, int per_class, int dim,
                               double spread) {
  if (num_classes < 2) {
    throw std::invalid_argument("synthetic_blobs: need at least 2 classes");
  }
  if (per_class < 1) throw std::invalid_argument("synthetic_blobs: per_class must be >= 1");
  if (dim < 1) throw std::invalid_argument("synthetic_blobs: dim must be >= 1");
  if (!(spread > 0.0)) throw std::invalid_argument("synthetic_blobs: spread must be > 0");

  constexpr int kMaxAttempts = 10000;
  const double min_separation = 4.0 * spread;
  std::vector<std::vector<double>> centers;
  centers.reserve(static_cast<std::size_t>(num_classes));
  int attempts = 0;
  while (centers.size() < static_cast<std::size_t>(num_classes)) {
    if (++attempts > kMaxAttempts) {
      throw std::runtime_error(
          "synthetic_blobs: could not place " + std::to_string(num_classes) +
          " centers with separation " + std::to_string(min_separation) + " after " +
          std::to_string(kMaxAttempts) + " attempts; reduce spread");
    }
    std::vector<double> candidate(static_cast<std::size_t>(dim));
    for (double& x : candidate) x = rng.uniform(-1.0, 1.0);
    bool ok = true;
    for (const auto& center : centers) {
      double dist2 = 0.0;
      for (int d = 0; d < dim; ++d) {
        const double diff = candidate[static_cast<std::size_t>(d)] -
                            center[static_cast<std::size_t>(d)];
        dist2 += diff * diff;
      }
      if (dist2 < min_separation * min_separation) {
        ok = false;
        break;
      }
    }
    if (ok) centers.push_back(std::move(candidate));
  }

  const std::size_t n = static_cast<std::size_t>(num_classes) *
                        static_cast<std::size_t>(per_class);
  Dataset ds;
  ds.kind = DataKind::kFlat;
  ds.num_classes = num_classes;
  ds.features = Matrix(n, static_cast<std::size_t>(dim));
  ds.labels.resize(n);
  std::size_t row_index = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int k = 0; k < per_class; ++k) {
      auto row = ds.features.row(row_index);
      for (int d = 0; d < dim; ++d) {
        row[static_cast<std::size_t>(d)] =
            centers[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] +
            rng.normal(0.0, spread);
      }
      ds.labels[row_index] = c;
      ++row_index;
    }
  }
  return ds;
}

/// Seeded shuffle split into (train, test); both splits stay non-empty.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds,
                                                 double train_fraction, Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split_dataset: train_fraction must be in (0, 1)");
  }
  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  const std::size_t train_n = static_cast<std::size_t>(
      train_fraction * static_cast<double>(n));
  if (train_n == 0 || train_n == n) {
    throw std::invalid_argument("split_dataset: split leaves an empty side (n=" +
                                std::to_string(n) + ", fraction=" +
                                std::to_string(train_fraction) + ")");
  }
  auto take = [&](std::size_t begin, std::size_t end) {
    Dataset part;
    part.kind = ds.kind;
    part.num_classes = ds.num_classes;
    part.features = Matrix(end - begin, ds.feature_dim());
    part.labels.resize(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t src = order[i];
      auto dst = part.features.row(i - begin);
      auto from = ds.features.row(src);
      std::copy(from.begin(), from.end(), dst.begin());
      part.labels[i - begin] = ds.labels[src];
    }
    return part;
  };
  return {take(0, train_n), take(train_n, n)};
}

/// Per-feature mean over the (training) split.
inline MeanImage compute_mean(const Dataset& train) {
  if (train.size() == 0) {
    throw std::invalid_argument("compute_mean: empty dataset");
  }
  MeanImage mean;
  mean.values.assign(train.feature_dim(), 0.0);
  for (std::size_t r = 0; r < train.size(); ++r) {
    auto row = train.features.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) mean.values[j] += row[j];
  }
  const double inv_n = 1.0 / static_cast<double>(train.size());
  for (double& v : mean.values) v *= inv_n;
  return mean;
}

inline void subtract_mean_rows(Matrix& batch, const MeanImage& mean) {
  if (batch.cols() != mean.values.size()) {
    throw std::invalid_argument("subtract_mean: feature dim " +
                                std::to_string(batch.cols()) + " vs mean dim " +
                                std::to_string(mean.values.size()));
  }
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    auto row = batch.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] -= mean.values[j];
  }
}

inline Dataset subtract_mean(const Dataset& ds, const MeanImage& mean) {
  Dataset out = ds;
  subtract_mean_rows(out.features, mean);
  return out;
}

/// Deterministic augmentation core: optional horizontal flip, then zero-pad
/// 4 pixels per side and crop the 32x32 window at (crop_dy, crop_dx), both
/// in [0, 8]. (4, 4) with no flip is the identity.
inline std::vector<double> augment_image_with(std::span<const double> row, bool flip,
                                              int crop_dy, int crop_dx) {
  if (row.size() != kCifarImageBytes) {
    throw std::invalid_argument("augment: expected a 32x32x3 row of " +
                                std::to_string(kCifarImageBytes) + " values, got " +
                                std::to_string(row.size()));
  }
  if (crop_dy < 0 || crop_dy > 8 || crop_dx < 0 || crop_dx > 8) {
    throw std::invalid_argument("augment: crop offsets must be in [0, 8]");
  }
  constexpr int side = static_cast<int>(kCifarImageSide);
  std::vector<double> out(kCifarImageBytes, 0.0);
  for (int ch = 0; ch < 3; ++ch) {
    const std::size_t plane = static_cast<std::size_t>(ch) *
                              static_cast<std::size_t>(side * side);
    for (int y = 0; y < side; ++y) {
      const int src_y = y + crop_dy - 4;
      if (src_y < 0 || src_y >= side) continue;
      for (int x = 0; x < side; ++x) {
        int src_x = x + crop_dx - 4;
        if (src_x < 0 || src_x >= side) continue;
        if (flip) src_x = side - 1 - src_x;
        out[plane + static_cast<std::size_t>(y * side + x)] =
            row[plane + static_cast<std::size_t>(src_y * side + src_x)];
      }
    }
  }
  return out;
}

/// Train-time augmentation: flip with probability 0.5, then a random crop of
/// the 4-pixel zero-padded image. Only image data may be augmented.
inline std::vector<double> augment(std::span<const double> row, DataKind kind,
                                   Rng& rng) {
  if (kind != DataKind::kImage32x32x3) {
    throw std::invalid_argument("augment: only 32x32x3 image data can be augmented");
  }
  const bool flip = rng.next_unit() < 0.5;
  const int crop_dy = static_cast<int>(rng.below(9));
  const int crop_dx = static_cast<int>(rng.below(9));
  return augment_image_with(row, flip, crop_dy, crop_dx);
}

/// One epoch's batch order: a seeded permutation of 0..n-1 cut into
/// consecutive batches, the final short batch kept.
inline std::vector<std::vector<std::int32_t>> epoch_batches(std::size_t n,
                                                            std::size_t batch_size,
                                                            Rng& rng) {
  if (n == 0) throw std::invalid_argument("epoch_batches: empty dataset");
  if (batch_size == 0) throw std::invalid_argument("epoch_batches: batch_size must be >= 1");
  std::vector<std::int32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::vector<std::int32_t>> batches;
  batches.reserve((n + batch_size - 1) / batch_size);
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(begin + batch_size, n);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

struct Batch {
  Matrix features;
  std::vector<int> labels;
};

/// Materialize the rows named by `indices` as one batch.
inline Batch gather(const Dataset& ds, std::span<const std::int32_t> indices) {
  if (indices.empty()) throw std::invalid_argument("gather: empty index list");
  Batch batch;
  batch.features = Matrix(indices.size(), ds.feature_dim());
  batch.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto idx = static_cast<std::size_t>(indices[i]);
    if (idx >= ds.size()) {
      throw std::invalid_argument("gather: index " + std::to_string(indices[i]) +
                                  " out of range for dataset of " +
                                  std::to_string(ds.size()));
    }
    auto src = ds.features.row(idx);
    std::copy(src.begin(), src.end(), batch.features.row(i).begin());
    batch.labels[i] = ds.labels[idx];
  }
  return batch;
}

}  // namespace lace
