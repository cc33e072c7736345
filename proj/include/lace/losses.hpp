#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lace/matrix.hpp"

namespace lace {

/// Floor applied to the true-class probability before any ln(q_c), so an
/// underflowed softmax output cannot produce -inf. Gradients at the floor use
/// the clamped logarithm.
inline constexpr double kProbFloor = 1e-12;

/// Discrete probability distribution over C >= 2 classes: entries in [0, 1],
/// summing to 1 within 1e-9. Construct through from(), which enforces both.
class ProbVector {
 public:
  static ProbVector from(std::vector<double> values) {
    if (values.size() < 2) {
      throw std::invalid_argument("ProbVector: need at least 2 classes, got " +
                                  std::to_string(values.size()));
    }
    double sum = 0.0;
    for (double v : values) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("ProbVector: entry " + std::to_string(v) +
                                    " outside [0, 1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("ProbVector: entries sum to " + std::to_string(sum) +
                                  ", expected 1");
    }
    return ProbVector(std::move(values));
  }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }

 private:
  explicit ProbVector(std::vector<double> values) : values_(std::move(values)) {}
  std::vector<double> values_;
};

/// Scalar loss in nats plus its gradient with respect to the logits.
/// The gradient always lies in the softmax-Jacobian range, so its entries
/// sum to zero.
struct LossOutput {
  double value = 0.0;
  std::vector<double> grad_logits;
};

enum class LossKind { kCrossEntropy, kAdaptive };

inline const char* loss_name(LossKind kind) {
  return kind == LossKind::kCrossEntropy ? "cross_entropy" : "adaptive";
}

inline LossKind loss_kind_from_name(const std::string& name) {
  if (name == "cross_entropy") return LossKind::kCrossEntropy;
  if (name == "adaptive") return LossKind::kAdaptive;
  throw std::invalid_argument("unknown loss '" + name +
                              "' (expected cross_entropy or adaptive)");
}

namespace detail {

inline void require_true_class(std::size_t num_classes, int true_class,
                               const char* op) {
  if (num_classes < 2) {
    throw std::invalid_argument(std::string(op) + ": need at least 2 classes, got " +
                                std::to_string(num_classes));
  }
  if (true_class < 0 || static_cast<std::size_t>(true_class) >= num_classes) {
    throw std::invalid_argument(std::string(op) + ": class " +
                                std::to_string(true_class) + " out of range [0, " +
                                std::to_string(num_classes) + ")");
  }
}

struct SoftmaxStats {
  std::vector<double> q;
  double max_logit = 0.0;
  double log_sum_exp = 0.0;  // ln sum_j exp(z_j - max)
};

inline SoftmaxStats softmax_stats(std::span<const double> logits, const char* op) {
  if (logits.size() < 2) {
    throw std::invalid_argument(std::string(op) + ": need at least 2 logits, got " +
                                std::to_string(logits.size()));
  }
  double m = logits[0];
  for (double z : logits) {
    if (!std::isfinite(z)) {
      throw std::invalid_argument(std::string(op) + ": non-finite logit");
    }
    m = std::max(m, z);
  }
  SoftmaxStats stats;
  stats.max_logit = m;
  stats.q.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    stats.q[i] = std::exp(logits[i] - m);
    sum += stats.q[i];
  }
  for (double& v : stats.q) v /= sum;
  stats.log_sum_exp = std::log(sum);
  return stats;
}

}  // namespace detail

/// Stable softmax: q_i = exp(z_i - max) / sum_j exp(z_j - max).
inline ProbVector softmax(std::span<const double> logits) {
  return ProbVector::from(detail::softmax_stats(logits, "softmax").q);
}

/// The two simplified Jeffreys terms for a one-hot label, as functions of the
/// true-class probability alone: the forward direction contributes -ln q and
/// the reverse direction q ln q (false-class terms dropped).
inline std::pair<double, double> jeffreys_one_hot_terms(double q_true) {
  const double log_q = std::log(std::max(q_true, kProbFloor));
  return {-log_q, q_true * log_q};
}

/// -ln q, the one-hot cross entropy as a function of the true-class
/// probability (clamped at kProbFloor).
inline double cross_entropy_value(double q_true) {
  return -std::log(std::max(q_true, kProbFloor));
}

/// -(1 - q) ln q, the linearly adaptive cross entropy as a function of the
/// true-class probability. Computed as the sum of the two Jeffreys one-hot
/// terms, which it equals identically.
inline double adaptive_value(double q_true) {
  const auto [forward_term, reverse_term] = jeffreys_one_hot_terms(q_true);
  return forward_term + reverse_term;
}

/// One-hot cross entropy, H = -ln q_c, evaluated in log-sum-exp form
/// (max + ln sum exp(z - max) - z_c) so extreme logits cannot overflow.
/// grad_logits[i] = q_i - delta_ic.
inline LossOutput cross_entropy(std::span<const double> logits, int true_class) {
  detail::require_true_class(logits.size(), true_class, "cross_entropy");
  const auto stats = detail::softmax_stats(logits, "cross_entropy");
  const std::size_t c = static_cast<std::size_t>(true_class);

  LossOutput out;
  out.value = std::min(stats.max_logit + stats.log_sum_exp - logits[c],
                       -std::log(kProbFloor));
  out.grad_logits = stats.q;
  out.grad_logits[c] -= 1.0;
  return out;
}

/// Linearly adaptive cross entropy, Adp = -(1 - q_c) ln q_c: cross entropy
/// scaled by the probability mass not yet assigned to the true class. Costs
/// one extra subtraction and one extra multiplication per sample over plain
/// cross entropy.
///
/// grad_logits[i] = (q_c ln q_c + q_c - 1) (delta_ic - q_i), i.e. the cross
/// entropy gradient scaled by k(q_c) = 1 - q_c - q_c ln q_c. The derivation
/// is validated against central finite differences in the test suite and by
/// the gradcheck harness.
inline LossOutput adaptive_cross_entropy(std::span<const double> logits,
                                         int true_class) {
  detail::require_true_class(logits.size(), true_class, "adaptive_cross_entropy");
  const auto stats = detail::softmax_stats(logits, "adaptive_cross_entropy");
  const std::size_t c = static_cast<std::size_t>(true_class);
  const double q_true = stats.q[c];
  const double log_q = std::log(std::max(q_true, kProbFloor));

  LossOutput out;
  out.value = adaptive_value(q_true);
  out.grad_logits.resize(logits.size());
  const double coeff = q_true * log_q + q_true - 1.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double indicator = (i == c) ? 1.0 : 0.0;
    out.grad_logits[i] = coeff * (indicator - stats.q[i]);
  }
  return out;
}

/// k(q) = 1 - q - q ln q, the per-sample scalar with
/// adaptive grad = k(q_c) * cross-entropy grad. k(1) = 0, k -> 1 as q -> 0+,
/// and the maximum 1 + e^-2 sits at q = e^-2.
inline double gradient_scale_factor(double q_true) {
  if (!(q_true > 0.0 && q_true <= 1.0)) {
    throw std::invalid_argument("gradient_scale_factor: q must be in (0, 1], got " +
                                std::to_string(q_true));
  }
  return 1.0 - q_true - q_true * std::log(q_true);
}

/// Kullback-Leibler divergence D(P,Q) = sum_i p_i ln(p_i / q_i), with the
/// usual convention 0 ln(0/q) = 0. Infinite divergence (p_i > 0, q_i = 0) is
/// an error.
inline double kl_divergence(const ProbVector& p, const ProbVector& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("kl_divergence: length mismatch " +
                                std::to_string(p.size()) + " vs " +
                                std::to_string(q.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] <= 0.0) {
      throw std::domain_error("kl_divergence: infinite divergence, p[" +
                              std::to_string(i) + "] > 0 but q[" +
                              std::to_string(i) + "] = 0");
    }
    acc += p[i] * std::log(p[i] / q[i]);
  }
  return acc;
}

/// Jeffreys divergence J(P,Q) = D(P,Q) + D(Q,P), the symmetric form.
/// Both directions must be finite, so every entry has to be positive.
inline double jeffreys_divergence(const ProbVector& p, const ProbVector& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("jeffreys_divergence: length mismatch " +
                                std::to_string(p.size()) + " vs " +
                                std::to_string(q.size()));
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0 || q[i] <= 0.0) {
      throw std::domain_error("jeffreys_divergence: zero entry at index " +
                              std::to_string(i) + "; both directions must be finite");
    }
  }
  return kl_divergence(p, q) + kl_divergence(q, p);
}

/// One-hot label with the zeros replaced by eps and the true class reduced to
/// 1 - (C-1) eps, so the vector still sums to one. Requires eps < 1/C, which
/// keeps the true class strictly the largest entry.
inline ProbVector smoothed_one_hot(int true_class, int num_classes, double eps) {
  if (num_classes < 2) {
    throw std::invalid_argument("smoothed_one_hot: need at least 2 classes, got " +
                                std::to_string(num_classes));
  }
  detail::require_true_class(static_cast<std::size_t>(num_classes), true_class,
                             "smoothed_one_hot");
  if (!(eps > 0.0) || !(eps * num_classes < 1.0)) {
    throw std::invalid_argument("smoothed_one_hot: eps must be in (0, 1/C), got eps=" +
                                std::to_string(eps) + " with C=" +
                                std::to_string(num_classes));
  }
  std::vector<double> p(static_cast<std::size_t>(num_classes), eps);
  p[static_cast<std::size_t>(true_class)] = 1.0 - (num_classes - 1) * eps;
  return ProbVector::from(std::move(p));
}

/// The simplified (D(P,Q), D(Q,P)) pair for a one-hot label:
/// (-ln q_c, q_c ln q_c). Their sum is exactly the adaptive loss value.
inline std::pair<double, double> jeffreys_one_hot_decomposition(const ProbVector& q,
                                                                int true_class) {
  detail::require_true_class(q.size(), true_class, "jeffreys_one_hot_decomposition");
  const double q_true = q[static_cast<std::size_t>(true_class)];
  if (!(q_true > 0.0)) {
    throw std::domain_error(
        "jeffreys_one_hot_decomposition: true-class probability is zero");
  }
  return jeffreys_one_hot_terms(q_true);
}

/// Per-batch loss: value is the mean over rows, grad_logits holds one
/// per-sample gradient row (unscaled; the network backward applies the 1/B
/// of the mean reduction).
struct BatchLoss {
  double mean_value = 0.0;
  Matrix grad_logits;
};

inline LossOutput evaluate_loss(LossKind kind, std::span<const double> logits,
                                int true_class) {
  return kind == LossKind::kCrossEntropy ? cross_entropy(logits, true_class)
                                         : adaptive_cross_entropy(logits, true_class);
}

inline BatchLoss batch_loss(LossKind kind, const Matrix& logits,
                            std::span<const int> labels) {
  if (logits.rows() == 0 || logits.rows() != labels.size()) {
    throw std::invalid_argument("batch_loss: logits rows " +
                                std::to_string(logits.rows()) + " vs labels " +
                                std::to_string(labels.size()));
  }
  BatchLoss out;
  out.grad_logits = Matrix(logits.rows(), logits.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    LossOutput sample = evaluate_loss(kind, logits.row(r), labels[r]);
    total += sample.value;
    std::copy(sample.grad_logits.begin(), sample.grad_logits.end(),
              out.grad_logits.row(r).begin());
  }
  out.mean_value = total / static_cast<double>(logits.rows());
  return out;
}

}  // namespace lace
