#include "distillnn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "distillnn/errors.hpp"

namespace distillnn {

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(what) + ": shape " + a.shape_string() + " vs " + b.shape_string());
}

void require_labels(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || labels.size() != logits.rows())
    throw DimensionError("label count does not match logits rows");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols()) throw ContractError("label out of range");
}

// (N, M, D) targets checked against (N, D) heads.
void require_targets(const Tensor& mu, const Tensor& logvar, const Tensor& targets) {
  require_same(mu, logvar, "distillation heads");
  if (targets.empty() || targets.rank() != 3) throw ContractError("distillation targets must be a nonempty (N, M, D) tensor");
  if (targets.shape()[0] != mu.rows() || targets.shape()[2] != mu.cols())
    throw DimensionError("distillation targets " + targets.shape_string() + " do not match heads " +
                         mu.shape_string());
  if (targets.shape()[1] == 0) throw ContractError("distillation targets hold no samples");
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

Loss to_output_loss(const HeadLoss& loss) { return Loss{loss.value, concat_cols(loss.grad_mu, loss.grad_logvar)}; }

Loss mean_absolute_error(const Tensor& pred, const Tensor& target) {
  require_same(pred, target, "mean_absolute_error");
  if (pred.empty()) throw ContractError("mean_absolute_error: empty input");
  const double inv = 1.0 / static_cast<double>(pred.size());
  Loss out{0.0, Tensor(pred.shape())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - target[i];
    out.value += std::abs(r) * inv;
    out.output_grad[i] = sign(r) * inv;
  }
  return out;
}

Loss mean_squared_error(const Tensor& pred, const Tensor& target) {
  require_same(pred, target, "mean_squared_error");
  if (pred.empty()) throw ContractError("mean_squared_error: empty input");
  const double inv = 1.0 / static_cast<double>(pred.size());
  Loss out{0.0, Tensor(pred.shape())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - target[i];
    out.value += r * r * inv;
    out.output_grad[i] = 2.0 * r * inv;
  }
  return out;
}

Loss softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_labels(logits, labels);
  if (logits.rows() == 0) throw ContractError("softmax_cross_entropy: empty batch");
  const double inv = 1.0 / static_cast<double>(logits.rows());
  Loss out{0.0, softmax_rows(logits)};
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto p = out.output_grad.row(r);
    const auto y = static_cast<std::size_t>(labels[r]);
    out.value -= std::log(std::max(p[y], 1e-300)) * inv;
    p[y] -= 1.0;
    for (double& v : p) v *= inv;
  }
  return out;
}

Loss soft_cross_entropy(const Tensor& logits, const Tensor& target_probs) {
  require_same(logits, target_probs, "soft_cross_entropy");
  if (logits.rows() == 0) throw ContractError("soft_cross_entropy: empty batch");
  const double inv = 1.0 / static_cast<double>(logits.rows());
  Loss out{0.0, softmax_rows(logits)};
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto p = out.output_grad.row(r);
    auto q = target_probs.row(r);
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (q[j] > 0.0) out.value -= q[j] * std::log(std::max(p[j], 1e-300)) * inv;
      p[j] = (p[j] - q[j]) * inv;
    }
  }
  return out;
}

HeadLoss heteroscedastic_laplace_nll(const Tensor& mu, const Tensor& logvar, const Tensor& target) {
  require_same(mu, logvar, "heteroscedastic_laplace_nll heads");
  require_same(mu, target, "heteroscedastic_laplace_nll target");
  if (mu.empty()) throw ContractError("heteroscedastic_laplace_nll: empty input");
  const double inv = 1.0 / static_cast<double>(mu.size());
  HeadLoss out{0.0, Tensor(mu.shape()), Tensor(mu.shape())};
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double r = target[i] - mu[i];
    const double scale = std::numbers::sqrt2 * std::exp(-0.5 * logvar[i]);
    out.value += (scale * std::abs(r) + 0.5 * logvar[i]) * inv;
    out.grad_mu[i] = -scale * sign(r) * inv;
    out.grad_logvar[i] = (-0.5 * scale * std::abs(r) + 0.5) * inv;
  }
  return out;
}

HeadLoss logit_noise_cross_entropy(const Tensor& mu, const Tensor& logvar, std::span<const int> labels,
                                   const Tensor& noise) {
  require_same(mu, logvar, "logit_noise_cross_entropy heads");
  require_labels(mu, labels);
  const std::size_t n = mu.rows(), k = mu.cols();
  if (noise.rank() != 3 || noise.shape()[1] != n || noise.shape()[2] != k || noise.shape()[0] == 0)
    throw DimensionError("logit noise must have shape (draws, N, K)");
  const std::size_t draws = noise.shape()[0];
  const double inv = 1.0 / static_cast<double>(n * draws);
  HeadLoss out{0.0, Tensor(mu.shape()), Tensor(mu.shape())};
  std::vector<double> z(k);
  for (std::size_t d = 0; d < draws; ++d) {
    for (std::size_t r = 0; r < n; ++r) {
      const double* eps = noise.data().data() + (d * n + r) * k;
      for (std::size_t j = 0; j < k; ++j) z[j] = mu(r, j) + std::exp(0.5 * logvar(r, j)) * eps[j];
      softmax_inplace(z);
      const auto y = static_cast<std::size_t>(labels[r]);
      out.value -= std::log(std::max(z[y], 1e-300)) * inv;
      for (std::size_t j = 0; j < k; ++j) {
        const double g = (z[j] - (j == y ? 1.0 : 0.0)) * inv;
        out.grad_mu(r, j) += g;
        out.grad_logvar(r, j) += g * eps[j] * 0.5 * std::exp(0.5 * logvar(r, j));
      }
    }
  }
  return out;
}

HeadLoss logit_noise_cross_entropy(const Tensor& mu, const Tensor& logvar, std::span<const int> labels,
                                   std::size_t draws, Rng& rng) {
  Tensor noise({draws, mu.rows(), mu.cols()});
  for (double& e : noise.data()) e = rng.normal();
  return logit_noise_cross_entropy(mu, logvar, labels, noise);
}

HeadLoss laplace_distillation_loss(const Tensor& mu, const Tensor& logvar, const Tensor& targets) {
  require_targets(mu, logvar, targets);
  const std::size_t n = mu.rows(), m = targets.shape()[1], d = mu.cols();
  const double inv = 1.0 / static_cast<double>(n * m * d);
  HeadLoss out{0.0, Tensor(mu.shape()), Tensor(mu.shape())};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      const double s = logvar(r, j);
      const double scale = std::numbers::sqrt2 * std::exp(-0.5 * s);
      double abs_sum = 0.0, sign_sum = 0.0;
      for (std::size_t t = 0; t < m; ++t) {
        const double res = targets[(r * m + t) * d + j] - mu(r, j);
        abs_sum += std::abs(res);
        sign_sum += sign(res);
      }
      out.value += (scale * abs_sum + 0.5 * s * static_cast<double>(m)) * inv;
      out.grad_mu(r, j) = -scale * sign_sum * inv;
      out.grad_logvar(r, j) = (-0.5 * scale * abs_sum + 0.5 * static_cast<double>(m)) * inv;
    }
  }
  return out;
}

HeadLoss gaussian_logit_distillation_loss(const Tensor& mu, const Tensor& logvar, const Tensor& targets) {
  require_targets(mu, logvar, targets);
  const std::size_t n = mu.rows(), m = targets.shape()[1], d = mu.cols();
  const double inv = 1.0 / static_cast<double>(n * m * d);
  HeadLoss out{0.0, Tensor(mu.shape()), Tensor(mu.shape())};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      const double s = logvar(r, j);
      const double prec = std::exp(-s);
      double sq_sum = 0.0, res_sum = 0.0;
      for (std::size_t t = 0; t < m; ++t) {
        const double res = targets[(r * m + t) * d + j] - mu(r, j);
        sq_sum += res * res;
        res_sum += res;
      }
      out.value += (0.5 * prec * sq_sum + 0.5 * s * static_cast<double>(m)) * inv;
      out.grad_mu(r, j) = -prec * res_sum * inv;
      out.grad_logvar(r, j) = (-0.5 * prec * sq_sum + 0.5 * static_cast<double>(m)) * inv;
    }
  }
  return out;
}

double total_loss(double student_term, double lambda, double teacher_term) {
  if (lambda < 0.0) throw ContractError("lambda must be non-negative");
  return student_term + lambda * teacher_term;
}

HeadLoss total_loss(const HeadLoss& student_term, double lambda, const Loss& teacher_on_mu) {
  require_same(student_term.grad_mu, teacher_on_mu.output_grad, "total_loss");
  HeadLoss out = student_term;
  out.value = total_loss(student_term.value, lambda, teacher_on_mu.value);
  for (std::size_t i = 0; i < out.grad_mu.size(); ++i) out.grad_mu[i] += lambda * teacher_on_mu.output_grad[i];
  return out;
}

}  // namespace distillnn
