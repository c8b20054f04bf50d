#pragma once

#include <span>

#include "distillnn/model.hpp"
#include "distillnn/rng.hpp"
#include "distillnn/tensor.hpp"

namespace distillnn {

/// Loss over a two-headed output [mu, logvar] with gradients for each head.
struct HeadLoss {
  double value = 0.0;
  Tensor grad_mu;
  Tensor grad_logvar;
};

/// Packs head gradients into a gradient for the full (N, 2D) network output.
Loss to_output_loss(const HeadLoss& loss);

// Ground-truth losses. All average over every element (or every row for the
// cross-entropies) so gradients are scale-independent of the batch size.

Loss mean_absolute_error(const Tensor& pred, const Tensor& target);
Loss mean_squared_error(const Tensor& pred, const Tensor& target);
Loss softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);
/// Cross-entropy against soft target probabilities (rows summing to 1).
Loss soft_cross_entropy(const Tensor& logits, const Tensor& target_probs);

/// Per element sqrt(2) * exp(-s/2) * |y - mu| + s/2, averaged.
HeadLoss heteroscedastic_laplace_nll(const Tensor& mu, const Tensor& logvar, const Tensor& target);

/// Cross-entropy averaged over noisy logits z = mu + exp(s/2) * eps.
/// `noise` has shape (draws, N, K) and supplies eps.
HeadLoss logit_noise_cross_entropy(const Tensor& mu, const Tensor& logvar, std::span<const int> labels,
                                   const Tensor& noise);
HeadLoss logit_noise_cross_entropy(const Tensor& mu, const Tensor& logvar, std::span<const int> labels,
                                   std::size_t draws, Rng& rng);

/// Laplace distillation objective. `targets` has shape (N, M, D): M teacher
/// samples per input. Averages sqrt(2) * exp(-s/2) * |y_t - mu| + s/2 over
/// dims and samples, then over inputs.
HeadLoss laplace_distillation_loss(const Tensor& mu, const Tensor& logvar, const Tensor& targets);

/// Logit-space Gaussian distillation objective: averages
/// exp(-s)/2 * (y_t - mu)^2 + s/2 over logit dims, samples and inputs.
HeadLoss gaussian_logit_distillation_loss(const Tensor& mu, const Tensor& logvar, const Tensor& targets);

/// student_term + lambda * teacher_term.
double total_loss(double student_term, double lambda, double teacher_term);
/// Same combination applied to values and gradients; `teacher_on_mu` is a loss on the mean head.
HeadLoss total_loss(const HeadLoss& student_term, double lambda, const Loss& teacher_on_mu);

}  // namespace distillnn
