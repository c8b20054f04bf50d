#include "distillnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "distillnn/errors.hpp"

namespace distillnn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void dense_forward(const DenseLayer& layer, const Tensor& x, Tensor& y) {
  const std::size_t n = x.rows(), in = layer.in(), out = layer.out();
  y = Tensor({n, out});
  const double* w = layer.weight.data().data();
  const double* b = layer.bias.data().data();
  for (std::size_t r = 0; r < n; ++r) {
    double* yr = y.row(r).data();
    std::copy(b, b + out, yr);
    const double* xr = x.row(r).data();
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xr[i];
      if (xi == 0.0) continue;
      const double* wi = w + i * out;
      for (std::size_t j = 0; j < out; ++j) yr[j] += xi * wi[j];
    }
  }
}

}  // namespace

void softmax_inplace(std::span<double> row) {
  if (row.empty()) return;
  const double mx = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (double& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : row) v /= sum;
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor out = logits;
  for (std::size_t r = 0; r < out.rows(); ++r) softmax_inplace(out.row(r));
  return out;
}

MlpModel::MlpModel(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

MlpModel MlpModel::make(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t output_dim,
                        double dropout_rate, Rng& init) {
  std::vector<Layer> layers;
  std::size_t prev = input_dim;
  auto dense = [&](std::size_t in, std::size_t out, double gain) {
    DenseLayer d{Tensor({in, out}), Tensor({out})};
    const double scale = std::sqrt(gain / static_cast<double>(in));
    for (double& w : d.weight.data()) w = scale * init.normal();
    return d;
  };
  for (std::size_t h : hidden) {
    layers.emplace_back(dense(prev, h, 2.0));
    layers.emplace_back(ReluLayer{});
    if (dropout_rate > 0.0) layers.emplace_back(DropoutLayer{dropout_rate});
    prev = h;
  }
  // Small output weights keep initial log-variances near zero.
  layers.emplace_back(dense(prev, output_dim, 0.1));
  return MlpModel(std::move(layers));
}

void MlpModel::validate() const {
  std::size_t width = 0;
  for (const Layer& layer : layers_) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      if (d->weight.rank() != 2 || d->bias.rank() != 1 || d->bias.size() != d->out())
        throw DimensionError("dense layer weight must be (in,out) with bias (out)");
      if (width != 0 && d->in() != width)
        throw DimensionError("dense layer expects " + std::to_string(d->in()) + " inputs, previous width is " +
                             std::to_string(width));
      width = d->out();
    } else if (const auto* p = std::get_if<DropoutLayer>(&layer)) {
      if (!(p->rate >= 0.0 && p->rate < 1.0)) throw ContractError("dropout rate must lie in [0, 1)");
    }
  }
}

bool MlpModel::has_dropout() const {
  return std::any_of(layers_.begin(), layers_.end(),
                     [](const Layer& l) { return std::holds_alternative<DropoutLayer>(l); });
}

std::size_t MlpModel::input_dim() const {
  for (const Layer& layer : layers_)
    if (const auto* d = std::get_if<DenseLayer>(&layer)) return d->in();
  return 0;
}

std::size_t MlpModel::output_dim() const {
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    if (const auto* d = std::get_if<DenseLayer>(&*it)) return d->out();
  return 0;
}

Tensor MlpModel::forward(const Tensor& x, Rng* rng, Tape* tape) const {
  if (x.rank() != 2 || (input_dim() != 0 && x.cols() != input_dim()))
    throw DimensionError("forward: input shape " + x.shape_string() + " does not match input dim " +
                         std::to_string(input_dim()));
  x.require_finite("forward input");
  const bool sample_dropout = dropout_active();
  if (sample_dropout && rng == nullptr && has_dropout())
    throw ContractError("forward: dropout is active but no rng was supplied");

  if (tape) {
    tape->inputs_.clear();
    tape->masks_.clear();
  }
  Tensor h = x;
  for (const Layer& layer : layers_) {
    if (tape) {
      tape->inputs_.push_back(h);
      tape->masks_.emplace_back();
    }
    std::visit(overloaded{
                   [&](const DenseLayer& d) {
                     Tensor y;
                     dense_forward(d, h, y);
                     h = std::move(y);
                   },
                   [&](const ReluLayer&) {
                     for (double& v : h.data()) v = v > 0.0 ? v : 0.0;
                   },
                   [&](const DropoutLayer& p) {
                     if (!sample_dropout || p.rate == 0.0) return;
                     const double keep_scale = 1.0 / (1.0 - p.rate);
                     std::vector<double> mask(h.size());
                     for (std::size_t i = 0; i < mask.size(); ++i) {
                       mask[i] = rng->bernoulli(p.rate) ? 0.0 : keep_scale;
                       h[i] *= mask[i];
                     }
                     if (tape) tape->masks_.back() = std::move(mask);
                   },
                   [&](const SoftmaxLayer&) {
                     for (std::size_t r = 0; r < h.rows(); ++r) softmax_inplace(h.row(r));
                   },
               },
               layer);
  }
  if (tape) tape->output_ = h;
  return h;
}

void MlpModel::backward(const Tape& tape, const Loss& loss) {
  if (tape.inputs_.size() != layers_.size()) throw ContractError("backward: tape does not match model");
  if (!loss.output_grad.same_shape(tape.output_))
    throw DimensionError("backward: loss gradient shape " + loss.output_grad.shape_string() +
                         " does not match output " + tape.output_.shape_string());
  Tensor g = loss.output_grad;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Tensor& input = tape.inputs_[li];
    const std::vector<double>& mask = tape.masks_[li];
    std::visit(overloaded{
                   [&](DenseLayer& d) {
                     const std::size_t n = input.rows(), in = d.in(), out = d.out();
                     auto wg = d.weight.grad();
                     auto bg = d.bias.grad();
                     Tensor gx({n, in});
                     const double* w = d.weight.data().data();
                     for (std::size_t r = 0; r < n; ++r) {
                       const double* gr = g.row(r).data();
                       const double* xr = input.row(r).data();
                       for (std::size_t j = 0; j < out; ++j) bg[j] += gr[j];
                       for (std::size_t i = 0; i < in; ++i) {
                         const double* wi = w + i * out;
                         double* wgi = wg.data() + i * out;
                         double acc = 0.0;
                         const double xi = xr[i];
                         for (std::size_t j = 0; j < out; ++j) {
                           wgi[j] += xi * gr[j];
                           acc += wi[j] * gr[j];
                         }
                         gx(r, i) = acc;
                       }
                     }
                     g = std::move(gx);
                   },
                   [&](ReluLayer&) {
                     for (std::size_t i = 0; i < g.size(); ++i)
                       if (input[i] <= 0.0) g[i] = 0.0;
                   },
                   [&](DropoutLayer&) {
                     if (mask.empty()) return;
                     for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
                   },
                   [&](SoftmaxLayer&) {
                     Tensor y = softmax_rows(input);
                     for (std::size_t r = 0; r < g.rows(); ++r) {
                       auto yr = y.row(r);
                       auto gr = g.row(r);
                       double dot = 0.0;
                       for (std::size_t j = 0; j < yr.size(); ++j) dot += yr[j] * gr[j];
                       for (std::size_t j = 0; j < yr.size(); ++j) gr[j] = yr[j] * (gr[j] - dot);
                     }
                   },
               },
               layers_[li]);
  }
}

void MlpModel::zero_grad() {
  for (Tensor* p : parameters()) p->zero_grad();
}

std::vector<Tensor*> MlpModel::parameters() {
  std::vector<Tensor*> out;
  for (Layer& layer : layers_)
    if (auto* d = std::get_if<DenseLayer>(&layer)) {
      out.push_back(&d->weight);
      out.push_back(&d->bias);
    }
  return out;
}

std::vector<const Tensor*> MlpModel::parameters() const {
  std::vector<const Tensor*> out;
  for (const Layer& layer : layers_)
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      out.push_back(&d->weight);
      out.push_back(&d->bias);
    }
  return out;
}

std::vector<double> MlpModel::flat_parameters() const {
  std::vector<double> out;
  for (const Tensor* p : parameters()) out.insert(out.end(), p->data().begin(), p->data().end());
  return out;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* p : parameters()) n += p->size();
  return n;
}

MlpModel MlpModel::without_dropout() const {
  std::vector<Layer> kept;
  for (const Layer& layer : layers_)
    if (!std::holds_alternative<DropoutLayer>(layer)) kept.push_back(layer);
  MlpModel out(std::move(kept));
  out.mode_ = mode_;
  return out;
}

}  // namespace distillnn
