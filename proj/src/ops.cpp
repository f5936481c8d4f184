#include "gkrnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gkrnn {

double sigmoid_scalar(double x) {
  x = std::clamp(x, -500.0, 500.0);
  return 1.0 / (1.0 + std::exp(-x));
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = sigmoid_scalar(x[i]);
  return out;
}

Tensor tanh_t(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = std::tanh(x[i]);
  return out;
}

XentResult softmax_cross_entropy(const Tensor& logits,
                                 const std::vector<int>& labels) {
  if (logits.rank() != 2)
    throw std::invalid_argument("softmax_cross_entropy: logits must be 2-D");
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  if (labels.size() != batch)
    throw std::invalid_argument("softmax_cross_entropy: batch/label mismatch");

  XentResult res;
  res.grad_logits = Tensor(logits.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw std::out_of_range("softmax_cross_entropy: label " +
                              std::to_string(y) + " out of range [0," +
                              std::to_string(classes) + ")");
    double mx = logits.at(b, 0);
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, logits.at(b, c));
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c)
      denom += std::exp(logits.at(b, c) - mx);
    const double log_denom = std::log(denom);
    res.loss += -(logits.at(b, y) - mx - log_denom);
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(logits.at(b, c) - mx) / denom;
      res.grad_logits.at(b, c) =
          (p - (static_cast<std::size_t>(y) == c ? 1.0 : 0.0)) /
          static_cast<double>(batch);
    }
  }
  res.loss /= static_cast<double>(batch);
  return res;
}

void adam_step(Parameter& p, AdamState& s) {
  if (!p.value.same_shape(s.m) || !p.value.same_shape(p.grad))
    throw std::invalid_argument("adam_step: shape mismatch for " + p.name);
  s.step_count += 1;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step_count));
  for (std::size_t i = 0; i < p.value.numel(); ++i) {
    const double g = p.grad[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double m_hat = s.m[i] / bc1;
    const double v_hat = s.v[i] / bc2;
    p.value[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

Tensor finite_diff_grad(const ScalarFn& loss_fn, const Tensor& theta, double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_grad: h must be > 0");
  Tensor grad(theta.shape());
  Tensor probe = theta;
  for (std::size_t i = 0; i < theta.numel(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = loss_fn(probe);
    probe[i] = orig - h;
    const double fm = loss_fn(probe);
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("finite_diff_grad: non-finite loss at coordinate " +
                               std::to_string(i));
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double max_rel_err(const Tensor& analytic, const Tensor& numeric, double floor_at) {
  if (!analytic.same_shape(numeric))
    throw std::invalid_argument("max_rel_err: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.numel(); ++i) {
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor_at});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace gkrnn
