#pragma once

#include <functional>
#include <string>
#include <utility>

#include "gkrnn/tensor.hpp"

namespace gkrnn {

// -- activations --------------------------------------------------------

// Elementwise logistic function; argument clamped to [-500, 500] so the
// result is always finite and inside (0, 1).
double sigmoid_scalar(double x);
Tensor sigmoid(const Tensor& x);
Tensor tanh_t(const Tensor& x);

// -- task loss ----------------------------------------------------------

struct XentResult {
  double loss = 0.0;        // mean negative log-softmax over the batch
  Tensor grad_logits;       // (softmax - onehot) / batch
};

// logits [batch, C], labels[i] in [0, C).
XentResult softmax_cross_entropy(const Tensor& logits,
                                 const std::vector<int>& labels);

// -- optimizer ----------------------------------------------------------

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  explicit Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(0.0); }
};

struct AdamState {
  Tensor m;
  Tensor v;
  long step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(const std::vector<std::size_t>& shape, double lr_ = 1e-3)
      : m(shape), v(shape), lr(lr_) {}
};

// One bias-corrected Adam update of p.value from p.grad.
void adam_step(Parameter& p, AdamState& s);

// -- gradient oracle ----------------------------------------------------

using ScalarFn = std::function<double(const Tensor&)>;

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
// Throws if the loss evaluates non-finite, naming the coordinate.
Tensor finite_diff_grad(const ScalarFn& loss_fn, const Tensor& theta,
                        double h = 1e-5);

// Largest relative error between an analytic gradient and the oracle,
// with |denominator| floored at `floor_at`.
double max_rel_err(const Tensor& analytic, const Tensor& numeric,
                   double floor_at = 1e-6);

}  // namespace gkrnn
