#include "mapnav/tensor/optim.hpp"

#include <cmath>

#include "mapnav/error.hpp"

namespace mapnav::tensor {

void Adam::step(Model& model, double lr) {
  for (const Parameter& p : model.params()) {
    for (double g : p.grad.data) {
      if (!std::isfinite(g)) throw Error(ErrorCode::NonFiniteGradient, "gradient of " + p.name);
    }
  }
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (Parameter& p : model.params()) {
    if (p.grad.size() != p.value.size()) continue;
    Moments& mo = moments_[p.name];
    if (!mo.m.same_shape(p.value)) {
      mo.m = Matrix(p.value.rows, p.value.cols);
      mo.v = Matrix(p.value.rows, p.value.cols);
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad.data[i];
      mo.m.data[i] = b1 * mo.m.data[i] + (1.0 - b1) * g;
      mo.v.data[i] = b2 * mo.v.data[i] + (1.0 - b2) * g * g;
      const double mhat = mo.m.data[i] / c1;
      const double vhat = mo.v.data[i] / c2;
      p.value.data[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::restore(std::int64_t steps, std::map<std::string, Moments> moments) {
  steps_ = steps;
  moments_ = std::move(moments);
}

double grad_norm(const Model& model) {
  double s = 0.0;
  for (const Parameter& p : model.params()) {
    for (double g : p.grad.data) s += g * g;
  }
  return std::sqrt(s);
}

double clip_grad_norm(Model& model, double max_norm) {
  const double norm = grad_norm(model);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (Parameter& p : model.params()) {
      for (double& g : p.grad.data) g *= f;
    }
  }
  return norm;
}

}  // namespace mapnav::tensor
