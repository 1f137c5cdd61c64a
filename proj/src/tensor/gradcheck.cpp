#include "mapnav/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mapnav/error.hpp"

namespace mapnav::tensor {

namespace {

double eval_loss(const LossFn& loss_fn) {
  Graph g;
  return loss_fn(g).item();
}

}  // namespace

GradCheckReport finite_diff_check(std::span<Model* const> models, const LossFn& loss_fn,
                                  const GradCheckOptions& options) {
  if (models.empty()) throw Error(ErrorCode::InvalidConfig, "gradient check without a model");
  for (Model* m : models) m->zero_grad();
  {
    Graph g;
    Var loss = loss_fn(g);
    g.backward(loss);
  }

  GradCheckReport report;
  report.max_rel_err_per_model.assign(models.size(), 0.0);
  std::mt19937_64 rng(options.seed);
  for (int k = 0; k < options.n_probes; ++k) {
    const int mi = k % static_cast<int>(models.size());
    Model& model = *models[static_cast<std::size_t>(mi)];
    const std::size_t total = model.parameter_count();
    std::size_t flat = rng() % total;
    Parameter* target = nullptr;
    for (Parameter& p : model.params()) {
      if (flat < p.value.size()) {
        target = &p;
        break;
      }
      flat -= p.value.size();
    }
    double& x = target->value.data[flat];
    const double saved = x;
    x = saved + options.step;
    const double up = eval_loss(loss_fn);
    x = saved - options.step;
    const double down = eval_loss(loss_fn);
    x = saved;

    GradProbe probe;
    probe.model = mi;
    probe.param = target->name;
    probe.index = flat;
    probe.analytic = target->grad.data[flat];
    probe.numeric = (up - down) / (2.0 * options.step);
    const double denom =
        std::max({std::abs(probe.analytic), std::abs(probe.numeric), options.floor});
    probe.rel_err = std::abs(probe.analytic - probe.numeric) / denom;
    report.max_rel_err = std::max(report.max_rel_err, probe.rel_err);
    auto& per = report.max_rel_err_per_model[static_cast<std::size_t>(mi)];
    per = std::max(per, probe.rel_err);
    report.probes.push_back(std::move(probe));
  }
  report.pass = report.max_rel_err < options.tol;
  return report;
}

GradCheckReport finite_diff_check(Model& model, const LossFn& loss_fn,
                                  const GradCheckOptions& options) {
  Model* ms[] = {&model};
  return finite_diff_check(std::span<Model* const>(ms), loss_fn, options);
}

}  // namespace mapnav::tensor
