#include "faith/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "faith/rng.hpp"

namespace faith {

namespace {

double rel_err(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
  return std::fabs(analytic - numeric) / denom;
}

}  // namespace

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                         const Tensor& point, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("finite_diff_check: epsilon must be positive");
  std::vector<double> base(point.values());
  Tensor x = Tensor::param(point.shape(), base);
  Tensor loss = f(x);
  GradSink sink;
  backward_into(loss, sink);
  const std::vector<double>* g = sink.find(x);

  double worst = 0.0;
  for (size_t i = 0; i < base.size(); ++i) {
    std::vector<double> plus = base, minus = base;
    plus[i] += eps;
    minus[i] -= eps;
    const double fp = f(Tensor::from(point.shape(), plus)).item();
    const double fm = f(Tensor::from(point.shape(), minus)).item();
    const double numeric = (fp - fm) / (2.0 * eps);
    const double analytic = g ? (*g)[i] : 0.0;
    worst = std::max(worst, rel_err(analytic, numeric));
  }
  return worst;
}

double finite_diff_check_params(const std::function<Tensor()>& loss_fn,
                                std::span<Tensor> params, double eps,
                                int sample_coords, std::mt19937_64& rng) {
  if (eps <= 0.0) throw std::invalid_argument("finite_diff_check: epsilon must be positive");

  for (auto& p : params) p.zero_grad();
  Tensor loss = loss_fn();
  backward(loss);

  // Enumerate (tensor, coordinate) pairs, then sample without replacement.
  std::vector<std::pair<int, int64_t>> coords;
  for (size_t t = 0; t < params.size(); ++t)
    for (int64_t i = 0; i < params[t].size(); ++i) coords.emplace_back(static_cast<int>(t), i);
  if (sample_coords > 0 && sample_coords < static_cast<int>(coords.size())) {
    for (int i = 0; i < sample_coords; ++i) {
      int j = uniform_int(rng, i, static_cast<int>(coords.size()) - 1);
      std::swap(coords[i], coords[j]);
    }
    coords.resize(sample_coords);
  }

  double worst = 0.0;
  for (const auto& [t, i] : coords) {
    Tensor& p = params[t];
    const double analytic = p.has_grad() ? p.grad()[i] : 0.0;
    double& slot = p.leaf_data()[i];
    const double saved = slot;
    slot = saved + eps;
    const double fp = loss_fn().item();
    slot = saved - eps;
    const double fm = loss_fn().item();
    slot = saved;
    const double numeric = (fp - fm) / (2.0 * eps);
    worst = std::max(worst, rel_err(analytic, numeric));
  }
  for (auto& p : params) p.zero_grad();
  return worst;
}

}  // namespace faith
