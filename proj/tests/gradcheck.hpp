#pragma once

#include <algorithm>
#include <cmath>

#include "oracles.hpp"

namespace oracle {

using symnet::GradientD;
using symnet::LossKind;

struct GradCheck {
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double worst = 0.0;
};

// Central differences of the double-precision oracle loss against
// backprop_double on every weight and bias.
GradCheck check_gradient(const Network& net, const MatrixD& x, const std::vector<int>& y, LossKind kind,
                         double h = 1e-3) {
  GradientD g = backprop_double(net, x, y, kind);
  Params base = params_of(net);
  std::vector<char> ref_kinks;
  naive_forward(net, base, x, &ref_kinks);
  GradCheck out;
  auto probe = [&](double& slot, double analytic) {
    const double keep = slot;
    std::vector<char> kp, km;
    slot = keep + h;
    const double lp = naive_loss(naive_forward(net, base, x, &kp), y, kind);
    slot = keep - h;
    const double lm = naive_loss(naive_forward(net, base, x, &km), y, kind);
    slot = keep;
    if (kp != ref_kinks || km != ref_kinks) {
      ++out.skipped;  // a relu switched inside the stencil
      return;
    }
    const double fd = (lp - lm) / (2 * h);
    const double err = std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-4});
    out.worst = std::max(out.worst, err);
    ++out.checked;
  };
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    for (std::size_t k = 0; k < base.w[l].size(); ++k) probe(base.w[l][k], g.weights[l].data()[k]);
    for (std::size_t k = 0; k < base.b[l].size(); ++k) probe(base.b[l][k], g.bias[l][static_cast<Eigen::Index>(k)]);
  }
  return out;
}

}  // namespace oracle
