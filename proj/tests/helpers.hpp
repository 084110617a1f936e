#pragma once

#include <cmath>
#include <vector>

#include "pimdn/mdn.hpp"
#include "pimdn/mlp.hpp"

namespace testing {

inline double& weight(pimdn::MlpLayout layout, Eigen::VectorXd& params, int layer, int row,
                      int col) {
  const auto off = static_cast<Eigen::Index>(pimdn::layer_offset(layout, layer));
  return params[off + row * layout.fan_in(layer) + col];
}

inline double& bias(pimdn::MlpLayout layout, Eigen::VectorXd& params, int layer, int row) {
  const auto off = static_cast<Eigen::Index>(pimdn::layer_offset(layout, layer));
  return params[off + layout.fan_out(layer) * layout.fan_in(layer) + row];
}

inline pimdn::MdnModel zero_mdn(int components, int width = 4) {
  pimdn::Architecture arch;
  arch.hidden_width = width;
  arch.components = components;
  pimdn::MdnModel m = pimdn::init_params(arch, 0);
  m.params.setZero();
  return m;
}

/// Every component mean equals slope * x + offset for x > -10 (identity
/// through the ELUs on their linear branch); logits and log-scales are 0.
inline pimdn::MdnModel linear_mdn(int components, double slope, double offset = 0.0) {
  pimdn::MdnModel m = zero_mdn(components, 2);
  const pimdn::MlpLayout l = m.arch.layout();
  weight(l, m.params, 0, 0, 0) = 1.0;
  bias(l, m.params, 0, 0) = 10.0;
  weight(l, m.params, 1, 0, 0) = 1.0;
  for (int k = 0; k < components; ++k) {
    weight(l, m.params, 2, components + k, 0) = slope;
    bias(l, m.params, 2, components + k) = offset - 10.0 * slope;
  }
  return m;
}

/// Component means 2 cosh(eps x) / eps^2 minus a constant, so the second
/// derivative is 2 cosh(eps x), within 3e-7 of 2 for |x| <= 0.5.
inline pimdn::MdnModel quadratic_mdn(double eps = 1e-3) {
  pimdn::MdnModel m = zero_mdn(1, 2);
  const pimdn::MlpLayout l = m.arch.layout();
  weight(l, m.params, 0, 0, 0) = eps;
  bias(l, m.params, 0, 0) = -1.0;
  weight(l, m.params, 0, 1, 0) = -eps;
  bias(l, m.params, 0, 1) = -1.0;
  weight(l, m.params, 1, 0, 0) = 1.0;
  weight(l, m.params, 1, 0, 1) = 1.0;
  bias(l, m.params, 1, 0) = 10.0;
  const double a = std::exp(1.0) / (eps * eps);
  weight(l, m.params, 2, 1, 0) = a;
  bias(l, m.params, 2, 1) = -10.0 * a;
  return m;
}

}  // namespace testing
