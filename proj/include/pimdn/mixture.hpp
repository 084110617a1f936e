#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "pimdn/autodiff.hpp"
#include "pimdn/random.hpp"

namespace pimdn {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

/// Scalar-target Gaussian mixture at one context, in target units.
struct MixtureParams {
  Eigen::VectorXd pi;     // simplex
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;  // > 0

  Eigen::Index components() const { return pi.size(); }
};

/// Throws InvalidInput unless sizes agree, pi is on the simplex (1e-9) and sigma > 0.
void validate(const MixtureParams& mp);

/// One Gaussian component prepared for repeated log-density evaluation:
/// log(weight * N(u; mean, sigma)) = offset - ((u - mean) * inv_sigma)^2 / 2.
template <typename Scalar>
struct GaussianTerm {
  Scalar offset;  // log weight - log sigma - log(2 pi) / 2
  Scalar mean;
  Scalar inv_sigma;
};

template <typename Scalar>
GaussianTerm<Scalar> gaussian_term(const Scalar& log_weight, const Scalar& mean,
                                   const Scalar& log_sigma) {
  using std::exp;
  return {log_weight - log_sigma - kHalfLog2Pi, mean, exp(-log_sigma)};
}

template <typename Scalar>
Scalar component_log_density(const GaussianTerm<Scalar>& term, double u) {
  if constexpr (std::is_same_v<Scalar, ad::Var>) {
    const ad::Var triple[3] = {term.offset, term.mean, term.inv_sigma};
    return ad::gaussian_mix(triple, u);
  } else {
    const double z = (u - term.mean) * term.inv_sigma;
    return term.offset - 0.5 * (z * z);
  }
}

/// log sum_m weight_m N(u; mean_m, sigma_m), max-shifted.
///
/// Shared by density evaluation (Scalar = double) and the likelihood losses
/// (Scalar = ad::Var, one fused tape node per evaluation).
template <typename Scalar>
Scalar mixture_log_density(std::span<const GaussianTerm<Scalar>> terms, double u) {
  constexpr std::size_t kInline = 16;
  Scalar inline_buf[3 * kInline];
  std::vector<Scalar> heap;
  Scalar* flat = inline_buf;
  if (terms.size() > kInline) {
    heap.resize(3 * terms.size());
    flat = heap.data();
  }
  for (std::size_t k = 0; k < terms.size(); ++k) {
    flat[3 * k] = terms[k].offset;
    flat[3 * k + 1] = terms[k].mean;
    flat[3 * k + 2] = terms[k].inv_sigma;
  }
  return ad::gaussian_mix(std::span<const Scalar>(flat, 3 * terms.size()), u);
}

double log_pdf(const MixtureParams& mp, double u);
double pdf(const MixtureParams& mp, double u);
/// P(a <= U <= b).
double mass_in_interval(const MixtureParams& mp, double a, double b);

double mean(const MixtureParams& mp);
double second_moment(const MixtureParams& mp);

/// Component by inverse CDF on one uniform, then mu + sigma * z with z from
/// Rng::normal() (Box-Muller).
double sample(const MixtureParams& mp, Rng& rng);

}  // namespace pimdn
