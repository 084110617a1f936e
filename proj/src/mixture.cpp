#include "pimdn/mixture.hpp"

#include <limits>

#include "pimdn/errors.hpp"

namespace pimdn {

void validate(const MixtureParams& mp) {
  if (mp.pi.size() == 0 || mp.mu.size() != mp.pi.size() || mp.sigma.size() != mp.pi.size()) {
    throw InvalidInput("mixture parameter vectors must be nonempty and of equal length");
  }
  if ((mp.pi.array() < 0.0).any() || std::abs(mp.pi.sum() - 1.0) > 1e-9) {
    throw InvalidInput("mixture weights are not on the simplex");
  }
  if (!(mp.sigma.array() > 0.0).all()) throw InvalidInput("component sigma must be positive");
}

namespace {

std::vector<GaussianTerm<double>> terms_of(const MixtureParams& mp) {
  std::vector<GaussianTerm<double>> terms(static_cast<std::size_t>(mp.components()));
  for (Eigen::Index k = 0; k < mp.components(); ++k) {
    const double log_w = mp.pi[k] > 0.0 ? std::log(mp.pi[k])
                                        : -std::numeric_limits<double>::infinity();
    terms[static_cast<std::size_t>(k)] = gaussian_term(log_w, mp.mu[k], std::log(mp.sigma[k]));
  }
  return terms;
}

}  // namespace

double log_pdf(const MixtureParams& mp, double u) {
  const auto terms = terms_of(mp);
  return mixture_log_density(std::span<const GaussianTerm<double>>(terms), u);
}

double pdf(const MixtureParams& mp, double u) { return std::exp(log_pdf(mp, u)); }

double mass_in_interval(const MixtureParams& mp, double a, double b) {
  if (b < a) return 0.0;
  double mass = 0.0;
  for (Eigen::Index k = 0; k < mp.components(); ++k) {
    const double scale = mp.sigma[k] * std::numbers::sqrt2;
    mass += mp.pi[k] * 0.5 *
            (std::erf((b - mp.mu[k]) / scale) - std::erf((a - mp.mu[k]) / scale));
  }
  return mass;
}

double mean(const MixtureParams& mp) { return mp.pi.dot(mp.mu); }

double second_moment(const MixtureParams& mp) {
  return mp.pi.dot((mp.sigma.array().square() + mp.mu.array().square()).matrix());
}

double sample(const MixtureParams& mp, Rng& rng) {
  const double u = rng.uniform();
  Eigen::Index chosen = -1;
  double cumulative = 0.0;
  for (Eigen::Index k = 0; k < mp.components(); ++k) {
    cumulative += mp.pi[k];
    if (u < cumulative) {
      chosen = k;
      break;
    }
  }
  if (chosen < 0) {
    // Round-off left u above the last partial sum: take the last weighted component.
    for (Eigen::Index k = mp.components() - 1; k >= 0; --k) {
      if (mp.pi[k] > 0.0) {
        chosen = k;
        break;
      }
    }
  }
  return mp.mu[chosen] + mp.sigma[chosen] * rng.normal();
}

}  // namespace pimdn
