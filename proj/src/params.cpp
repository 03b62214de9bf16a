#include "edpflow/params.hpp"

#include <cmath>

#include "edpflow/errors.hpp"

namespace edpflow {

SystemParams::SystemParams(std::array<double, 2> delta, double alpha, double beta, double epsilon)
    : delta_(delta), alpha_(alpha), beta_(beta), epsilon_(epsilon) {
  for (double d : delta_)
    if (!(d > 0.0) || !std::isfinite(d)) throw DomainError("diffusion constants must be positive");
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
    throw DomainError("reaction rates must be positive");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw DomainError("epsilon must be positive");
  w_ = {beta / (alpha + beta), alpha / (alpha + beta)};
}

SystemParams SystemParams::with_epsilon(double epsilon) const {
  return SystemParams(delta_, alpha_, beta_, epsilon);
}

double SystemParams::mixed_delta() const {
  return (beta_ * delta_[0] + alpha_ * delta_[1]) / (alpha_ + beta_);
}

}  // namespace edpflow
