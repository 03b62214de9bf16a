#pragma once

#include <array>

namespace edpflow {

/// Physical parameters of the two-species system X1 <-> X2.
///
/// The untilted stationary weights are w = (beta, alpha) / (alpha + beta).
class SystemParams {
 public:
  SystemParams(std::array<double, 2> delta, double alpha, double beta, double epsilon);

  const std::array<double, 2>& delta() const { return delta_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double epsilon() const { return epsilon_; }
  const std::array<double, 2>& w() const { return w_; }

  SystemParams with_epsilon(double epsilon) const;

  /// Untilted mixed diffusion coefficient (beta delta1 + alpha delta2) / (alpha + beta).
  double mixed_delta() const;

 private:
  std::array<double, 2> delta_;
  double alpha_;
  double beta_;
  double epsilon_;
  std::array<double, 2> w_;
};

}  // namespace edpflow
