#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace oracle {

double cosh_primal_by_sup(double s) {
  auto g = [s](double x) { return s * x - 4.0 * (std::cosh(0.5 * x) - 1.0); };
  // The maximizer 2 asinh(s/2) lies in [-2 log(|s|+2) - 2, 2 log(|s|+2) + 2].
  const double r = 2.0 * std::log(std::abs(s) + 2.0) + 2.0;
  double lo = -r, hi = r;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = g(x1), f2 = g(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + std::abs(lo)); ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = g(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = g(x1);
    }
  }
  return std::max(f1, f2);
}

double cosh_primal_closed(double s) {
  return 2.0 * s * std::asinh(0.5 * s) - 4.0 * std::sqrt(1.0 + 0.25 * s * s) + 4.0;
}

std::vector<double> tridiagonal_solve(std::vector<double> sub, std::vector<double> diag, std::vector<double> super,
                                      std::vector<double> rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = sub[i] / diag[i - 1];
    diag[i] -= m * super[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  std::vector<double> x(n);
  x[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - super[i] * x[i + 1]) / diag[i];
  return x;
}

std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                                double step, int max_iterations, double tolerance) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> p(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) p[i + 1][i] += step;
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = f(p[i]);
  std::vector<std::size_t> order(n + 1);
  for (int it = 0; it < max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
    double size = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t d = 0; d < n; ++d) size = std::max(size, std::abs(p[i][d] - p[best][d]));
    if (size < tolerance) break;
    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i)
      if (i != worst)
        for (std::size_t d = 0; d < n; ++d) centroid[d] += p[i][d] / static_cast<double>(n);
    auto along = [&](double t) {
      std::vector<double> x(n);
      for (std::size_t d = 0; d < n; ++d) x[d] = centroid[d] + t * (p[worst][d] - centroid[d]);
      return x;
    };
    const auto xr = along(-1.0);
    const double fr = f(xr);
    if (fr < fv[best]) {
      const auto xe = along(-2.0);
      const double fe = f(xe);
      if (fe < fr) {
        p[worst] = xe;
        fv[worst] = fe;
      } else {
        p[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      p[worst] = xr;
      fv[worst] = fr;
    } else {
      const auto xc = along(fr < fv[worst] ? -0.5 : 0.5);
      const double fc = f(xc);
      if (fc < std::min(fr, fv[worst])) {
        p[worst] = xc;
        fv[worst] = fc;
      } else {
        for (std::size_t i = 0; i <= n; ++i) {
          if (i == best) continue;
          for (std::size_t d = 0; d < n; ++d) p[i][d] = p[best][d] + 0.5 * (p[i][d] - p[best][d]);
          fv[i] = f(p[i]);
        }
      }
    }
  }
  const auto it = std::min_element(fv.begin(), fv.end());
  return p[static_cast<std::size_t>(it - fv.begin())];
}

PrimalMinimum brute_force_primal_3cell(const edpflow::State& c, const edpflow::SystemParams& params,
                                       const edpflow::SpeciesField& v) {
  constexpr std::size_t n = 3;
  const double h = 1.0 / 3.0;
  const double d1 = params.delta()[0], d2 = params.delta()[1], eps = params.epsilon();
  const double total_v1 = v(0, 0) + v(0, 1) + v(0, 2);

  auto objective = [&](const std::vector<double>& u) {
    const double b1[n] = {u[0], u[1], total_v1 - u[0] - u[1]};
    double J1 = 0.0, J2 = 0.0, value = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      J1 += h * (b1[k] - v(0, k));
      J2 += h * (-b1[k] - v(1, k));
      const double m1 = d1 * 0.5 * (c(0, k) + c(0, k + 1));
      const double m2 = d2 * 0.5 * (c(1, k) + c(1, k + 1));
      value += h * (0.5 * J1 * J1 / m1 + 0.5 * J2 * J2 / m2);
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double a = std::sqrt(c(0, k) * c(1, k)) / eps;
      value += h * a * cosh_primal_closed(b1[k] / a);
    }
    return value;
  };

  std::vector<double> x{total_v1 / 3.0, total_v1 / 3.0};
  double step = 1.0;
  for (int round = 0; round < 12; ++round) {
    x = nelder_mead(objective, x, step, 20000, 1e-13);
    step = std::max(1e-6, 0.1 * step);
  }
  return {objective(x), {x[0], x[1], total_v1 - x[0] - x[1]}};
}

Eigen::VectorXd null_vector_lu(const Eigen::MatrixXd& A) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  lu.setThreshold(1e-12);
  Eigen::MatrixXd k = lu.kernel();
  Eigen::VectorXd w = k.col(0);
  return w / w.sum();
}

}  // namespace oracle
