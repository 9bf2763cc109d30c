#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include "fso/errors.hpp"

namespace fso::numerics {

inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDbPerNeper = 4.34294481903251827651;  // 10 log10(e)

/// Gaussian tail probability Q(x) = P(N(0,1) > x).
template <typename Scalar>
Scalar q_function(Scalar x) {
  using std::erfc;
  return Scalar(0.5) * erfc(x / Scalar(kSqrt2));
}

template <typename Scalar>
Scalar normal_cdf(Scalar x) {
  using std::erfc;
  return Scalar(0.5) * erfc(-x / Scalar(kSqrt2));
}

/// Inverse of the standard normal CDF, p in (0, 1).
double normal_quantile(double p);

/// Inverse of Q(x) = p for p in (0, 1).
double inverse_q(double p);

/// Regularized lower incomplete gamma P(a, x) and its inverses.
double gamma_p(double shape, double x);
double gamma_p_inv(double shape, double p);
double gamma_q_inv(double shape, double q);

/// Adaptive Simpson quadrature to a relative tolerance. Throws
/// IntegrationError when the recursion depth is exhausted before the local
/// error estimates meet the tolerance.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-6, int max_depth = 48);

/// Mass of a 1-D Gaussian profile exp(-2 (x - center)^2 / radius^2),
/// normalized to unit total mass, over [lo, hi]. Evaluated by quadrature.
double gaussian_segment_mass(double lo, double hi, double center, double radius,
                             double rel_tol = 1e-6);

/// Finds x in [lo, hi] with f(x) = 0 for a function that changes sign on the
/// bracket. Stops when the bracket is below rel_tol relative to its midpoint.
double bisect(const std::function<double(double)>& f, double lo, double hi,
              double rel_tol = 1e-4, int max_iter = 200);

}  // namespace fso::numerics
