#include "fso/numerics.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <array>
#include <string>

namespace fso::numerics {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("normal_quantile: probability must lie in (0, 1), got " +
                      std::to_string(p));
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double inverse_q(double p) { return -normal_quantile(p); }

double gamma_p(double shape, double x) {
  return boost::math::gamma_p(shape, x);
}

double gamma_p_inv(double shape, double p) {
  return boost::math::gamma_p_inv(shape, p);
}

double gamma_q_inv(double shape, double q) {
  return boost::math::gamma_q_inv(shape, q);
}

namespace {

struct Simpson {
  const std::function<double(double)>& f;
  double abs_tol;
  int max_depth;

  double refine(double a, double b, double fa, double fm, double fb,
                double whole, double tol, int depth) const {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    if (depth >= max_depth) {
      throw IntegrationError("adaptive Simpson did not converge on [" +
                             std::to_string(a) + ", " + std::to_string(b) +
                             "]");
    }
    return refine(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           refine(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
  }
};

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol, int max_depth) {
  if (a == b) return 0.0;
  // A coarse composite pass sets the absolute scale the tolerance refers to.
  constexpr int kPanels = 16;
  const double h = (b - a) / kPanels;
  std::array<double, 2 * kPanels + 1> fx{};
  for (int i = 0; i <= 2 * kPanels; ++i) fx[i] = f(a + 0.5 * h * i);
  double coarse = 0.0;
  double coarse_abs = 0.0;
  for (int p = 0; p < kPanels; ++p) {
    const double s = h / 6.0 * (fx[2 * p] + 4.0 * fx[2 * p + 1] + fx[2 * p + 2]);
    coarse += s;
    coarse_abs += h / 6.0 *
                  (std::abs(fx[2 * p]) + 4.0 * std::abs(fx[2 * p + 1]) +
                   std::abs(fx[2 * p + 2]));
  }
  if (!std::isfinite(coarse)) {
    throw IntegrationError("integrand is not finite on the interval");
  }
  if (coarse_abs == 0.0) return 0.0;
  const double abs_tol = rel_tol * coarse_abs;
  Simpson s{f, abs_tol, max_depth};
  double total = 0.0;
  for (int p = 0; p < kPanels; ++p) {
    const double lo = a + h * p;
    const double whole =
        h / 6.0 * (fx[2 * p] + 4.0 * fx[2 * p + 1] + fx[2 * p + 2]);
    total += s.refine(lo, lo + h, fx[2 * p], fx[2 * p + 1], fx[2 * p + 2],
                      whole, abs_tol / kPanels, 0);
  }
  return total;
}

double gaussian_segment_mass(double lo, double hi, double center, double radius,
                             double rel_tol) {
  if (!(radius > 0.0)) throw DomainError("gaussian_segment_mass: radius <= 0");
  // Beyond 8 radii the profile is below e^-128 and contributes nothing.
  const double span = 8.0 * radius;
  const double a = std::max(lo, center - span);
  const double b = std::min(hi, center + span);
  if (!(a < b)) return 0.0;
  const double norm = std::sqrt(2.0 / kPi) / radius;
  const double inv_r2 = 1.0 / (radius * radius);
  auto profile = [&](double x) {
    const double d = x - center;
    return norm * std::exp(-2.0 * d * d * inv_r2);
  };
  return integrate(profile, a, b, rel_tol);
}

double bisect(const std::function<double(double)>& f, double lo, double hi,
              double rel_tol, int max_iter) {
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) {
    throw CalibrationError("bisect: root is not bracketed");
  }
  for (int i = 0; i < max_iter; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= rel_tol * std::abs(mid)) return mid;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  throw CalibrationError("bisect: no convergence");
}

}  // namespace fso::numerics
