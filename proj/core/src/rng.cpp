#include "odsage/rng.hpp"

#include <cmath>

namespace odsage {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double Rng::exponential(double mean) {
  double u = uniform();
  while (u <= 0.0) u = uniform();
  return -mean * std::log(u);
}

int Rng::poisson(double lambda) {
  if (lambda <= 0.0) return 0;
  // Knuth's method with exponent chunking so large means do not underflow.
  const double kStep = 500.0;
  double left = lambda;
  double p = 1.0;
  int k = 0;
  do {
    ++k;
    p *= uniform();
    while (p < 1.0 && left > 0.0) {
      if (left > kStep) {
        p *= std::exp(kStep);
        left -= kStep;
      } else {
        p *= std::exp(left);
        left = 0.0;
      }
    }
  } while (p > 1.0);
  return k - 1;
}

}  // namespace odsage
