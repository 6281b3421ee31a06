#pragma once

#include "evseg/tensor.hpp"

namespace evseg {

/// ln Gamma(x), x > 0. Lanczos approximation (g = 7, 9 terms).
double lgamma(double x);

/// psi(x) = d/dx ln Gamma(x), x > 0. Recurrence shift then asymptotic series.
double digamma(double x);

/// psi'(x), x > 0. Used as the registered derivative of digamma.
double trigamma(double x);

// Tape-registered elementwise variants; domain error on any entry <= 0.
Tensor lgamma(Tape* tape, const Tensor& x);
Tensor digamma(Tape* tape, const Tensor& x);

}  // namespace evseg
