#pragma once

#include <functional>
#include <span>

#include "own/linalg/matrix.hpp"

// Central finite differences, the independent oracle for every analytic
// backward pass in the library.
namespace own::check {

using ScalarFn = std::function<double(const Matrix&)>;

// ∂f/∂x by (f(x + h·e_ij) − f(x − h·e_ij)) / 2h for every entry.
Matrix central_difference(const ScalarFn& f, const Matrix& x, double step = 1e-5);

// max|analytic − numeric| / max(max|numeric|, floor): a norm-wise relative
// error that stays meaningful when individual entries are near zero.
double max_relative_error(const Matrix& analytic, const Matrix& numeric,
                          double floor = 1e-8);

// Central differences taken by perturbing `values` in place (each entry is
// restored afterwards), compared against `analytic` with max_relative_error.
double span_gradient_error(std::span<double> values, std::span<const double> analytic,
                           const std::function<double()>& loss, double step = 1e-5);

// Σ_ij a_ij·b_ij
double inner(const Matrix& a, const Matrix& b);

}  // namespace own::check
