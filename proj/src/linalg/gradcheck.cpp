#include "own/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "own/errors.hpp"

namespace own::check {

Matrix central_difference(const ScalarFn& f, const Matrix& x, double step) {
  Matrix probe = x;
  Matrix grad(x.rows(), x.cols());
  auto p = probe.data();
  auto g = grad.data();
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double saved = p[k];
    p[k] = saved + step;
    const double plus = f(probe);
    p[k] = saved - step;
    const double minus = f(probe);
    p[k] = saved;
    g[k] = (plus - minus) / (2.0 * step);
  }
  return grad;
}

double max_relative_error(const Matrix& analytic, const Matrix& numeric, double floor) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
    throw DimensionError("max_relative_error: shape mismatch");
  }
  double diff = 0.0;
  auto a = analytic.data();
  auto n = numeric.data();
  for (std::size_t k = 0; k < a.size(); ++k) diff = std::max(diff, std::abs(a[k] - n[k]));
  return diff / std::max(max_abs(numeric), floor);
}

double inner(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("inner: shape mismatch");
  }
  double s = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t k = 0; k < ad.size(); ++k) s += ad[k] * bd[k];
  return s;
}

double span_gradient_error(std::span<double> values, std::span<const double> analytic,
                           const std::function<double()>& loss, double step) {
  if (values.size() != analytic.size()) {
    throw DimensionError("span_gradient_error: " + std::to_string(values.size()) +
                         " values but " + std::to_string(analytic.size()) + " gradients");
  }
  std::vector<double> numeric(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double saved = values[k];
    values[k] = saved + step;
    const double up = loss();
    values[k] = saved - step;
    const double down = loss();
    values[k] = saved;
    numeric[k] = (up - down) / (2.0 * step);
  }
  const Matrix a(1, analytic.size(), std::vector<double>(analytic.begin(), analytic.end()));
  const std::size_t count = numeric.size();
  const Matrix n(1, count, std::move(numeric));
  return max_relative_error(a, n);
}

}  // namespace own::check
