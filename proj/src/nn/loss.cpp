#include "own/nn/loss.hpp"

#include <cmath>
#include <string>

#include "own/errors.hpp"

namespace own::nn {

LossResult softmax_xent(const Matrix& logits, std::span<const std::uint32_t> labels) {
  const std::size_t c = logits.rows();
  const std::size_t m = logits.cols();
  if (labels.size() != m) {
    throw DimensionError("softmax_xent: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(m) + " columns");
  }
  if (m == 0 || c == 0) throw DimensionError("softmax_xent: empty logits");
  LossResult out;
  out.grad = Matrix(c, m);
  const double inv_m = 1.0 / static_cast<double>(m);
  double total = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const std::uint32_t y = labels[j];
    if (y >= c) {
      throw ValueError("softmax_xent: label " + std::to_string(y) + " outside " +
                       std::to_string(c) + " classes");
    }
    std::size_t argmax = 0;
    double top = logits(0, j);
    for (std::size_t i = 1; i < c; ++i) {
      if (logits(i, j) > top) {
        top = logits(i, j);
        argmax = i;
      }
    }
    if (argmax != y) ++out.errors;
    double sum = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      const double e = std::exp(logits(i, j) - top);
      out.grad(i, j) = e;
      sum += e;
    }
    total -= logits(y, j) - top - std::log(sum);
    for (std::size_t i = 0; i < c; ++i) out.grad(i, j) *= inv_m / sum;
    out.grad(y, j) -= inv_m;
  }
  out.loss = total * inv_m;
  return out;
}

}  // namespace own::nn
