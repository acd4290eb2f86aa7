#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "own/linalg/matrix.hpp"

namespace own::nn {

struct LossResult {
  double loss = 0.0;        // mean negative log-likelihood over the batch
  Matrix grad;              // ∂loss/∂logits = (softmax − onehot)/m
  std::size_t errors = 0;   // argmax mismatches, ties resolved to the lowest class
};

// logits is classes×m. ValueError for an out-of-range label, DimensionError
// when the label count differs from m.
LossResult softmax_xent(const Matrix& logits, std::span<const std::uint32_t> labels);

}  // namespace own::nn
