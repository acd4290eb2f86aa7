#include "own/olm/conv.hpp"

#include <string>

#include "own/errors.hpp"

namespace own::olm {

Matrix unroll_conv_weights(const FilterBank& bank) {
  if (bank.filters == 0 || bank.channels == 0 || bank.height == 0 || bank.width == 0) {
    throw DimensionError("unroll_conv_weights: every axis must be non-empty");
  }
  const std::size_t cols = bank.channels * bank.height * bank.width;
  if (bank.data.size() != bank.filters * cols) {
    throw DimensionError("unroll_conv_weights: data length does not match the axes");
  }
  return Matrix(bank.filters, cols, bank.data);
}

FilterBank reshape_conv_weights(const Matrix& unrolled, std::size_t channels,
                                std::size_t height, std::size_t width) {
  if (channels * height * width != unrolled.cols()) {
    throw DimensionError("reshape_conv_weights: " + std::to_string(unrolled.cols()) +
                         " columns cannot be split into the requested filter shape");
  }
  auto data = unrolled.data();
  return {unrolled.rows(), channels, height, width,
          std::vector<double>(data.begin(), data.end())};
}

}  // namespace own::olm
