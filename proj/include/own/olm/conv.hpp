#pragma once

#include <cstddef>
#include <vector>

#include "own/linalg/matrix.hpp"

namespace own::olm {

// Convolution filter bank n×d×F_h×F_w, row-major (filter, channel, height, width).
struct FilterBank {
  std::size_t filters = 0;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  double& at(std::size_t k, std::size_t c, std::size_t i, std::size_t j) {
    return data[((k * channels + c) * height + i) * width + j];
  }
  double at(std::size_t k, std::size_t c, std::size_t i, std::size_t j) const {
    return data[((k * channels + c) * height + i) * width + j];
  }

  friend bool operator==(const FilterBank&, const FilterBank&) = default;
};

// Row k holds filter k flattened in (channel, height, width) order.
Matrix unroll_conv_weights(const FilterBank& bank);

// Inverse of unroll_conv_weights.
FilterBank reshape_conv_weights(const Matrix& unrolled, std::size_t channels,
                                std::size_t height, std::size_t width);

}  // namespace own::olm
