#include "own/random.hpp"

#include "own/linalg/decompositions.hpp"

namespace own {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  for (double& x : m.data()) x = normal(rng);
  return m;
}

Matrix random_orthogonal(std::size_t n, Rng& rng) {
  return qr_unique(gaussian_matrix(n, n, rng)).q;
}

}  // namespace own
