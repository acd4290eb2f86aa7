#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "own/linalg/matrix.hpp"

namespace own::data {

// Column j of features is sample j.
struct Dataset {
  Matrix features;  // dim×count
  std::vector<std::uint32_t> labels;
  std::size_t num_classes = 0;

  std::size_t dim() const { return features.rows(); }
  std::size_t count() const { return features.cols(); }

  // Throws DimensionError / ValueError if the invariants are broken.
  void validate() const;
};

// Big-endian IDX image/label pair (gzip accepted transparently). Pixels are
// scaled to [0, 1] by dividing by 255; images are flattened row-major.
// FormatError on a bad magic number or inconsistent counts, LengthError on
// truncation.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

// Looks for the standard MNIST file names (optionally with a .gz suffix) in
// dir. split is "train" or "t10k".
Dataset load_mnist(const std::filesystem::path& dir, const std::string& split);

// Class c is centered on a mean drawn once from N(0, mean_stddev²·I); samples
// add unit-variance noise. Samples are stored class by class.
Dataset synth_gaussians(std::size_t classes, std::size_t dim, std::size_t per_class,
                        std::uint64_t seed, double mean_stddev = 2.0);

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices);

// Fisher–Yates permutation of 0..count driven by (seed, stream). Written out
// by hand so the order does not depend on the standard library in use.
std::vector<std::size_t> permutation(std::size_t count, std::uint64_t seed,
                                     std::uint64_t stream);

// Held-out split: the first ⌈fraction·count⌉ indices of a seeded permutation
// become the validation set. Returns {train, validation}.
std::pair<Dataset, Dataset> split_validation(const Dataset& ds, double fraction,
                                             std::uint64_t seed);

struct Batch {
  Matrix x;  // dim×m
  std::vector<std::uint32_t> labels;
};

// Lazily gathers mini-batches in the order of a permutation fixed by
// (seed, epoch). The final partial batch is kept.
class BatchStream {
 public:
  BatchStream(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
              std::uint64_t epoch);

  bool done() const { return next_ >= order_.size(); }
  std::size_t batch_count() const;
  Batch next();
  const std::vector<std::size_t>& order() const { return order_; }

 private:
  const Dataset* ds_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t next_ = 0;
};

// Gathers the given sample indices into one batch.
Batch gather(const Dataset& ds, std::span<const std::size_t> indices);

}  // namespace own::data
