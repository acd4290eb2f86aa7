#include "own/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "own/errors.hpp"
#include "own/random.hpp"

namespace own::data {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

// Reads a whole file, inflating it if it is gzip-compressed (gzread passes
// plain files through unchanged).
std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw Error("cannot open " + path.string());
  std::vector<unsigned char> out;
  unsigned char buf[1 << 16];
  for (;;) {
    const int got = gzread(f, buf, sizeof buf);
    if (got < 0) {
      int code = 0;
      const std::string msg = gzerror(f, &code);
      gzclose(f);
      throw LengthError(path.string() + ": read failed (" + msg + ")");
    }
    if (got == 0) break;
    out.insert(out.end(), buf, buf + got);
  }
  // A cut-off gzip stream reads as a short file followed by a Z_BUF_ERROR.
  int code = 0;
  gzerror(f, &code);
  gzclose(f);
  if (code != Z_OK && code != Z_STREAM_END) {
    throw LengthError(path.string() + ": compressed stream ends early");
  }
  return out;
}

class Reader {
 public:
  Reader(const std::vector<unsigned char>& bytes, std::string name)
      : bytes_(bytes), name_(std::move(name)) {}

  std::uint32_t u32() {
    need(4, "header");
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v = (v << 8) | bytes_[pos_++];
    return v;
  }

  const unsigned char* take(std::size_t n, const char* what) {
    need(n, what);
    const unsigned char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw LengthError(name_ + ": truncated " + what + " (need " + std::to_string(n) +
                        " bytes at offset " + std::to_string(pos_) + ", file has " +
                        std::to_string(bytes_.size()) + ")");
    }
  }

  const std::vector<unsigned char>& bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

std::string hex(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

void expect_magic(std::uint32_t seen, std::uint32_t want, const std::string& name) {
  if (seen != want) {
    throw FormatError(name + ": magic number " + hex(seen) + ", expected " + hex(want));
  }
}

}  // namespace

void Dataset::validate() const {
  if (count() == 0 || dim() == 0) throw DimensionError("Dataset: empty");
  if (labels.size() != count()) {
    throw DimensionError("Dataset: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(count()) + " samples");
  }
  for (std::uint32_t y : labels) {
    if (y >= num_classes) {
      throw ValueError("Dataset: label " + std::to_string(y) + " outside " +
                       std::to_string(num_classes) + " classes");
    }
  }
  if (!all_finite(features)) throw ValueError("Dataset: non-finite feature");
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img_bytes = read_all(images);
  Reader img(img_bytes, images.string());
  expect_magic(img.u32(), kImageMagic, images.string());
  const std::size_t count = img.u32();
  const std::size_t rows = img.u32();
  const std::size_t cols = img.u32();
  const std::size_t dim = rows * cols;
  const unsigned char* pixels = img.take(count * dim, "pixel data");

  const auto lab_bytes = read_all(labels);
  Reader lab(lab_bytes, labels.string());
  expect_magic(lab.u32(), kLabelMagic, labels.string());
  const std::size_t label_count = lab.u32();
  if (label_count != count) {
    throw FormatError(labels.string() + ": " + std::to_string(label_count) +
                      " labels for " + std::to_string(count) + " images");
  }
  const unsigned char* raw_labels = lab.take(count, "label data");

  Dataset ds;
  ds.features = Matrix(dim, count);
  for (std::size_t s = 0; s < count; ++s) {
    const unsigned char* p = pixels + s * dim;
    for (std::size_t k = 0; k < dim; ++k) ds.features(k, s) = p[k] / 255.0;
  }
  ds.labels.assign(raw_labels, raw_labels + count);
  std::uint32_t max_label = 0;
  for (std::uint32_t y : ds.labels) max_label = std::max(max_label, y);
  ds.num_classes = static_cast<std::size_t>(max_label) + 1;
  ds.validate();
  return ds;
}

Dataset load_mnist(const std::filesystem::path& dir, const std::string& split) {
  auto find = [&](const std::string& stem) {
    for (const char* suffix : {"", ".gz"}) {
      const auto p = dir / (stem + suffix);
      if (std::filesystem::exists(p)) return p;
    }
    throw Error("no " + stem + "[.gz] in " + dir.string());
  };
  Dataset ds = load_idx(find(split + "-images-idx3-ubyte"), find(split + "-labels-idx1-ubyte"));
  ds.num_classes = std::max<std::size_t>(ds.num_classes, 10);
  return ds;
}

Dataset synth_gaussians(std::size_t classes, std::size_t dim, std::size_t per_class,
                        std::uint64_t seed, double mean_stddev) {
  if (classes == 0 || dim == 0 || per_class == 0) {
    throw ValueError("synth_gaussians: classes, dim and per_class must all be positive");
  }
  Rng rng = make_rng(seed, 0x73796e74);
  const Matrix means = gaussian_matrix(dim, classes, rng, mean_stddev);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds;
  ds.features = Matrix(dim, classes * per_class);
  ds.labels.resize(classes * per_class);
  ds.num_classes = classes;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t s = 0; s < per_class; ++s) {
      const std::size_t j = c * per_class + s;
      ds.labels[j] = static_cast<std::uint32_t>(c);
      for (std::size_t k = 0; k < dim; ++k) ds.features(k, j) = means(k, c) + noise(rng);
    }
  }
  return ds;
}

Batch gather(const Dataset& ds, std::span<const std::size_t> indices) {
  Batch b;
  b.x = Matrix(ds.dim(), indices.size());
  b.labels.resize(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    if (indices[j] >= ds.count()) throw DimensionError("gather: sample index out of range");
    b.labels[j] = ds.labels[indices[j]];
  }
  for (std::size_t k = 0; k < ds.dim(); ++k) {
    auto src = ds.features.row(k);
    auto dst = b.x.row(k);
    for (std::size_t j = 0; j < indices.size(); ++j) dst[j] = src[indices[j]];
  }
  return b;
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Batch b = gather(ds, indices);
  return {std::move(b.x), std::move(b.labels), ds.num_classes};
}

std::vector<std::size_t> permutation(std::size_t count, std::uint64_t seed,
                                     std::uint64_t stream) {
  std::vector<std::size_t> p(count);
  for (std::size_t i = 0; i < count; ++i) p[i] = i;
  Rng rng = make_rng(seed, stream);
  for (std::size_t i = count; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

std::pair<Dataset, Dataset> split_validation(const Dataset& ds, double fraction,
                                             std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ValueError("split_validation: fraction must lie in (0, 1)");
  }
  const auto p = permutation(ds.count(), seed, 0x76616c69);
  const auto n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(p.size())));
  if (n_val == 0 || n_val >= p.size()) {
    throw ValueError("split_validation: split leaves an empty side");
  }
  std::vector<std::size_t> val(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(p.begin() + static_cast<std::ptrdiff_t>(n_val), p.end());
  return {subset(ds, train), subset(ds, val)};
}

BatchStream::BatchStream(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                         std::uint64_t epoch)
    : ds_(&ds), batch_size_(batch_size), order_(permutation(ds.count(), seed, epoch)) {
  if (batch_size == 0) throw ValueError("BatchStream: batch size must be positive");
}

std::size_t BatchStream::batch_count() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

Batch BatchStream::next() {
  if (done()) throw Error("BatchStream: no batches left");
  const std::size_t m = std::min(batch_size_, order_.size() - next_);
  Batch b = gather(*ds_, std::span<const std::size_t>(order_).subspan(next_, m));
  next_ += m;
  return b;
}

}  // namespace own::data
