#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dvae/corruption.hpp"
#include "dvae/matrix.hpp"
#include "dvae/rng.hpp"

namespace dvae {

/// 8-bit images, row-major, one image per row.
struct RawImages {
  std::size_t count = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  std::size_t dim() const noexcept { return height * width; }
  std::span<const std::uint8_t> image(std::size_t i) const { return {pixels.data() + i * dim(), dim()}; }
  RawImages slice(std::size_t first, std::size_t n) const;
};

inline constexpr std::uint32_t kIdxImageMagic = 2051;

/// Parses an IDX image file (big-endian header: magic 2051, count, rows, cols).
/// Throws ParseError with the byte offset on a bad magic or truncation.
RawImages parse_idx_images(std::span<const std::uint8_t> bytes);
RawImages load_mnist_idx(const std::string& images_path);
std::vector<std::uint8_t> encode_idx_images(const RawImages& images);

/// Static binarization: pixel = 1 with probability value / 255, one uniform
/// per pixel in row-major order.
Matrix binarize(const RawImages& images, Rng& rng);
/// Fresh binarization of the selected images (data-augmentation mode).
Matrix resample_binarize(const RawImages& images, std::span<const std::size_t> rows, Rng& rng);

/// Divides by 255.
Matrix normalize(const RawImages& images);

struct Dataset {
  std::string name;
  Modality modality = Modality::binary;
  std::size_t height = 0;
  std::size_t width = 0;
  Matrix train;
  Matrix val;
  Matrix test;
  /// 8-bit training images behind `train`, kept for per-iteration resampling.
  std::optional<RawImages> train_raw;

  std::size_t dim() const noexcept { return height * width; }
};

struct MnistOptions {
  std::uint64_t seed = 0;
  /// 0 keeps all 50000 training rows; otherwise the first n of them.
  std::size_t train_subset = 0;
  std::size_t val_size = 10000;
};

/// Binarized MNIST from `dir`/train-images-idx3-ubyte and
/// `dir`/t10k-images-idx3-ubyte. Validation is the last val_size training
/// images in file order; binarization uses the "binarize" substream of seed.
Dataset load_mnist(const std::string& dir, const MnistOptions& opts);

inline constexpr std::size_t kFreyHeight = 28;
inline constexpr std::size_t kFreyWidth = 20;
inline constexpr std::size_t kFreyValSize = 295;
inline constexpr std::size_t kFreyTestSize = 200;

/// "FREY v1 <rows> <cols>" header line, then one line of space-separated
/// 8-bit values per image.
RawImages parse_frey(const std::string& text);
std::string format_frey(const RawImages& images);

/// Frey Face in the portable text format, scaled to [0, 1]. Test is the last
/// 200 rows, validation the 295 before them, training the rest, all in file
/// order.
Dataset load_frey(const std::string& path);

/// Splits rows into (train, val, test) index ranges by fixed tail sizes.
struct SplitSizes {
  std::size_t train, val, test;
};
SplitSizes frey_split_sizes(std::size_t rows);

/// Extracts the first uint8 matrix of a MATLAB level-5 file (plain or
/// zlib-compressed element) as images of `image_dim` pixels each. Column-major
/// storage of a (image_dim x n) matrix yields the images contiguously.
RawImages read_mat_uint8(std::span<const std::uint8_t> bytes, std::size_t image_dim);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);

}  // namespace dvae
