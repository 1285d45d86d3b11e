#include "dvae/data.hpp"

#include <zlib.h>

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dvae/error.hpp"

namespace dvae {

RawImages RawImages::slice(std::size_t first, std::size_t n) const {
  if (first + n > count) throw ShapeError("RawImages::slice: range out of bounds");
  RawImages out{n, height, width, {}};
  out.pixels.assign(pixels.begin() + static_cast<std::ptrdiff_t>(first * dim()),
                    pixels.begin() + static_cast<std::ptrdiff_t>((first + n) * dim()));
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw Error("cannot open " + path);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(is.tellg()));
  is.seekg(0);
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw Error("cannot read " + path);
  return bytes;
}

namespace {

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t off) {
  if (off + 4 > b.size()) throw ParseError("IDX header truncated", b.size());
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

}  // namespace

RawImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  const std::uint32_t magic = be32(bytes, 0);
  if (magic != kIdxImageMagic)
    throw ParseError("IDX: bad magic " + std::to_string(magic) + ", expected 2051", 0);
  RawImages img;
  img.count = be32(bytes, 4);
  img.height = be32(bytes, 8);
  img.width = be32(bytes, 12);
  const std::size_t need = img.count * img.height * img.width;
  if (bytes.size() - 16 < need) throw ParseError("IDX: pixel data truncated", bytes.size());
  img.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(need));
  return img;
}

RawImages load_mnist_idx(const std::string& images_path) {
  const auto bytes = read_file_bytes(images_path);
  return parse_idx_images(bytes);
}

std::vector<std::uint8_t> encode_idx_images(const RawImages& images) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.pixels.size());
  put_be32(out, kIdxImageMagic);
  put_be32(out, static_cast<std::uint32_t>(images.count));
  put_be32(out, static_cast<std::uint32_t>(images.height));
  put_be32(out, static_cast<std::uint32_t>(images.width));
  out.insert(out.end(), images.pixels.begin(), images.pixels.end());
  return out;
}

Matrix binarize(const RawImages& images, Rng& rng) {
  std::vector<std::size_t> all(images.count);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return resample_binarize(images, all, rng);
}

Matrix resample_binarize(const RawImages& images, std::span<const std::size_t> rows, Rng& rng) {
  Matrix out(rows.size(), images.dim());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto src = images.image(rows[r]);
    auto dst = out.row(r);
    for (std::size_t d = 0; d < src.size(); ++d) dst[d] = rng.uniform() < src[d] / 255.0 ? 1.0 : 0.0;
  }
  return out;
}

Matrix normalize(const RawImages& images) {
  Matrix out(images.count, images.dim());
  for (std::size_t i = 0; i < images.pixels.size(); ++i) out.data()[i] = images.pixels[i] / 255.0;
  return out;
}

Dataset load_mnist(const std::string& dir, const MnistOptions& opts) {
  RawImages train_all = load_mnist_idx(dir + "/train-images-idx3-ubyte");
  RawImages test = load_mnist_idx(dir + "/t10k-images-idx3-ubyte");
  if (train_all.dim() != 784 || test.dim() != 784) throw ShapeError("MNIST: images must be 28x28");
  if (train_all.count <= opts.val_size) throw ShapeError("MNIST: training file smaller than validation split");

  const std::size_t n_train_full = train_all.count - opts.val_size;
  const std::size_t n_train =
      opts.train_subset == 0 ? n_train_full : std::min(opts.train_subset, n_train_full);
  RawImages train = train_all.slice(0, n_train);
  RawImages val = train_all.slice(n_train_full, opts.val_size);

  // Each split binarized from its own substream so the subset size does not
  // change validation or test bits.
  const Rng root(opts.seed);
  Dataset ds;
  ds.name = "mnist";
  ds.modality = Modality::binary;
  ds.height = 28;
  ds.width = 28;
  Rng rb_train = root.substream("binarize", 0);
  Rng rb_val = root.substream("binarize", 1);
  Rng rb_test = root.substream("binarize", 2);
  ds.train = binarize(train, rb_train);
  ds.val = binarize(val, rb_val);
  ds.test = binarize(test, rb_test);
  ds.train_raw = std::move(train);
  return ds;
}

RawImages parse_frey(const std::string& text) {
  std::istringstream is(text);
  std::string magic, version;
  long long rows = -1, cols = -1;
  is >> magic >> version >> rows >> cols;
  if (!is || magic != "FREY" || version != "v1") throw ParseError("FREY: expected header 'FREY v1 <rows> <cols>'", 0);
  if (rows <= 0 || cols <= 0) throw ParseError("FREY: bad dimensions", 0);
  if (cols != static_cast<long long>(kFreyHeight * kFreyWidth))
    throw ShapeError("FREY: expected 560 columns, got " + std::to_string(cols));
  RawImages img{static_cast<std::size_t>(rows), kFreyHeight, kFreyWidth, {}};
  img.pixels.reserve(img.count * img.dim());
  for (std::size_t i = 0; i < img.count * img.dim(); ++i) {
    int v = -1;
    if (!(is >> v)) {
      throw ShapeError("FREY: expected " + std::to_string(rows) + " rows of " + std::to_string(cols) +
                       " values, data ends after " + std::to_string(i) + " values");
    }
    if (v < 0 || v > 255) throw ParseError("FREY: value out of 0..255", static_cast<std::size_t>(is.tellg()));
    img.pixels.push_back(static_cast<std::uint8_t>(v));
  }
  int extra;
  if (is >> extra) throw ShapeError("FREY: more values than the header declares");
  return img;
}

std::string format_frey(const RawImages& images) {
  std::string out = "FREY v1 " + std::to_string(images.count) + " " + std::to_string(images.dim()) + "\n";
  for (std::size_t i = 0; i < images.count; ++i) {
    auto row = images.image(i);
    for (std::size_t d = 0; d < row.size(); ++d) {
      if (d) out += ' ';
      out += std::to_string(row[d]);
    }
    out += '\n';
  }
  return out;
}

SplitSizes frey_split_sizes(std::size_t rows) {
  if (rows <= kFreyValSize + kFreyTestSize) throw ShapeError("FREY: too few rows for the 295/200 val/test split");
  return {rows - kFreyValSize - kFreyTestSize, kFreyValSize, kFreyTestSize};
}

Dataset load_frey(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  const RawImages img = parse_frey(std::string(bytes.begin(), bytes.end()));
  const SplitSizes s = frey_split_sizes(img.count);
  Dataset ds;
  ds.name = "frey";
  ds.modality = Modality::real;
  ds.height = kFreyHeight;
  ds.width = kFreyWidth;
  ds.train = normalize(img.slice(0, s.train));
  ds.val = normalize(img.slice(s.train, s.val));
  ds.test = normalize(img.slice(s.train + s.val, s.test));
  return ds;
}

namespace {

constexpr std::uint32_t miUINT8 = 2, miMATRIX = 14, miCOMPRESSED = 15;
constexpr std::uint8_t mxUINT8_CLASS = 9;

struct MatElement {
  std::uint32_t type;
  std::span<const std::uint8_t> data;
  std::size_t next;  // offset of the following element
};

std::uint32_t le32(std::span<const std::uint8_t> b, std::size_t off) {
  if (off + 4 > b.size()) throw ParseError("MAT: truncated element", b.size());
  return std::uint32_t{b[off]} | (std::uint32_t{b[off + 1]} << 8) | (std::uint32_t{b[off + 2]} << 16) |
         (std::uint32_t{b[off + 3]} << 24);
}

MatElement read_element(std::span<const std::uint8_t> b, std::size_t off) {
  const std::uint32_t first = le32(b, off);
  if ((first >> 16) != 0) {  // small data element packed into the tag
    const std::uint32_t n = first >> 16;
    if (n > 4) throw ParseError("MAT: bad small element", off);
    return {first & 0xffffU, b.subspan(off + 4, n), off + 8};
  }
  const std::uint32_t n = le32(b, off + 4);
  if (off + 8 + n > b.size()) throw ParseError("MAT: element runs past end of file", off);
  std::size_t next = off + 8 + n;
  if (first != miCOMPRESSED && next % 8) next += 8 - next % 8;  // compressed elements are unpadded
  return {first, b.subspan(off + 8, n), next};
}

std::vector<std::uint8_t> inflate_all(std::span<const std::uint8_t> in, std::size_t offset) {
  std::vector<std::uint8_t> out(in.size() * 4 + 1024);
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) throw Error("MAT: zlib init failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    if (zs.total_out == out.size()) out.resize(out.size() * 2);
    zs.next_out = out.data() + zs.total_out;
    zs.avail_out = static_cast<uInt>(out.size() - zs.total_out);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw ParseError("MAT: corrupt compressed element", offset);
    }
  }
  out.resize(zs.total_out);
  inflateEnd(&zs);
  return out;
}

std::optional<RawImages> matrix_as_images(std::span<const std::uint8_t> m, std::size_t image_dim) {
  // Sub-elements: array flags, dimensions, name, real part.
  auto flags = read_element(m, 0);
  if (flags.data.size() < 4 || flags.data[0] != mxUINT8_CLASS) return std::nullopt;
  auto dims = read_element(m, flags.next);
  auto name = read_element(m, dims.next);
  auto real = read_element(m, name.next);
  if (real.type != miUINT8) return std::nullopt;
  if (image_dim == 0 || real.data.size() % image_dim != 0)
    throw ShapeError("MAT: uint8 matrix size is not a multiple of the image size");
  RawImages img{real.data.size() / image_dim, kFreyHeight, kFreyWidth, {}};
  if (image_dim != kFreyHeight * kFreyWidth) {
    img.height = 1;
    img.width = image_dim;
  }
  img.pixels.assign(real.data.begin(), real.data.end());
  return img;
}

}  // namespace

RawImages read_mat_uint8(std::span<const std::uint8_t> bytes, std::size_t image_dim) {
  if (bytes.size() < 128) throw ParseError("MAT: file shorter than the 128-byte header", bytes.size());
  if (bytes[126] != 'I' || bytes[127] != 'M') throw ParseError("MAT: only little-endian level-5 files are supported", 126);
  std::size_t off = 128;
  while (off < bytes.size()) {
    auto el = read_element(bytes, off);
    if (el.type == miCOMPRESSED) {
      const auto raw = inflate_all(el.data, off);
      auto inner = read_element(raw, 0);
      if (inner.type == miMATRIX)
        if (auto img = matrix_as_images(inner.data, image_dim)) return *img;
    } else if (el.type == miMATRIX) {
      if (auto img = matrix_as_images(el.data, image_dim)) return *img;
    }
    off = el.next;
  }
  throw ParseError("MAT: no uint8 matrix found", bytes.size());
}

}  // namespace dvae
