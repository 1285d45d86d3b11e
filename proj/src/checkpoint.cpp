#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "dvae/error.hpp"
#include "dvae/model.hpp"

namespace dvae {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  const auto offset = static_cast<std::size_t>(is.tellg());
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw ParseError("checkpoint truncated", offset);
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

void put_sizes(std::ostream& os, const std::vector<std::size_t>& sizes) {
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(sizes.size()));
  for (auto s : sizes) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s));
}

std::vector<std::size_t> get_sizes(std::istream& is) {
  const auto n = get_le<std::uint32_t>(is);
  if (n > 16) throw ParseError("checkpoint: implausible layer count", static_cast<std::size_t>(is.tellg()));
  std::vector<std::size_t> sizes(n);
  for (auto& s : sizes) s = get_le<std::uint32_t>(is);
  return sizes;
}

}  // namespace

void write_checkpoint(std::ostream& os, const Params& params) {
  const auto& arch = params.arch();
  os.write("DVAE", 4);
  put_le<std::uint32_t>(os, kCheckpointVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(arch.input_dim));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(arch.latent_dim));
  put_sizes(os, arch.encoder_hidden);
  put_sizes(os, arch.decoder_hidden);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(arch.activation));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(arch.output));
  for (auto t : params.tensors())
    for (double v : t) put_le<double>(os, v);
  if (!os) throw Error("checkpoint: write failed");
}

Params read_checkpoint(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "DVAE", 4) != 0) throw ParseError("checkpoint: bad magic", 0);
  const auto version = get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw ParseError("checkpoint: unsupported version", 4);
  Architecture arch;
  arch.input_dim = get_le<std::uint32_t>(is);
  arch.latent_dim = get_le<std::uint32_t>(is);
  arch.encoder_hidden = get_sizes(is);
  arch.decoder_hidden = get_sizes(is);
  const auto act = get_le<std::uint32_t>(is);
  const auto fam = get_le<std::uint32_t>(is);
  if (act > 1 || fam > 1) throw ParseError("checkpoint: bad architecture enum", static_cast<std::size_t>(is.tellg()));
  arch.activation = static_cast<Activation>(act);
  arch.output = static_cast<OutputFamily>(fam);
  try {
    arch.validate();
  } catch (const ConfigError& e) {
    throw ParseError(std::string("checkpoint: invalid architecture: ") + e.what(), 8);
  }
  Params params(arch);
  for (auto t : params.tensors())
    for (double& v : t) v = get_le<double>(is);
  return params;
}

void save_checkpoint(const std::string& path, const Params& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open checkpoint for writing: " + path);
  write_checkpoint(os, params);
}

Params load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint: " + path);
  return read_checkpoint(is);
}

}  // namespace dvae
