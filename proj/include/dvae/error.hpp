#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dvae {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad or inconsistent configuration (CLI flags, config keys, corruption kind).
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Malformed input file. Carries the byte offset where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Non-finite value in a forward or backward pass. layer() is -1 when the
/// value did not come from a specific layer.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, int layer = -1)
      : Error(layer >= 0 ? what + " (layer " + std::to_string(layer) + ")" : what),
        layer_(layer) {}
  int layer() const noexcept { return layer_; }

 private:
  int layer_;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Quadrature did not reach its self-consistency tolerance.
class PrecisionError : public Error {
 public:
  using Error::Error;
};

}  // namespace dvae
