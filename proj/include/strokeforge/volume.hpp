#pragma once

// On-disk volume format (.sfv).
//
//   SFV1\n
//   dims <rank> <d0> ... <dr-1>\n
//   channels <k> <name1> ... <namek>\n
//   type f64le\n
//   end\n
//   <payload: product(dims) little-endian IEEE-754 doubles, row-major>
//
// rank is 1..4; channel names carry no whitespace and k may be 0.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "strokeforge/tensor.hpp"

namespace strokeforge {

enum class VolumeErrorKind { io, bad_magic, bad_header, dims_mismatch, truncated };

class VolumeError : public std::runtime_error {
 public:
  VolumeError(VolumeErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  VolumeErrorKind kind() const { return kind_; }

 private:
  VolumeErrorKind kind_;
};

struct Volume {
  Tensor data;
  std::vector<std::string> channels;
};

void write_volume(const std::filesystem::path& path, const Tensor& data, const std::vector<std::string>& channels = {});
Volume read_volume(const std::filesystem::path& path);

}  // namespace strokeforge
