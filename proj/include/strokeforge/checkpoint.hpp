#pragma once

// Parameter checkpoint container.
//
//   SFCK1
//   meta <key> <value to end of line>      (zero or more)
//   array <name> <rank> <d0> ... <dr-1>    (one per array, payload order)
//   end
//   <payload: every array's values as little-endian IEEE-754 doubles>
//
// Names and meta keys contain no whitespace.

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "strokeforge/tensor.hpp"

namespace strokeforge {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<NamedArray> arrays;

  const NamedArray& at(const std::string& name) const;
  bool contains(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Little-endian f64 (de)serialization shared with the volume format.
void append_f64le(std::string& out, const std::vector<double>& values);
std::vector<double> parse_f64le(const char* bytes, std::size_t count);

}  // namespace strokeforge
