#include "strokeforge/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace strokeforge {

const NamedArray& Checkpoint::at(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return a;
  }
  throw CheckpointError("checkpoint has no array named '" + name + "'");
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return true;
  }
  return false;
}

void append_f64le(std::string& out, const std::vector<double>& values) {
  const std::size_t start = out.size();
  out.resize(start + 8 * values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) out[start + 8 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
}

std::vector<double> parse_f64le(const char* bytes, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 * i + b])) << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ostringstream header;
  header << "SFCK1\n";
  for (const auto& [k, v] : ckpt.meta) header << "meta " << k << ' ' << v << '\n';
  for (const auto& a : ckpt.arrays) {
    if (numel_of(a.shape) != a.values.size()) {
      throw CheckpointError("array '" + a.name + "' shape " + shape_str(a.shape) + " does not match its values");
    }
    header << "array " << a.name << ' ' << a.shape.size();
    for (auto d : a.shape) header << ' ' << d;
    header << '\n';
  }
  header << "end\n";
  std::string bytes = header.str();
  for (const auto& a : ckpt.arrays) append_f64le(bytes, a.values);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw CheckpointError("failed writing '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  Checkpoint ckpt;
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw CheckpointError("checkpoint header is truncated");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != "SFCK1") throw CheckpointError("not a checkpoint file (bad magic)");
  for (;;) {
    const std::string line = next_line();
    if (line == "end") break;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string key, value;
      ls >> key;
      std::getline(ls >> std::ws, value);
      ckpt.meta[key] = value;
    } else if (tag == "array") {
      NamedArray a;
      std::size_t rank = 0;
      ls >> a.name >> rank;
      a.shape.resize(rank);
      for (auto& d : a.shape) ls >> d;
      if (!ls) throw CheckpointError("malformed array line: " + line);
      ckpt.arrays.push_back(std::move(a));
    } else {
      throw CheckpointError("unknown checkpoint header line: " + line);
    }
  }
  std::size_t expected = 0;
  for (const auto& a : ckpt.arrays) expected += 8 * numel_of(a.shape);
  if (bytes.size() - pos != expected) {
    throw CheckpointError("checkpoint payload is " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                          std::to_string(expected));
  }
  for (auto& a : ckpt.arrays) {
    const std::size_t n = numel_of(a.shape);
    a.values = parse_f64le(bytes.data() + pos, n);
    pos += 8 * n;
  }
  return ckpt;
}

}  // namespace strokeforge
