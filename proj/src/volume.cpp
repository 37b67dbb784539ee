#include "strokeforge/volume.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "strokeforge/checkpoint.hpp"

namespace strokeforge {

void write_volume(const std::filesystem::path& path, const Tensor& data, const std::vector<std::string>& channels) {
  if (data.rank() < 1 || data.rank() > 4) {
    throw VolumeError(VolumeErrorKind::bad_header, "volume rank must be 1..4, got " + shape_str(data.shape()));
  }
  std::ostringstream header;
  header << "SFV1\ndims " << data.rank();
  for (auto d : data.shape()) header << ' ' << d;
  header << "\nchannels " << channels.size();
  for (const auto& c : channels) {
    if (c.empty() || c.find_first_of(" \t\n") != std::string::npos) {
      throw VolumeError(VolumeErrorKind::bad_header, "channel name '" + c + "' is empty or has whitespace");
    }
    header << ' ' << c;
  }
  header << "\ntype f64le\nend\n";
  std::string bytes = header.str();
  append_f64le(bytes, std::vector<double>(data.data().begin(), data.data().end()));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw VolumeError(VolumeErrorKind::io, "cannot open '" + path.string() + "' for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw VolumeError(VolumeErrorKind::io, "failed writing '" + path.string() + "'");
}

Volume read_volume(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw VolumeError(VolumeErrorKind::io, "cannot open volume '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) {
      throw VolumeError(VolumeErrorKind::truncated, "volume header in '" + path.string() + "' is truncated");
    }
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (bytes.compare(0, 5, "SFV1\n") != 0) {
    throw VolumeError(VolumeErrorKind::bad_magic, "'" + path.string() + "' is not an SFV1 volume (bad magic)");
  }
  pos = 5;

  auto bad = [&](const std::string& line) {
    return VolumeError(VolumeErrorKind::bad_header, "malformed volume header line '" + line + "' in " + path.string());
  };
  Shape dims;
  std::string line = next_line();
  {
    std::istringstream ls(line);
    std::string tag;
    std::size_t rank = 0;
    ls >> tag >> rank;
    if (tag != "dims" || rank < 1 || rank > 4) throw bad(line);
    dims.resize(rank);
    for (auto& d : dims) ls >> d;
    if (!ls) throw bad(line);
    for (auto d : dims) {
      if (d == 0) throw bad(line);
    }
  }
  Volume vol;
  line = next_line();
  {
    std::istringstream ls(line);
    std::string tag;
    std::size_t k = 0;
    ls >> tag >> k;
    if (tag != "channels" || !ls) throw bad(line);
    vol.channels.resize(k);
    for (auto& c : vol.channels) ls >> c;
    if (!ls) throw bad(line);
  }
  line = next_line();
  if (line != "type f64le") throw bad(line);
  line = next_line();
  if (line != "end") throw bad(line);

  const std::size_t expected = 8 * numel_of(dims);
  const std::size_t actual = bytes.size() - pos;
  if (actual < expected) {
    throw VolumeError(VolumeErrorKind::truncated, "volume payload truncated: expected " + std::to_string(expected) +
                                                      " bytes, found " + std::to_string(actual));
  }
  if (actual > expected) {
    throw VolumeError(VolumeErrorKind::dims_mismatch, "volume payload has " + std::to_string(actual) +
                                                          " bytes but dims " + shape_str(dims) + " need " +
                                                          std::to_string(expected));
  }
  vol.data = Tensor::from_data(dims, parse_f64le(bytes.data() + pos, numel_of(dims)));
  return vol;
}

}  // namespace strokeforge
