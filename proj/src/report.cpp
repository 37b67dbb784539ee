#include "strokeforge/report.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "strokeforge/errors.hpp"

namespace strokeforge {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("SHA-256 init failed");
  }
  void update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw std::runtime_error("SHA-256 update failed");
  }
  void update(const std::string& s) { update(s.data(), s.size()); }
  void update(const Tensor& t) {
    update(shape_str(t.shape()));
    update(t.data().data(), t.numel() * sizeof(double));
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md, &len) != 1) throw std::runtime_error("SHA-256 final failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

std::string fmt(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

nlohmann::json config_json(const TrainConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  const auto kv = KeyValueConfig::parse(cfg.to_text());
  for (const auto& [k, v] : kv.entries()) j[k] = v;
  return j;
}

}  // namespace

std::string sha256_hex(std::span<const unsigned char> bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_hex(const std::string& text) {
  Sha256 h;
  h.update(text);
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string dataset_checksum(const std::vector<CaseRecord>& cases) {
  Sha256 h;
  for (const auto& c : cases) {
    h.update(c.case_id + '\n');
    h.update(c.ctp.frames);
    for (const auto* t : {&c.maps.cbf, &c.maps.cbv, &c.maps.mtt, &c.maps.tmax}) h.update(*t);
    if (c.dwi) h.update(*c.dwi);
    if (c.mask) h.update(c.mask->values.data(), c.mask->values.size());
  }
  return h.hex();
}

bool apply_seed_override(TrainConfig& cfg) {
  const char* env = std::getenv("STROKEFORGE_SEED");
  if (!env || !*env) return false;
  const std::string s(env);
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw ConfigError("STROKEFORGE_SEED must be an unsigned integer, got '" + s + "'");
  }
  cfg.seed = v;
  return true;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json j = {{"command", command}, {"seed", seed}, {"wall_seconds", wall_seconds}};
  if (config) j["config"] = config_json(*config);
  if (!folds.empty()) {
    auto& fj = j["folds"] = nlohmann::json::array();
    for (const auto& f : folds) {
      nlohmann::json cases = nlohmann::json::object();
      for (std::size_t i = 0; i < f.validation_ids.size(); ++i) cases[f.validation_ids[i]] = f.case_dice[i];
      nlohmann::json losses = nlohmann::json::array();
      for (const auto& r : f.history) {
        losses.push_back({{"epoch", r.epoch}, {"lr", r.lr}, {"total", r.total}, {"extractor", r.extractor},
                          {"generator", r.generator}, {"segmentor", r.segmentor}});
      }
      fj.push_back({{"fold", f.fold}, {"mean_dice", f.mean_dice}, {"case_dice", cases}, {"losses", losses}});
    }
  }
  if (mean_dice) j["mean_dice"] = *mean_dice;
  j["checksums"] = checksums;
  j.update(extra);
  return j;
}

void RunReport::write(const std::filesystem::path& path) const { write_text(path, to_json().dump(2) + "\n"); }

RunReport make_run_report(const std::string& command, const TrainConfig& cfg, const CvReport& cv) {
  RunReport r;
  r.command = command;
  r.config = cfg;
  r.seed = cfg.seed;
  r.folds = cv.folds;
  r.mean_dice = cv.mean_dice;
  r.checksums["config"] = sha256_hex(cfg.to_text());
  return r;
}

std::string loss_csv(const std::vector<FoldReport>& folds) {
  std::string out = "fold,epoch,lr,total,extractor,generator,segmentor\n";
  for (const auto& f : folds) {
    for (const auto& r : f.history) {
      out += std::to_string(f.fold) + ',' + std::to_string(r.epoch) + ',' + fmt(r.lr) + ',' + fmt(r.total) + ',' +
             fmt(r.extractor) + ',' + fmt(r.generator) + ',' + fmt(r.segmentor) + '\n';
    }
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed for " + path.string());
}

}  // namespace strokeforge
