#include "brw/artifacts.hpp"

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "brw/errors.hpp"

namespace brw {

namespace {

std::string iso_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm parts{};
  gmtime_r(&now, &parts);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &parts);
  return buf;
}

std::ofstream open_artifact(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ConfigError("cannot write artifact '" + path + "'");
  }
  return out;
}

}  // namespace

std::string format_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (const char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::string hash_hex(std::string_view text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

ArtifactWriter::ArtifactWriter(std::string output_dir, nlohmann::json resolved)
    : dir_(std::move(output_dir)), resolved_(std::move(resolved)) {
  // nlohmann objects iterate in sorted key order, so this dump is canonical.
  // The output directory is bookkeeping, not an experiment input; leaving it
  // out keeps equal-seed runs byte-identical wherever their artifacts land.
  nlohmann::json hashed = resolved_;
  hashed.erase("output_dir");
  hash_ = hash_hex(hashed.dump());
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) {
    throw ConfigError("cannot create output directory '" + dir_ + "': " + ec.message());
  }
}

std::string ArtifactWriter::path_of(const std::string& name) const {
  return (std::filesystem::path(dir_) / name).string();
}

void ArtifactWriter::write_manifest() const {
  nlohmann::json manifest = resolved_;
  manifest["manifest_hash"] = hash_;
  manifest["timestamp"] = iso_utc_now();
  auto out = open_artifact(path_of("manifest.json"));
  out << manifest.dump(2) << '\n';
}

void ArtifactWriter::write_csv(const std::string& name,
                               const std::vector<std::string>& columns,
                               const std::vector<std::vector<std::string>>& rows) const {
  auto out = open_artifact(path_of(name));
  out << "# manifest=" << hash_ << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out << (i ? "," : "") << columns[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << (i ? "," : "") << row[i];
    }
    out << '\n';
  }
}

void ArtifactWriter::write_json(const std::string& name, nlohmann::json payload) const {
  payload["manifest"] = hash_;
  auto out = open_artifact(path_of(name));
  out << payload.dump(2) << '\n';
}

}  // namespace brw
