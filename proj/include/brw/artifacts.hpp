#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace brw {

// Shortest decimal form that round-trips a double (17 significant digits).
std::string format_real(double x);

std::uint64_t fnv1a64(std::string_view text);
std::string hash_hex(std::string_view text);

// Writes one run's artifacts into a directory.  Every artifact carries the
// hash of the fully resolved configuration so it can be traced back to
// manifest.json; the wall-clock timestamp appears in the manifest only, so
// every other artifact is byte-identical across equal-seed reruns.
class ArtifactWriter {
 public:
  ArtifactWriter(std::string output_dir, nlohmann::json resolved);

  const std::string& manifest_hash() const { return hash_; }
  std::string path_of(const std::string& name) const;

  void write_manifest() const;
  // Row cells arrive preformatted; the first line is "# manifest=<hash>",
  // the second the comma-joined column names.
  void write_csv(const std::string& name, const std::vector<std::string>& columns,
                 const std::vector<std::vector<std::string>>& rows) const;
  void write_json(const std::string& name, nlohmann::json payload) const;

 private:
  std::string dir_;
  nlohmann::json resolved_;
  std::string hash_;
};

}  // namespace brw
