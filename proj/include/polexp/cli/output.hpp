#pragma once

// Deterministic output files: CSV with a provenance header line, a manifest of
// per-file hashes, atomic writes and byte-for-byte verification.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace polexp::cli {

/// Shortest round-trip decimal form of v ("nan", "inf", "-inf" for non-finite).
std::string format_double(double v);

struct Provenance {
  std::uint64_t config_hash = 0;
  std::string mode;
  std::uint64_t seed = 0;
};

/// "# config_hash=0x...,mode=...,seed=...,version=...\n"
std::string header_line(const Provenance& p);

/// Row-oriented CSV builder.
class Csv {
 public:
  Csv(const Provenance& p, const std::vector<std::string>& columns);

  Csv& cell(double v);
  Csv& cell(std::int64_t v);
  Csv& cell(std::size_t v) { return cell(static_cast<std::int64_t>(v)); }
  Csv& cell(int v) { return cell(static_cast<std::int64_t>(v)); }
  Csv& cell(const std::string& v);
  Csv& cell(const char* v) { return cell(std::string(v)); }
  Csv& blank();
  void end_row();

  const std::string& str() const { return text_; }

 private:
  void separator();
  std::string text_;
  std::size_t columns_ = 0;
  std::size_t in_row_ = 0;
};

struct Artifact {
  std::string name;
  std::string content;
};

/// Everything a command produces.
struct RunResult {
  std::vector<Artifact> files;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::string> warnings;
};

/// JSON text of an object, with provenance fields added and a trailing newline.
std::string json_file(nlohmann::json body, const Provenance& p);

/// manifest.json content for a run.
std::string manifest_text(const std::string& command, const nlohmann::json& effective,
                          const Provenance& p, const RunResult& result);

/// Writes every artifact and the manifest under `dir` (created if needed).
/// Each file goes to a temporary name first and is renamed into place.
void write_outputs(const std::filesystem::path& dir, const std::vector<Artifact>& files);

/// Names of files under `dir` whose bytes differ from `files` (missing counts as different).
std::vector<std::string> verify_outputs(const std::filesystem::path& dir,
                                        const std::vector<Artifact>& files);

}  // namespace polexp::cli
