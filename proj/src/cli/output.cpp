#include "polexp/cli/output.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <system_error>
#include <unistd.h>

#include "polexp/cli/config.hpp"
#include "polexp/error.hpp"

namespace polexp::cli {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string header_line(const Provenance& p) {
  return "# config_hash=0x" + hex64(p.config_hash) + ",mode=" + p.mode +
         ",seed=" + std::to_string(p.seed) + ",version=" + kVersion + "\n";
}

Csv::Csv(const Provenance& p, const std::vector<std::string>& columns)
    : text_(header_line(p)), columns_(columns.size()) {
  for (const auto& c : columns) cell(c);
  end_row();
}

void Csv::separator() {
  if (in_row_ > 0) text_ += ',';
  ++in_row_;
}

Csv& Csv::cell(double v) {
  separator();
  text_ += format_double(v);
  return *this;
}

Csv& Csv::cell(std::int64_t v) {
  separator();
  text_ += std::to_string(v);
  return *this;
}

Csv& Csv::cell(const std::string& v) {
  separator();
  text_ += v;
  return *this;
}

Csv& Csv::blank() {
  separator();
  return *this;
}

void Csv::end_row() {
  if (in_row_ != columns_)
    throw InvalidArgument("csv: row has " + std::to_string(in_row_) + " cells, expected " +
                          std::to_string(columns_));
  text_ += '\n';
  in_row_ = 0;
}

std::string json_file(nlohmann::json body, const Provenance& p) {
  body["config_hash"] = "0x" + hex64(p.config_hash);
  body["mode"] = p.mode;
  body["seed"] = p.seed;
  body["version"] = kVersion;
  return body.dump(2) + "\n";
}

std::string manifest_text(const std::string& command, const nlohmann::json& effective,
                          const Provenance& p, const RunResult& result) {
  nlohmann::json files = nlohmann::json::object();
  for (const auto& f : result.files)
    files[f.name] = {{"fnv1a", "0x" + hex64(fnv1a(f.content))}, {"bytes", f.content.size()}};
  nlohmann::json m{{"command", command},
                   {"effective_config", effective},
                   {"files", files},
                   {"summary", result.summary}};
  return json_file(std::move(m), p);
}

void write_outputs(const std::filesystem::path& dir, const std::vector<Artifact>& files) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& f : files) {
    const auto target = dir / f.name;
    auto tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(f.content.data(), static_cast<std::streamsize>(f.content.size()));
      out.flush();
      if (!out) throw Error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
      std::filesystem::remove(tmp);
      throw Error("cannot rename into " + target.string() + ": " + ec.message());
    }
  }
}

std::vector<std::string> verify_outputs(const std::filesystem::path& dir,
                                        const std::vector<Artifact>& files) {
  std::vector<std::string> mismatched;
  for (const auto& f : files) {
    std::ifstream in(dir / f.name, std::ios::binary);
    if (!in) {
      mismatched.push_back(f.name);
      continue;
    }
    const std::string existing{std::istreambuf_iterator<char>(in), {}};
    if (existing != f.content) mismatched.push_back(f.name);
  }
  return mismatched;
}

}  // namespace polexp::cli
