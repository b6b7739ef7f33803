#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smpcval/types.hpp"

namespace smpcval {

/// Provenance stamped into every artifact.
struct Provenance {
    std::string config_hash;
    std::vector<std::pair<std::string, std::uint64_t>> seeds;

    nlohmann::json to_json() const;
    /// "# config_hash: ..." and "# seeds: name=value ..." lines.
    std::string comment_lines(const std::string& prefix = "# ") const;
};

/// %.17g: round-trips every double.
std::string format_double(double value);

/// Writes through a temporary file and renames it into place.
void write_file(const std::filesystem::path& path, const std::string& content);

/// Pretty-printed JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// Throws MissingArtifactError naming the file when it does not exist.
nlohmann::json read_json(const std::filesystem::path& path);

/// Numeric CSV with provenance comment lines and a header row.
class CsvWriter {
public:
    CsvWriter(const Provenance& provenance, const std::string& artifact,
              std::vector<std::string> columns);

    void row(const std::vector<double>& values);
    std::string str() const { return out_; }
    void save(const std::filesystem::path& path) const { write_file(path, out_); }

private:
    std::size_t width_;
    std::string out_;
};

struct CsvTable {
    std::vector<std::string> columns;
    Matrix values;  ///< one row per data line
    std::vector<std::string> comments;

    /// Index of `name` in columns; throws ConfigError if absent.
    Eigen::Index column(const std::string& name) const;
};

/// Reads a numeric CSV written by CsvWriter. Missing file: MissingArtifactError.
CsvTable read_csv(const std::filesystem::path& path);

/// Comment value for "key: value" lines ("" if absent).
std::string comment_value(const CsvTable& table, const std::string& key);

}  // namespace smpcval
