#include "smpcval/artifacts.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "smpcval/error.hpp"

namespace smpcval {

nlohmann::json Provenance::to_json() const {
    nlohmann::json seeds_json = nlohmann::json::object();
    for (const auto& [name, value] : seeds) seeds_json[name] = value;
    return {{"config_hash", config_hash}, {"seeds", seeds_json}};
}

std::string Provenance::comment_lines(const std::string& prefix) const {
    std::string out = prefix + "config_hash: " + config_hash + "\n" + prefix + "seeds:";
    for (const auto& [name, value] : seeds) out += " " + name + "=" + std::to_string(value);
    return out + "\n";
}

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
    write_file(path, doc.dump(2) + "\n");
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("missing artifact: " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": not a valid artifact: " + e.what());
    }
}

CsvWriter::CsvWriter(const Provenance& provenance, const std::string& artifact,
                     std::vector<std::string> columns)
    : width_(columns.size()) {
    out_ = "# artifact: " + artifact + "\n" + provenance.comment_lines();
    for (std::size_t i = 0; i < columns.size(); ++i) out_ += (i ? "," : "") + columns[i];
    out_ += '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != width_) throw DimensionError("CSV row width does not match the header");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out_ += ',';
        out_ += format_double(values[i]);
    }
    out_ += '\n';
}

Eigen::Index CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<Eigen::Index>(i);
    throw ConfigError("CSV has no column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("missing artifact: " + path.string());
    CsvTable table;
    std::vector<std::vector<double>> rows;
    std::string line;
    bool header = false;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            table.comments.push_back(line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1));
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        if (!header) {
            while (std::getline(ss, cell, ',')) table.columns.push_back(cell);
            header = true;
            continue;
        }
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                                  ": not a number: '" + cell + "'");
            }
        }
        if (row.size() != table.columns.size())
            throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                              ": row width does not match the header");
        rows.push_back(std::move(row));
    }
    table.values.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(table.columns.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return table;
}

std::string comment_value(const CsvTable& table, const std::string& key) {
    const std::string prefix = key + ": ";
    for (const auto& c : table.comments)
        if (c.rfind(prefix, 0) == 0) return c.substr(prefix.size());
    return {};
}

}  // namespace smpcval
