#include "smpcval/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "smpcval/error.hpp"
#include "smpcval/hashing.hpp"

namespace smpcval {

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON text locator

namespace {

std::string escape_pointer_token(const std::string& key) {
    std::string out;
    for (char c : key) {
        if (c == '~')
            out += "~0";
        else if (c == '/')
            out += "~1";
        else
            out += c;
    }
    return out;
}

class LineScanner {
public:
    LineScanner(const std::string& text, std::map<std::string, int>& out) : s_(text), out_(out) {}

    void run() {
        skip();
        if (pos_ < s_.size()) value("");
    }

private:
    bool more() const { return pos_ < s_.size(); }

    void skip() {
        while (more()) {
            const char c = s_[pos_];
            if (c == '\n') {
                ++line_;
                ++pos_;
            } else if (c == ' ' || c == '\t' || c == '\r') {
                ++pos_;
            } else if (c == '/' && pos_ + 1 < s_.size() && s_[pos_ + 1] == '/') {
                while (more() && s_[pos_] != '\n') ++pos_;
            } else if (c == '/' && pos_ + 1 < s_.size() && s_[pos_ + 1] == '*') {
                pos_ += 2;
                while (more() && !(s_[pos_] == '*' && pos_ + 1 < s_.size() && s_[pos_ + 1] == '/')) {
                    if (s_[pos_] == '\n') ++line_;
                    ++pos_;
                }
                pos_ = std::min(pos_ + 2, s_.size());
            } else {
                return;
            }
        }
    }

    std::string string_token() {
        std::string out;
        ++pos_;  // opening quote
        while (more() && s_[pos_] != '"') {
            if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) {
                out += s_[pos_ + 1];
                pos_ += 2;
            } else {
                if (s_[pos_] == '\n') ++line_;
                out += s_[pos_++];
            }
        }
        ++pos_;  // closing quote
        return out;
    }

    // Returns false on malformed input; the JSON parser reports those.
    bool value(const std::string& pointer) {
        skip();
        if (!more()) return false;
        out_.emplace(pointer, line_);
        const char c = s_[pos_];
        if (c == '{') {
            ++pos_;
            skip();
            if (more() && s_[pos_] == '}') {
                ++pos_;
                return true;
            }
            while (more()) {
                skip();
                if (!more() || s_[pos_] != '"') return false;
                const std::string key = string_token();
                skip();
                if (!more() || s_[pos_] != ':') return false;
                ++pos_;
                if (!value(pointer + "/" + escape_pointer_token(key))) return false;
                skip();
                if (!more()) return false;
                if (s_[pos_] == ',') {
                    ++pos_;
                    continue;
                }
                if (s_[pos_] == '}') {
                    ++pos_;
                    return true;
                }
                return false;
            }
            return false;
        }
        if (c == '[') {
            ++pos_;
            skip();
            if (more() && s_[pos_] == ']') {
                ++pos_;
                return true;
            }
            for (std::size_t index = 0; more(); ++index) {
                if (!value(pointer + "/" + std::to_string(index))) return false;
                skip();
                if (!more()) return false;
                if (s_[pos_] == ',') {
                    ++pos_;
                    continue;
                }
                if (s_[pos_] == ']') {
                    ++pos_;
                    return true;
                }
                return false;
            }
            return false;
        }
        if (c == '"') {
            string_token();
            return true;
        }
        while (more() && std::string_view(",]} \t\r\n/").find(s_[pos_]) == std::string_view::npos)
            ++pos_;
        return true;
    }

    const std::string& s_;
    std::map<std::string, int>& out_;
    std::size_t pos_ = 0;
    int line_ = 1;
};

}  // namespace

JsonLineIndex::JsonLineIndex(const std::string& text) { LineScanner(text, lines_).run(); }

int JsonLineIndex::line_of(const std::string& pointer) const {
    std::string p = pointer;
    for (;;) {
        if (auto it = lines_.find(p); it != lines_.end()) return it->second;
        if (p.empty()) return 1;
        p.erase(p.rfind('/'));
    }
}

// ---------------------------------------------------------------------------
// Document reader

namespace {

std::string field_name(const std::string& pointer) {
    if (pointer.empty()) return "(document)";
    std::string out = pointer.substr(1);
    std::replace(out.begin(), out.end(), '/', '.');
    return out;
}

class Reader {
public:
    Reader(const json& root, const std::string& text, std::string source)
        : root_(root), index_(text), source_(std::move(source)) {}

    [[noreturn]] void fail(const std::string& pointer, const std::string& problem) const {
        std::ostringstream os;
        os << source_ << ':' << index_.line_of(pointer) << ": " << field_name(pointer) << ": "
           << problem;
        throw ConfigError(os.str());
    }

    const json* find(const std::string& pointer) const {
        const json::json_pointer ptr(pointer);
        return root_.contains(ptr) ? &root_.at(ptr) : nullptr;
    }

    bool has(const std::string& pointer) const { return find(pointer) != nullptr; }

    const json& require(const std::string& pointer) const {
        if (const json* j = find(pointer)) return *j;
        fail(pointer, "required field is missing");
    }

    void object(const std::string& pointer, const std::set<std::string>& allowed,
                bool required = true) const {
        const json* j = find(pointer);
        if (!j) {
            if (required) fail(pointer, "required section is missing");
            return;
        }
        if (!j->is_object()) fail(pointer, "expected an object");
        for (const auto& [key, _] : j->items()) {
            if (!allowed.count(key))
                fail(pointer + "/" + escape_pointer_token(key), "unknown field");
        }
    }

    double number(const std::string& pointer) const {
        const json& j = require(pointer);
        if (!j.is_number()) fail(pointer, "expected a number");
        const double v = j.get<double>();
        if (!std::isfinite(v)) fail(pointer, "expected a finite number");
        return v;
    }

    double number(const std::string& pointer, double fallback) const {
        return has(pointer) ? number(pointer) : fallback;
    }

    std::int64_t integer(const std::string& pointer) const {
        const json& j = require(pointer);
        if (j.is_number_integer()) return j.get<std::int64_t>();
        if (j.is_number_float()) {
            const double v = j.get<double>();
            if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15)
                return static_cast<std::int64_t>(v);
        }
        fail(pointer, "expected an integer");
    }

    std::int64_t integer(const std::string& pointer, std::int64_t fallback) const {
        return has(pointer) ? integer(pointer) : fallback;
    }

    std::uint64_t seed(const std::string& pointer, std::uint64_t fallback) const {
        if (!has(pointer)) return fallback;
        const json& j = require(pointer);
        if (j.is_number_unsigned()) return j.get<std::uint64_t>();
        const std::int64_t v = integer(pointer);
        if (v < 0) fail(pointer, "seeds must be nonnegative");
        return static_cast<std::uint64_t>(v);
    }

    std::string text(const std::string& pointer) const {
        const json& j = require(pointer);
        if (!j.is_string()) fail(pointer, "expected a string");
        return j.get<std::string>();
    }

    std::string text(const std::string& pointer, const std::string& fallback) const {
        return has(pointer) ? text(pointer) : fallback;
    }

    Vector vector(const std::string& pointer) const {
        const json& j = require(pointer);
        if (!j.is_array()) fail(pointer, "expected an array of numbers");
        Vector v(static_cast<Eigen::Index>(j.size()));
        for (std::size_t i = 0; i < j.size(); ++i)
            v(static_cast<Eigen::Index>(i)) = number(pointer + "/" + std::to_string(i));
        return v;
    }

    std::vector<double> list(const std::string& pointer) const {
        const Vector v = vector(pointer);
        return {v.data(), v.data() + v.size()};
    }

    Matrix matrix(const std::string& pointer) const {
        const json& j = require(pointer);
        if (!j.is_array() || j.empty()) fail(pointer, "expected a non-empty array of rows");
        const std::size_t rows = j.size();
        std::size_t cols = 0;
        for (std::size_t i = 0; i < rows; ++i) {
            const std::string row = pointer + "/" + std::to_string(i);
            if (!j[i].is_array()) fail(row, "expected a row (array of numbers)");
            if (i == 0) cols = j[i].size();
            if (j[i].size() != cols || cols == 0)
                fail(row, "rows must be non-empty and of equal length");
        }
        Matrix M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t c = 0; c < cols; ++c)
                M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                    number(pointer + "/" + std::to_string(i) + "/" + std::to_string(c));
        return M;
    }

    void shape(const std::string& pointer, const Matrix& M, Eigen::Index rows,
               Eigen::Index cols) const {
        if (M.rows() != rows || M.cols() != cols) {
            std::ostringstream os;
            os << "expected a " << rows << " x " << cols << " matrix, got " << M.rows() << " x "
               << M.cols();
            fail(pointer, os.str());
        }
    }

    void probability(const std::string& pointer, double v) const {
        if (!(v > 0.0 && v < 1.0)) {
            std::ostringstream os;
            os << "must lie strictly between 0 and 1, got " << v;
            fail(pointer, os.str());
        }
    }

private:
    const json& root_;
    JsonLineIndex index_;
    std::string source_;
};

json matrix_json(const Matrix& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

const char* kind_name(DisturbanceKind kind) {
    switch (kind) {
        case DisturbanceKind::TruncatedGaussian:
            return "truncated_gaussian";
        case DisturbanceKind::UniformBall:
            return "uniform_ball";
        case DisturbanceKind::UserTable:
            return "table";
    }
    return "?";
}

// Normalized settings: every default made explicit, file paths replaced by
// content, output location left out.
json effective_document(const ExperimentConfig& c) {
    json j;
    j["system"] = {{"A", matrix_json(c.A)},
                   {"B", matrix_json(c.B)},
                   {"C", matrix_json(c.C)},
                   {"D", matrix_json(c.D)},
                   {"h", vector_json(c.h)},
                   {"input_set", {{"A", matrix_json(c.input_set.A)}, {"b", vector_json(c.input_set.b)}}},
                   {"initial_state_box",
                    {{"lower", vector_json(c.initial_state_box.lower)},
                     {"upper", vector_json(c.initial_state_box.upper)}}},
                   {"sample_time", c.sample_time}};
    j["design"] = {{"Q", matrix_json(c.Q)}, {"R", matrix_json(c.R)}, {"N", c.N}};
    if (c.K) j["design"]["K"] = matrix_json(*c.K);
    json d = {{"kind", kind_name(c.disturbance.kind)}};
    if (c.disturbance.kind == DisturbanceKind::UserTable) {
        d["table"] = matrix_json(c.disturbance.table);
    } else {
        d["covariance"] = matrix_json(c.disturbance.covariance);
    }
    if (c.disturbance.truncation_radius_sq) d["truncation_radius_sq"] = *c.disturbance.truncation_radius_sq;
    j["disturbance"] = d;
    json t = {{"epsilon", c.tightening.epsilon},
              {"delta", c.tightening.delta},
              {"seed", c.tightening.seed},
              {"validation_samples", c.tightening.validation_samples},
              {"validation_seed", c.tightening.validation_seed}};
    if (c.tightening.r) t["r"] = *c.tightening.r;
    if (c.tightening.r_ratio) t["r_ratio"] = *c.tightening.r_ratio;
    j["tightening"] = t;
    json s = {{"epsilon", c.sweep.epsilon},
              {"delta", c.sweep.delta},
              {"r", c.sweep.r},
              {"rho_min", c.sweep.rho_min},
              {"rho_max", c.sweep.rho_max},
              {"n_C", c.sweep.n_C},
              {"fast_n_C", c.sweep.fast_n_C},
              {"M", c.sweep.M},
              {"seed", c.sweep.seed},
              {"slack_mode", to_string(c.sweep.slack_mode)},
              {"g_sum", to_string(c.sweep.g_sum)},
              {"detail_rhos", c.sweep.detail_rhos},
              {"trace_limit", c.sweep.trace_limit}};
    if (c.sweep.sample_count) s["sample_count"] = *c.sweep.sample_count;
    j["sweep"] = s;
    j["selection"] = {{"policy", to_string(c.selection.policy)}};
    if (c.selection.policy == SelectionPolicy::SmallestRhoBelow)
        j["selection"]["threshold"] = c.selection.threshold;
    j["profile"] = c.fast ? "fast" : "full";
    return j;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string ExperimentConfig::hash() const { return git_blob_hash(effective.dump()); }

std::vector<double> ExperimentConfig::grid() const {
    return rho_grid(sweep.rho_min, sweep.rho_max, fast ? sweep.fast_n_C : sweep.n_C);
}

LtiSystem ExperimentConfig::system() const { return LtiSystem(A, B, C, D, h); }

ExperimentConfig parse_config(const std::string& text, const std::string& source,
                              const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte > 0 ? byte - 1 : 0), '\n');
        std::string what = e.what();
        if (auto pos = what.find("syntax error"); pos != std::string::npos) what = what.substr(pos);
        std::ostringstream os;
        os << source << ':' << line << ": " << what;
        throw ConfigError(os.str());
    }
    const Reader in(root, text, source);
    if (!root.is_object()) in.fail("", "expected an object at the top level");
    in.object("", {"system", "design", "disturbance", "tightening", "sweep", "selection", "output"});

    ExperimentConfig c;
    c.source = source;

    // system
    in.object("/system", {"A", "B", "C", "D", "h", "state_box", "input_box", "input_set",
                          "initial_state_box", "sample_time"});
    c.A = in.matrix("/system/A");
    in.shape("/system/A", c.A, c.A.rows(), c.A.rows());
    c.B = in.matrix("/system/B");
    in.shape("/system/B", c.B, c.A.rows(), c.B.cols());
    const Eigen::Index nx = c.A.rows();
    const Eigen::Index nu = c.B.cols();
    const bool explicit_rows = in.has("/system/C") || in.has("/system/D") || in.has("/system/h");
    const bool boxes = in.has("/system/state_box") || in.has("/system/input_box");
    if (explicit_rows && boxes)
        in.fail("/system", "give either C, D, h or the state_box / input_box shorthand, not both");
    Vector state_box, input_box;
    if (in.has("/system/state_box")) {
        state_box = in.vector("/system/state_box");
        if (state_box.size() != nx) in.fail("/system/state_box", "expected one bound per state");
        if ((state_box.array() <= 0.0).any()) in.fail("/system/state_box", "bounds must be positive");
    }
    if (in.has("/system/input_box")) {
        input_box = in.vector("/system/input_box");
        if (input_box.size() != nu) in.fail("/system/input_box", "expected one bound per input");
        if ((input_box.array() <= 0.0).any()) in.fail("/system/input_box", "bounds must be positive");
    }
    if (boxes) {
        const LtiSystem sys = LtiSystem::with_boxes(c.A, c.B, state_box, input_box);
        c.C = sys.C();
        c.D = sys.D();
        c.h = sys.h();
    } else {
        c.C = in.matrix("/system/C");
        c.h = in.vector("/system/h");
        in.shape("/system/C", c.C, c.h.size(), nx);
        c.D = in.has("/system/D") ? in.matrix("/system/D") : Matrix::Zero(c.h.size(), nu);
        in.shape("/system/D", c.D, c.h.size(), nu);
    }
    try {
        (void)c.system();
    } catch (const Error& e) {
        in.fail("/system", e.what());
    }

    if (in.has("/system/input_set")) {
        in.object("/system/input_set", {"A", "b"});
        c.input_set.A = in.matrix("/system/input_set/A");
        c.input_set.b = in.vector("/system/input_set/b");
        in.shape("/system/input_set/A", c.input_set.A, c.input_set.b.size(), nu);
    } else if (input_box.size() > 0) {
        c.input_set.A = Matrix::Zero(2 * nu, nu);
        c.input_set.b = Vector(2 * nu);
        for (Eigen::Index i = 0; i < nu; ++i) {
            c.input_set.A(2 * i, i) = 1.0;
            c.input_set.A(2 * i + 1, i) = -1.0;
            c.input_set.b(2 * i) = input_box(i);
            c.input_set.b(2 * i + 1) = input_box(i);
        }
    } else {
        in.fail("/system", "input_set is required when input_box is not given");
    }

    if (in.has("/system/initial_state_box")) {
        in.object("/system/initial_state_box", {"lower", "upper"});
        c.initial_state_box.lower = in.vector("/system/initial_state_box/lower");
        c.initial_state_box.upper = in.vector("/system/initial_state_box/upper");
        if (c.initial_state_box.lower.size() != nx || c.initial_state_box.upper.size() != nx)
            in.fail("/system/initial_state_box", "lower and upper need one entry per state");
        if ((c.initial_state_box.upper.array() <= c.initial_state_box.lower.array()).any())
            in.fail("/system/initial_state_box", "upper must exceed lower in every coordinate");
    } else if (state_box.size() > 0) {
        c.initial_state_box = {-state_box, state_box};
    } else {
        in.fail("/system", "initial_state_box is required when state_box is not given");
    }
    c.sample_time = in.number("/system/sample_time", 0.0);
    if (c.sample_time < 0.0) in.fail("/system/sample_time", "must be nonnegative");

    // design
    in.object("/design", {"Q", "R", "N", "K"});
    c.Q = in.matrix("/design/Q");
    in.shape("/design/Q", c.Q, nx, nx);
    c.R = in.matrix("/design/R");
    in.shape("/design/R", c.R, nu, nu);
    const std::int64_t N = in.integer("/design/N");
    if (N < 1 || N > 1000) in.fail("/design/N", "horizon must lie in [1, 1000]");
    c.N = static_cast<int>(N);
    if (in.has("/design/K")) {
        c.K = in.matrix("/design/K");
        in.shape("/design/K", *c.K, nu, nx);
    }

    // disturbance
    in.object("/disturbance", {"kind", "covariance", "truncation_radius_sq", "table", "dimension"});
    const std::string kind = in.text("/disturbance/kind", "truncated_gaussian");
    if (kind == "truncated_gaussian") {
        c.disturbance.kind = DisturbanceKind::TruncatedGaussian;
        c.disturbance.covariance = in.matrix("/disturbance/covariance");
        in.shape("/disturbance/covariance", c.disturbance.covariance, nx, nx);
    } else if (kind == "uniform_ball") {
        c.disturbance.kind = DisturbanceKind::UniformBall;
        const std::int64_t dim = in.integer("/disturbance/dimension", nx);
        if (dim != nx) in.fail("/disturbance/dimension", "must equal the state dimension");
        c.disturbance.covariance = Matrix::Zero(nx, nx);
    } else if (kind == "table") {
        c.disturbance.kind = DisturbanceKind::UserTable;
        const std::filesystem::path file = base_dir / in.text("/disturbance/table");
        try {
            c.disturbance.table = read_disturbance_table(file.string(), nx);
        } catch (const Error& e) {
            in.fail("/disturbance/table", e.what());
        }
    } else {
        in.fail("/disturbance/kind",
                "expected \"truncated_gaussian\", \"uniform_ball\" or \"table\", got \"" + kind + "\"");
    }
    if (in.has("/disturbance/truncation_radius_sq"))
        c.disturbance.truncation_radius_sq = in.number("/disturbance/truncation_radius_sq");
    try {
        c.disturbance.validate();
    } catch (const ConfigError& e) {
        in.fail("/disturbance", e.what());
    }

    // tightening
    in.object("/tightening", {"epsilon", "delta", "r", "r_ratio", "seed", "validation_samples",
                              "validation_seed"});
    c.tightening.epsilon = in.number("/tightening/epsilon");
    in.probability("/tightening/epsilon", c.tightening.epsilon);
    c.tightening.delta = in.number("/tightening/delta");
    in.probability("/tightening/delta", c.tightening.delta);
    if (in.has("/tightening/r") == in.has("/tightening/r_ratio"))
        in.fail("/tightening", "give exactly one of r and r_ratio");
    if (in.has("/tightening/r")) {
        c.tightening.r = in.integer("/tightening/r");
        if (*c.tightening.r < 1) in.fail("/tightening/r", "must be at least 1");
    } else {
        c.tightening.r_ratio = in.number("/tightening/r_ratio");
        in.probability("/tightening/r_ratio", *c.tightening.r_ratio);
    }
    c.tightening.seed = in.seed("/tightening/seed", 1);
    c.tightening.validation_samples = in.integer("/tightening/validation_samples", 100000);
    if (c.tightening.validation_samples < 1)
        in.fail("/tightening/validation_samples", "must be at least 1");
    c.tightening.validation_seed = in.seed("/tightening/validation_seed", c.tightening.seed + 1);
    if (c.tightening.validation_seed == c.tightening.seed)
        in.fail("/tightening/validation_seed", "must differ from tightening.seed");

    // sweep
    in.object("/sweep", {"epsilon", "delta", "r", "rho_min", "rho_max", "n_C", "fast_n_C", "M",
                         "seed", "sample_count", "slack_mode", "g_sum", "detail_rhos",
                         "trace_limit"});
    auto& sw = c.sweep;
    sw.epsilon = in.number("/sweep/epsilon");
    in.probability("/sweep/epsilon", sw.epsilon);
    sw.delta = in.number("/sweep/delta");
    in.probability("/sweep/delta", sw.delta);
    sw.r = in.integer("/sweep/r", 1);
    if (sw.r < 1) in.fail("/sweep/r", "must be at least 1");
    sw.rho_min = in.number("/sweep/rho_min");
    if (!(sw.rho_min > 0.0)) in.fail("/sweep/rho_min", "must be positive");
    sw.rho_max = in.number("/sweep/rho_max");
    if (!(sw.rho_max > sw.rho_min)) in.fail("/sweep/rho_max", "must exceed rho_min");
    const std::int64_t n_C = in.integer("/sweep/n_C");
    if (n_C < 2 || n_C > 100000) in.fail("/sweep/n_C", "must lie in [2, 100000]");
    sw.n_C = static_cast<std::size_t>(n_C);
    const std::int64_t fast_n_C = in.integer("/sweep/fast_n_C", 10);
    if (fast_n_C < 2 || fast_n_C > n_C) in.fail("/sweep/fast_n_C", "must lie in [2, n_C]");
    sw.fast_n_C = static_cast<std::size_t>(fast_n_C);
    sw.M = in.integer("/sweep/M");
    if (sw.M < 1 || sw.M > 100000) in.fail("/sweep/M", "must lie in [1, 100000]");
    sw.seed = in.seed("/sweep/seed", 3);
    if (in.has("/sweep/sample_count")) {
        sw.sample_count = in.integer("/sweep/sample_count");
        if (*sw.sample_count < 1) in.fail("/sweep/sample_count", "must be at least 1");
    }
    const std::string slack = in.text("/sweep/slack_mode", "shared");
    if (slack == "shared")
        sw.slack_mode = SlackMode::Shared;
    else if (slack == "per_step")
        sw.slack_mode = SlackMode::PerStep;
    else
        in.fail("/sweep/slack_mode", "expected \"shared\" or \"per_step\", got \"" + slack + "\"");
    const std::string g_sum = in.text("/sweep/g_sum", "inclusive");
    if (g_sum == "inclusive")
        sw.g_sum = GSum::Inclusive;
    else if (g_sum == "exclusive")
        sw.g_sum = GSum::Exclusive;
    else
        in.fail("/sweep/g_sum", "expected \"inclusive\" or \"exclusive\", got \"" + g_sum + "\"");
    if (in.has("/sweep/detail_rhos")) {
        sw.detail_rhos = in.list("/sweep/detail_rhos");
        for (std::size_t i = 0; i < sw.detail_rhos.size(); ++i) {
            if (!(sw.detail_rhos[i] > 0.0))
                in.fail("/sweep/detail_rhos/" + std::to_string(i), "must be positive");
            if (i > 0 && !(sw.detail_rhos[i] > sw.detail_rhos[i - 1]))
                in.fail("/sweep/detail_rhos/" + std::to_string(i), "values must be increasing");
        }
    }
    const std::int64_t trace_limit = in.integer("/sweep/trace_limit", 100);
    if (trace_limit < 0) in.fail("/sweep/trace_limit", "must be nonnegative");
    sw.trace_limit = static_cast<std::size_t>(trace_limit);

    // selection
    in.object("/selection", {"policy", "threshold"}, false);
    const std::string policy = in.text("/selection/policy", "min_gamma");
    if (policy == "min_gamma") {
        c.selection.policy = SelectionPolicy::MinGamma;
    } else if (policy == "smallest_rho_below") {
        c.selection.policy = SelectionPolicy::SmallestRhoBelow;
        c.selection.threshold = in.number("/selection/threshold");
    } else {
        in.fail("/selection/policy",
                "expected \"min_gamma\" or \"smallest_rho_below\", got \"" + policy + "\"");
    }

    // output
    in.object("/output", {"directory", "formats"}, false);
    c.output_dir = base_dir / in.text("/output/directory", "smpcval-out");
    if (in.has("/output/formats")) {
        const json& f = in.require("/output/formats");
        if (!f.is_array()) in.fail("/output/formats", "expected an array of strings");
        c.write_svg = false;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const std::string ptr = "/output/formats/" + std::to_string(i);
            const std::string name = in.text(ptr);
            if (name == "svg")
                c.write_svg = true;
            else if (name != "json" && name != "csv")
                in.fail(ptr, "unknown format \"" + name + "\" (json, csv and svg are supported)");
        }
    }

    c.effective = effective_document(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ConfigError(path.string() + ": cannot open config file");
    std::ostringstream text;
    text << file.rdbuf();
    return parse_config(text.str(), path.string(), path.parent_path());
}

void apply_seed_override(ExperimentConfig& config, std::uint64_t seed) {
    config.tightening.seed = seed;
    config.tightening.validation_seed = seed + 1;
    config.sweep.seed = seed + 2;
    config.effective = effective_document(config);
}

void apply_fast_profile(ExperimentConfig& config) {
    config.fast = true;
    config.effective = effective_document(config);
}

}  // namespace smpcval
