#include "smpcval/tightening.hpp"

#include <cmath>
#include <sstream>

#include "smpcval/error.hpp"
#include "smpcval/hashing.hpp"
#include "smpcval/parallel.hpp"

namespace smpcval {
namespace {

nlohmann::json matrix_to_json(const Matrix& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
    Matrix M(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(j.at(r).size()) != cols)
            throw ConfigError("ragged matrix in tightening profile");
        for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = j.at(r).at(c).get<double>();
    }
    return M;
}

}  // namespace

std::string TighteningProfile::hash() const {
    std::ostringstream os;
    os << "q " << q.rows() << ' ' << q.cols() << '\n';
    for (Eigen::Index i = 0; i < q.rows(); ++i)
        for (Eigen::Index j = 0; j < q.cols(); ++j) os << hex_double(q(i, j)) << '\n';
    os << "levels " << hex_double(levels.epsilon) << ' ' << hex_double(levels.delta) << ' '
       << levels.r << ' ' << levels.multiplicity << '\n';
    os << "samples " << sample_count << "\nseed " << seed << '\n';
    return git_blob_hash(os.str());
}

nlohmann::json to_json(const TighteningProfile& p) {
    nlohmann::json j;
    j["q"] = matrix_to_json(p.q);
    j["q_max_over_horizon"] = matrix_to_json(p.max_over_horizon().transpose()).at(0);
    j["levels"] = {{"epsilon", p.levels.epsilon},
                   {"delta", p.levels.delta},
                   {"r", p.levels.r},
                   {"multiplicity", p.levels.multiplicity}};
    j["sample_count"] = p.sample_count;
    j["seed"] = p.seed;
    j["hash"] = p.hash();
    return j;
}

TighteningProfile profile_from_json(const nlohmann::json& j) {
    TighteningProfile p;
    try {
        p.q = matrix_from_json(j.at("q"));
        const auto& lv = j.at("levels");
        p.levels = {lv.at("epsilon").get<double>(), lv.at("delta").get<double>(),
                    lv.at("r").get<std::int64_t>(), lv.at("multiplicity").get<std::int64_t>()};
        p.sample_count = j.at("sample_count").get<std::int64_t>();
        p.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed tightening profile: ") + e.what());
    }
    if (j.contains("hash") && j.at("hash").get<std::string>() != p.hash())
        throw ConfigError("tightening profile hash mismatch; the file was edited or corrupted");
    return p;
}

std::vector<Matrix> propagated_constraint_samples(const Matrix& A_K, const Matrix& C_K,
                                                  const DisturbanceModel& model,
                                                  std::int64_t sample_count, int horizon,
                                                  unsigned threads) {
    if (sample_count < 1 || horizon < 1)
        throw DimensionError("need at least one sample and a positive horizon");
    const Eigen::Index nh = C_K.rows();
    std::vector<Matrix> per_step(static_cast<std::size_t>(horizon), Matrix(sample_count, nh));
    parallel_for(static_cast<std::size_t>(sample_count), threads, [&](std::size_t i) {
        const DisturbanceSequence d = draw_disturbance_sequence(model, horizon, i);
        const Matrix e = propagate_error(A_K, d);
        const auto row = static_cast<Eigen::Index>(i);
        for (int l = 0; l < horizon; ++l)
            per_step[static_cast<std::size_t>(l)].row(row) = (C_K * e.col(l)).transpose();
    });
    return per_step;
}

Matrix tightening_from_samples(const std::vector<Matrix>& per_step_samples, std::int64_t r) {
    if (per_step_samples.empty()) throw DimensionError("no tightening samples");
    const Eigen::Index nh = per_step_samples.front().cols();
    Matrix q(static_cast<Eigen::Index>(per_step_samples.size()), nh);
    std::vector<double> column;
    for (std::size_t l = 0; l < per_step_samples.size(); ++l) {
        const Matrix& samples = per_step_samples[l];
        for (Eigen::Index j = 0; j < nh; ++j) {
            column.assign(samples.col(j).data(), samples.col(j).data() + samples.rows());
            q(static_cast<Eigen::Index>(l), j) = generalized_max(column, r);
        }
    }
    return q;
}

TighteningProfile compute_tightening(const LtiSystem& sys, const ControllerDesign& design,
                                     const DisturbanceModel& model, ProbabilisticLevels levels,
                                     unsigned threads) {
    const int N = design.horizon();
    levels.multiplicity = sys.nh() * N;
    levels.validate();
    if (model.dimension() != sys.nx())
        throw DimensionError("disturbance dimension " + std::to_string(model.dimension()) +
                             " does not match n_x = " + std::to_string(sys.nx()));
    TighteningProfile profile;
    profile.levels = levels;
    profile.sample_count = sample_complexity(levels);
    profile.seed = model.seed;
    const auto samples = propagated_constraint_samples(design.A_K(), design.C_K(), model,
                                                       profile.sample_count, N, threads);
    profile.q = tightening_from_samples(samples, levels.r);
    for (int l = 0; l < N; ++l) {
        const Vector margin = sys.h() - profile.q.row(l).transpose();
        Eigen::Index j = 0;
        if (margin.minCoeff(&j) <= 0.0)
            throw NumericalError("tightening removes the interior at step " + std::to_string(l) +
                                 ", row " + std::to_string(j) + " (h - q = " +
                                 std::to_string(margin(j)) +
                                 "); use a larger epsilon or a different gain K");
    }
    return profile;
}

TighteningValidation validate_tightening(const TighteningProfile& profile,
                                         const ControllerDesign& design,
                                         const DisturbanceModel& model, std::int64_t sample_count,
                                         std::uint64_t fresh_seed, unsigned threads) {
    if (fresh_seed == profile.seed)
        throw ConfigError("validation seed must differ from the design seed");
    DisturbanceModel fresh = model;
    fresh.seed = fresh_seed;
    const int N = static_cast<int>(profile.horizon());
    const auto samples = propagated_constraint_samples(design.A_K(), design.C_K(), fresh,
                                                       sample_count, N, threads);
    const double eps = profile.levels.epsilon;
    TighteningValidation v;
    v.sample_count = sample_count;
    v.threshold = eps + 3.0 * std::sqrt(eps * (1.0 - eps) / static_cast<double>(sample_count));
    v.frequency.resize(N, profile.q.cols());
    for (int l = 0; l < N; ++l) {
        for (Eigen::Index j = 0; j < profile.q.cols(); ++j) {
            const double bound = profile.q(l, j);
            const auto exceed =
                (samples[static_cast<std::size_t>(l)].col(j).array() > bound).count();
            const double freq = static_cast<double>(exceed) / static_cast<double>(sample_count);
            v.frequency(l, j) = freq;
            if (freq > v.threshold) v.flagged.emplace_back(l, static_cast<int>(j));
        }
    }
    return v;
}

}  // namespace smpcval
