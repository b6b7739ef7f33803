#include "smpcval/uncertainty.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "smpcval/error.hpp"
#include "smpcval/hashing.hpp"
#include "smpcval/parallel.hpp"

namespace smpcval {
namespace {

constexpr long kMaxRejectionAttempts = 1000000;
constexpr long kInitialStateProposals = 1000000;
constexpr double kMinAcceptanceRate = 1e-4;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Matrix covariance_factor(const Matrix& covariance) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (covariance + covariance.transpose()));
    const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal();
}

}  // namespace

Eigen::Index DisturbanceModel::dimension() const {
    switch (kind) {
        case DisturbanceKind::UserTable:
            return table.cols();
        case DisturbanceKind::UniformBall:
        case DisturbanceKind::TruncatedGaussian:
            return covariance.rows();
    }
    return 0;
}

void DisturbanceModel::validate() const {
    if (truncation_radius_sq && !(*truncation_radius_sq >= 0.0))
        throw ConfigError("truncation_radius_sq must be >= 0");
    switch (kind) {
        case DisturbanceKind::TruncatedGaussian: {
            if (covariance.rows() < 1 || covariance.rows() != covariance.cols())
                throw ConfigError("covariance must be a non-empty square matrix");
            Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (covariance + covariance.transpose()));
            if (eig.eigenvalues().minCoeff() < -1e-12)
                throw ConfigError("covariance must be positive semidefinite");
            const bool degenerate = eig.eigenvalues().maxCoeff() <= 0.0;
            if (truncation_radius_sq && *truncation_radius_sq <= 0.0 && !degenerate)
                throw ConfigError("truncation region {||w||^2 <= 0} has zero probability");
            break;
        }
        case DisturbanceKind::UniformBall:
            if (covariance.rows() < 1)
                throw ConfigError("uniform-ball disturbance needs its dimension (covariance block)");
            if (!truncation_radius_sq)
                throw ConfigError("uniform-ball disturbance needs truncation_radius_sq");
            break;
        case DisturbanceKind::UserTable:
            if (table.rows() < 1 || table.cols() < 1)
                throw ConfigError("user-table disturbance needs a non-empty table");
            break;
    }
}

std::string ScenarioBatch::hash() const {
    std::ostringstream os;
    os << "seed " << batch_seed << '\n';
    for (const auto& s : scenarios) {
        for (Eigen::Index i = 0; i < s.x0.size(); ++i) os << hex_double(s.x0(i)) << ' ';
        os << '|';
        const Matrix& d = s.disturbances.entries;
        for (Eigen::Index k = 0; k < d.cols(); ++k)
            for (Eigen::Index i = 0; i < d.rows(); ++i) os << ' ' << hex_double(d(i, k));
        os << '\n';
    }
    return git_blob_hash(os.str());
}

bool Box::contains(const Vector& x) const {
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t purpose) {
    const std::uint64_t key = splitmix64(splitmix64(seed ^ purpose) + index);
    std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(purpose)};
    return std::mt19937_64(seq);
}

DisturbanceSequence draw_disturbance_sequence(const DisturbanceModel& model, Eigen::Index length,
                                              std::uint64_t scenario_index) {
    if (length < 1) throw DimensionError("disturbance sequence length must be >= 1");
    model.validate();
    const Eigen::Index n = model.dimension();
    DisturbanceSequence seq{Matrix::Zero(n, length)};

    if (model.kind == DisturbanceKind::UserTable) {
        const auto rows = static_cast<std::uint64_t>(model.table.rows());
        for (Eigen::Index k = 0; k < length; ++k) {
            const auto row = (scenario_index * static_cast<std::uint64_t>(length) +
                              static_cast<std::uint64_t>(k)) % rows;
            seq.entries.col(k) = model.table.row(static_cast<Eigen::Index>(row)).transpose();
        }
        return seq;
    }

    auto rng = make_stream(model.seed, scenario_index, stream_purpose::kDisturbance);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector g(n);

    if (model.kind == DisturbanceKind::UniformBall) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double radius = std::sqrt(*model.truncation_radius_sq);
        for (Eigen::Index k = 0; k < length; ++k) {
            double norm = 0.0;
            do {
                for (Eigen::Index i = 0; i < n; ++i) g(i) = normal(rng);
                norm = g.norm();
            } while (norm == 0.0);
            const double scale =
                radius * std::pow(unit(rng), 1.0 / static_cast<double>(n)) / norm;
            seq.entries.col(k) = scale * g;
        }
        return seq;
    }

    const Matrix factor = covariance_factor(model.covariance);
    if (factor.isZero(0.0)) return seq;
    for (Eigen::Index k = 0; k < length; ++k) {
        long attempts = 0;
        for (;;) {
            for (Eigen::Index i = 0; i < n; ++i) g(i) = normal(rng);
            Vector w = factor * g;
            if (!model.truncation_radius_sq || w.squaredNorm() <= *model.truncation_radius_sq) {
                seq.entries.col(k) = w;
                break;
            }
            if (++attempts >= kMaxRejectionAttempts)
                throw NumericalError(
                    "truncated Gaussian sampler rejected 10^6 draws in a row; the truncation "
                    "region is inconsistent with the covariance");
        }
    }
    return seq;
}

Matrix propagate_error(const Matrix& A_K, const DisturbanceSequence& d) {
    if (A_K.rows() != A_K.cols() || A_K.rows() != d.entries.rows())
        throw DimensionError("A_K and the disturbance dimension disagree");
    Matrix e(A_K.rows(), d.length() + 1);
    e.col(0).setZero();
    for (Eigen::Index l = 0; l < d.length(); ++l) e.col(l + 1) = A_K * e.col(l) + d[l];
    return e;
}

namespace {

struct InitialStateDraw {
    Vector x;
    long proposals = 0;
};

InitialStateDraw draw_initial_state(const FeasibilityOracle& in_region, const Box& box,
                                    std::uint64_t seed, std::uint64_t scenario_index) {
    if (box.lower.size() != box.upper.size() || box.lower.size() < 1)
        throw DimensionError("initial-state box bounds disagree");
    if ((box.upper.array() < box.lower.array()).any())
        throw DimensionError("initial-state box has upper < lower");
    auto rng = make_stream(seed, scenario_index, stream_purpose::kInitialState);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Eigen::Index n = box.lower.size();
    InitialStateDraw draw{Vector(n), 0};
    while (draw.proposals < kInitialStateProposals) {
        ++draw.proposals;
        for (Eigen::Index i = 0; i < n; ++i)
            draw.x(i) = box.lower(i) + (box.upper(i) - box.lower(i)) * unit(rng);
        if (in_region(draw.x)) return draw;
    }
    throw NumericalError("initial-state rejection sampler: no acceptance in 10^6 proposals "
                         "(acceptance rate below 1e-4)");
}

}  // namespace

Vector sample_feasible_initial_state(const FeasibilityOracle& in_region, const Box& box,
                                     std::uint64_t seed, std::uint64_t scenario_index) {
    return draw_initial_state(in_region, box, seed, scenario_index).x;
}

ScenarioBatch generate_scenario_batch(const FeasibilityOracle& in_region, const Box& box,
                                      const DisturbanceModel& model, std::size_t count,
                                      Eigen::Index horizon_M, std::uint64_t batch_seed,
                                      unsigned threads) {
    DisturbanceModel stream_model = model;
    stream_model.seed = batch_seed;
    ScenarioBatch batch;
    batch.batch_seed = batch_seed;
    batch.scenarios.resize(count);
    std::vector<long> proposals(count, 0);
    parallel_for(count, threads, [&](std::size_t i) {
        auto draw = draw_initial_state(in_region, box, batch_seed, i);
        proposals[i] = draw.proposals;
        batch.scenarios[i].x0 = std::move(draw.x);
        batch.scenarios[i].disturbances = draw_disturbance_sequence(stream_model, horizon_M, i);
    });
    long total = 0;
    for (long p : proposals) total += p;
    if (total >= kInitialStateProposals &&
        static_cast<double>(count) / static_cast<double>(total) < kMinAcceptanceRate)
        throw NumericalError("initial-state rejection sampler: acceptance rate " +
                             std::to_string(static_cast<double>(count) / total) +
                             " below 1e-4 over " + std::to_string(total) + " proposals");
    return batch;
}

Matrix read_disturbance_table(const std::string& path, Eigen::Index expected_columns) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open disturbance table '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                if (rows.empty() && row.empty()) break;  // header line
                throw ConfigError(path + ":" + std::to_string(line_no) + ": bad number '" + cell +
                                  "'");
            }
        }
        if (row.empty()) continue;
        if (static_cast<Eigen::Index>(row.size()) != expected_columns)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(expected_columns) + " columns, got " +
                              std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    Matrix table(static_cast<Eigen::Index>(rows.size()), expected_columns);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (Eigen::Index c = 0; c < expected_columns; ++c)
            table(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    return table;
}

}  // namespace smpcval
