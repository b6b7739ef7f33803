#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "smpcval/types.hpp"

namespace smpcval {

enum class DisturbanceKind { TruncatedGaussian, UniformBall, UserTable };

/// Marginal law of one disturbance vector; every step of a sequence uses the
/// same law and steps are drawn independently.
struct DisturbanceModel {
    DisturbanceKind kind = DisturbanceKind::TruncatedGaussian;
    /// Zero-mean Gaussian covariance (TruncatedGaussian).
    Matrix covariance;
    /// Support bound on ||w||^2. Required for UniformBall, optional for the Gaussian.
    std::optional<double> truncation_radius_sq;
    std::uint64_t seed = 0;
    /// Pre-drawn vectors, one per row (UserTable). Consumed in order.
    Matrix table;

    Eigen::Index dimension() const;
    /// Throws ConfigError for inconsistent data.
    void validate() const;
};

/// Columns are w_0 ... w_{L-1}.
struct DisturbanceSequence {
    Matrix entries;

    Eigen::Index length() const noexcept { return entries.cols(); }
    auto operator[](Eigen::Index k) const { return entries.col(k); }
};

struct Scenario {
    Vector x0;
    DisturbanceSequence disturbances;
};

struct ScenarioBatch {
    std::vector<Scenario> scenarios;
    std::uint64_t batch_seed = 0;

    std::size_t size() const noexcept { return scenarios.size(); }
    /// Content hash of every x0 and disturbance entry (bit-exact).
    std::string hash() const;
};

struct Box {
    Vector lower;
    Vector upper;

    bool contains(const Vector& x) const;
};

/// Independent random stream for (seed, index, purpose). Streams for distinct
/// triples are decorrelated by splitmix64 mixing.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t purpose);

/// Stream purposes, kept distinct so disturbance, initial-state and validation
/// draws never share a generator even when seeds coincide.
namespace stream_purpose {
inline constexpr std::uint64_t kDisturbance = 0x6469737475726221ULL;
inline constexpr std::uint64_t kInitialState = 0x696e697473746174ULL;
}  // namespace stream_purpose

/// i.i.d. sequence of length L determined entirely by (model.seed, scenario_index).
DisturbanceSequence draw_disturbance_sequence(const DisturbanceModel& model, Eigen::Index length,
                                              std::uint64_t scenario_index);

/// e_0 = 0, e_{l+1} = A_K e_l + w_l. Returns the n x (L+1) matrix [e_0 ... e_L].
Matrix propagate_error(const Matrix& A_K, const DisturbanceSequence& d);

using FeasibilityOracle = std::function<bool(const Vector&)>;

/// Rejection sampler: uniform proposals in `box`, accepted when `in_region` holds.
/// Throws NumericalError once 10^6 proposals yield an acceptance rate below 1e-4.
Vector sample_feasible_initial_state(const FeasibilityOracle& in_region, const Box& box,
                                     std::uint64_t seed, std::uint64_t scenario_index);

/// Draws `count` scenarios (x0 via the sampler, M disturbances each) using
/// `threads` workers. Scenario i depends only on (batch_seed, i).
ScenarioBatch generate_scenario_batch(const FeasibilityOracle& in_region, const Box& box,
                                      const DisturbanceModel& model, std::size_t count,
                                      Eigen::Index horizon_M, std::uint64_t batch_seed,
                                      unsigned threads);

/// Reads a CSV of disturbance vectors (one row per draw, '#' comment lines allowed).
Matrix read_disturbance_table(const std::string& path, Eigen::Index expected_columns);

}  // namespace smpcval
