#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "smpcval/probval.hpp"
#include "smpcval/sysmodel.hpp"
#include "smpcval/uncertainty.hpp"

namespace smpcval {

/// Per-step constraint tightening: row l of q holds the bound on C_K e_l for
/// every constraint row j. Shape N x n_h; row 0 is identically zero.
struct TighteningProfile {
    Matrix q;
    ProbabilisticLevels levels;
    std::int64_t sample_count = 0;
    std::uint64_t seed = 0;

    Eigen::Index horizon() const noexcept { return q.rows(); }
    /// Column-wise maximum over the horizon.
    Vector max_over_horizon() const { return q.colwise().maxCoeff().transpose(); }
    /// Git-style content hash over q, levels, sample count and seed.
    std::string hash() const;
};

nlohmann::json to_json(const TighteningProfile& profile);
TighteningProfile profile_from_json(const nlohmann::json& j);

/// Samples of C_K e_l for one step l: samples(i, j) for scenario i and row j.
/// Returns one S x n_h matrix per step l = 0..N-1.
std::vector<Matrix> propagated_constraint_samples(const Matrix& A_K, const Matrix& C_K,
                                                  const DisturbanceModel& model,
                                                  std::int64_t sample_count, int horizon,
                                                  unsigned threads = 1);

/// q_{l,j} = r-th largest of the step-l, row-j samples.
Matrix tightening_from_samples(const std::vector<Matrix>& per_step_samples, std::int64_t r);

/// Draws S_q = sample_complexity(levels) error trajectories with `model.seed`
/// and returns the generalized-max tightening. levels.multiplicity is forced to
/// n_h * N. Throws NumericalError if some h - q_l component is not positive.
TighteningProfile compute_tightening(const LtiSystem& sys, const ControllerDesign& design,
                                     const DisturbanceModel& model, ProbabilisticLevels levels,
                                     unsigned threads = 1);

struct TighteningValidation {
    Matrix frequency;  ///< N x n_h empirical P{C_K,j e_l > q_l,j}
    double threshold = 0.0;  ///< eps + 3 sqrt(eps (1 - eps) / S_val)
    std::vector<std::pair<int, int>> flagged;  ///< (l, j) cells above threshold
    std::int64_t sample_count = 0;

    bool passed() const noexcept { return flagged.empty(); }
};

/// Held-out check of a tightening with S_val fresh draws under `fresh_seed`.
/// Throws ConfigError when fresh_seed equals the profile's design seed.
TighteningValidation validate_tightening(const TighteningProfile& profile,
                                         const ControllerDesign& design,
                                         const DisturbanceModel& model, std::int64_t sample_count,
                                         std::uint64_t fresh_seed, unsigned threads = 1);

}  // namespace smpcval
