#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace smpcval {

/// Violation level, confidence, discarding parameter and union-bound factor of a
/// sampled order-statistic bound.
struct ProbabilisticLevels {
    double epsilon = 0.05;
    double delta = 1e-6;
    std::int64_t r = 1;
    std::int64_t multiplicity = 1;

    /// Throws ConfigError unless 0 < epsilon, delta < 1 and r, multiplicity >= 1.
    void validate() const;
};

/// A sample together with its non-increasing rearrangement.
class OrderedSample {
public:
    explicit OrderedSample(std::vector<double> values);

    const std::vector<double>& values() const noexcept { return values_; }
    /// sorted()[0] >= sorted()[1] >= ...
    const std::vector<double>& sorted() const noexcept { return sorted_; }
    std::size_t size() const noexcept { return values_.size(); }

    /// r-th largest element (1-based, ties counted with multiplicity).
    double generalized_max(std::int64_t r) const;

private:
    std::vector<double> values_;
    std::vector<double> sorted_;
};

/// r-th largest element of `values` by selection (no full sort). Throws
/// std::out_of_range when r is not in [1, size].
double generalized_max(std::span<const double> values, std::int64_t r);

/// sum_{m=0}^{r-1} C(S, m) eps^m (1 - eps)^(S - m), evaluated in log space.
double binomial_tail(std::int64_t S, std::int64_t r, double epsilon);

/// Real-valued right-hand side of the explicit sample bound
/// (1/eps)(r - 1 + ln(mult/delta) + sqrt(2 (r - 1) ln(mult/delta))).
double sample_complexity_bound(const ProbabilisticLevels& levels);

/// Smallest integer satisfying the explicit bound (never below r).
std::int64_t sample_complexity(const ProbabilisticLevels& levels);

/// Smallest S with binomial_tail(S, r, eps) <= delta_over_multiplicity, by bisection.
std::int64_t min_sample_size_exact(double epsilon, double delta_over_multiplicity, std::int64_t r);

/// Largest r whose explicit sample size S(r) keeps r / S(r) <= ratio (at least 1).
std::int64_t discarding_from_ratio(double epsilon, double delta, std::int64_t multiplicity,
                                   double ratio);

}  // namespace smpcval
