#include "smpcval/probval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include "smpcval/error.hpp"

namespace smpcval {

void ProbabilisticLevels::validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw ConfigError("epsilon must lie in (0,1), got " + std::to_string(epsilon));
    if (!(delta > 0.0 && delta < 1.0))
        throw ConfigError("delta must lie in (0,1), got " + std::to_string(delta));
    if (r < 1) throw ConfigError("discarding parameter r must be >= 1, got " + std::to_string(r));
    if (multiplicity < 1)
        throw ConfigError("multiplicity must be >= 1, got " + std::to_string(multiplicity));
}

OrderedSample::OrderedSample(std::vector<double> values)
    : values_(std::move(values)), sorted_(values_) {
    std::sort(sorted_.begin(), sorted_.end(), std::greater<>());
}

double OrderedSample::generalized_max(std::int64_t r) const {
    if (r < 1 || static_cast<std::size_t>(r) > sorted_.size())
        throw std::out_of_range("generalized max: r=" + std::to_string(r) + " outside [1, " +
                                std::to_string(sorted_.size()) + "]");
    return sorted_[static_cast<std::size_t>(r - 1)];
}

double generalized_max(std::span<const double> values, std::int64_t r) {
    if (r < 1 || static_cast<std::size_t>(r) > values.size())
        throw std::out_of_range("generalized max: r=" + std::to_string(r) + " outside [1, " +
                                std::to_string(values.size()) + "]");
    std::vector<double> scratch(values.begin(), values.end());
    auto nth = scratch.begin() + (r - 1);
    std::nth_element(scratch.begin(), nth, scratch.end(), std::greater<>());
    return *nth;
}

double binomial_tail(std::int64_t S, std::int64_t r, double epsilon) {
    if (S < 1 || r < 1 || r > S)
        throw std::out_of_range("binomial tail: need 1 <= r <= S, got r=" + std::to_string(r) +
                                ", S=" + std::to_string(S));
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::out_of_range("binomial tail: epsilon must lie in (0,1)");
    // log term_m, with term_{m+1}/term_m = (S - m)/(m + 1) * eps/(1 - eps)
    const double log_odds = std::log(epsilon) - std::log1p(-epsilon);
    std::vector<double> log_terms(static_cast<std::size_t>(r));
    double log_term = static_cast<double>(S) * std::log1p(-epsilon);
    for (std::int64_t m = 0; m < r; ++m) {
        log_terms[static_cast<std::size_t>(m)] = log_term;
        log_term += std::log(static_cast<double>(S - m)) - std::log(static_cast<double>(m + 1)) +
                    log_odds;
    }
    const double peak = *std::max_element(log_terms.begin(), log_terms.end());
    double scaled = 0.0;
    for (double lt : log_terms) scaled += std::exp(lt - peak);
    const double tail = std::exp(peak + std::log(scaled));
    return std::clamp(tail, 0.0, 1.0);
}

double sample_complexity_bound(const ProbabilisticLevels& levels) {
    levels.validate();
    const double log_term =
        std::log(static_cast<double>(levels.multiplicity) / levels.delta);
    const double rm1 = static_cast<double>(levels.r - 1);
    return (rm1 + log_term + std::sqrt(2.0 * rm1 * log_term)) / levels.epsilon;
}

std::int64_t sample_complexity(const ProbabilisticLevels& levels) {
    const auto S = static_cast<std::int64_t>(std::ceil(sample_complexity_bound(levels)));
    return std::max(S, levels.r);
}

std::int64_t min_sample_size_exact(double epsilon, double delta_over_multiplicity,
                                   std::int64_t r) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw ConfigError("epsilon must lie in (0,1), got " + std::to_string(epsilon));
    if (!(delta_over_multiplicity > 0.0))
        throw ConfigError("delta/multiplicity must be positive");
    if (r < 1) throw ConfigError("discarding parameter r must be >= 1");
    auto admissible = [&](std::int64_t S) {
        return binomial_tail(S, r, epsilon) <= delta_over_multiplicity;
    };
    std::int64_t lo = r;
    if (admissible(lo)) return lo;
    std::int64_t hi = 2 * r;
    while (!admissible(hi)) {
        lo = hi;
        if (hi > std::numeric_limits<std::int64_t>::max() / 4)
            throw NumericalError("exact sample size search overflowed");
        hi *= 2;
    }
    // invariant: !admissible(lo), admissible(hi)
    while (hi - lo > 1) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        (admissible(mid) ? hi : lo) = mid;
    }
    return hi;
}

std::int64_t discarding_from_ratio(double epsilon, double delta, std::int64_t multiplicity,
                                   double ratio) {
    if (!(ratio > 0.0 && ratio < epsilon))
        throw ConfigError("discarding ratio must lie in (0, epsilon)");
    std::int64_t best = 1;
    for (std::int64_t r = 1; r < 1000000; ++r) {
        const ProbabilisticLevels levels{epsilon, delta, r, multiplicity};
        const auto S = sample_complexity(levels);
        if (static_cast<double>(r) / static_cast<double>(S) > ratio) break;
        best = r;
    }
    return best;
}

}  // namespace smpcval
