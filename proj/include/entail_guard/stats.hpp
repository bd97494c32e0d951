#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace entail_guard::stats {

/// Average (midrank) ranks, 1-based; ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Average ranks scaled by 2, which makes them exact integers. All rank
/// statistics below run on these so permutation comparisons are exact
/// integer comparisons rather than float ones.
std::vector<long long> doubled_ranks(std::span<const double> values);

/// A = n * sum(x2*y2) - sum(x2) * sum(y2) over doubled ranks. Under
/// permutations of y the denominator of Spearman's rho is invariant, so
/// comparing |A| compares |rho| exactly.
long long rank_product_statistic(std::span<const long long> x2,
                                 std::span<const long long> y2);

/// Count of random y-permutations (Fisher-Yates over a SplitMix64 stream
/// derived from (seed, draw index)) whose |A| reaches |threshold|. The result
/// is a pure function of the arguments, independent of thread count.
/// OpenMP-parallel when compiled with OpenMP.
long long mc_permutation_exceed_count(std::span<const long long> x2,
                                      std::span<const long long> y2,
                                      long long threshold, int draws,
                                      std::uint64_t seed);

/// Single-threaded reference for mc_permutation_exceed_count; must produce
/// identical counts.
long long mc_permutation_exceed_count_serial(std::span<const long long> x2,
                                             std::span<const long long> y2,
                                             long long threshold, int draws,
                                             std::uint64_t seed);

/// Count over all n! permutations of y (exact).
long long exact_permutation_exceed_count(std::span<const long long> x2,
                                         std::span<const long long> y2,
                                         long long threshold);

struct SpearmanOptions {
    int exact_max_n = 7;            // full enumeration up to this n
    int mc_draws = 10000;           // Monte Carlo draws beyond it
    std::uint64_t mc_seed = 0x5EEDCAFEF00Dull;
};

struct SpearmanResult {
    double rho = 0.0;
    double p_value = 1.0;
    int n = 0;
    bool exact = false;  // true when the p-value came from full enumeration
};

/// Spearman rank correlation with average ranks for ties. Two-sided p-value
/// by exact permutation enumeration for n <= exact_max_n, otherwise by Monte
/// Carlo permutation with a fixed seed ((count+1)/(draws+1) estimator).
/// Throws on length mismatch, n < 2, or zero-variance input.
SpearmanResult spearman(std::span<const double> x, std::span<const double> y,
                        const SpearmanOptions& options = {});

/// Regularized incomplete beta function I_x(a, b), continued-fraction
/// evaluation, relative tolerance 1e-12.
double regularized_incomplete_beta(double a, double b, double x);

/// Two-sided p-value for a Student-t statistic with `dof` degrees of freedom.
double student_t_two_sided_p(double t, double dof);

struct Coefficient {
    std::string name;
    double beta = 0.0;
    double std_error = 0.0;
    double t_stat = 0.0;
    double p_value = 1.0;
};

struct RegressionResult {
    std::string outcome;
    std::string baseline;
    int n = 0;
    double r_squared = 0.0;
    std::vector<Coefficient> coefficients;  // intercept first, then dummies
};

/// OLS of `outcome` on an intercept plus one dummy per non-baseline label
/// (labels sorted lexicographically). Coefficients via Householder QR;
/// classical standard errors; p-values from the t distribution. Throws on
/// rank deficiency or when n <= number of coefficients. A constant outcome
/// reports r_squared 1.
RegressionResult ols_regress(std::span<const double> outcome,
                             std::span<const std::string> labels,
                             const std::string& baseline = "CONTROL",
                             const std::string& outcome_name = "outcome");

}  // namespace entail_guard::stats
