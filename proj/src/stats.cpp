#include "entail_guard/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "entail_guard/errors.hpp"
#include "entail_guard/rng.hpp"

namespace entail_guard::stats {

namespace {

// One Fisher-Yates shuffle driven by a stream derived from (seed, draw).
// Keyed per draw so the count is independent of iteration order.
long long shuffled_statistic(std::span<const long long> x2, std::vector<long long>& scratch,
                             std::span<const long long> y2, std::uint64_t seed,
                             std::uint64_t draw) {
    scratch.assign(y2.begin(), y2.end());
    SplitMix64 rng(hash_combine(seed, draw));
    for (std::size_t i = scratch.size() - 1; i > 0; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
        std::swap(scratch[i], scratch[j]);
    }
    return rank_product_statistic(x2, scratch);
}

long long factorial(int n) {
    long long f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        // Positions i..j (0-based) share the average of ranks i+1..j+1.
        const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

std::vector<long long> doubled_ranks(std::span<const double> values) {
    std::vector<double> ranks = average_ranks(values);
    std::vector<long long> doubled(ranks.size());
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        doubled[i] = std::llround(ranks[i] * 2.0);
    }
    return doubled;
}

long long rank_product_statistic(std::span<const long long> x2,
                                 std::span<const long long> y2) {
    const long long n = static_cast<long long>(x2.size());
    long long sum_xy = 0;
    long long sum_x = 0;
    long long sum_y = 0;
    for (std::size_t i = 0; i < x2.size(); ++i) {
        sum_xy += x2[i] * y2[i];
        sum_x += x2[i];
        sum_y += y2[i];
    }
    return n * sum_xy - sum_x * sum_y;
}

long long mc_permutation_exceed_count_serial(std::span<const long long> x2,
                                             std::span<const long long> y2,
                                             long long threshold, int draws,
                                             std::uint64_t seed) {
    long long count = 0;
    std::vector<long long> scratch;
    for (int d = 0; d < draws; ++d) {
        if (std::llabs(shuffled_statistic(x2, scratch, y2, seed, static_cast<std::uint64_t>(d))) >=
            threshold) {
            ++count;
        }
    }
    return count;
}

long long mc_permutation_exceed_count(std::span<const long long> x2,
                                      std::span<const long long> y2, long long threshold,
                                      int draws, std::uint64_t seed) {
    long long count = 0;
#pragma omp parallel reduction(+ : count)
    {
        std::vector<long long> scratch;
#pragma omp for schedule(static)
        for (int d = 0; d < draws; ++d) {
            if (std::llabs(shuffled_statistic(x2, scratch, y2, seed,
                                              static_cast<std::uint64_t>(d))) >= threshold) {
                ++count;
            }
        }
    }
    return count;
}

long long exact_permutation_exceed_count(std::span<const long long> x2,
                                         std::span<const long long> y2,
                                         long long threshold) {
    std::vector<std::size_t> index(y2.size());
    std::iota(index.begin(), index.end(), 0);
    std::vector<long long> permuted(y2.size());
    long long count = 0;
    do {
        for (std::size_t i = 0; i < index.size(); ++i) permuted[i] = y2[index[i]];
        if (std::llabs(rank_product_statistic(x2, permuted)) >= threshold) ++count;
    } while (std::next_permutation(index.begin(), index.end()));
    return count;
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y,
                        const SpearmanOptions& options) {
    if (x.size() != y.size()) {
        std::ostringstream msg;
        msg << "spearman: length mismatch (" << x.size() << " vs " << y.size() << ")";
        throw ValidationError(msg.str());
    }
    const int n = static_cast<int>(x.size());
    if (n < 2) throw ValidationError("spearman: need at least 2 observations");

    const std::vector<long long> x2 = doubled_ranks(x);
    const std::vector<long long> y2 = doubled_ranks(y);

    const long long nn = n;
    auto centered_ss = [nn](const std::vector<long long>& v) {
        long long sum = 0;
        long long sum_sq = 0;
        for (long long r : v) {
            sum += r;
            sum_sq += r * r;
        }
        return nn * sum_sq - sum * sum;
    };
    const long long bxx = centered_ss(x2);
    const long long byy = centered_ss(y2);
    if (bxx == 0 || byy == 0) {
        throw ValidationError("spearman: zero-variance input, rho undefined");
    }

    const long long a_obs = rank_product_statistic(x2, y2);
    SpearmanResult result;
    result.n = n;
    result.rho = static_cast<double>(a_obs) /
                 std::sqrt(static_cast<double>(bxx) * static_cast<double>(byy));

    const long long threshold = std::llabs(a_obs);
    if (n <= options.exact_max_n) {
        const long long count = exact_permutation_exceed_count(x2, y2, threshold);
        result.p_value = static_cast<double>(count) / static_cast<double>(factorial(n));
        result.exact = true;
    } else {
        const long long count =
            mc_permutation_exceed_count(x2, y2, threshold, options.mc_draws, options.mc_seed);
        result.p_value =
            static_cast<double>(count + 1) / static_cast<double>(options.mc_draws + 1);
        result.exact = false;
    }
    return result;
}

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("incomplete beta: a, b must be > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;

    // Modified Lentz continued fraction for I_x(a,b).
    auto continued_fraction = [](double aa, double bb, double xx) {
        constexpr double kTiny = 1e-300;
        constexpr double kRelTol = 1e-14;
        constexpr int kMaxIters = 500;
        const double qab = aa + bb;
        const double qap = aa + 1.0;
        const double qam = aa - 1.0;
        double c = 1.0;
        double d = 1.0 - qab * xx / qap;
        if (std::abs(d) < kTiny) d = kTiny;
        d = 1.0 / d;
        double h = d;
        for (int m = 1; m <= kMaxIters; ++m) {
            const double m2 = 2.0 * m;
            double num = m * (bb - m) * xx / ((qam + m2) * (aa + m2));
            d = 1.0 + num * d;
            if (std::abs(d) < kTiny) d = kTiny;
            c = 1.0 + num / c;
            if (std::abs(c) < kTiny) c = kTiny;
            d = 1.0 / d;
            h *= d * c;
            num = -(aa + m) * (qab + m) * xx / ((aa + m2) * (qap + m2));
            d = 1.0 + num * d;
            if (std::abs(d) < kTiny) d = kTiny;
            c = 1.0 + num / c;
            if (std::abs(c) < kTiny) c = kTiny;
            d = 1.0 / d;
            const double delta = d * c;
            h *= delta;
            if (std::abs(delta - 1.0) < kRelTol) return h;
        }
        throw Error("incomplete beta: continued fraction did not converge");
    };

    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
    if (!(dof > 0.0)) throw ValidationError("t distribution: dof must be > 0");
    if (t == 0.0) return 1.0;
    // 2 * (1 - F(|t|)) = I_{dof/(dof+t^2)}(dof/2, 1/2)
    const double x = dof / (dof + t * t);
    return regularized_incomplete_beta(dof / 2.0, 0.5, x);
}

RegressionResult ols_regress(std::span<const double> outcome,
                             std::span<const std::string> labels,
                             const std::string& baseline,
                             const std::string& outcome_name) {
    if (outcome.size() != labels.size()) {
        throw ValidationError("ols_regress: outcome and labels lengths differ");
    }
    const int n = static_cast<int>(outcome.size());

    std::set<std::string> level_set(labels.begin(), labels.end());
    level_set.erase(baseline);
    const std::vector<std::string> levels(level_set.begin(), level_set.end());
    const int k = 1 + static_cast<int>(levels.size());
    if (n <= k) {
        std::ostringstream msg;
        msg << "ols_regress: need more than " << k << " observations, got " << n;
        throw ValidationError(msg.str());
    }

    // Design matrix, row-major: intercept column then one dummy per level.
    std::vector<double> design(static_cast<std::size_t>(n) * k, 0.0);
    std::map<std::string, int> level_column;
    for (int j = 0; j < static_cast<int>(levels.size()); ++j) level_column[levels[j]] = j + 1;
    for (int i = 0; i < n; ++i) {
        design[static_cast<std::size_t>(i) * k] = 1.0;
        auto it = level_column.find(labels[i]);
        if (it != level_column.end()) {
            design[static_cast<std::size_t>(i) * k + it->second] = 1.0;
        }
    }

    // Householder QR in place; rhs carries Q^T y.
    std::vector<double> r(design);
    std::vector<double> rhs(outcome.begin(), outcome.end());
    auto at = [&](int row, int col) -> double& { return r[static_cast<std::size_t>(row) * k + col]; };
    for (int col = 0; col < k; ++col) {
        double norm = 0.0;
        for (int row = col; row < n; ++row) norm += at(row, col) * at(row, col);
        norm = std::sqrt(norm);
        if (norm < 1e-10) {
            throw ValidationError("ols_regress: design matrix is rank deficient (column '" +
                                  (col == 0 ? std::string("intercept") : levels[col - 1]) +
                                  "')");
        }
        if (at(col, col) > 0.0) norm = -norm;
        std::vector<double> v(n - col);
        v[0] = at(col, col) - norm;
        for (int row = col + 1; row < n; ++row) v[row - col] = at(row, col);
        double v_norm_sq = 0.0;
        for (double value : v) v_norm_sq += value * value;
        if (v_norm_sq > 0.0) {
            for (int target = col; target < k; ++target) {
                double dot = 0.0;
                for (int row = col; row < n; ++row) dot += v[row - col] * at(row, target);
                const double scale = 2.0 * dot / v_norm_sq;
                for (int row = col; row < n; ++row) at(row, target) -= scale * v[row - col];
            }
            double dot = 0.0;
            for (int row = col; row < n; ++row) dot += v[row - col] * rhs[row];
            const double scale = 2.0 * dot / v_norm_sq;
            for (int row = col; row < n; ++row) rhs[row] -= scale * v[row - col];
        }
    }
    for (int col = 0; col < k; ++col) {
        if (std::abs(at(col, col)) < 1e-10) {
            throw ValidationError("ols_regress: design matrix is rank deficient");
        }
    }

    // Back substitution for beta.
    std::vector<double> beta(k, 0.0);
    for (int row = k - 1; row >= 0; --row) {
        double value = rhs[row];
        for (int col = row + 1; col < k; ++col) value -= at(row, col) * beta[col];
        beta[row] = value / at(row, row);
    }

    // Residual sum of squares from the original design.
    double rss = 0.0;
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += outcome[i];
    mean /= n;
    double tss = 0.0;
    for (int i = 0; i < n; ++i) {
        double fitted = 0.0;
        for (int col = 0; col < k; ++col) {
            fitted += design[static_cast<std::size_t>(i) * k + col] * beta[col];
        }
        const double resid = outcome[i] - fitted;
        rss += resid * resid;
        tss += (outcome[i] - mean) * (outcome[i] - mean);
    }
    const double dof = n - k;
    const double sigma_sq = rss / dof;

    // (X^T X)^{-1} = R^{-1} R^{-T} from the k x k upper block of R.
    std::vector<double> r_inv(static_cast<std::size_t>(k) * k, 0.0);
    for (int col = 0; col < k; ++col) {
        r_inv[static_cast<std::size_t>(col) * k + col] = 1.0 / at(col, col);
        for (int row = col - 1; row >= 0; --row) {
            double value = 0.0;
            for (int mid = row + 1; mid <= col; ++mid) {
                value -= at(row, mid) * r_inv[static_cast<std::size_t>(mid) * k + col];
            }
            r_inv[static_cast<std::size_t>(row) * k + col] = value / at(row, row);
        }
    }

    RegressionResult result;
    result.outcome = outcome_name;
    result.baseline = baseline;
    result.n = n;
    result.r_squared = tss > 0.0 ? 1.0 - rss / tss : 1.0;
    for (int j = 0; j < k; ++j) {
        double var = 0.0;
        for (int col = j; col < k; ++col) {
            var += r_inv[static_cast<std::size_t>(j) * k + col] *
                   r_inv[static_cast<std::size_t>(j) * k + col];
        }
        Coefficient coefficient;
        coefficient.name = j == 0 ? "intercept" : levels[j - 1];
        coefficient.beta = beta[j];
        coefficient.std_error = std::sqrt(sigma_sq * var);
        coefficient.t_stat =
            coefficient.std_error > 0.0 ? coefficient.beta / coefficient.std_error : 0.0;
        coefficient.p_value = coefficient.std_error > 0.0
                                  ? student_t_two_sided_p(coefficient.t_stat, dof)
                                  : 1.0;
        result.coefficients.push_back(std::move(coefficient));
    }
    return result;
}

}  // namespace entail_guard::stats
