#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "entail_guard/backends.hpp"
#include "entail_guard/corpus.hpp"
#include "entail_guard/nli.hpp"
#include "entail_guard/stats.hpp"

namespace entail_guard {

/// One row of a class-distribution or contingency table: the share of items
/// in the group falling under each argmax NLI label, in percent. `category`
/// is "All" for plain distributions, or the error type ("OP"/"SC"/"IN"/"RD"),
/// or "CO" for examples without qualifying spans. Empty groups are all-zero
/// and flagged.
struct ClassDistributionRow {
    double top_p = 1.0;
    std::string category = "All";
    double percent_con = 0.0;
    double percent_ent = 0.0;
    double percent_neu = 0.0;
    int n = 0;
    bool empty = true;
};

/// One NLI call per example: the whole prompt as premise, the whole
/// generation as hypothesis. Backend errors are annotated with the example
/// id. Wrap the backend in CachedNliBackend to pay for each pair once.
std::map<std::string, NliDistribution> classify_examples(
    const NliBackend& nli, const std::vector<AnnotatedExample>& corpus);

std::map<std::string, NliLabel> labels_of(
    const std::map<std::string, NliDistribution>& distributions);

/// Percentage of examples per argmax label, grouped by condition.top_p
/// (ascending). When `groups` is given, exactly those groups are reported,
/// including empty ones.
std::vector<ClassDistributionRow> class_distribution(
    const std::map<std::string, NliLabel>& labels,
    const std::vector<AnnotatedExample>& corpus,
    const std::optional<std::vector<double>>& groups = std::nullopt);

/// Per top_p group: the All row (equal to class_distribution), the CO row
/// (examples with zero qualifying spans), and one row per error type where
/// each qualifying span inherits its example's argmax label.
std::vector<ClassDistributionRow> error_class_contingency(
    const std::map<std::string, NliLabel>& labels,
    const std::vector<AnnotatedExample>& corpus, double min_agreement = 0.5);

struct CorrelationResult {
    double top_p = 1.0;
    ErrorType error_type = ErrorType::OffPrompt;
    NliLabel nli_class = NliLabel::Neutral;
    double rho = 0.0;
    double p_value = 1.0;
    int n = 0;
    bool defined = false;  // false when either side has zero variance
    bool exact = false;
};

/// Spearman correlations, per top_p group, between the per-example character
/// proportion of each error type and the raw probability of each NLI class.
std::vector<CorrelationResult> correlation_report(
    const NliBackend& nli, const std::vector<AnnotatedExample>& corpus,
    double min_agreement = 0.5, const stats::SpearmanOptions& options = {});

/// Same, over precomputed distributions.
std::vector<CorrelationResult> correlation_report(
    const std::map<std::string, NliDistribution>& distributions,
    const std::vector<AnnotatedExample>& corpus, double min_agreement = 0.5,
    const stats::SpearmanOptions& options = {});

/// Outcome definition for the per-error-type regressions.
enum class ErrorOutcome { QualifyingSpanCount, CharProportion };

struct GroupedRegression {
    double top_p = 1.0;
    stats::RegressionResult regression;
};

/// Regression of the mean holistic rating on the strategy (baseline
/// CONTROL), run separately per top_p group. Examples without ratings are
/// skipped. Returned in ascending top_p order; outcome name "holistic".
std::vector<GroupedRegression> holistic_rating_regressions(
    const std::vector<AnnotatedExample>& corpus, const std::string& baseline = "CONTROL");

/// Per-error-type regressions: the outcome per example is either the number
/// of qualifying spans of that type or their character proportion. One
/// result per (top_p group x error type); outcome names like "count:RD".
std::vector<GroupedRegression> error_type_regressions(
    const std::vector<AnnotatedExample>& corpus,
    ErrorOutcome outcome = ErrorOutcome::QualifyingSpanCount, double min_agreement = 0.5,
    const std::string& baseline = "CONTROL");

}  // namespace entail_guard
