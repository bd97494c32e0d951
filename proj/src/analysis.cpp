#include "entail_guard/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "entail_guard/errors.hpp"

namespace entail_guard {

namespace {

struct LabelCounts {
    int con = 0;
    int ent = 0;
    int neu = 0;

    int total() const { return con + ent + neu; }

    void add(NliLabel label) {
        switch (label) {
            case NliLabel::Contradiction: ++con; break;
            case NliLabel::Entailment: ++ent; break;
            case NliLabel::Neutral: ++neu; break;
        }
    }
};

ClassDistributionRow row_from_counts(double top_p, std::string category,
                                     const LabelCounts& counts) {
    ClassDistributionRow row;
    row.top_p = top_p;
    row.category = std::move(category);
    row.n = counts.total();
    row.empty = row.n == 0;
    if (!row.empty) {
        const double total = static_cast<double>(row.n);
        row.percent_con = 100.0 * counts.con / total;
        row.percent_ent = 100.0 * counts.ent / total;
        row.percent_neu = 100.0 * counts.neu / total;
    }
    return row;
}

// Groups example indices by condition.top_p, keys ascending.
std::map<double, std::vector<std::size_t>> group_by_top_p(
    const std::vector<AnnotatedExample>& corpus) {
    std::map<double, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        groups[corpus[i].condition.top_p].push_back(i);
    }
    return groups;
}

NliLabel label_for(const std::map<std::string, NliLabel>& labels,
                   const AnnotatedExample& example) {
    auto it = labels.find(example.id);
    if (it == labels.end()) {
        throw ValidationError("no NLI label for example id '" + example.id + "'");
    }
    return it->second;
}

}  // namespace

std::map<std::string, NliDistribution> classify_examples(
    const NliBackend& nli, const std::vector<AnnotatedExample>& corpus) {
    std::map<std::string, NliDistribution> out;
    for (const AnnotatedExample& example : corpus) {
        if (example.prompt.empty()) {
            throw ValidationError("example '" + example.id + "' has an empty prompt");
        }
        if (example.generation.empty()) {
            throw ValidationError("example '" + example.id + "' has an empty generation");
        }
        try {
            out.insert_or_assign(example.id,
                                 nli.classify(NliRequest{example.prompt, example.generation}));
        } catch (const std::exception& e) {
            throw Error("NLI classification failed for example '" + example.id +
                        "': " + e.what());
        }
    }
    return out;
}

std::map<std::string, NliLabel> labels_of(
    const std::map<std::string, NliDistribution>& distributions) {
    std::map<std::string, NliLabel> out;
    for (const auto& [id, d] : distributions) {
        out.insert_or_assign(id, label_of(d));
    }
    return out;
}

std::vector<ClassDistributionRow> class_distribution(
    const std::map<std::string, NliLabel>& labels,
    const std::vector<AnnotatedExample>& corpus,
    const std::optional<std::vector<double>>& groups) {
    std::map<double, LabelCounts> counts;
    if (groups) {
        for (double g : *groups) counts.emplace(g, LabelCounts{});
    }
    for (const AnnotatedExample& example : corpus) {
        if (groups && counts.find(example.condition.top_p) == counts.end()) continue;
        counts[example.condition.top_p].add(label_for(labels, example));
    }
    std::vector<ClassDistributionRow> rows;
    for (const auto& [top_p, c] : counts) {
        rows.push_back(row_from_counts(top_p, "All", c));
    }
    return rows;
}

std::vector<ClassDistributionRow> error_class_contingency(
    const std::map<std::string, NliLabel>& labels,
    const std::vector<AnnotatedExample>& corpus, double min_agreement) {
    std::vector<ClassDistributionRow> rows;
    for (const auto& [top_p, indices] : group_by_top_p(corpus)) {
        LabelCounts all;
        LabelCounts correct;
        std::map<ErrorType, LabelCounts> span_counts;
        for (ErrorType type : kErrorTypes) span_counts.emplace(type, LabelCounts{});

        for (std::size_t index : indices) {
            const AnnotatedExample& example = corpus[index];
            const NliLabel label = label_for(labels, example);
            all.add(label);
            const std::vector<AnnotatedSpan> spans = qualifying_spans(example, min_agreement);
            if (spans.empty()) {
                correct.add(label);
            }
            for (const AnnotatedSpan& span : spans) {
                span_counts[span.error_type].add(label);
            }
        }

        rows.push_back(row_from_counts(top_p, "All", all));
        rows.push_back(row_from_counts(top_p, "CO", correct));
        for (ErrorType type : kErrorTypes) {
            rows.push_back(
                row_from_counts(top_p, std::string(to_string(type)), span_counts[type]));
        }
    }
    return rows;
}

std::vector<CorrelationResult> correlation_report(
    const NliBackend& nli, const std::vector<AnnotatedExample>& corpus, double min_agreement,
    const stats::SpearmanOptions& options) {
    return correlation_report(classify_examples(nli, corpus), corpus, min_agreement, options);
}

std::vector<CorrelationResult> correlation_report(
    const std::map<std::string, NliDistribution>& distributions,
    const std::vector<AnnotatedExample>& corpus, double min_agreement,
    const stats::SpearmanOptions& options) {
    constexpr std::array<NliLabel, 3> kLabels = {
        NliLabel::Contradiction,
        NliLabel::Entailment,
        NliLabel::Neutral,
    };
    std::vector<CorrelationResult> results;
    for (const auto& [top_p, indices] : group_by_top_p(corpus)) {
        for (ErrorType type : kErrorTypes) {
            std::vector<double> proportions;
            proportions.reserve(indices.size());
            for (std::size_t index : indices) {
                proportions.push_back(
                    error_char_proportion(corpus[index], type, min_agreement));
            }
            for (NliLabel label : kLabels) {
                std::vector<double> probabilities;
                probabilities.reserve(indices.size());
                for (std::size_t index : indices) {
                    auto it = distributions.find(corpus[index].id);
                    if (it == distributions.end()) {
                        throw ValidationError("no NLI distribution for example id '" +
                                              corpus[index].id + "'");
                    }
                    probabilities.push_back(it->second.probability_of(label));
                }
                CorrelationResult result;
                result.top_p = top_p;
                result.error_type = type;
                result.nli_class = label;
                result.n = static_cast<int>(indices.size());
                try {
                    const stats::SpearmanResult s =
                        stats::spearman(proportions, probabilities, options);
                    result.rho = s.rho;
                    result.p_value = s.p_value;
                    result.defined = true;
                    result.exact = s.exact;
                } catch (const ValidationError&) {
                    result.defined = false;
                }
                results.push_back(result);
            }
        }
    }
    return results;
}

std::vector<GroupedRegression> holistic_rating_regressions(
    const std::vector<AnnotatedExample>& corpus, const std::string& baseline) {
    std::vector<GroupedRegression> results;
    for (const auto& [top_p, indices] : group_by_top_p(corpus)) {
        std::vector<double> outcome;
        std::vector<std::string> labels;
        for (std::size_t index : indices) {
            const AnnotatedExample& example = corpus[index];
            if (example.holistic_ratings.empty()) continue;
            double sum = 0.0;
            for (int rating : example.holistic_ratings) sum += rating;
            outcome.push_back(sum / static_cast<double>(example.holistic_ratings.size()));
            labels.push_back(example.condition.strategy);
        }
        if (outcome.empty()) {
            throw ValidationError("no examples with holistic ratings in group top_p=" +
                                  std::to_string(top_p));
        }
        results.push_back(
            {top_p, stats::ols_regress(outcome, labels, baseline, "holistic")});
    }
    return results;
}

std::vector<GroupedRegression> error_type_regressions(
    const std::vector<AnnotatedExample>& corpus, ErrorOutcome outcome_kind,
    double min_agreement, const std::string& baseline) {
    std::vector<GroupedRegression> results;
    for (const auto& [top_p, indices] : group_by_top_p(corpus)) {
        for (ErrorType type : kErrorTypes) {
            std::vector<double> outcome;
            std::vector<std::string> labels;
            for (std::size_t index : indices) {
                const AnnotatedExample& example = corpus[index];
                double value = 0.0;
                if (outcome_kind == ErrorOutcome::QualifyingSpanCount) {
                    for (const AnnotatedSpan& span : qualifying_spans(example, min_agreement)) {
                        if (span.error_type == type) value += 1.0;
                    }
                } else {
                    value = error_char_proportion(example, type, min_agreement);
                }
                outcome.push_back(value);
                labels.push_back(example.condition.strategy);
            }
            const std::string name =
                std::string(outcome_kind == ErrorOutcome::QualifyingSpanCount ? "count:"
                                                                              : "proportion:") +
                std::string(to_string(type));
            results.push_back({top_p, stats::ols_regress(outcome, labels, baseline, name)});
        }
    }
    return results;
}

}  // namespace entail_guard
