#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace entail_guard {

/// Error categories used by the span annotations. The incoherent type is
/// canonicalized to "IN"; "IC" is accepted as an input alias. Examples with
/// zero qualifying spans form the derived CO (correct) pseudo-category.
enum class ErrorType { OffPrompt, SelfContradiction, Incoherent, Redundant };

inline constexpr std::array<ErrorType, 4> kErrorTypes = {
    ErrorType::OffPrompt,
    ErrorType::SelfContradiction,
    ErrorType::Incoherent,
    ErrorType::Redundant,
};

std::string_view to_string(ErrorType type);  // "OP", "SC", "IN", "RD"
ErrorType error_type_from_string(std::string_view s);

/// One annotated error span over the generation text. `agreement` is the
/// fraction of annotators who marked the span, in (0, 1].
struct AnnotatedSpan {
    ErrorType error_type = ErrorType::OffPrompt;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    double agreement = 1.0;

    friend bool operator==(const AnnotatedSpan&, const AnnotatedSpan&) = default;
};

/// Generation condition: the strategy (or source-model tag for ingested data)
/// and the nucleus sampling parameter.
struct Condition {
    std::string strategy = "CONTROL";
    double top_p = 1.0;

    friend bool operator==(const Condition&, const Condition&) = default;
};

struct AnnotatedExample {
    std::string id;
    std::string prompt;
    std::string generation;
    std::vector<AnnotatedSpan> spans;
    std::vector<int> holistic_ratings;  // 1-5 stars; may be empty
    Condition condition;

    friend bool operator==(const AnnotatedExample&, const AnnotatedExample&) = default;
};

/// Loads a JSONL corpus, validating every record. Errors carry the 1-based
/// line number and the offending field.
std::vector<AnnotatedExample> load_corpus(const std::filesystem::path& path);
std::vector<AnnotatedExample> parse_corpus(std::istream& in, std::string_view origin);

/// Writes the canonical JSONL form (fixed field order, "IN" spelling).
void save_corpus(const std::vector<AnnotatedExample>& corpus,
                 const std::filesystem::path& path);
std::string corpus_to_jsonl(const std::vector<AnnotatedExample>& corpus);

/// Spans marked by at least `min_agreement` of annotators (inclusive).
std::vector<AnnotatedSpan> qualifying_spans(const AnnotatedExample& example,
                                            double min_agreement = 0.5);

/// Fraction of generation characters covered by qualifying spans of the given
/// type, with overlaps merged; 0 for an empty generation.
double error_char_proportion(const AnnotatedExample& example, ErrorType type,
                             double min_agreement = 0.5);

}  // namespace entail_guard
