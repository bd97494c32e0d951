#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace entail_guard {

/// One sentence of a source string. Offsets are byte offsets into the source
/// (end exclusive); `text` is the span with surrounding whitespace trimmed.
/// Spans never overlap, appear in source order, and everything between two
/// spans (and before the first / after the last) is whitespace.
struct Sentence {
    std::string text;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    // False for a trailing fragment without terminal punctuation.
    bool terminated = true;

    friend bool operator==(const Sentence&, const Sentence&) = default;
};

/// Deterministic rule-based splitter. A boundary falls after '.', '!' or '?'
/// (plus any closing quotes/brackets) when whitespace and then an uppercase
/// letter, digit, or opening quote follows. Boundaries are suppressed after
/// known abbreviations and inside decimal numbers. Trailing text without
/// terminal punctuation becomes a final sentence with terminated=false.
class Segmenter {
public:
    Segmenter();
    explicit Segmenter(std::set<std::string> abbreviations);

    std::vector<Sentence> split(std::string_view source) const;

    static const std::set<std::string>& default_abbreviations();

private:
    std::set<std::string> abbreviations_;
};

/// split with the default abbreviation list.
std::vector<Sentence> split_sentences(std::string_view source);

/// Reads a plain-text abbreviation list, one entry per line; '#' lines and
/// blank lines are ignored.
std::set<std::string> load_abbreviations(const std::filesystem::path& path);

}  // namespace entail_guard
