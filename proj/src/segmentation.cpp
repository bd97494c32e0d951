#include "entail_guard/segmentation.hpp"

#include <cctype>
#include <fstream>

#include "entail_guard/errors.hpp"

namespace entail_guard {

namespace {

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

bool is_upper(char c) {
    return std::isupper(static_cast<unsigned char>(c)) != 0;
}

bool is_digit(char c) {
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
}

bool is_terminal(char c) {
    return c == '.' || c == '!' || c == '?';
}

// Length of a closing quote/bracket at position i (0 if none). Covers ASCII
// closers plus UTF-8 right double/single quotation marks.
std::size_t closer_len(std::string_view s, std::size_t i) {
    if (i >= s.size()) return 0;
    char c = s[i];
    if (c == '"' || c == '\'' || c == ')' || c == ']' || c == '}') return 1;
    if (s.size() - i >= 3 && s[i] == '\xE2' && s[i + 1] == '\x80' &&
        (s[i + 2] == '\x9D' || s[i + 2] == '\x99')) {
        return 3;
    }
    return 0;
}

// True when position i starts an opening quote or bracket (ASCII or the UTF-8
// left double/single quotation marks).
bool is_opener(std::string_view s, std::size_t i) {
    if (i >= s.size()) return false;
    char c = s[i];
    if (c == '"' || c == '\'' || c == '(' || c == '[' || c == '{') return true;
    return s.size() - i >= 3 && s[i] == '\xE2' && s[i + 1] == '\x80' &&
           (s[i + 2] == '\x9C' || s[i + 2] == '\x98');
}

// The whitespace-delimited token ending at dot_index (inclusive), with any
// leading openers stripped, e.g. `(e.g.` -> `e.g.`.
std::string_view token_ending_at(std::string_view s, std::size_t dot_index) {
    std::size_t begin = dot_index;
    while (begin > 0 && !is_space(s[begin - 1])) --begin;
    while (begin < dot_index && is_opener(s, begin)) {
        begin += s[begin] == '\xE2' ? 3 : 1;
    }
    return s.substr(begin, dot_index - begin + 1);
}

bool span_is_terminated(std::string_view s, std::size_t begin, std::size_t end) {
    while (end > begin) {
        // Strip trailing closers, then look for terminal punctuation.
        std::size_t step = 0;
        if (end - begin >= 3 && closer_len(s, end - 3) == 3) {
            step = 3;
        } else if (closer_len(s, end - 1) == 1) {
            step = 1;
        }
        if (step == 0) break;
        end -= step;
    }
    return end > begin && is_terminal(s[end - 1]);
}

std::string trimmed(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

}  // namespace

Segmenter::Segmenter() : abbreviations_(default_abbreviations()) {}

Segmenter::Segmenter(std::set<std::string> abbreviations)
    : abbreviations_(std::move(abbreviations)) {}

const std::set<std::string>& Segmenter::default_abbreviations() {
    static const std::set<std::string> kList = {
        "Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "St.", "vs.",
        "e.g.", "i.e.", "etc.", "U.S.", "a.m.", "p.m.",
    };
    return kList;
}

std::vector<Sentence> Segmenter::split(std::string_view source) const {
    std::vector<Sentence> sentences;
    const std::size_t n = source.size();

    auto emit = [&](std::size_t begin, std::size_t end) {
        Sentence s;
        s.char_start = begin;
        s.char_end = end;
        s.text = trimmed(source.substr(begin, end - begin));
        s.terminated = span_is_terminated(source, begin, end);
        sentences.push_back(std::move(s));
    };

    std::size_t start = 0;
    while (start < n && is_space(source[start])) ++start;
    if (start == n) return sentences;

    std::size_t i = start;
    while (i < n) {
        char c = source[i];
        if (!is_terminal(c)) {
            ++i;
            continue;
        }
        // Consume closing quotes/brackets after the terminal punctuation.
        std::size_t j = i + 1;
        while (j < n) {
            std::size_t len = closer_len(source, j);
            if (len == 0) break;
            j += len;
        }
        if (j >= n) {
            emit(start, j);
            start = n;
            i = n;
            break;
        }
        if (!is_space(source[j])) {
            ++i;
            continue;
        }
        std::size_t k = j;
        while (k < n && is_space(source[k])) ++k;
        if (k == n || !(is_upper(source[k]) || is_digit(source[k]) || is_opener(source, k))) {
            ++i;
            continue;
        }
        if (c == '.') {
            bool decimal = i > 0 && is_digit(source[i - 1]) && i + 1 < n && is_digit(source[i + 1]);
            if (decimal || abbreviations_.count(std::string(token_ending_at(source, i))) > 0) {
                ++i;
                continue;
            }
        }
        emit(start, j);
        start = k;
        i = k;
    }

    if (start < n) {
        // Trailing text; trim the span to the last non-whitespace byte.
        std::size_t end = n;
        while (end > start && is_space(source[end - 1])) --end;
        if (end > start) emit(start, end);
    }
    return sentences;
}

std::vector<Sentence> split_sentences(std::string_view source) {
    static const Segmenter segmenter;
    return segmenter.split(source);
}

std::set<std::string> load_abbreviations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open abbreviation list: " + path.string());
    std::set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string entry = trimmed(line);
        if (entry.empty() || entry[0] == '#') continue;
        out.insert(entry);
    }
    return out;
}

}  // namespace entail_guard
