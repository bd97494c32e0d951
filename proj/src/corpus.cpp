#include "entail_guard/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "entail_guard/errors.hpp"

namespace entail_guard {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::string_view kCorpusSchema = "entail-guard/corpus-v1";

[[noreturn]] void fail(std::string_view origin, std::size_t line, const std::string& what) {
    std::ostringstream msg;
    msg << origin << ":" << line << ": " << what;
    throw ValidationError(msg.str());
}

AnnotatedExample parse_record(const json& j, std::string_view origin, std::size_t line) {
    if (!j.is_object()) fail(origin, line, "record is not a JSON object");
    if (j.contains("schema") && j["schema"] != kCorpusSchema) {
        fail(origin, line, "unexpected schema: " + j["schema"].dump());
    }
    AnnotatedExample ex;
    try {
        ex.id = j.at("id").get<std::string>();
        ex.prompt = j.at("prompt").get<std::string>();
        ex.generation = j.at("generation").get<std::string>();
        const json& cond = j.at("condition");
        ex.condition.strategy = cond.at("strategy").get<std::string>();
        ex.condition.top_p = cond.at("top_p").get<double>();
    } catch (const json::exception& e) {
        fail(origin, line, std::string("missing or mistyped field: ") + e.what());
    }
    if (ex.id.empty()) fail(origin, line, "field 'id' is empty");

    if (j.contains("spans")) {
        std::size_t index = 0;
        for (const json& s : j.at("spans")) {
            AnnotatedSpan span;
            try {
                span.error_type = error_type_from_string(s.at("type").get<std::string>());
                span.char_start = s.at("start").get<std::size_t>();
                span.char_end = s.at("end").get<std::size_t>();
                span.agreement = s.at("agreement").get<double>();
            } catch (const json::exception& e) {
                fail(origin, line,
                     "span " + std::to_string(index) + ": missing or mistyped field: " + e.what());
            } catch (const ValidationError& e) {
                fail(origin, line, "span " + std::to_string(index) + ": " + e.what());
            }
            if (span.char_start >= span.char_end) {
                fail(origin, line,
                     "span " + std::to_string(index) + ": char_start must be < char_end");
            }
            if (span.char_end > ex.generation.size()) {
                fail(origin, line,
                     "span " + std::to_string(index) + ": char_end " +
                         std::to_string(span.char_end) + " exceeds generation length " +
                         std::to_string(ex.generation.size()));
            }
            if (!(span.agreement > 0.0 && span.agreement <= 1.0)) {
                fail(origin, line,
                     "span " + std::to_string(index) + ": agreement must lie in (0,1]");
            }
            ex.spans.push_back(span);
            ++index;
        }
    }

    if (j.contains("ratings")) {
        for (const json& r : j.at("ratings")) {
            if (!r.is_number_integer()) fail(origin, line, "ratings must be integers");
            const int value = r.get<int>();
            if (value < 1 || value > 5) {
                fail(origin, line, "rating " + std::to_string(value) + " outside [1,5]");
            }
            ex.holistic_ratings.push_back(value);
        }
    }
    return ex;
}

}  // namespace

std::string_view to_string(ErrorType type) {
    switch (type) {
        case ErrorType::OffPrompt: return "OP";
        case ErrorType::SelfContradiction: return "SC";
        case ErrorType::Incoherent: return "IN";
        case ErrorType::Redundant: return "RD";
    }
    throw ValidationError("unknown error type");
}

ErrorType error_type_from_string(std::string_view s) {
    if (s == "OP") return ErrorType::OffPrompt;
    if (s == "SC") return ErrorType::SelfContradiction;
    if (s == "IN" || s == "IC") return ErrorType::Incoherent;
    if (s == "RD") return ErrorType::Redundant;
    throw ValidationError("unknown error type: " + std::string(s));
}

std::vector<AnnotatedExample> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open corpus file: " + path.string());
    return parse_corpus(in, path.string());
}

std::vector<AnnotatedExample> parse_corpus(std::istream& in, std::string_view origin) {
    std::vector<AnnotatedExample> corpus;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            fail(origin, line_number, std::string("invalid JSON: ") + e.what());
        }
        AnnotatedExample ex = parse_record(record, origin, line_number);
        if (!seen_ids.insert(ex.id).second) {
            fail(origin, line_number, "duplicate id '" + ex.id + "'");
        }
        corpus.push_back(std::move(ex));
    }
    return corpus;
}

std::string corpus_to_jsonl(const std::vector<AnnotatedExample>& corpus) {
    std::ostringstream out;
    for (const AnnotatedExample& ex : corpus) {
        ordered_json spans = ordered_json::array();
        for (const AnnotatedSpan& s : ex.spans) {
            spans.push_back(ordered_json{{"type", std::string(to_string(s.error_type))},
                                         {"start", s.char_start},
                                         {"end", s.char_end},
                                         {"agreement", s.agreement}});
        }
        ordered_json record{
            {"schema", kCorpusSchema},
            {"id", ex.id},
            {"prompt", ex.prompt},
            {"generation", ex.generation},
            {"condition",
             ordered_json{{"strategy", ex.condition.strategy}, {"top_p", ex.condition.top_p}}},
            {"spans", spans},
            {"ratings", ex.holistic_ratings},
        };
        out << record.dump() << "\n";
    }
    return out.str();
}

void save_corpus(const std::vector<AnnotatedExample>& corpus,
                 const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write corpus file: " + path.string());
    out << corpus_to_jsonl(corpus);
}

std::vector<AnnotatedSpan> qualifying_spans(const AnnotatedExample& example,
                                            double min_agreement) {
    std::vector<AnnotatedSpan> out;
    for (const AnnotatedSpan& span : example.spans) {
        if (span.agreement >= min_agreement) out.push_back(span);
    }
    return out;
}

double error_char_proportion(const AnnotatedExample& example, ErrorType type,
                             double min_agreement) {
    if (example.generation.empty()) return 0.0;
    std::vector<std::pair<std::size_t, std::size_t>> intervals;
    for (const AnnotatedSpan& span : example.spans) {
        if (span.error_type == type && span.agreement >= min_agreement) {
            intervals.emplace_back(span.char_start, span.char_end);
        }
    }
    if (intervals.empty()) return 0.0;
    std::sort(intervals.begin(), intervals.end());
    std::size_t covered = 0;
    std::size_t cur_start = intervals[0].first;
    std::size_t cur_end = intervals[0].second;
    for (std::size_t i = 1; i < intervals.size(); ++i) {
        if (intervals[i].first <= cur_end) {
            cur_end = std::max(cur_end, intervals[i].second);
        } else {
            covered += cur_end - cur_start;
            cur_start = intervals[i].first;
            cur_end = intervals[i].second;
        }
    }
    covered += cur_end - cur_start;
    return static_cast<double>(covered) / static_cast<double>(example.generation.size());
}

}  // namespace entail_guard
