#include "entail_guard/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "entail_guard/errors.hpp"

namespace entail_guard {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::string_view kResultSchema = "entail-guard/result-v1";
constexpr std::string_view kTraceSchema = "entail-guard/trace-v1";
constexpr std::string_view kCacheSchema = "entail-guard/nli-cache-v1";

ordered_json distribution_json(const NliDistribution& d) {
    return ordered_json{{"contradiction", d.contradiction()},
                        {"neutral", d.neutral()},
                        {"entailment", d.entailment()}};
}

NliDistribution distribution_from(const json& j) {
    return NliDistribution(j.at("contradiction").get<double>(), j.at("neutral").get<double>(),
                           j.at("entailment").get<double>());
}

std::string fixed(double value, int decimals) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.*f", decimals, value);
    return buffer;
}

// Trims trailing zeros from a double used as a group key: 0.4 -> "0.4".
std::string group_key(double value) {
    std::string s = fixed(value, 6);
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

}  // namespace

ordered_json result_to_json(const GenerationResult& result, const std::string& id) {
    ordered_json j;
    j["schema"] = kResultSchema;
    if (!id.empty()) j["id"] = id;
    j["prompt"] = result.prompt;
    j["condition"] = ordered_json{{"strategy", std::string(to_string(result.condition.strategy))},
                                  {"top_p", result.condition.top_p}};
    j["stop_reason"] = std::string(to_string(result.stop_reason));
    j["runs_used"] = result.runs_used;
    j["attempts_per_run"] = result.attempts_per_run;
    j["accepted"] = result.accepted;
    j["continuation_text"] = result.continuation_text;
    return j;
}

ordered_json trace_to_json(const GenerationTrace& trace, const std::string& id,
                           const ConditionTag& condition) {
    ordered_json events = ordered_json::array();
    for (const TraceEvent& event : trace.events) {
        ordered_json checks = ordered_json::array();
        for (const NliCheck& check : event.checks) {
            checks.push_back(ordered_json{
                {"premise_text", check.premise_text},
                {"premise_origin", std::string(to_string(check.premise_origin))},
                {"distribution", distribution_json(check.distribution)},
                {"passed", check.passed},
            });
        }
        ordered_json e{
            {"run_index", event.run_index},
            {"attempt_index", event.attempt_index},
            {"candidate",
             ordered_json{{"text", event.candidate.text},
                          {"char_start", event.candidate.char_start},
                          {"char_end", event.candidate.char_end},
                          {"terminated", event.candidate.terminated}}},
            {"checks", checks},
            {"decision", std::string(to_string(event.decision))},
        };
        if (!event.note.empty()) e["note"] = event.note;
        events.push_back(std::move(e));
    }
    ordered_json j;
    j["schema"] = kTraceSchema;
    if (!id.empty()) j["id"] = id;
    j["condition"] = ordered_json{{"strategy", std::string(to_string(condition.strategy))},
                                  {"top_p", condition.top_p}};
    j["events"] = std::move(events);
    return j;
}

GenerationResult result_from_json(const json& j) {
    if (j.contains("schema") && j["schema"] != kResultSchema) {
        throw FormatError("unexpected result schema: " + j["schema"].dump());
    }
    GenerationResult result;
    try {
        result.prompt = j.at("prompt").get<std::string>();
        result.condition.strategy =
            strategy_kind_from_string(j.at("condition").at("strategy").get<std::string>());
        result.condition.top_p = j.at("condition").at("top_p").get<double>();
        result.stop_reason = stop_reason_from_string(j.at("stop_reason").get<std::string>());
        result.runs_used = j.at("runs_used").get<int>();
        result.attempts_per_run = j.at("attempts_per_run").get<std::vector<int>>();
        result.accepted = j.at("accepted").get<std::vector<std::string>>();
        result.continuation_text = j.at("continuation_text").get<std::string>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed result record: ") + e.what());
    }
    return result;
}

std::vector<PromptRecord> load_prompts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open prompts file: " + path.string());
    std::vector<PromptRecord> prompts;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_number) +
                                  ": invalid JSON: " + e.what());
        }
        PromptRecord record;
        try {
            record.id = j.at("id").get<std::string>();
            record.text = j.at("prompt").get<std::string>();
        } catch (const json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_number) +
                                  ": missing or mistyped field: " + e.what());
        }
        if (record.id.empty() || record.text.empty()) {
            throw ValidationError(path.string() + ":" + std::to_string(line_number) +
                                  ": 'id' and 'prompt' must be non-empty");
        }
        if (!seen.insert(record.id).second) {
            throw ValidationError(path.string() + ":" + std::to_string(line_number) +
                                  ": duplicate id '" + record.id + "'");
        }
        prompts.push_back(std::move(record));
    }
    if (prompts.empty()) throw ValidationError(path.string() + ": no prompts found");
    return prompts;
}

std::string nli_cache_to_json(const NliCacheMap& entries) {
    ordered_json list = ordered_json::array();
    for (const auto& [key, d] : entries) {
        ordered_json entry{{"premise", key.first}, {"hypothesis", key.second}};
        entry.update(distribution_json(d));
        list.push_back(std::move(entry));
    }
    ordered_json j{{"schema", kCacheSchema}, {"entries", std::move(list)}};
    return j.dump(2) + "\n";
}

NliCacheMap nli_cache_from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open NLI cache file: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("invalid JSON in " + path.string() + ": " + e.what());
    }
    if (j.contains("schema") && j["schema"] != kCacheSchema) {
        throw FormatError("unexpected cache schema in " + path.string());
    }
    NliCacheMap out;
    try {
        for (const json& entry : j.at("entries")) {
            out.insert_or_assign({entry.at("premise").get<std::string>(),
                                  entry.at("hypothesis").get<std::string>()},
                                 distribution_from(entry));
        }
    } catch (const json::exception& e) {
        throw FormatError("malformed cache entry in " + path.string() + ": " + e.what());
    }
    return out;
}

void save_nli_cache(const NliCacheMap& entries, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write NLI cache file: " + path.string());
    out << nli_cache_to_json(entries);
}

ordered_json distribution_report_json(const std::vector<ClassDistributionRow>& rows) {
    ordered_json groups = ordered_json::array();
    for (const ClassDistributionRow& row : rows) {
        groups.push_back(ordered_json{
            {"top_p", row.top_p},
            {"n", row.n},
            {"empty", row.empty},
            {"percent_con", row.percent_con},
            {"percent_ent", row.percent_ent},
            {"percent_neu", row.percent_neu},
        });
    }
    return ordered_json{{"schema", "entail-guard/report-distribution-v1"},
                        {"groups", std::move(groups)}};
}

std::string distribution_report_table(const std::vector<ClassDistributionRow>& rows) {
    std::ostringstream out;
    out << "p        n      CON     ENT     NEU\n";
    for (const ClassDistributionRow& row : rows) {
        char line[128];
        if (row.empty) {
            std::snprintf(line, sizeof(line), "%-8s %-5d %7s %7s %7s  (empty)\n",
                          group_key(row.top_p).c_str(), row.n, "-", "-", "-");
        } else {
            std::snprintf(line, sizeof(line), "%-8s %-5d %7.2f %7.2f %7.2f\n",
                          group_key(row.top_p).c_str(), row.n, row.percent_con,
                          row.percent_ent, row.percent_neu);
        }
        out << line;
    }
    return out.str();
}

ordered_json contingency_report_json(const std::vector<ClassDistributionRow>& rows) {
    // Rows arrive grouped by top_p with categories All/CO/OP/SC/IN/RD.
    ordered_json groups = ordered_json::array();
    double current_p = 0.0;
    bool have_group = false;
    for (const ClassDistributionRow& row : rows) {
        if (!have_group || row.top_p != current_p) {
            groups.push_back(ordered_json{{"top_p", row.top_p}, {"rows", ordered_json::array()}});
            current_p = row.top_p;
            have_group = true;
        }
        groups.back()["rows"].push_back(ordered_json{
            {"category", row.category},
            {"n", row.n},
            {"empty", row.empty},
            {"percent_con", row.percent_con},
            {"percent_ent", row.percent_ent},
            {"percent_neu", row.percent_neu},
        });
    }
    return ordered_json{{"schema", "entail-guard/report-errors-v1"},
                        {"groups", std::move(groups)}};
}

std::string contingency_report_table(const std::vector<ClassDistributionRow>& rows) {
    std::ostringstream out;
    double current_p = 0.0;
    bool have_group = false;
    for (const ClassDistributionRow& row : rows) {
        if (!have_group || row.top_p != current_p) {
            if (have_group) out << "\n";
            out << "p = " << group_key(row.top_p) << "\n";
            out << "       n      CON     ENT     NEU\n";
            current_p = row.top_p;
            have_group = true;
        }
        char line[128];
        if (row.empty) {
            std::snprintf(line, sizeof(line), "%-5s %-5d %7s %7s %7s  (empty)\n",
                          row.category.c_str(), row.n, "-", "-", "-");
        } else {
            std::snprintf(line, sizeof(line), "%-5s %-5d %7.2f %7.2f %7.2f\n",
                          row.category.c_str(), row.n, row.percent_con, row.percent_ent,
                          row.percent_neu);
        }
        out << line;
    }
    return out.str();
}

ordered_json correlation_report_json(const std::vector<CorrelationResult>& results) {
    ordered_json list = ordered_json::array();
    for (const CorrelationResult& r : results) {
        ordered_json entry{
            {"top_p", r.top_p},
            {"error_type", std::string(to_string(r.error_type))},
            {"nli_class", std::string(to_string(r.nli_class))},
            {"n", r.n},
            {"defined", r.defined},
        };
        if (r.defined) {
            entry["rho"] = r.rho;
            entry["p_value"] = r.p_value;
            entry["exact"] = r.exact;
        }
        list.push_back(std::move(entry));
    }
    return ordered_json{{"schema", "entail-guard/report-correlations-v1"},
                        {"results", std::move(list)}};
}

std::string correlation_report_table(const std::vector<CorrelationResult>& results) {
    std::ostringstream out;
    double current_p = 0.0;
    bool have_group = false;
    for (const CorrelationResult& r : results) {
        if (!have_group || r.top_p != current_p) {
            if (have_group) out << "\n";
            out << "p = " << group_key(r.top_p) << "  (rho / p-value, n=" << r.n << ")\n";
            out << "type       CON                ENT                NEU\n";
            current_p = r.top_p;
            have_group = true;
        }
        if (r.nli_class == NliLabel::Contradiction) {
            out << to_string(r.error_type) << "   ";
        }
        char cell[64];
        if (r.defined) {
            std::snprintf(cell, sizeof(cell), " %+6.3f / %-8.4g", r.rho, r.p_value);
        } else {
            std::snprintf(cell, sizeof(cell), " %6s / %-8s", "-", "-");
        }
        out << cell;
        if (r.nli_class == NliLabel::Neutral) out << "\n";
    }
    return out.str();
}

ordered_json regression_report_json(const std::vector<GroupedRegression>& results) {
    ordered_json list = ordered_json::array();
    for (const GroupedRegression& g : results) {
        ordered_json coefficients = ordered_json::array();
        for (const stats::Coefficient& c : g.regression.coefficients) {
            coefficients.push_back(ordered_json{
                {"name", c.name},
                {"beta", c.beta},
                {"std_error", c.std_error},
                {"t_stat", c.t_stat},
                {"p_value", c.p_value},
            });
        }
        list.push_back(ordered_json{
            {"top_p", g.top_p},
            {"outcome", g.regression.outcome},
            {"baseline", g.regression.baseline},
            {"n", g.regression.n},
            {"r_squared", g.regression.r_squared},
            {"coefficients", std::move(coefficients)},
        });
    }
    return ordered_json{{"schema", "entail-guard/report-regressions-v1"},
                        {"results", std::move(list)}};
}

std::string regression_report_table(const std::vector<GroupedRegression>& results) {
    std::ostringstream out;
    for (const GroupedRegression& g : results) {
        out << g.regression.outcome << "  p = " << group_key(g.top_p)
            << "  (baseline " << g.regression.baseline << ", n=" << g.regression.n
            << ", R^2=" << fixed(g.regression.r_squared, 4) << ")\n";
        out << "  coefficient       beta   std_err    t_stat   p_value\n";
        for (const stats::Coefficient& c : g.regression.coefficients) {
            char line[160];
            std::snprintf(line, sizeof(line), "  %-12s %9.4f %9.4f %9.4f %9.4g\n",
                          c.name.c_str(), c.beta, c.std_error, c.t_stat, c.p_value);
            out << line;
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace entail_guard
