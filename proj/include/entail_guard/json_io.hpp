#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "entail_guard/analysis.hpp"
#include "entail_guard/corpus.hpp"
#include "entail_guard/nli.hpp"
#include "entail_guard/pipeline.hpp"

namespace entail_guard {

// Result / trace JSONL (one object per line). All emitters use a fixed field
// order so reruns with the same inputs produce byte-identical files.

nlohmann::ordered_json result_to_json(const GenerationResult& result,
                                      const std::string& id = "");
nlohmann::ordered_json trace_to_json(const GenerationTrace& trace, const std::string& id,
                                     const ConditionTag& condition);
GenerationResult result_from_json(const nlohmann::json& j);

/// Prompts file: {"id": ..., "prompt": ...} per line.
std::vector<PromptRecord> load_prompts(const std::filesystem::path& path);

// NLI cache sidecar: completed (premise, hypothesis) -> distribution entries,
// sorted by key.
using NliCacheMap = std::map<std::pair<std::string, std::string>, NliDistribution>;

std::string nli_cache_to_json(const NliCacheMap& entries);
NliCacheMap nli_cache_from_file(const std::filesystem::path& path);
void save_nli_cache(const NliCacheMap& entries, const std::filesystem::path& path);

// Analysis reports, as JSON documents and as aligned plain-text tables laid
// out like the paper's tables (rows All/CO/OP/SC/IN/RD, columns CON/ENT/NEU
// per p).

nlohmann::ordered_json distribution_report_json(const std::vector<ClassDistributionRow>& rows);
std::string distribution_report_table(const std::vector<ClassDistributionRow>& rows);

nlohmann::ordered_json contingency_report_json(const std::vector<ClassDistributionRow>& rows);
std::string contingency_report_table(const std::vector<ClassDistributionRow>& rows);

nlohmann::ordered_json correlation_report_json(const std::vector<CorrelationResult>& results);
std::string correlation_report_table(const std::vector<CorrelationResult>& results);

nlohmann::ordered_json regression_report_json(const std::vector<GroupedRegression>& results);
std::string regression_report_table(const std::vector<GroupedRegression>& results);

}  // namespace entail_guard
