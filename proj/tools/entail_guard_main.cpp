#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "entail_guard/analysis.hpp"
#include "entail_guard/backends.hpp"
#include "entail_guard/corpus.hpp"
#include "entail_guard/errors.hpp"
#include "entail_guard/json_io.hpp"
#include "entail_guard/mock_server.hpp"
#include "entail_guard/pipeline.hpp"

namespace eg = entail_guard;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

std::atomic<bool> g_interrupted{false};

void handle_signal(int) {
    g_interrupted.store(true);
}

/// NLI stand-in used when only a cache file is configured: any pair that
/// misses the cache is an error.
class UnconfiguredNliBackend final : public eg::NliBackend {
public:
    eg::NliDistribution classify(const eg::NliRequest& request) const override {
        throw eg::Error("no NLI backend configured and pair not in cache: premise=\"" +
                        request.premise + "\" hypothesis=\"" + request.hypothesis + "\"");
    }
};

struct BackendConfig {
    std::string lm_endpoint;
    std::string nli_endpoint;
    std::string mock_script_path;
    std::string mock_nli_path;
    std::string nli_cache_path;
};

void add_backend_flags(CLI::App* cmd, BackendConfig& config, bool lm, bool nli) {
    if (lm) {
        cmd->add_option("--lm-endpoint", config.lm_endpoint,
                        "Base URL of a live completion server");
        cmd->add_option("--mock-script", config.mock_script_path,
                        "Fixture file with an lm.script section (offline mock)");
    }
    if (nli) {
        cmd->add_option("--nli-endpoint", config.nli_endpoint,
                        "Base URL of a live NLI server");
        cmd->add_option("--mock-nli", config.mock_nli_path,
                        "Fixture file with an nli section (offline mock)");
        cmd->add_option("--nli-cache", config.nli_cache_path,
                        "JSON sidecar caching NLI results across runs");
    }
}

fs::path trace_path_for(const fs::path& output) {
    fs::path p = output;
    std::string stem = p.stem().string();
    std::string ext = p.extension().string();
    p.replace_filename(stem + ".trace" + ext);
    return p;
}

void ensure_writable(const fs::path& path, bool force) {
    if (fs::exists(path) && !force) {
        throw eg::ValidationError("output path exists (use --force to overwrite): " +
                                  path.string());
    }
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw eg::ValidationError("cannot write file: " + path.string());
    out << content;
}

std::vector<eg::GridCell> build_grid(const std::vector<std::string>& strategy_names,
                                     const std::vector<double>& top_ps,
                                     double neutral_threshold) {
    std::vector<eg::GridCell> grid;
    for (const std::string& name : strategy_names) {
        const eg::StrategyKind kind = eg::strategy_kind_from_string(name);
        for (double p : top_ps) {
            eg::Strategy strategy{kind, neutral_threshold};
            if (kind == eg::StrategyKind::Neu) strategy = eg::Strategy::neu(neutral_threshold);
            grid.push_back({strategy, p});
        }
    }
    return grid;
}

std::string condition_key(const eg::ConditionTag& condition) {
    std::ostringstream key;
    key << eg::to_string(condition.strategy) << " p=" << condition.top_p;
    return key.str();
}

void print_generate_summary(const std::vector<eg::BatchItem>& items, std::ostream& out) {
    struct Bucket {
        int n = 0;
        int failed = 0;
        long long sentences = 0;
        long long attempts = 0;
        std::map<std::string, int> stop_reasons;
    };
    std::map<std::string, Bucket> buckets;
    for (const eg::BatchItem& item : items) {
        Bucket& bucket = buckets[condition_key(item.condition)];
        ++bucket.n;
        if (!item.error.empty()) {
            ++bucket.failed;
            continue;
        }
        bucket.sentences += static_cast<long long>(item.result->accepted.size());
        for (int attempts : item.result->attempts_per_run) bucket.attempts += attempts;
        ++bucket.stop_reasons[std::string(eg::to_string(item.result->stop_reason))];
    }
    out << "condition                  n   mean_sent  mean_att  stop_reasons\n";
    for (const auto& [key, bucket] : buckets) {
        const int ok = bucket.n - bucket.failed;
        char line[160];
        std::snprintf(line, sizeof(line), "%-25s %-3d %9.2f %9.2f  ", key.c_str(), bucket.n,
                      ok > 0 ? static_cast<double>(bucket.sentences) / ok : 0.0,
                      ok > 0 ? static_cast<double>(bucket.attempts) / ok : 0.0);
        out << line;
        bool first = true;
        for (const auto& [reason, count] : bucket.stop_reasons) {
            if (!first) out << ", ";
            out << reason << ":" << count;
            first = false;
        }
        if (bucket.failed > 0) out << (first ? "" : ", ") << "FAILED:" << bucket.failed;
        out << "\n";
    }
}

// Builds the NLI stack (optional mock/live inner backend + cache wrapper).
struct NliStack {
    std::unique_ptr<eg::NliBackend> inner;
    std::unique_ptr<eg::CachedNliBackend> cached;
    std::string cache_path;

    const eg::NliBackend& backend() const { return *cached; }

    void load_cache() {
        if (cache_path.empty() || !fs::exists(cache_path)) return;
        for (const auto& [key, d] : eg::nli_cache_from_file(cache_path)) {
            cached->preload(key.first, key.second, d);
        }
    }

    void save_cache() const {
        if (cache_path.empty()) return;
        eg::save_nli_cache(cached->snapshot(), cache_path);
    }
};

NliStack make_nli_stack(const BackendConfig& config, bool required) {
    NliStack stack;
    const bool has_mock = !config.mock_nli_path.empty();
    const bool has_endpoint = !config.nli_endpoint.empty();
    if (has_mock && has_endpoint) {
        throw eg::ValidationError("--mock-nli and --nli-endpoint are mutually exclusive");
    }
    if (has_mock) {
        stack.inner = std::make_unique<eg::TableNliBackend>(
            eg::MockFixture::load(config.mock_nli_path).make_nli_backend());
    } else if (has_endpoint) {
        eg::HttpOptions options;
        options.base_url = config.nli_endpoint;
        stack.inner = std::make_unique<eg::HttpNliBackend>(options);
    } else if (!config.nli_cache_path.empty()) {
        stack.inner = std::make_unique<UnconfiguredNliBackend>();
    } else if (required) {
        throw eg::ValidationError(
            "an NLI source is required: pass --nli-endpoint, --mock-nli, or --nli-cache");
    } else {
        stack.inner = std::make_unique<UnconfiguredNliBackend>();
    }
    stack.cached = std::make_unique<eg::CachedNliBackend>(*stack.inner);
    stack.cache_path = config.nli_cache_path;
    stack.load_cache();
    return stack;
}

int cmd_generate(const std::string& prompts_path, const BackendConfig& backends,
                 const std::vector<std::string>& strategies, const std::vector<double>& top_ps,
                 std::uint64_t seed, double temperature, double neutral_threshold,
                 eg::PipelineConfig config, const std::string& output_path, bool trace,
                 bool force, int workers) {
    const bool mock_lm = !backends.mock_script_path.empty();
    const bool live_lm = !backends.lm_endpoint.empty();
    if (mock_lm == live_lm) {
        throw eg::ValidationError("exactly one of --mock-script or --lm-endpoint is required");
    }
    if (mock_lm && !backends.nli_endpoint.empty()) {
        throw eg::ValidationError("--nli-endpoint is forbidden with --mock-script; use --mock-nli");
    }
    if (live_lm && !backends.mock_nli_path.empty()) {
        throw eg::ValidationError("--mock-nli is forbidden with --lm-endpoint; use --nli-endpoint");
    }

    const std::vector<eg::PromptRecord> prompts = eg::load_prompts(prompts_path);
    const std::vector<eg::GridCell> grid = build_grid(strategies, top_ps, neutral_threshold);

    const bool needs_nli = std::any_of(grid.begin(), grid.end(), [](const eg::GridCell& cell) {
        return cell.strategy.kind != eg::StrategyKind::Control;
    });

    std::unique_ptr<eg::LmBackend> lm;
    if (mock_lm) {
        lm = std::make_unique<eg::ScriptedLmBackend>(
            eg::MockFixture::load(backends.mock_script_path).make_lm_backend());
    } else {
        eg::HttpOptions options;
        options.base_url = backends.lm_endpoint;
        lm = std::make_unique<eg::HttpLmBackend>(options);
    }

    std::optional<NliStack> nli;
    if (needs_nli) {
        if (mock_lm && backends.mock_nli_path.empty() && backends.nli_cache_path.empty()) {
            throw eg::ValidationError(
                "non-CONTROL strategies need an NLI source: pass --mock-nli (with "
                "--mock-script) or --nli-endpoint");
        }
        nli = make_nli_stack(backends, /*required=*/true);
    }

    const fs::path output(output_path);
    const fs::path trace_output = trace_path_for(output);
    ensure_writable(output, force);
    if (trace) ensure_writable(trace_output, force);

    config.params.temperature = temperature;
    config.params.seed = seed;
    config.strategy = grid.front().strategy;

    const std::vector<eg::BatchItem> items =
        eg::run_batch(*lm, nli ? &nli->backend() : nullptr, prompts, grid, config, workers);

    std::ostringstream results;
    std::ostringstream traces;
    int failures = 0;
    for (const eg::BatchItem& item : items) {
        if (!item.error.empty()) {
            ++failures;
            std::cerr << "item " << item.prompt_id << " [" << condition_key(item.condition)
                      << "] failed: " << item.error << "\n";
            continue;
        }
        results << eg::result_to_json(*item.result, item.prompt_id).dump() << "\n";
        if (trace) {
            traces << eg::trace_to_json(item.result->trace, item.prompt_id,
                                        item.result->condition)
                          .dump()
                   << "\n";
        }
    }
    write_text_file(output, results.str());
    if (trace) write_text_file(trace_output, traces.str());
    if (nli) nli->save_cache();

    print_generate_summary(items, std::cout);
    std::cout << "wrote " << (items.size() - failures) << "/" << items.size() << " results to "
              << output.string() << "\n";
    if (trace) std::cout << "wrote traces to " << trace_output.string() << "\n";
    return failures == 0 ? kExitOk : kExitPartial;
}

void emit_report(const nlohmann::ordered_json& json_report, const std::string& table,
                 const std::string& format, const std::string& output_path) {
    std::string content;
    if (format == "json") {
        content = json_report.dump(2) + "\n";
    } else {
        content = table;
    }
    if (output_path.empty()) {
        std::cout << content;
    } else {
        write_text_file(output_path, content);
    }
}

int cmd_analyze(const std::string& subcommand, const std::string& corpus_path,
                const BackendConfig& backends, double min_agreement,
                const std::string& group_by, const std::string& outcome,
                const std::string& format, const std::string& output_path, int mc_draws,
                std::uint64_t mc_seed) {
    if (!group_by.empty() && group_by != "top_p") {
        throw eg::ValidationError("unsupported --group-by field: " + group_by +
                                  " (only top_p is available)");
    }
    const std::vector<eg::AnnotatedExample> corpus = eg::load_corpus(corpus_path);
    if (corpus.empty()) throw eg::ValidationError("corpus is empty: " + corpus_path);

    if (subcommand == "ratings") {
        std::vector<eg::GroupedRegression> results;
        if (outcome == "holistic") {
            results = eg::holistic_rating_regressions(corpus);
        } else if (outcome == "error-counts") {
            results = eg::error_type_regressions(corpus, eg::ErrorOutcome::QualifyingSpanCount,
                                                 min_agreement);
        } else if (outcome == "error-proportions") {
            results = eg::error_type_regressions(corpus, eg::ErrorOutcome::CharProportion,
                                                 min_agreement);
        } else {
            throw eg::ValidationError("unknown --outcome: " + outcome);
        }
        emit_report(eg::regression_report_json(results), eg::regression_report_table(results),
                    format, output_path);
        return kExitOk;
    }

    NliStack nli = make_nli_stack(backends, /*required=*/true);
    const std::map<std::string, eg::NliDistribution> distributions =
        eg::classify_examples(nli.backend(), corpus);
    nli.save_cache();

    if (subcommand == "distribution") {
        const auto rows = eg::class_distribution(eg::labels_of(distributions), corpus);
        emit_report(eg::distribution_report_json(rows), eg::distribution_report_table(rows),
                    format, output_path);
    } else if (subcommand == "errors") {
        const auto rows =
            eg::error_class_contingency(eg::labels_of(distributions), corpus, min_agreement);
        emit_report(eg::contingency_report_json(rows), eg::contingency_report_table(rows),
                    format, output_path);
    } else if (subcommand == "correlations") {
        eg::stats::SpearmanOptions options;
        options.mc_draws = mc_draws;
        options.mc_seed = mc_seed;
        const auto results =
            eg::correlation_report(distributions, corpus, min_agreement, options);
        emit_report(eg::correlation_report_json(results),
                    eg::correlation_report_table(results), format, output_path);
    } else {
        throw eg::ValidationError("unknown analyze subcommand: " + subcommand);
    }
    return kExitOk;
}

int cmd_mock_serve(const std::string& fixture_path, const std::string& host, int port) {
    eg::MockServer::Options options;
    options.host = host;
    options.port = port;
    options.logger = [](const std::string& line) { std::cout << line << std::endl; };

    eg::MockServer server(eg::MockFixture::load(fixture_path), std::move(options));
    std::cout << "mock server listening on " << server.base_url() << std::endl;

    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    while (!g_interrupted.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    std::cout << "shutting down" << std::endl;
    server.stop();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sentence-level NLI filtering for language-model generations"};
    app.require_subcommand(1);

    // generate
    auto* generate = app.add_subcommand(
        "generate", "Generate filtered continuations over a strategy/top-p grid");
    std::string prompts_path;
    BackendConfig generate_backends;
    std::vector<std::string> strategies{"neu"};
    std::vector<double> top_ps{0.4, 0.96};
    std::uint64_t seed = 0;
    double temperature = 1.0;
    double neutral_threshold = 0.85;
    eg::PipelineConfig pipeline_config;
    std::string output_path;
    bool trace = false;
    bool force = false;
    int workers = 1;

    generate->add_option("--prompts", prompts_path, "Prompts JSONL ({\"id\",\"prompt\"} per line)")
        ->required();
    add_backend_flags(generate, generate_backends, /*lm=*/true, /*nli=*/true);
    generate->add_option("--strategies", strategies,
                         "Comma-separated strategies from control,ent,con,neu")
        ->delimiter(',');
    generate->add_option("--top-p", top_ps, "Comma-separated nucleus sampling values")
        ->delimiter(',');
    generate->add_option("--seed", seed, "Base seed for per-item seed derivation");
    generate->add_option("--temperature", temperature, "Sampling temperature");
    generate->add_option("--neutral-threshold", neutral_threshold,
                         "Acceptance threshold for the NEU strategy");
    generate->add_option("--proposal-budget", pipeline_config.proposal_budget_tokens,
                         "Total token budget per filtered attempt (prompt included)");
    generate->add_option("--control-budget", pipeline_config.control_budget_tokens,
                         "Total token budget for CONTROL generations (prompt included)");
    generate->add_option("--max-consecutive-failures",
                         pipeline_config.max_consecutive_failures,
                         "Consecutive empty attempts before a run stops");
    generate->add_option("--success-min-chars", pipeline_config.success_min_chars,
                         "Continuation length (chars) that must be exceeded for success");
    generate->add_option("--success-min-sentences", pipeline_config.success_min_sentences,
                         "Accepted sentences required for success");
    generate->add_option("--restart-min-sentences", pipeline_config.restart_min_sentences,
                         "Runs ending below this sentence count restart");
    generate->add_option("--max-runs", pipeline_config.max_runs, "Maximum runs per prompt");
    generate->add_option("-o,--output", output_path, "Results JSONL path")->required();
    generate->add_flag("--trace", trace, "Also write a .trace.jsonl sidecar");
    generate->add_flag("--force", force, "Overwrite existing output files");
    generate->add_option("--workers", workers, "Concurrent pipeline workers")
        ->check(CLI::PositiveNumber);

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Statistics over an annotated corpus");
    analyze->require_subcommand(1);
    std::string corpus_path;
    BackendConfig analyze_backends;
    double min_agreement = 0.5;
    std::string group_by;
    std::string outcome = "holistic";
    std::string format = "table";
    std::string analyze_output;
    int mc_draws = 10000;
    std::uint64_t mc_seed = 0x5EEDCAFEF00Dull;

    std::vector<CLI::App*> analyze_subs;
    for (const char* name : {"distribution", "errors", "correlations", "ratings"}) {
        auto* sub = analyze->add_subcommand(name);
        sub->add_option("--corpus", corpus_path, "Corpus JSONL file")->required();
        sub->add_option("--format", format, "Output format: table or json")
            ->check(CLI::IsMember({"table", "json"}));
        sub->add_option("-o,--output", analyze_output, "Write the report here instead of stdout");
        sub->add_option("--group-by", group_by, "Grouping field (top_p)");
        analyze_subs.push_back(sub);
    }
    analyze_subs[0]->description("Argmax NLI class percentages per top_p group");
    analyze_subs[1]->description("Error-type x NLI-class contingency table");
    analyze_subs[2]->description("Spearman correlations of error proportions vs class probabilities");
    analyze_subs[3]->description("OLS regressions of ratings or error outcomes on the strategy");
    for (int i = 0; i < 3; ++i) {
        add_backend_flags(analyze_subs[i], analyze_backends, /*lm=*/false, /*nli=*/true);
    }
    analyze_subs[1]->add_option("--min-agreement", min_agreement,
                                "Annotator agreement threshold for qualifying spans");
    analyze_subs[2]->add_option("--min-agreement", min_agreement,
                                "Annotator agreement threshold for qualifying spans");
    analyze_subs[3]->add_option("--min-agreement", min_agreement,
                                "Annotator agreement threshold for qualifying spans");
    analyze_subs[2]->add_option("--mc-draws", mc_draws,
                                "Monte Carlo permutation draws for n > 7");
    analyze_subs[2]->add_option("--mc-seed", mc_seed, "Monte Carlo permutation seed");
    analyze_subs[3]->add_option(
        "--outcome", outcome, "Regression outcome: holistic, error-counts, error-proportions");

    // mock-serve
    auto* mock_serve =
        app.add_subcommand("mock-serve", "Serve LM and NLI fixtures over local HTTP");
    std::string fixture_path;
    std::string host = "127.0.0.1";
    int port = 8099;
    mock_serve->add_option("--fixture", fixture_path, "Fixture JSON file")->required();
    mock_serve->add_option("--host", host, "Bind address");
    mock_serve->add_option("--port", port, "Port to listen on");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitFatal;
    }

    try {
        if (generate->parsed()) {
            return cmd_generate(prompts_path, generate_backends, strategies, top_ps, seed,
                                temperature, neutral_threshold, pipeline_config, output_path,
                                trace, force, workers);
        }
        if (analyze->parsed()) {
            for (std::size_t i = 0; i < analyze_subs.size(); ++i) {
                if (analyze_subs[i]->parsed()) {
                    static const char* kNames[] = {"distribution", "errors", "correlations",
                                                   "ratings"};
                    return cmd_analyze(kNames[i], corpus_path, analyze_backends, min_agreement,
                                       group_by, outcome, format, analyze_output, mc_draws,
                                       mc_seed);
                }
            }
        }
        if (mock_serve->parsed()) {
            return cmd_mock_serve(fixture_path, host, port);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFatal;
    }
    std::cerr << "error: no subcommand given\n";
    return kExitFatal;
}
