#include "entail_guard/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <sstream>
#include <thread>

#include "entail_guard/rng.hpp"

namespace entail_guard {

namespace {

bool blank(std::string_view s) {
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c)) == 0) return false;
    }
    return true;
}

std::string join_sentences(const std::vector<std::string>& sentences) {
    std::string out;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (i > 0) out += ' ';
        out += sentences[i];
    }
    return out;
}

struct RunOutcome {
    std::vector<std::string> accepted;
    StopReason reason = StopReason::ConsecutiveFailures;
    int attempts = 0;
};

}  // namespace

void PipelineConfig::validate() const {
    params.validate();
    auto positive = [](int value, const char* name) {
        if (value < 1) {
            throw ValidationError(std::string("PipelineConfig.") + name + " must be >= 1");
        }
    };
    positive(proposal_budget_tokens, "proposal_budget_tokens");
    positive(control_budget_tokens, "control_budget_tokens");
    positive(max_consecutive_failures, "max_consecutive_failures");
    positive(success_min_chars, "success_min_chars");
    positive(success_min_sentences, "success_min_sentences");
    positive(restart_min_sentences, "restart_min_sentences");
    positive(max_runs, "max_runs");
    if (!(strategy.neutral_threshold >= 0.0 && strategy.neutral_threshold <= 1.0)) {
        throw ValidationError("PipelineConfig.strategy.neutral_threshold out of [0,1]");
    }
}

std::string_view to_string(PremiseOrigin origin) {
    return origin == PremiseOrigin::Prompt ? "PROMPT" : "CONTINUATION";
}

std::string_view to_string(Decision decision) {
    switch (decision) {
        case Decision::Accepted: return "ACCEPTED";
        case Decision::Rejected: return "REJECTED";
        case Decision::DiscardedAfterReject: return "DISCARDED_AFTER_REJECT";
    }
    throw ValidationError("unknown decision");
}

std::string_view to_string(StopReason reason) {
    switch (reason) {
        case StopReason::SuccessLength: return "SUCCESS_LENGTH";
        case StopReason::ConsecutiveFailures: return "CONSECUTIVE_FAILURES";
        case StopReason::EmptyAfterRestarts: return "EMPTY_AFTER_RESTARTS";
    }
    throw ValidationError("unknown stop reason");
}

StopReason stop_reason_from_string(std::string_view s) {
    if (s == "SUCCESS_LENGTH") return StopReason::SuccessLength;
    if (s == "CONSECUTIVE_FAILURES") return StopReason::ConsecutiveFailures;
    if (s == "EMPTY_AFTER_RESTARTS") return StopReason::EmptyAfterRestarts;
    throw ValidationError("unknown stop reason: " + std::string(s));
}

GenerationResult generate_vanilla(const LmBackend& lm, const std::string& prompt,
                                  const SamplingParams& params) {
    if (blank(prompt)) throw ValidationError("prompt is empty");
    params.validate();

    CompletionRequest request{prompt, params};
    CompletionResponse response = lm.complete(request);

    GenerationResult result;
    result.prompt = prompt;
    result.condition = {StrategyKind::Control, params.top_p};
    result.runs_used = 1;
    result.attempts_per_run = {1};
    result.stop_reason = StopReason::SuccessLength;
    for (Sentence& sentence : split_sentences(response.text)) {
        TraceEvent event;
        event.run_index = 0;
        event.attempt_index = 0;
        event.candidate = sentence;
        event.decision = Decision::Accepted;
        result.trace.events.push_back(std::move(event));
        result.accepted.push_back(std::move(sentence.text));
    }
    result.continuation_text = join_sentences(result.accepted);
    return result;
}

GenerationResult generate_filtered(const LmBackend& lm, const NliBackend& nli,
                                   const std::string& prompt, const PipelineConfig& config) {
    if (blank(prompt)) throw ValidationError("prompt is empty");
    config.validate();
    if (config.strategy.kind == StrategyKind::Control) {
        throw ValidationError("generate_filtered requires a non-CONTROL strategy");
    }

    const std::vector<Sentence> prompt_sentences = split_sentences(prompt);

    GenerationResult result;
    result.prompt = prompt;
    result.condition = {config.strategy.kind, config.params.top_p};

    std::vector<RunOutcome> runs;

    for (int run = 0; run < config.max_runs; ++run) {
        RunOutcome outcome;
        int consecutive_failures = 0;
        bool success = false;

        while (!success && consecutive_failures < config.max_consecutive_failures) {
            const int attempt = outcome.attempts;
            ++outcome.attempts;

            CompletionRequest request;
            request.prompt = outcome.accepted.empty()
                                 ? prompt
                                 : prompt + " " + join_sentences(outcome.accepted);
            request.params = config.params;
            request.params.max_total_tokens = config.proposal_budget_tokens;
            if (config.params.seed) {
                request.params.seed = attempt_seed(*config.params.seed,
                                                   static_cast<std::uint64_t>(run),
                                                   static_cast<std::uint64_t>(attempt));
            }

            CompletionResponse response;
            try {
                response = lm.complete(request);
            } catch (const std::exception& e) {
                throw PipelineError(std::string("LM backend failed on run ") +
                                        std::to_string(run) + " attempt " +
                                        std::to_string(attempt) + ": " + e.what(),
                                    result.trace);
            }

            const std::vector<Sentence> candidates = split_sentences(response.text);
            bool attempt_accepted_any = false;
            bool rejected = false;

            for (std::size_t c = 0; c < candidates.size() && !success; ++c) {
                const Sentence& candidate = candidates[c];
                TraceEvent event;
                event.run_index = run;
                event.attempt_index = attempt;
                event.candidate = candidate;

                if (rejected) {
                    event.decision = Decision::DiscardedAfterReject;
                    result.trace.events.push_back(std::move(event));
                    continue;
                }
                if (!candidate.terminated) {
                    // A half-sentence must not enter the premise set.
                    event.decision = Decision::DiscardedAfterReject;
                    event.note = "unterminated trailing fragment excluded as candidate";
                    result.trace.events.push_back(std::move(event));
                    continue;
                }

                bool all_passed = true;
                auto run_check = [&](const Sentence& premise, PremiseOrigin origin) {
                    NliRequest nli_request{premise.text, candidate.text};
                    NliDistribution d{0.0, 1.0, 0.0};
                    try {
                        d = nli.classify(nli_request);
                    } catch (const std::exception& e) {
                        event.note = "backend error before a decision was reached";
                        result.trace.events.push_back(event);
                        throw PipelineError(std::string("NLI backend failed on run ") +
                                                std::to_string(run) + " attempt " +
                                                std::to_string(attempt) + ": " + e.what(),
                                            result.trace);
                    }
                    const bool passed = accepts(config.strategy, d);
                    event.checks.push_back(NliCheck{premise.text, origin, d, passed});
                    return passed;
                };

                for (const Sentence& premise : prompt_sentences) {
                    if (!run_check(premise, PremiseOrigin::Prompt)) {
                        all_passed = false;
                        break;
                    }
                }
                if (all_passed) {
                    for (const std::string& accepted_text : outcome.accepted) {
                        Sentence premise;
                        premise.text = accepted_text;
                        if (!run_check(premise, PremiseOrigin::Continuation)) {
                            all_passed = false;
                            break;
                        }
                    }
                }

                if (all_passed) {
                    event.decision = Decision::Accepted;
                    result.trace.events.push_back(std::move(event));
                    outcome.accepted.push_back(candidate.text);
                    attempt_accepted_any = true;
                    const std::string joined = join_sentences(outcome.accepted);
                    if (static_cast<int>(joined.size()) > config.success_min_chars &&
                        static_cast<int>(outcome.accepted.size()) >=
                            config.success_min_sentences) {
                        success = true;
                    }
                } else {
                    event.decision = Decision::Rejected;
                    result.trace.events.push_back(std::move(event));
                    rejected = true;
                }
            }

            if (attempt_accepted_any) {
                consecutive_failures = 0;
            } else {
                ++consecutive_failures;
            }
        }

        outcome.reason =
            success ? StopReason::SuccessLength : StopReason::ConsecutiveFailures;
        runs.push_back(std::move(outcome));

        if (static_cast<int>(runs.back().accepted.size()) >= config.restart_min_sentences) {
            break;
        }
    }

    result.runs_used = static_cast<int>(runs.size());
    for (const RunOutcome& outcome : runs) {
        result.attempts_per_run.push_back(outcome.attempts);
    }

    // Best run: most accepted sentences, ties to the later run.
    std::size_t best = 0;
    for (std::size_t i = 1; i < runs.size(); ++i) {
        if (runs[i].accepted.size() >= runs[best].accepted.size()) best = i;
    }
    result.accepted = runs[best].accepted;
    result.continuation_text = join_sentences(result.accepted);
    result.stop_reason =
        result.accepted.empty() ? StopReason::EmptyAfterRestarts : runs[best].reason;
    return result;
}

std::vector<BatchItem> run_batch(const LmBackend& lm, const NliBackend* nli,
                                 std::span<const PromptRecord> prompts,
                                 std::span<const GridCell> grid, const PipelineConfig& config,
                                 int workers) {
    if (prompts.empty()) throw ValidationError("run_batch: no prompts");
    if (grid.empty()) throw ValidationError("run_batch: empty condition grid");
    if (workers < 1) throw ValidationError("run_batch: workers must be >= 1");
    for (const GridCell& cell : grid) {
        if (cell.strategy.kind != StrategyKind::Control && nli == nullptr) {
            throw ValidationError("run_batch: NLI backend required for strategy " +
                                  std::string(to_string(cell.strategy.kind)));
        }
    }

    const std::uint64_t base_seed = config.params.seed.value_or(0);
    const std::size_t total = prompts.size() * grid.size();
    std::vector<BatchItem> items(total);

    auto process = [&](std::size_t index) {
        const std::size_t prompt_index = index / grid.size();
        const std::size_t cell_index = index % grid.size();
        const PromptRecord& prompt = prompts[prompt_index];
        const GridCell& cell = grid[cell_index];

        BatchItem& item = items[index];
        item.index = index;
        item.prompt_id = prompt.id;
        item.condition = {cell.strategy.kind, cell.top_p};

        PipelineConfig cell_config = config;
        cell_config.strategy = cell.strategy;
        cell_config.params.top_p = cell.top_p;
        cell_config.params.seed = batch_cell_seed(base_seed, prompt_index, cell_index);

        try {
            if (cell.strategy.kind == StrategyKind::Control) {
                SamplingParams params = cell_config.params;
                params.max_total_tokens = cell_config.control_budget_tokens;
                item.result = generate_vanilla(lm, prompt.text, params);
            } else {
                item.result = generate_filtered(lm, *nli, prompt.text, cell_config);
            }
        } catch (const std::exception& e) {
            item.error = e.what();
        }
    };

    if (workers == 1 || total == 1) {
        for (std::size_t i = 0; i < total; ++i) process(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const int thread_count =
            static_cast<int>(std::min(static_cast<std::size_t>(workers), total));
        pool.reserve(thread_count);
        for (int t = 0; t < thread_count; ++t) {
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t index = next.fetch_add(1);
                    if (index >= total) break;
                    process(index);
                }
            });
        }
        for (std::thread& thread : pool) thread.join();
    }
    return items;
}

}  // namespace entail_guard
