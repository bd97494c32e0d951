#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "entail_guard/backends.hpp"
#include "entail_guard/errors.hpp"
#include "entail_guard/nli.hpp"
#include "entail_guard/segmentation.hpp"

namespace entail_guard {

struct PipelineConfig {
    Strategy strategy;
    SamplingParams params;
    int proposal_budget_tokens = 128;   // total budget per filtered attempt
    int control_budget_tokens = 256;    // total budget for the vanilla pass
    int max_consecutive_failures = 7;   // attempts with zero acceptances before a run stops
    int success_min_chars = 256;        // continuation must exceed this many chars...
    int success_min_sentences = 3;      // ...and reach this many sentences
    int restart_min_sentences = 2;      // runs ending below this restart from scratch
    int max_runs = 2;

    void validate() const;
};

enum class PremiseOrigin { Prompt, Continuation };

std::string_view to_string(PremiseOrigin origin);

struct NliCheck {
    std::string premise_text;
    PremiseOrigin premise_origin = PremiseOrigin::Prompt;
    NliDistribution distribution{0.0, 1.0, 0.0};
    bool passed = false;
};

enum class Decision { Accepted, Rejected, DiscardedAfterReject };

std::string_view to_string(Decision decision);

/// One candidate sentence considered by the loop. An accepted candidate has
/// all checks passed; a rejected one ends with its single failing check; a
/// discarded one carries no checks at all.
struct TraceEvent {
    int run_index = 0;
    int attempt_index = 0;
    Sentence candidate;
    std::vector<NliCheck> checks;
    Decision decision = Decision::Accepted;
    std::string note;
};

struct GenerationTrace {
    std::vector<TraceEvent> events;
};

enum class StopReason { SuccessLength, ConsecutiveFailures, EmptyAfterRestarts };

std::string_view to_string(StopReason reason);
StopReason stop_reason_from_string(std::string_view s);

struct ConditionTag {
    StrategyKind strategy = StrategyKind::Control;
    double top_p = 1.0;
};

struct GenerationResult {
    std::string prompt;
    std::vector<std::string> accepted;   // sentence texts in acceptance order
    std::string continuation_text;       // accepted joined by single spaces
    StopReason stop_reason = StopReason::SuccessLength;
    int runs_used = 0;
    std::vector<int> attempts_per_run;
    GenerationTrace trace;
    ConditionTag condition;
};

/// Backend failure mid-generation; carries the trace recorded so far.
class PipelineError : public Error {
public:
    PipelineError(const std::string& what, GenerationTrace partial_trace)
        : Error(what), partial_trace_(std::move(partial_trace)) {}

    const GenerationTrace& partial_trace() const { return partial_trace_; }

private:
    GenerationTrace partial_trace_;
};

/// Unconstrained single-pass generation: one completion call with
/// params.max_total_tokens as the total budget, every sentence accepted, no
/// NLI checks. stop_reason is always SuccessLength.
GenerationResult generate_vanilla(const LmBackend& lm, const std::string& prompt,
                                  const SamplingParams& params);

/// The filtered loop: propose a continuation, check each candidate sentence
/// against every prompt sentence and every previously accepted sentence
/// under config.strategy, append on full pass, discard the rest of the
/// attempt on the first failure. A run stops on success (continuation longer
/// than success_min_chars with at least success_min_sentences sentences) or
/// after max_consecutive_failures attempts without an acceptance; runs with
/// fewer than restart_min_sentences sentences restart from the prompt, up to
/// max_runs. The best run (most sentences, ties to the later run) wins.
GenerationResult generate_filtered(const LmBackend& lm, const NliBackend& nli,
                                   const std::string& prompt, const PipelineConfig& config);

struct PromptRecord {
    std::string id;
    std::string text;
};

struct GridCell {
    Strategy strategy;
    double top_p = 1.0;
};

struct BatchItem {
    std::size_t index = 0;
    std::string prompt_id;
    ConditionTag condition;
    std::optional<GenerationResult> result;
    std::string error;  // non-empty when this item failed
};

/// One generation per (prompt x grid cell), ordered prompt-major then
/// grid-minor regardless of worker scheduling. Each item derives its seed
/// from config.params.seed (or 0) plus a stable hash of its position, so a
/// rerun reproduces byte-identical results. Per-item failures are collected,
/// not fatal. `nli` may be null when every cell is a control cell.
std::vector<BatchItem> run_batch(const LmBackend& lm, const NliBackend* nli,
                                 std::span<const PromptRecord> prompts,
                                 std::span<const GridCell> grid, const PipelineConfig& config,
                                 int workers = 1);

}  // namespace entail_guard
