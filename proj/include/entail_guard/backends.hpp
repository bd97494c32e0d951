#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "entail_guard/nli.hpp"

namespace entail_guard {

/// Decoding parameters. max_total_tokens is the budget including the prompt.
struct SamplingParams {
    double top_p = 1.0;
    double temperature = 1.0;
    int max_total_tokens = 256;
    std::optional<std::uint64_t> seed;

    void validate() const;
};

struct CompletionRequest {
    std::string prompt;
    SamplingParams params;
};

/// `text` holds only the continuation, never an echo of the prompt.
struct CompletionResponse {
    std::string text;
    std::optional<int> prompt_tokens;
    std::optional<int> completion_tokens;
};

struct NliRequest {
    std::string premise;
    std::string hypothesis;

    /// Both sides must be non-empty after trimming whitespace.
    void validate() const;
};

/// Rough prompt-size estimate: ceil(bytes / 4). Used wherever the orchestrator
/// needs a token count without a model-specific tokenizer.
int estimate_tokens(std::string_view text);

/// Tokens left for new text: params.max_total_tokens minus the prompt
/// estimate. Throws BudgetError when nothing is left.
int new_token_budget(const CompletionRequest& request);

/// Language-model backend. Implementations must be safe to call from multiple
/// threads concurrently.
class LmBackend {
public:
    virtual ~LmBackend() = default;
    virtual CompletionResponse complete(const CompletionRequest& request) const = 0;
};

/// NLI classifier backend. Implementations must be safe to call from multiple
/// threads concurrently.
class NliBackend {
public:
    virtual ~NliBackend() = default;
    virtual NliDistribution classify(const NliRequest& request) const = 0;
};

/// Deterministic LM test double: the returned entry is a pure function of
/// (script, prompt, seed), so identical requests always yield identical text.
class ScriptedLmBackend final : public LmBackend {
public:
    explicit ScriptedLmBackend(std::vector<std::string> script);

    CompletionResponse complete(const CompletionRequest& request) const override;

private:
    std::vector<std::string> script_;
};

/// Table-driven NLI test double keyed by the ordered (premise, hypothesis)
/// pair. Pairs absent from the table get the fallback distribution when one
/// is configured, otherwise a FormatError.
class TableNliBackend final : public NliBackend {
public:
    struct Entry {
        std::string premise;
        std::string hypothesis;
        NliDistribution distribution;
    };

    explicit TableNliBackend(std::vector<Entry> entries,
                             std::optional<NliDistribution> fallback = std::nullopt);

    NliDistribution classify(const NliRequest& request) const override;

private:
    std::map<std::pair<std::string, std::string>, NliDistribution> table_;
    std::optional<NliDistribution> fallback_;
};

/// Rule-based NLI test double wrapping an arbitrary pure function.
class FunctionNliBackend final : public NliBackend {
public:
    using Rule = std::function<NliDistribution(const NliRequest&)>;

    explicit FunctionNliBackend(Rule rule) : rule_(std::move(rule)) {}

    NliDistribution classify(const NliRequest& request) const override {
        request.validate();
        return rule_(request);
    }

private:
    Rule rule_;
};

/// Memoizing wrapper: each distinct (premise, hypothesis) pair reaches the
/// inner backend at most once. Concurrent duplicate requests are coalesced:
/// the first caller performs the inner call, later callers wait on its
/// result. Errors propagate and are never cached.
class CachedNliBackend final : public NliBackend {
public:
    explicit CachedNliBackend(const NliBackend& inner);

    NliDistribution classify(const NliRequest& request) const override;

    std::size_t hits() const { return hits_.load(); }
    std::size_t misses() const { return misses_.load(); }

    /// Completed entries, sorted by key (for the JSON cache sidecar).
    std::map<std::pair<std::string, std::string>, NliDistribution> snapshot() const;

    /// Seeds the cache, e.g. from a previously saved sidecar.
    void preload(const std::string& premise, const std::string& hypothesis,
                 const NliDistribution& d);

private:
    using Key = std::pair<std::string, std::string>;

    const NliBackend& inner_;
    mutable std::mutex mutex_;
    mutable std::map<Key, std::shared_future<NliDistribution>> entries_;
    mutable std::atomic<std::size_t> hits_{0};
    mutable std::atomic<std::size_t> misses_{0};
};

/// Connection settings shared by the HTTP backends. One short-lived
/// connection per request keeps the clients trivially shareable across
/// threads. Transport failures are retried max_attempts times with
/// exponential backoff starting at initial_backoff.
struct HttpOptions {
    std::string base_url;
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{100};
    std::optional<std::string> bearer_token;  // defaults to ENTAIL_GUARD_API_KEY
    std::chrono::seconds timeout{30};
};

/// Reads ENTAIL_GUARD_API_KEY, if set.
std::optional<std::string> api_key_from_env();

/// Client for the completion endpoint (POST /v1/completions).
class HttpLmBackend final : public LmBackend {
public:
    explicit HttpLmBackend(HttpOptions options);

    CompletionResponse complete(const CompletionRequest& request) const override;

private:
    HttpOptions options_;
};

/// Client for the NLI endpoint (POST /nli).
class HttpNliBackend final : public NliBackend {
public:
    explicit HttpNliBackend(HttpOptions options);

    NliDistribution classify(const NliRequest& request) const override;

private:
    HttpOptions options_;
};

}  // namespace entail_guard
