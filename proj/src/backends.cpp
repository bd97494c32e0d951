#include "entail_guard/backends.hpp"

#include <cctype>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "entail_guard/errors.hpp"
#include "entail_guard/rng.hpp"

namespace entail_guard {

namespace {

using nlohmann::json;

bool blank(std::string_view s) {
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c)) == 0) return false;
    }
    return true;
}

NliDistribution distribution_from_json(const json& j) {
    if (!j.is_object() || !j.contains("contradiction") || !j.contains("neutral") ||
        !j.contains("entailment")) {
        throw FormatError("NLI response missing contradiction/neutral/entailment fields");
    }
    try {
        return NliDistribution(j.at("contradiction").get<double>(),
                               j.at("neutral").get<double>(),
                               j.at("entailment").get<double>());
    } catch (const ValidationError& e) {
        throw FormatError(std::string("malformed NLI probabilities: ") + e.what());
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed NLI response: ") + e.what());
    }
}

// Splits "http://host:port" into (scheme://host:port, "") or passes through a
// bare host. httplib::Client accepts the full origin string directly.
httplib::Client make_client(const HttpOptions& options) {
    httplib::Client client(options.base_url);
    client.set_connection_timeout(options.timeout);
    client.set_read_timeout(options.timeout);
    client.set_write_timeout(options.timeout);
    if (options.bearer_token && !options.bearer_token->empty()) {
        client.set_bearer_token_auth(*options.bearer_token);
    }
    return client;
}

// POSTs JSON with retries on transport failures. HTTP error statuses are not
// retried; they indicate a server-side decision, not a flaky link.
json post_json(const HttpOptions& options, const std::string& path, const json& body) {
    std::string error;
    auto backoff = options.initial_backoff;
    for (int attempt = 1; attempt <= options.max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        auto client = make_client(options);
        auto res = client.Post(path, body.dump(), "application/json");
        if (!res) {
            error = httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            std::ostringstream msg;
            msg << "HTTP " << res->status << " from " << options.base_url << path << ": "
                << res->body;
            throw Error(msg.str());
        }
        try {
            return json::parse(res->body);
        } catch (const json::exception& e) {
            throw FormatError(std::string("invalid JSON from ") + options.base_url + path +
                              ": " + e.what());
        }
    }
    std::ostringstream msg;
    msg << "transport failure for " << options.base_url << path << " after "
        << options.max_attempts << " attempts: " << error;
    throw TransportError(msg.str(), options.max_attempts);
}

}  // namespace

void SamplingParams::validate() const {
    if (!(top_p > 0.0 && top_p <= 1.0)) {
        throw ValidationError("top_p must lie in (0,1]");
    }
    if (!(temperature >= 0.0)) {
        throw ValidationError("temperature must be >= 0");
    }
    if (max_total_tokens < 1) {
        throw ValidationError("max_total_tokens must be >= 1");
    }
}

void NliRequest::validate() const {
    if (blank(premise)) throw ValidationError("NLI premise is empty");
    if (blank(hypothesis)) throw ValidationError("NLI hypothesis is empty");
}

int estimate_tokens(std::string_view text) {
    return static_cast<int>((text.size() + 3) / 4);
}

int new_token_budget(const CompletionRequest& request) {
    request.params.validate();
    const int prompt_tokens = estimate_tokens(request.prompt);
    const int budget = request.params.max_total_tokens - prompt_tokens;
    if (budget <= 0) {
        std::ostringstream msg;
        msg << "prompt estimated at " << prompt_tokens << " tokens exhausts the total budget of "
            << request.params.max_total_tokens;
        throw BudgetError(msg.str());
    }
    return budget;
}

ScriptedLmBackend::ScriptedLmBackend(std::vector<std::string> script)
    : script_(std::move(script)) {
    if (script_.empty()) throw ValidationError("LM script must not be empty");
}

CompletionResponse ScriptedLmBackend::complete(const CompletionRequest& request) const {
    const int budget = new_token_budget(request);
    (void)budget;
    const std::uint64_t pick =
        hash_combine(fnv1a64(request.prompt), request.params.seed.value_or(0));
    const std::string& text = script_[pick % script_.size()];
    CompletionResponse response;
    response.text = text;
    response.prompt_tokens = estimate_tokens(request.prompt);
    response.completion_tokens = estimate_tokens(text);
    return response;
}

TableNliBackend::TableNliBackend(std::vector<Entry> entries,
                                 std::optional<NliDistribution> fallback)
    : fallback_(std::move(fallback)) {
    for (auto& e : entries) {
        table_.insert_or_assign({std::move(e.premise), std::move(e.hypothesis)},
                                e.distribution);
    }
}

NliDistribution TableNliBackend::classify(const NliRequest& request) const {
    request.validate();
    auto it = table_.find({request.premise, request.hypothesis});
    if (it != table_.end()) return it->second;
    if (fallback_) return *fallback_;
    throw FormatError("NLI pair not in table: premise=\"" + request.premise +
                      "\" hypothesis=\"" + request.hypothesis + "\"");
}

CachedNliBackend::CachedNliBackend(const NliBackend& inner) : inner_(inner) {}

NliDistribution CachedNliBackend::classify(const NliRequest& request) const {
    request.validate();
    const Key key{request.premise, request.hypothesis};

    std::promise<NliDistribution> promise;
    std::shared_future<NliDistribution> future;
    bool owner = false;
    {
        std::lock_guard lock(mutex_);
        auto it = entries_.find(key);
        if (it != entries_.end()) {
            future = it->second;
        } else {
            future = promise.get_future().share();
            entries_.emplace(key, future);
            owner = true;
        }
    }

    if (!owner) {
        hits_.fetch_add(1);
        return future.get();
    }

    misses_.fetch_add(1);
    try {
        NliDistribution d = inner_.classify(request);
        promise.set_value(d);
        return d;
    } catch (...) {
        // Errors are not cached: drop the entry so a later call retries.
        promise.set_exception(std::current_exception());
        std::lock_guard lock(mutex_);
        entries_.erase(key);
        throw;
    }
}

std::map<std::pair<std::string, std::string>, NliDistribution>
CachedNliBackend::snapshot() const {
    std::map<Key, std::shared_future<NliDistribution>> copy;
    {
        std::lock_guard lock(mutex_);
        copy = entries_;
    }
    std::map<Key, NliDistribution> out;
    for (auto& [key, future] : copy) {
        if (future.wait_for(std::chrono::seconds(0)) == std::future_status::ready) {
            out.insert_or_assign(key, future.get());
        }
    }
    return out;
}

void CachedNliBackend::preload(const std::string& premise, const std::string& hypothesis,
                               const NliDistribution& d) {
    std::promise<NliDistribution> promise;
    promise.set_value(d);
    std::lock_guard lock(mutex_);
    entries_.insert_or_assign({premise, hypothesis}, promise.get_future().share());
}

std::optional<std::string> api_key_from_env() {
    const char* value = std::getenv("ENTAIL_GUARD_API_KEY");
    if (value == nullptr || *value == '\0') return std::nullopt;
    return std::string(value);
}

HttpLmBackend::HttpLmBackend(HttpOptions options) : options_(std::move(options)) {
    if (!options_.bearer_token) options_.bearer_token = api_key_from_env();
}

CompletionResponse HttpLmBackend::complete(const CompletionRequest& request) const {
    const int max_new_tokens = new_token_budget(request);
    json body = {
        {"prompt", request.prompt},
        {"max_tokens", max_new_tokens},
        {"top_p", request.params.top_p},
        {"temperature", request.params.temperature},
        {"seed", request.params.seed ? json(*request.params.seed) : json(nullptr)},
    };
    json reply = post_json(options_, "/v1/completions", body);
    CompletionResponse response;
    try {
        response.text = reply.at("choices").at(0).at("text").get<std::string>();
    } catch (const json::exception&) {
        throw FormatError("completion response missing choices[0].text");
    }
    if (reply.contains("usage")) {
        const json& usage = reply["usage"];
        if (usage.contains("prompt_tokens")) {
            response.prompt_tokens = usage["prompt_tokens"].get<int>();
        }
        if (usage.contains("completion_tokens")) {
            response.completion_tokens = usage["completion_tokens"].get<int>();
        }
    }
    return response;
}

HttpNliBackend::HttpNliBackend(HttpOptions options) : options_(std::move(options)) {
    if (!options_.bearer_token) options_.bearer_token = api_key_from_env();
}

NliDistribution HttpNliBackend::classify(const NliRequest& request) const {
    request.validate();
    json body = {{"premise", request.premise}, {"hypothesis", request.hypothesis}};
    return distribution_from_json(post_json(options_, "/nli", body));
}

}  // namespace entail_guard
