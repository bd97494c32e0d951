#include "entail_guard/mock_server.hpp"

#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "entail_guard/errors.hpp"

namespace entail_guard {

namespace {

using nlohmann::json;

json parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open fixture file: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

NliDistribution distribution_from(const json& j, const std::string& where) {
    try {
        return NliDistribution(j.at("contradiction").get<double>(),
                               j.at("neutral").get<double>(),
                               j.at("entailment").get<double>());
    } catch (const json::exception& e) {
        throw FormatError("bad distribution in " + where + ": " + e.what());
    }
}

}  // namespace

MockFixture MockFixture::load(const std::filesystem::path& path) {
    const json j = parse_file(path);
    MockFixture fixture;
    if (j.contains("lm")) {
        try {
            fixture.lm_script = j.at("lm").at("script").get<std::vector<std::string>>();
        } catch (const json::exception& e) {
            throw FormatError("bad lm.script in " + path.string() + ": " + e.what());
        }
    }
    if (j.contains("nli")) {
        const json& nli = j.at("nli");
        std::vector<TableNliBackend::Entry> entries;
        if (nli.contains("entries")) {
            for (const json& e : nli.at("entries")) {
                TableNliBackend::Entry entry{
                    e.at("premise").get<std::string>(),
                    e.at("hypothesis").get<std::string>(),
                    distribution_from(e, path.string() + " nli.entries"),
                };
                entries.push_back(std::move(entry));
            }
        }
        fixture.nli_entries = std::move(entries);
        if (nli.contains("default")) {
            fixture.nli_default = distribution_from(nli.at("default"), path.string() + " nli.default");
        }
    }
    if (!fixture.lm_script && !fixture.nli_entries) {
        throw FormatError("fixture " + path.string() + " has neither an 'lm' nor an 'nli' section");
    }
    return fixture;
}

std::vector<std::string> MockFixture::require_lm_script() const {
    if (!lm_script || lm_script->empty()) {
        throw ValidationError("fixture has no LM script");
    }
    return *lm_script;
}

ScriptedLmBackend MockFixture::make_lm_backend() const {
    return ScriptedLmBackend(require_lm_script());
}

TableNliBackend MockFixture::make_nli_backend() const {
    if (!nli_entries) throw ValidationError("fixture has no NLI table");
    return TableNliBackend(*nli_entries, nli_default);
}

struct MockServer::Impl {
    MockFixture fixture;
    Options options;
    std::optional<ScriptedLmBackend> lm;
    std::optional<TableNliBackend> nli;
    httplib::Server server;
    std::thread thread;
    int port = 0;

    mutable std::mutex state_mutex;
    std::string last_completion_body;
    std::string last_authorization;

    void log(const std::string& line) const {
        if (options.logger) options.logger(line);
    }
};

MockServer::MockServer(MockFixture fixture, Options options) : impl_(std::make_unique<Impl>()) {
    impl_->fixture = std::move(fixture);
    impl_->options = std::move(options);
    if (impl_->fixture.lm_script) impl_->lm.emplace(impl_->fixture.make_lm_backend());
    if (impl_->fixture.nli_entries) impl_->nli.emplace(impl_->fixture.make_nli_backend());

    auto& server = impl_->server;
    Impl* impl = impl_.get();

    server.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                                    std::exception_ptr ep) {
        std::string message = "internal error";
        try {
            if (ep) std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            message = e.what();
        } catch (...) {
        }
        res.status = 500;
        res.set_content(json{{"error", message}}.dump(), "application/json");
    });

    server.Get("/healthz", [impl](const httplib::Request&, httplib::Response& res) {
        impl->log("GET /healthz 200");
        res.set_content("ok", "text/plain");
    });

    server.Post("/nli", [impl](const httplib::Request& req, httplib::Response& res) {
        {
            std::lock_guard lock(impl->state_mutex);
            impl->last_authorization = req.get_header_value("Authorization");
        }
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception& e) {
            res.status = 400;
            res.set_content(json{{"error", std::string("invalid JSON: ") + e.what()}}.dump(),
                            "application/json");
            impl->log("POST /nli 400");
            return;
        }
        if (!body.is_object() || !body.contains("premise") || !body.contains("hypothesis") ||
            !body["premise"].is_string() || !body["hypothesis"].is_string()) {
            res.status = 400;
            res.set_content(json{{"error", "expected {\"premise\": string, \"hypothesis\": string}"}}
                                .dump(),
                            "application/json");
            impl->log("POST /nli 400");
            return;
        }
        if (!impl->nli) {
            res.status = 404;
            res.set_content(json{{"error", "no NLI fixture configured"}}.dump(),
                            "application/json");
            impl->log("POST /nli 404");
            return;
        }
        NliRequest request{body["premise"].get<std::string>(),
                           body["hypothesis"].get<std::string>()};
        try {
            NliDistribution d = impl->nli->classify(request);
            res.set_content(json{{"contradiction", d.contradiction()},
                                 {"neutral", d.neutral()},
                                 {"entailment", d.entailment()}}
                                .dump(),
                            "application/json");
            impl->log("POST /nli 200");
        } catch (const FormatError& e) {
            res.status = 404;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
            impl->log("POST /nli 404");
        } catch (const ValidationError& e) {
            res.status = 400;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
            impl->log("POST /nli 400");
        }
    });

    server.Post("/v1/completions", [impl](const httplib::Request& req, httplib::Response& res) {
        {
            std::lock_guard lock(impl->state_mutex);
            impl->last_completion_body = req.body;
            impl->last_authorization = req.get_header_value("Authorization");
        }
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception& e) {
            res.status = 400;
            res.set_content(json{{"error", std::string("invalid JSON: ") + e.what()}}.dump(),
                            "application/json");
            impl->log("POST /v1/completions 400");
            return;
        }
        if (!body.is_object() || !body.contains("prompt") || !body["prompt"].is_string()) {
            res.status = 400;
            res.set_content(json{{"error", "expected {\"prompt\": string, ...}"}}.dump(),
                            "application/json");
            impl->log("POST /v1/completions 400");
            return;
        }
        if (!impl->lm) {
            res.status = 404;
            res.set_content(json{{"error", "no LM fixture configured"}}.dump(),
                            "application/json");
            impl->log("POST /v1/completions 404");
            return;
        }
        const std::string prompt = body["prompt"].get<std::string>();
        const int prompt_tokens = estimate_tokens(prompt);

        CompletionRequest request;
        request.prompt = prompt;
        if (body.contains("top_p") && body["top_p"].is_number()) {
            request.params.top_p = body["top_p"].get<double>();
        }
        if (body.contains("temperature") && body["temperature"].is_number()) {
            request.params.temperature = body["temperature"].get<double>();
        }
        if (body.contains("seed") && body["seed"].is_number()) {
            request.params.seed = body["seed"].get<std::uint64_t>();
        }
        // The wire carries the new-token allowance; rebuild a total budget the
        // scripted backend will accept.
        int max_new = 16;
        if (body.contains("max_tokens") && body["max_tokens"].is_number()) {
            max_new = body["max_tokens"].get<int>();
        }
        if (max_new < 1) {
            res.status = 400;
            res.set_content(json{{"error", "max_tokens must be >= 1"}}.dump(),
                            "application/json");
            impl->log("POST /v1/completions 400");
            return;
        }
        request.params.max_total_tokens = prompt_tokens + max_new;

        CompletionResponse out = impl->lm->complete(request);
        json reply = {
            {"choices", json::array({json{{"text", out.text}}})},
            {"usage",
             {{"prompt_tokens", prompt_tokens},
              {"completion_tokens", estimate_tokens(out.text)}}},
        };
        res.set_content(reply.dump(), "application/json");
        impl->log("POST /v1/completions 200");
    });

    if (impl_->options.port == 0) {
        impl_->port = server.bind_to_any_port(impl_->options.host);
        if (impl_->port <= 0) {
            throw TransportError("mock server could not bind to any port on " +
                                     impl_->options.host,
                                 1);
        }
    } else {
        if (!server.bind_to_port(impl_->options.host, impl_->options.port)) {
            throw TransportError("mock server port in use: " + impl_->options.host + ":" +
                                     std::to_string(impl_->options.port),
                                 1);
        }
        impl_->port = impl_->options.port;
    }

    impl_->thread = std::thread([impl] { impl->server.listen_after_bind(); });
    server.wait_until_ready();
}

MockServer::~MockServer() {
    stop();
}

void MockServer::stop() {
    if (!impl_) return;
    if (impl_->server.is_running()) impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

int MockServer::port() const {
    return impl_->port;
}

std::string MockServer::base_url() const {
    return "http://" + impl_->options.host + ":" + std::to_string(impl_->port);
}

std::string MockServer::last_completion_body() const {
    std::lock_guard lock(impl_->state_mutex);
    return impl_->last_completion_body;
}

std::string MockServer::last_authorization() const {
    std::lock_guard lock(impl_->state_mutex);
    return impl_->last_authorization;
}

}  // namespace entail_guard
