#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "entail_guard/backends.hpp"

namespace entail_guard {

/// Static fixture backing the mock backends and the mock inference server.
/// One file can carry an LM script, an NLI table, or both, so the same
/// fixture drives in-process mocks and the wire server identically.
struct MockFixture {
    std::optional<std::vector<std::string>> lm_script;
    std::optional<std::vector<TableNliBackend::Entry>> nli_entries;
    std::optional<NliDistribution> nli_default;

    static MockFixture load(const std::filesystem::path& path);

    std::vector<std::string> require_lm_script() const;
    TableNliBackend make_nli_backend() const;
    ScriptedLmBackend make_lm_backend() const;
};

/// Local HTTP test double serving POST /nli, POST /v1/completions and
/// GET /healthz from a MockFixture. The server thread starts in the
/// constructor (which throws on a busy port) and stops on destruction.
class MockServer {
public:
    struct Options {
        std::string host = "127.0.0.1";
        int port = 0;  // 0 picks a free port
        std::function<void(const std::string&)> logger;
    };

    MockServer(MockFixture fixture, Options options);
    ~MockServer();

    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    int port() const;
    std::string base_url() const;
    void stop();

    /// Last request bodies/headers seen, for tests that assert on the wire.
    std::string last_completion_body() const;
    std::string last_authorization() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace entail_guard
