// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>

namespace et2m {

class LlmClient {
public:
    virtual ~LlmClient() = default;
    // Returns the raw completion text; throws LlmTransport on failure.
    virtual std::string complete(const std::string& request) = 0;
    virtual std::string model() const = 0;
};

struct LlmEndpoint {
    std::string url;  // e.g. http://host:port/v1/chat/completions
    std::string api_key;
    std::string model;

    // ET2M_LLM_ENDPOINT, ET2M_LLM_API_KEY, ET2M_LLM_MODEL. nullopt when the
    // endpoint variable is unset.
    static std::optional<LlmEndpoint> from_env();
};

// Chat-completions style JSON over HTTP:
//   POST {"model": m, "messages": [{"role": "user", "content": request}]}
//   <- {"choices": [{"message": {"content": "..."}}]}
class HttpLlmClient : public LlmClient {
public:
    explicit HttpLlmClient(LlmEndpoint endpoint, int timeout_s = 60);
    std::string complete(const std::string& request) override;
    std::string model() const override { return endpoint_.model; }

private:
    LlmEndpoint endpoint_;
    int timeout_s_;
};

// Backend driven by a callable; used for fixtures and tests.
class FunctionLlmClient : public LlmClient {
public:
    using Fn = std::function<std::string(const std::string&)>;
    explicit FunctionLlmClient(Fn fn, std::string model = "function") : fn_(std::move(fn)), model_(std::move(model)) {}
    std::string complete(const std::string& request) override {
        ++calls;
        return fn_(request);
    }
    std::string model() const override { return model_; }

    std::atomic<int> calls{0};

private:
    Fn fn_;
    std::string model_;
};

// Append-only JSON-lines cache of raw responses: {"key","response","timestamp"}.
// Concurrent writers are serialized; the last write for a key wins.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& response);
    size_t size() const;

    static std::string make_key(const std::string& template_text, const std::string& input);

private:
    std::filesystem::path file_;
    mutable std::mutex mu_;
    std::map<std::string, std::string> entries_;
};

}  // namespace et2m
