// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#include "et2m/llm.hpp"

#include "et2m/errors.hpp"
#include "et2m/hash.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <regex>

namespace et2m {

using json = nlohmann::json;

std::optional<LlmEndpoint> LlmEndpoint::from_env() {
    const char* url = std::getenv("ET2M_LLM_ENDPOINT");
    if (!url || !*url) return std::nullopt;
    LlmEndpoint ep;
    ep.url = url;
    if (const char* key = std::getenv("ET2M_LLM_API_KEY")) ep.api_key = key;
    const char* model = std::getenv("ET2M_LLM_MODEL");
    ep.model = model && *model ? model : "gemini-2.5-flash";
    return ep;
}

HttpLlmClient::HttpLlmClient(LlmEndpoint endpoint, int timeout_s) : endpoint_(std::move(endpoint)), timeout_s_(timeout_s) {}

std::string HttpLlmClient::complete(const std::string& request) {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(endpoint_.url, m, url_re)) throw LlmTransport("bad LLM endpoint url: " + endpoint_.url);
    const std::string base = m[1];
    const std::string path = m[2].matched ? std::string(m[2]) : "/";

    httplib::Client cli(base);
    cli.set_connection_timeout(timeout_s_);
    cli.set_read_timeout(timeout_s_);
    httplib::Headers headers;
    if (!endpoint_.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.api_key);

    json body = {{"model", endpoint_.model}, {"messages", json::array({{{"role", "user"}, {"content", request}}})}};
    auto res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res) throw LlmTransport("LLM request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw LlmTransport("LLM endpoint returned HTTP " + std::to_string(res->status));
    try {
        auto reply = json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw LlmTransport(std::string("unexpected LLM reply shape: ") + e.what());
    }
}

ResponseCache::ResponseCache(std::filesystem::path dir) : file_(dir / "responses.jsonl") {
    std::filesystem::create_directories(dir);
    std::ifstream in(file_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            auto j = json::parse(line);
            entries_[j.at("key").get<std::string>()] = j.at("response").get<std::string>();
        } catch (const json::exception&) {
            // a torn trailing line from an interrupted writer
        }
    }
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::put(const std::string& key, const std::string& response) {
    std::lock_guard lock(mu_);
    entries_[key] = response;
    const auto now = std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
    std::ofstream out(file_, std::ios::app);
    out << json{{"key", key}, {"response", response}, {"timestamp", now}}.dump() << '\n';
    if (!out) throw IoError("cannot append to " + file_.string());
}

size_t ResponseCache::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

std::string ResponseCache::make_key(const std::string& template_text, const std::string& input) {
    return sha256_hex(sha256_hex(template_text) + "\n" + input);
}

}  // namespace et2m
