#pragma once
// OpenAI-compatible chat client over HTTP with retry + exponential backoff.

#include <httplib.h>

#include <memory>
#include <thread>

#include "dseval/chat.hpp"

namespace dseval::chat {

class HttpEndpoint : public Endpoint {
public:
    explicit HttpEndpoint(EndpointConfig config) : config_(std::move(config)) {}

    Completion chat(const std::vector<Message>& messages,
                    const std::optional<Params>& override_params = std::nullopt) override {
        const Params& p = override_params ? *override_params : config_.params;
        json body = {{"model", config_.model},
                     {"temperature", p.temperature},
                     {"top_p", p.top_p},
                     {"messages", json::array()}};
        if (p.max_tokens) body["max_tokens"] = *p.max_tokens;
        for (const auto& m : messages)
            body["messages"].push_back({{"role", m.role}, {"content", m.content}});

        std::string payload = body.dump();
        auto backoff = config_.retry.initial_backoff;
        std::string last_error;
        for (int attempt = 0; attempt < config_.retry.attempts; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(backoff);
                backoff *= 2;
            }
            httplib::Client client(config_.base_url);
            client.set_read_timeout(config_.timeout);
            client.set_connection_timeout(std::chrono::seconds(10));
            httplib::Headers headers;
            if (!config_.api_key.empty())
                headers.emplace("Authorization", "Bearer " + config_.api_key);
            auto res = client.Post("/v1/chat/completions", headers, payload, "application/json");
            if (!res) {
                last_error = "transport failure: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_error = "http status " + std::to_string(res->status);
                continue;
            }
            json rj = json::parse(res->body, nullptr, false);
            if (rj.is_discarded() || !rj.contains("choices") || rj["choices"].empty()) {
                last_error = "unparseable completion body";
                continue;
            }
            Completion out;
            out.content = rj["choices"][0]["message"]["content"].get<std::string>();
            if (rj.contains("usage")) {
                out.usage.prompt_tokens = rj["usage"].value("prompt_tokens", 0);
                out.usage.completion_tokens = rj["usage"].value("completion_tokens", 0);
            }
            log_exchange(messages, out.content);
            return out;
        }
        throw Error("endpoint_failure", "chat endpoint failed after " +
                                            std::to_string(config_.retry.attempts) +
                                            " attempts: " + last_error);
    }

private:
    EndpointConfig config_;
};

inline std::unique_ptr<Endpoint> make_http_endpoint(const EndpointConfig& config) {
    return std::make_unique<HttpEndpoint>(config);
}

}  // namespace dseval::chat
