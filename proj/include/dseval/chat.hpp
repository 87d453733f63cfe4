#pragma once
// Chat-completion endpoint abstraction: an HTTP client speaking the
// OpenAI-compatible /v1/chat/completions schema, plus the interface mocks
// implement in tests.

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "dseval/error.hpp"

namespace dseval::chat {

using json = nlohmann::json;

struct Message {
    std::string role;  // system | user | assistant
    std::string content;
};

struct Params {
    double temperature = 0.6;
    double top_p = 0.95;
    std::optional<int> max_tokens;
};

struct Usage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

struct Completion {
    std::string content;
    Usage usage;
};

struct Exchange {
    std::vector<Message> request;
    std::string response;
};

class Endpoint {
public:
    virtual ~Endpoint() = default;

    virtual Completion chat(const std::vector<Message>& messages,
                            const std::optional<Params>& override_params = std::nullopt) = 0;

    // Transcript of every exchange this endpoint has served.
    const std::vector<Exchange>& transcript() const { return transcript_; }

protected:
    void log_exchange(const std::vector<Message>& req, const std::string& resp) {
        std::lock_guard<std::mutex> lock(mutex_);
        transcript_.push_back({req, resp});
    }

private:
    std::mutex mutex_;
    std::vector<Exchange> transcript_;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{200};
};

struct EndpointConfig {
    std::string base_url;  // e.g. http://host:port
    std::string model;
    Params params;
    std::chrono::seconds timeout{120};
    RetryPolicy retry;
    std::string api_key;  // optional bearer token
};

// Declared here, defined in http_chat.hpp to keep httplib out of headers
// that never touch the network.
std::unique_ptr<Endpoint> make_http_endpoint(const EndpointConfig& config);

// Scriptable endpoint for tests: a handler maps the message list to a reply.
class FnEndpoint : public Endpoint {
public:
    using Handler = std::function<std::string(const std::vector<Message>&)>;

    explicit FnEndpoint(Handler handler) : handler_(std::move(handler)) {}

    Completion chat(const std::vector<Message>& messages,
                    const std::optional<Params>& = std::nullopt) override {
        std::string reply = handler_(messages);
        log_exchange(messages, reply);
        return Completion{reply, {}};
    }

private:
    Handler handler_;
};

}  // namespace dseval::chat
