#pragma once

#include <memory>
#include <string>

#include "agora/agents.hpp"
#include "agora/types.hpp"

namespace agora {

struct EndpointConfig {
    std::string base_url;  // e.g. http://127.0.0.1:8089
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_key_env = "AGORA_API_KEY";
    int max_retries = 3;
    int timeout_ms = 30000;
    int retry_backoff_ms = 250;
};

// Chat-completions client. POSTs the message list with sampling parameters,
// parses the first choice's content and per-token logprobs when present.
// Connection errors, timeouts and 5xx responses are retried up to max_retries;
// malformed responses are not.
class RemoteClient {
public:
    explicit RemoteClient(EndpointConfig config);
    ~RemoteClient();

    RemoteClient(RemoteClient&&) noexcept;
    RemoteClient& operator=(RemoteClient&&) noexcept;

    AgentResponse chat(const std::string& system_prompt,
                       const std::string& user_prompt,
                       const SamplingParams& sampling);

    const EndpointConfig& config() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

class RemoteBackend : public AgentBackend {
public:
    explicit RemoteBackend(EndpointConfig config)
        : client_(std::move(config)) {}

    AgentResponse invoke(const PromptContext& ctx,
                         const SamplingParams& sampling) override;
    bool supports_logprobs() const override { return true; }

private:
    RemoteClient client_;
};

}  // namespace agora
