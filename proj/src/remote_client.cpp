#include "agora/remote_client.hpp"

#include <chrono>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "agora/evolution.hpp"

namespace agora {

struct RemoteClient::Impl {
    explicit Impl(EndpointConfig cfg) : config(std::move(cfg)) {}

    EndpointConfig config;
};

RemoteClient::RemoteClient(EndpointConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

RemoteClient::~RemoteClient() = default;
RemoteClient::RemoteClient(RemoteClient&&) noexcept = default;
RemoteClient& RemoteClient::operator=(RemoteClient&&) noexcept = default;

const EndpointConfig& RemoteClient::config() const { return impl_->config; }

namespace {

AgentResponse parse_chat_response(const std::string& body, int attempts) {
    nlohmann::json payload;
    try {
        payload = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw AgentError(AgentError::Kind::Malformed, attempts,
                         std::string("response is not valid JSON: ") + e.what());
    }
    if (!payload.contains("choices") || !payload["choices"].is_array() ||
        payload["choices"].empty()) {
        throw AgentError(AgentError::Kind::Malformed, attempts,
                         "response carries no choices");
    }
    const nlohmann::json& choice = payload["choices"][0];

    AgentResponse response;
    try {
        response.text = choice.at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw AgentError(AgentError::Kind::Malformed, attempts,
                         "first choice carries no message content");
    }

    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("content") &&
        choice["logprobs"]["content"].is_array()) {
        std::vector<TokenLogprob> lps;
        for (const auto& item : choice["logprobs"]["content"]) {
            TokenLogprob lp;
            lp.token = item.value("token", "");
            lp.logprob = item.value("logprob", 0.0);
            lps.push_back(std::move(lp));
        }
        response.token_logprobs = std::move(lps);
    }
    if (payload.contains("usage") && payload["usage"].is_object()) {
        response.usage.prompt_tokens = payload["usage"].value("prompt_tokens", 0);
        response.usage.completion_tokens =
            payload["usage"].value("completion_tokens", 0);
    }
    return response;
}

}  // namespace

AgentResponse RemoteClient::chat(const std::string& system_prompt,
                                 const std::string& user_prompt,
                                 const SamplingParams& sampling) {
    const EndpointConfig& cfg = impl_->config;

    nlohmann::json request{
        {"model", cfg.model},
        {"messages",
         {{{"role", "system"}, {"content", system_prompt}},
          {{"role", "user"}, {"content", user_prompt}}}},
        {"temperature", sampling.temperature},
        {"top_p", sampling.top_p},
        {"max_tokens", sampling.max_tokens},
        {"logprobs", sampling.logprobs},
        {"stream", false},
    };
    std::string body = request.dump();

    httplib::Headers headers;
    if (const char* key = std::getenv(cfg.api_key_env.c_str());
        key != nullptr && key[0] != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto started = std::chrono::steady_clock::now();
    std::string last_error = "no attempt made";
    AgentError::Kind last_kind = AgentError::Kind::Unreachable;

    int attempts = 0;
    while (attempts < std::max(cfg.max_retries, 1)) {
        ++attempts;

        httplib::Client client(cfg.base_url);
        client.set_connection_timeout(cfg.timeout_ms / 1000,
                                      (cfg.timeout_ms % 1000) * 1000);
        client.set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
        client.set_write_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);

        httplib::Result result =
            client.Post(cfg.path, headers, body, "application/json");

        if (!result) {
            bool timeout = result.error() == httplib::Error::ConnectionTimeout ||
                           result.error() == httplib::Error::Read ||
                           result.error() == httplib::Error::Write;
            last_kind = timeout ? AgentError::Kind::Timeout
                                : AgentError::Kind::Unreachable;
            last_error = httplib::to_string(result.error());
        } else if (result->status >= 500) {
            last_kind = AgentError::Kind::Unreachable;
            last_error = "server returned status " + std::to_string(result->status);
        } else if (result->status != 200) {
            throw AgentError(AgentError::Kind::Malformed, attempts,
                             "server returned status " +
                                 std::to_string(result->status));
        } else {
            AgentResponse response = parse_chat_response(result->body, attempts);
            response.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - started);
            return response;
        }

        if (attempts < cfg.max_retries && cfg.retry_backoff_ms > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(cfg.retry_backoff_ms));
        }
    }
    throw AgentError(last_kind, attempts,
                     "endpoint unreachable after " + std::to_string(attempts) +
                         " attempts: " + last_error);
}

AgentResponse RemoteBackend::invoke(const PromptContext& ctx,
                                    const SamplingParams& sampling) {
    return client_.chat(ctx.preamble, ctx.render(), sampling);
}

// POST the manifest to the trainer webhook; 2xx is success and the response
// body (if any) names the new adapter.
TrainerOutcome webhook_trainer_post(const std::string& url,
                                    const DatasetFile& dataset, int epoch,
                                    const LoraParams& lora) {
    TrainerOutcome outcome;
    outcome.epoch = epoch;

    std::string base = url;
    std::string path = "/";
    size_t scheme = base.find("://");
    size_t slash = scheme == std::string::npos ? base.find('/')
                                               : base.find('/', scheme + 3);
    if (slash != std::string::npos) {
        path = base.substr(slash);
        base = base.substr(0, slash);
    }

    nlohmann::json manifest{
        {"dataset", dataset.path.string()},
        {"count", dataset.count},
        {"digest", dataset.digest},
        {"epoch", epoch},
        {"lora", {{"rank", lora.rank}, {"alpha", lora.alpha},
                  {"dropout", lora.dropout}}},
    };

    httplib::Client client(base);
    client.set_connection_timeout(10, 0);
    httplib::Result result =
        client.Post(path, manifest.dump(), "application/json");
    if (result && result->status >= 200 && result->status < 300) {
        outcome.status = TrainerOutcome::Status::Ok;
        outcome.adapter_id = trim(result->body);
        if (outcome.adapter_id.empty()) {
            outcome.adapter_id = "adapter-epoch-" + std::to_string(epoch);
        }
    } else {
        outcome.status = TrainerOutcome::Status::Failed;
        outcome.detail = result ? "webhook returned status " +
                                      std::to_string(result->status)
                                : httplib::to_string(result.error());
    }
    return outcome;
}

}  // namespace agora
