#pragma once

#include "forecaster/llm/chat.hpp"

#include <httplib.h>
#include <json.hpp>

#include <stdexcept>
#include <string>

namespace forecaster::llm {

// OpenAI-compatible chat-completions client: POST {api_base}/chat/completions,
// temperature 0, first choice's message content.
class HttpChatClient final : public ChatClient {
public:
	explicit HttpChatClient(LlmConfig cfg) : cfg_(std::move(cfg)) {
		std::string base = cfg_.api_base;
		while (!base.empty() && base.back() == '/') {
			base.pop_back();
		}
		const auto scheme_end = base.find("://");
		const auto path_start = base.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
		origin_ = path_start == std::string::npos ? base : base.substr(0, path_start);
		path_ = (path_start == std::string::npos ? std::string() : base.substr(path_start)) + "/chat/completions";
	}

	std::string complete(const std::vector<ChatMessage> &messages) override {
		nlohmann::json msgs = nlohmann::json::array();
		for (const auto &m : messages) {
			msgs.push_back({{"role", m.role}, {"content", m.content}});
		}
		const nlohmann::json body{{"model", cfg_.model}, {"messages", std::move(msgs)}, {"temperature", 0}};
		httplib::Client client(origin_);
		client.set_connection_timeout(10);
		client.set_read_timeout(cfg_.timeout_seconds);
		httplib::Headers headers;
		if (!cfg_.api_key.empty()) {
			headers.emplace("Authorization", "Bearer " + cfg_.api_key);
		}
		auto res = client.Post(path_, headers, body.dump(), "application/json");
		if (!res) {
			throw std::runtime_error("chat endpoint unreachable: " + httplib::to_string(res.error()));
		}
		if (res->status != 200) {
			throw std::runtime_error("chat endpoint returned HTTP " + std::to_string(res->status));
		}
		const auto j = nlohmann::json::parse(res->body);
		return j.at("choices").at(0).at("message").at("content").get<std::string>();
	}

private:
	LlmConfig cfg_;
	std::string origin_;
	std::string path_;
};

} // namespace forecaster::llm
