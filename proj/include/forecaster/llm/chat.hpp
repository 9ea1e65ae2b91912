#pragma once

#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace forecaster::llm {

struct ChatMessage {
	std::string role; // "system" | "user"
	std::string content;
};

// One chat completion; throws std::exception on any transport or protocol
// failure. Callers own the fallback.
class ChatClient {
public:
	virtual ~ChatClient() = default;
	virtual std::string complete(const std::vector<ChatMessage> &messages) = 0;
};

struct LlmConfig {
	std::string api_base; // e.g. http://localhost:8000/v1
	std::string api_key;
	std::string model;
	std::string think_open = "<think>";
	std::string think_close = "</think>";
	int timeout_seconds = 120;

	bool configured() const {
		return !api_base.empty() && !model.empty();
	}

	// LLM_API_BASE, LLM_API_KEY, LLM_MODEL, LLM_REASONING_MARKERS ("open,close").
	static LlmConfig from_env() {
		LlmConfig c;
		auto env = [](const char *k) -> std::string {
			const char *v = std::getenv(k);
			return v ? v : "";
		};
		c.api_base = env("LLM_API_BASE");
		c.api_key = env("LLM_API_KEY");
		c.model = env("LLM_MODEL");
		const std::string markers = env("LLM_REASONING_MARKERS");
		if (const auto comma = markers.find(','); comma != std::string::npos) {
			c.think_open = markers.substr(0, comma);
			c.think_close = markers.substr(comma + 1);
		}
		return c;
	}
};

} // namespace forecaster::llm
