#pragma once

#include "forecaster/common/error.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace forecaster::api {

struct Principal {
	enum class Kind { User, Worker };
	Kind kind = Kind::User;
	std::string id; // user_id, or a label for the worker token
};

// Static bearer tokens. File format:
//   {"users": {"<token>": "<user_id>", ...}, "workers": {"<token>": "<label>", ...}}
// "workers" may also be a plain array of tokens.
class TokenStore {
public:
	void add_user(const std::string &token, const std::string &user_id) {
		tokens_[token] = {Principal::Kind::User, user_id};
	}
	void add_worker(const std::string &token, const std::string &label = "worker") {
		tokens_[token] = {Principal::Kind::Worker, label};
	}

	std::optional<Principal> find(std::string_view token) const {
		if (token.empty()) {
			return std::nullopt;
		}
		auto it = tokens_.find(std::string(token));
		if (it == tokens_.end()) {
			return std::nullopt;
		}
		return it->second;
	}

	static TokenStore from_json(const nlohmann::json &j) {
		TokenStore t;
		if (j.contains("users")) {
			for (const auto &[token, user] : j["users"].items()) {
				t.add_user(token, user.get<std::string>());
			}
		}
		if (j.contains("workers")) {
			const auto &w = j["workers"];
			if (w.is_array()) {
				for (const auto &token : w) {
					t.add_worker(token.get<std::string>());
				}
			} else {
				for (const auto &[token, label] : w.items()) {
					t.add_worker(token, label.get<std::string>());
				}
			}
		}
		return t;
	}

	static TokenStore load(const std::string &path) {
		std::ifstream in(path);
		if (!in) {
			throw Error(ErrorCode::Internal, "cannot read token file '" + path + "'");
		}
		return from_json(nlohmann::json::parse(in));
	}

private:
	std::map<std::string, Principal> tokens_;
};

inline std::string_view bearer_token(std::string_view header) {
	constexpr std::string_view prefix = "Bearer ";
	if (header.size() > prefix.size() && header.substr(0, prefix.size()) == prefix) {
		return header.substr(prefix.size());
	}
	return {};
}

} // namespace forecaster::api
