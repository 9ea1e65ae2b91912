#pragma once

// In-process API server on an ephemeral port, shared by the unit and
// acceptance suites.

#include "forecaster/api/service.hpp"
#include "forecaster/store/metadata_store.hpp"
#include "forecaster/store/object_store.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>

namespace forecaster::testing {

inline constexpr const char *kUserToken = "tok-alice";
inline constexpr const char *kOtherUserToken = "tok-bob";
inline constexpr const char *kWorkerToken = "tok-worker";

inline api::TokenStore test_tokens() {
	api::TokenStore t;
	t.add_user(kUserToken, "alice");
	t.add_user(kOtherUserToken, "bob");
	t.add_worker(kWorkerToken, "pool");
	return t;
}

class TestServer {
public:
	explicit TestServer(api::ServiceOptions opts = {}, Clock clock = system_clock_ms())
	    : meta(":memory:", std::move(clock)), service(meta, objects, test_tokens(), std::move(opts)) {
		service.register_routes(srv_);
		port_ = srv_.bind_to_any_port("127.0.0.1");
		thread_ = std::thread([this] { srv_.listen_after_bind(); });
		srv_.wait_until_ready();
	}
	~TestServer() {
		srv_.stop();
		thread_.join();
	}
	TestServer(const TestServer &) = delete;
	TestServer &operator=(const TestServer &) = delete;

	int port() const {
		return port_;
	}
	std::string url() const {
		return "http://127.0.0.1:" + std::to_string(port_);
	}
	httplib::Client client(const std::string &token = kUserToken) const {
		httplib::Client c(url());
		c.set_read_timeout(120);
		if (!token.empty()) {
			c.set_bearer_token_auth(token);
		}
		return c;
	}

	store::MetadataStore meta;
	store::MemoryStore objects;
	api::ApiService service;

private:
	httplib::Server srv_;
	int port_ = 0;
	std::thread thread_;
};

inline httplib::Result upload(httplib::Client &c, const std::string &filename, const std::string &csv) {
	httplib::MultipartFormDataItems items = {{"file", csv, filename, "text/csv"}};
	return c.Post("/api/v1/datasets", items);
}

inline httplib::Result post_json(httplib::Client &c, const std::string &path, const nlohmann::json &body) {
	return c.Post(path, body.dump(), "application/json");
}

inline nlohmann::json body_of(const httplib::Result &r) {
	return r && !r->body.empty() ? nlohmann::json::parse(r->body) : nlohmann::json();
}

template <typename Pred>
bool wait_for(Pred pred, std::chrono::milliseconds limit, std::chrono::milliseconds step = std::chrono::milliseconds(20)) {
	const auto until = std::chrono::steady_clock::now() + limit;
	while (std::chrono::steady_clock::now() < until) {
		if (pred()) {
			return true;
		}
		std::this_thread::sleep_for(step);
	}
	return pred();
}

inline std::filesystem::path temp_dir(const std::string &tag) {
	auto p = std::filesystem::temp_directory_path() / (tag + "-" + random_id(""));
	std::filesystem::create_directories(p);
	return p;
}

} // namespace forecaster::testing
