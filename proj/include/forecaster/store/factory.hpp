#pragma once

#include "forecaster/store/object_store.hpp"
#include "forecaster/store/s3_store.hpp"

#include <cstdlib>
#include <memory>
#include <string>

namespace forecaster::store {

// "memory:" -> in-process store; "s3://host[:port]/bucket" -> S3-compatible
// HTTP backend (credentials from STORE_ACCESS_KEY / STORE_SECRET_KEY unless
// given); "file:///path" or a bare path -> filesystem backend.
inline std::unique_ptr<ObjectStore> make_object_store(const std::string &url, std::string access_key = {},
                                                      std::string secret_key = {}) {
	if (url == "memory:") {
		return std::make_unique<MemoryStore>();
	}
	if (url.starts_with("s3://") || url.starts_with("s3+http://")) {
		auto env = [](const char *k) {
			const char *v = std::getenv(k);
			return std::string(v ? v : "");
		};
		sigv4::Credentials creds;
		creds.access_key = access_key.empty() ? env("STORE_ACCESS_KEY") : std::move(access_key);
		creds.secret_key = secret_key.empty() ? env("STORE_SECRET_KEY") : std::move(secret_key);
		if (const auto region = env("STORE_REGION"); !region.empty()) {
			creds.region = region;
		}
		return S3Store::from_url(url, std::move(creds));
	}
	std::string path = url;
	if (path.starts_with("file://")) {
		path = path.substr(7);
	}
	if (path.empty()) {
		throw Error(ErrorCode::StoreError, "empty object store location");
	}
	return std::make_unique<FilesystemStore>(path);
}

} // namespace forecaster::store
