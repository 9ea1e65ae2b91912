#pragma once

#include "forecaster/common/error.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace forecaster::store {

// Flat key/value blob store. Keys are '/'-separated relative paths such as
// "{owner_id}/{filename}" or "{job_id}/results.json".
class ObjectStore {
public:
	virtual ~ObjectStore() = default;

	virtual void put(const std::string &key, std::string_view data) = 0;
	virtual std::optional<std::string> get(const std::string &key) const = 0;
	virtual bool exists(const std::string &key) const = 0;
	virtual void remove(const std::string &key) = 0;
	// Keys starting with `prefix`, sorted.
	virtual std::vector<std::string> list(const std::string &prefix) const = 0;

	std::string get_or_throw(const std::string &key) const {
		auto data = get(key);
		if (!data) {
			throw Error(ErrorCode::NotFound, "object '" + key + "' not found", key);
		}
		return std::move(*data);
	}
};

inline void validate_key(std::string_view key) {
	if (key.empty() || key.front() == '/' || key.back() == '/') {
		throw Error(ErrorCode::StoreError, "invalid object key '" + std::string(key) + "'");
	}
	std::size_t start = 0;
	while (start <= key.size()) {
		const std::size_t end = std::min(key.find('/', start), key.size());
		const std::string_view part = key.substr(start, end - start);
		if (part.empty() || part == "." || part == "..") {
			throw Error(ErrorCode::StoreError, "invalid object key '" + std::string(key) + "'");
		}
		start = end + 1;
	}
	for (char c : key) {
		if (static_cast<unsigned char>(c) < 0x20 || c == '\\') {
			throw Error(ErrorCode::StoreError, "invalid character in object key");
		}
	}
}

class MemoryStore final : public ObjectStore {
public:
	void put(const std::string &key, std::string_view data) override {
		validate_key(key);
		std::lock_guard lock(mutex_);
		objects_[key] = std::string(data);
	}

	std::optional<std::string> get(const std::string &key) const override {
		std::lock_guard lock(mutex_);
		auto it = objects_.find(key);
		if (it == objects_.end()) {
			return std::nullopt;
		}
		return it->second;
	}

	bool exists(const std::string &key) const override {
		std::lock_guard lock(mutex_);
		return objects_.contains(key);
	}

	void remove(const std::string &key) override {
		std::lock_guard lock(mutex_);
		objects_.erase(key);
	}

	std::vector<std::string> list(const std::string &prefix) const override {
		std::lock_guard lock(mutex_);
		std::vector<std::string> keys;
		for (auto it = objects_.lower_bound(prefix); it != objects_.end() && it->first.starts_with(prefix); ++it) {
			keys.push_back(it->first);
		}
		return keys;
	}

private:
	mutable std::mutex mutex_;
	std::map<std::string, std::string> objects_;
};

// Objects are files under a root directory. Writes go to a temporary sibling
// and are renamed into place, so readers never observe partial objects.
class FilesystemStore final : public ObjectStore {
public:
	explicit FilesystemStore(std::filesystem::path root) : root_(std::move(root)) {
		std::filesystem::create_directories(root_);
	}

	const std::filesystem::path &root() const {
		return root_;
	}

	void put(const std::string &key, std::string_view data) override {
		validate_key(key);
		const auto path = root_ / key;
		std::filesystem::create_directories(path.parent_path());
		auto tmp = path;
		tmp += ".tmp-" + random_suffix();
		{
			std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
			if (!out) {
				throw Error(ErrorCode::StoreError, "cannot open '" + tmp.string() + "' for writing");
			}
			out.write(data.data(), static_cast<std::streamsize>(data.size()));
			if (!out) {
				throw Error(ErrorCode::StoreError, "short write to '" + tmp.string() + "'");
			}
		}
		std::filesystem::rename(tmp, path);
	}

	std::optional<std::string> get(const std::string &key) const override {
		validate_key(key);
		std::ifstream in(root_ / key, std::ios::binary);
		if (!in) {
			return std::nullopt;
		}
		std::ostringstream ss;
		ss << in.rdbuf();
		return ss.str();
	}

	bool exists(const std::string &key) const override {
		validate_key(key);
		return std::filesystem::is_regular_file(root_ / key);
	}

	void remove(const std::string &key) override {
		validate_key(key);
		std::error_code ec;
		std::filesystem::remove(root_ / key, ec);
	}

	std::vector<std::string> list(const std::string &prefix) const override {
		std::vector<std::string> keys;
		std::error_code ec;
		for (auto it = std::filesystem::recursive_directory_iterator(root_, ec);
		     !ec && it != std::filesystem::recursive_directory_iterator(); it.increment(ec)) {
			if (!it->is_regular_file()) {
				continue;
			}
			std::string key = std::filesystem::relative(it->path(), root_).generic_string();
			if (key.find(".tmp-") != std::string::npos) {
				continue;
			}
			if (key.starts_with(prefix)) {
				keys.push_back(std::move(key));
			}
		}
		std::sort(keys.begin(), keys.end());
		return keys;
	}

private:
	static std::string random_suffix() {
		static thread_local std::mt19937_64 rng{std::random_device{}()};
		std::ostringstream ss;
		ss << std::hex << rng();
		return ss.str();
	}

	std::filesystem::path root_;
};

} // namespace forecaster::store
