#pragma once

#include "forecaster/common/error.hpp"
#include "forecaster/store/object_store.hpp"

#include <httplib.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace forecaster::store {

namespace sigv4 {

inline std::string hex(const unsigned char *data, std::size_t n) {
	static const char *digits = "0123456789abcdef";
	std::string out;
	out.reserve(n * 2);
	for (std::size_t i = 0; i < n; ++i) {
		out.push_back(digits[data[i] >> 4]);
		out.push_back(digits[data[i] & 0xF]);
	}
	return out;
}

inline std::string sha256_hex(std::string_view data) {
	unsigned char digest[SHA256_DIGEST_LENGTH];
	SHA256(reinterpret_cast<const unsigned char *>(data.data()), data.size(), digest);
	return hex(digest, sizeof digest);
}

inline std::string hmac_sha256(std::string_view key, std::string_view data) {
	unsigned char digest[EVP_MAX_MD_SIZE];
	unsigned int len = 0;
	HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), reinterpret_cast<const unsigned char *>(data.data()),
	     data.size(), digest, &len);
	return std::string(reinterpret_cast<const char *>(digest), len);
}

// RFC-3986 unreserved characters pass through; everything else is %XX. Slashes
// are kept when encoding a path.
inline std::string uri_encode(std::string_view s, bool keep_slash) {
	std::string out;
	for (unsigned char c : s) {
		if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_' ||
		    c == '.' || c == '~' || (keep_slash && c == '/')) {
			out.push_back(static_cast<char>(c));
		} else {
			char buf[4];
			std::snprintf(buf, sizeof buf, "%%%02X", c);
			out += buf;
		}
	}
	return out;
}

struct Request {
	std::string method;
	std::string canonical_uri; // already encoded
	std::map<std::string, std::string> query; // raw (unencoded) name -> value
	std::map<std::string, std::string> headers; // lowercase name -> value
	std::string payload_hash;
};

struct Credentials {
	std::string access_key;
	std::string secret_key;
	std::string region = "us-east-1";
	std::string service = "s3";
};

inline std::string canonical_query(const std::map<std::string, std::string> &query) {
	std::vector<std::pair<std::string, std::string>> encoded;
	for (const auto &[k, v] : query) {
		encoded.emplace_back(uri_encode(k, false), uri_encode(v, false));
	}
	std::sort(encoded.begin(), encoded.end());
	std::string out;
	for (const auto &[k, v] : encoded) {
		if (!out.empty()) {
			out.push_back('&');
		}
		out += k + "=" + v;
	}
	return out;
}

// Value for the Authorization header. `amz_date` is YYYYMMDD'T'HHMMSS'Z' and must
// match the x-amz-date header included in `req.headers`.
inline std::string authorization(const Request &req, const Credentials &creds, const std::string &amz_date) {
	std::string canonical_headers, signed_headers;
	for (const auto &[name, value] : req.headers) {
		canonical_headers += name + ":" + value + "\n";
		if (!signed_headers.empty()) {
			signed_headers.push_back(';');
		}
		signed_headers += name;
	}
	const std::string canonical_request = req.method + "\n" + req.canonical_uri + "\n" + canonical_query(req.query) +
	                                      "\n" + canonical_headers + "\n" + signed_headers + "\n" + req.payload_hash;
	const std::string date = amz_date.substr(0, 8);
	const std::string scope = date + "/" + creds.region + "/" + creds.service + "/aws4_request";
	const std::string string_to_sign =
	    "AWS4-HMAC-SHA256\n" + amz_date + "\n" + scope + "\n" + sha256_hex(canonical_request);
	const std::string k_date = hmac_sha256("AWS4" + creds.secret_key, date);
	const std::string k_region = hmac_sha256(k_date, creds.region);
	const std::string k_service = hmac_sha256(k_region, creds.service);
	const std::string k_signing = hmac_sha256(k_service, "aws4_request");
	const std::string sig = hmac_sha256(k_signing, string_to_sign);
	return "AWS4-HMAC-SHA256 Credential=" + creds.access_key + "/" + scope + ", SignedHeaders=" + signed_headers +
	       ", Signature=" + hex(reinterpret_cast<const unsigned char *>(sig.data()), sig.size());
}

inline std::string amz_date_now() {
	const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
	std::tm tm{};
	gmtime_r(&t, &tm);
	char buf[20];
	std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
	return buf;
}

} // namespace sigv4

namespace detail {

inline std::string xml_unescape(std::string_view s) {
	std::string out;
	for (std::size_t i = 0; i < s.size(); ++i) {
		if (s[i] != '&') {
			out.push_back(s[i]);
			continue;
		}
		const auto semi = s.find(';', i);
		if (semi == std::string_view::npos) {
			out.push_back(s[i]);
			continue;
		}
		const std::string_view ent = s.substr(i + 1, semi - i - 1);
		if (ent == "amp") {
			out.push_back('&');
		} else if (ent == "lt") {
			out.push_back('<');
		} else if (ent == "gt") {
			out.push_back('>');
		} else if (ent == "quot") {
			out.push_back('"');
		} else if (ent == "apos") {
			out.push_back('\'');
		} else {
			out.append(s.substr(i, semi - i + 1));
		}
		i = semi;
	}
	return out;
}

inline std::vector<std::string> xml_values(std::string_view xml, std::string_view tag) {
	std::vector<std::string> out;
	const std::string open = "<" + std::string(tag) + ">";
	const std::string close = "</" + std::string(tag) + ">";
	std::size_t pos = 0;
	while ((pos = xml.find(open, pos)) != std::string_view::npos) {
		const std::size_t start = pos + open.size();
		const std::size_t end = xml.find(close, start);
		if (end == std::string_view::npos) {
			break;
		}
		out.push_back(xml_unescape(xml.substr(start, end - start)));
		pos = end + close.size();
	}
	return out;
}

} // namespace detail

// S3-compatible backend over plain HTTP with path-style addressing
// (http://host:port/bucket/key), signed with AWS Signature V4.
class S3Store final : public ObjectStore {
public:
	S3Store(std::string host, int port, std::string bucket, sigv4::Credentials creds)
	    : host_(std::move(host)), port_(port), bucket_(std::move(bucket)), creds_(std::move(creds)) {
	}

	// Accepts s3://host[:port]/bucket or s3+http://host[:port]/bucket.
	static std::unique_ptr<S3Store> from_url(std::string_view url, sigv4::Credentials creds) {
		std::string_view rest = url;
		for (std::string_view scheme : {"s3+http://", "s3://"}) {
			if (rest.starts_with(scheme)) {
				rest.remove_prefix(scheme.size());
				break;
			}
		}
		const auto slash = rest.find('/');
		if (slash == std::string_view::npos || slash + 1 >= rest.size()) {
			throw Error(ErrorCode::StoreError, "S3 URL must name a bucket: " + std::string(url));
		}
		std::string_view hostport = rest.substr(0, slash);
		std::string bucket(rest.substr(slash + 1));
		while (!bucket.empty() && bucket.back() == '/') {
			bucket.pop_back();
		}
		int port = 80;
		std::string host(hostport);
		if (const auto colon = hostport.rfind(':'); colon != std::string_view::npos) {
			host = std::string(hostport.substr(0, colon));
			port = std::stoi(std::string(hostport.substr(colon + 1)));
		}
		return std::make_unique<S3Store>(host, port, bucket, std::move(creds));
	}

	void put(const std::string &key, std::string_view data) override {
		validate_key(key);
		auto res = send("PUT", object_path(key), {}, data);
		if (!res || res->status / 100 != 2) {
			throw Error(ErrorCode::StoreError, "PUT " + key + " failed" + status_suffix(res));
		}
	}

	std::optional<std::string> get(const std::string &key) const override {
		validate_key(key);
		auto res = send("GET", object_path(key), {}, {});
		if (res && res->status == 404) {
			return std::nullopt;
		}
		if (!res || res->status / 100 != 2) {
			throw Error(ErrorCode::StoreError, "GET " + key + " failed" + status_suffix(res));
		}
		return res->body;
	}

	bool exists(const std::string &key) const override {
		validate_key(key);
		auto res = send("HEAD", object_path(key), {}, {});
		if (!res) {
			throw Error(ErrorCode::StoreError, "HEAD " + key + " failed: no response");
		}
		return res->status / 100 == 2;
	}

	void remove(const std::string &key) override {
		validate_key(key);
		auto res = send("DELETE", object_path(key), {}, {});
		if (!res || (res->status / 100 != 2 && res->status != 404)) {
			throw Error(ErrorCode::StoreError, "DELETE " + key + " failed" + status_suffix(res));
		}
	}

	std::vector<std::string> list(const std::string &prefix) const override {
		std::vector<std::string> keys;
		std::string token;
		for (;;) {
			std::map<std::string, std::string> query{{"list-type", "2"}, {"prefix", prefix}};
			if (!token.empty()) {
				query["continuation-token"] = token;
			}
			auto res = send("GET", "/" + sigv4::uri_encode(bucket_, false), query, {});
			if (!res || res->status / 100 != 2) {
				throw Error(ErrorCode::StoreError, "LIST " + prefix + " failed" + status_suffix(res));
			}
			for (auto &k : detail::xml_values(res->body, "Key")) {
				keys.push_back(std::move(k));
			}
			const auto truncated = detail::xml_values(res->body, "IsTruncated");
			const auto next = detail::xml_values(res->body, "NextContinuationToken");
			if (truncated.empty() || truncated.front() != "true" || next.empty()) {
				break;
			}
			token = next.front();
		}
		std::sort(keys.begin(), keys.end());
		return keys;
	}

private:
	std::string object_path(const std::string &key) const {
		return "/" + sigv4::uri_encode(bucket_, false) + "/" + sigv4::uri_encode(key, true);
	}

	static std::string status_suffix(const httplib::Result &res) {
		if (!res) {
			return ": " + httplib::to_string(res.error());
		}
		return ": HTTP " + std::to_string(res->status);
	}

	httplib::Result send(const std::string &method, const std::string &path,
	                     const std::map<std::string, std::string> &query, std::string_view body) const {
		const std::string amz_date = sigv4::amz_date_now();
		sigv4::Request req;
		req.method = method;
		req.canonical_uri = path;
		req.query = query;
		req.payload_hash = sigv4::sha256_hex(body);
		const std::string host_header = port_ == 80 ? host_ : host_ + ":" + std::to_string(port_);
		req.headers = {{"host", host_header}, {"x-amz-content-sha256", req.payload_hash}, {"x-amz-date", amz_date}};
		httplib::Headers headers{{"x-amz-content-sha256", req.payload_hash},
		                         {"x-amz-date", amz_date},
		                         {"Authorization", sigv4::authorization(req, creds_, amz_date)}};
		std::string target = path;
		if (!query.empty()) {
			target += "?" + sigv4::canonical_query(query);
		}
		httplib::Client client(host_, port_);
		client.set_url_encode(false);
		client.set_connection_timeout(5);
		client.set_read_timeout(30);
		if (method == "PUT") {
			return client.Put(target, headers, std::string(body), "application/octet-stream");
		}
		if (method == "HEAD") {
			return client.Head(target, headers);
		}
		if (method == "DELETE") {
			return client.Delete(target, headers);
		}
		return client.Get(target, headers);
	}

	std::string host_;
	int port_;
	std::string bucket_;
	sigv4::Credentials creds_;
};

} // namespace forecaster::store
