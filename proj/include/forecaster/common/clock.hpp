#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <string_view>

#include "forecaster/ingest/cells.hpp"

namespace forecaster {

// Milliseconds since the Unix epoch. Injected wherever staleness or timestamps
// matter so tests can drive time explicitly.
using Clock = std::function<std::int64_t()>;

inline std::int64_t system_now_ms() {
	using namespace std::chrono;
	return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

inline Clock system_clock_ms() {
	return [] { return system_now_ms(); };
}

// "YYYY-MM-DDTHH:MM:SS.mmmZ"
inline std::string format_timestamp_ms(std::int64_t ms) {
	std::int64_t secs = ms / 1000;
	std::int64_t rem = ms % 1000;
	if (rem < 0) {
		rem += 1000;
		--secs;
	}
	const auto c = ingest::to_civil(secs);
	char buf[40];
	std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", c.year, c.month, c.day,
	              static_cast<int>(c.second_of_day / 3600), static_cast<int>((c.second_of_day / 60) % 60),
	              static_cast<int>(c.second_of_day % 60), static_cast<int>(rem));
	return buf;
}

inline std::string random_id(std::string_view prefix) {
	static thread_local std::mt19937_64 rng{std::random_device{}()};
	char buf[40];
	std::snprintf(buf, sizeof buf, "%016llx%08llx", static_cast<unsigned long long>(rng()),
	              static_cast<unsigned long long>(rng() & 0xffffffffULL));
	return std::string(prefix) + buf;
}

} // namespace forecaster
