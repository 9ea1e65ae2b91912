#pragma once

#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace forecaster::ingest {

inline std::string_view trim(std::string_view s) {
	while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
		s.remove_prefix(1);
	}
	while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
		s.remove_suffix(1);
	}
	return s;
}

inline bool is_empty_cell(std::string_view s) {
	return trim(s).empty();
}

// Plain decimal numbers: optional sign, digits, optional fraction, optional
// exponent. "nan"/"inf" and hex are rejected.
inline std::optional<double> parse_number(std::string_view cell) {
	cell = trim(cell);
	if (cell.empty()) {
		return std::nullopt;
	}
	std::size_t i = 0;
	if (cell[i] == '+' || cell[i] == '-') {
		++i;
	}
	bool digits = false;
	while (i < cell.size() && std::isdigit(static_cast<unsigned char>(cell[i]))) {
		++i;
		digits = true;
	}
	if (i < cell.size() && cell[i] == '.') {
		++i;
		while (i < cell.size() && std::isdigit(static_cast<unsigned char>(cell[i]))) {
			++i;
			digits = true;
		}
	}
	if (!digits) {
		return std::nullopt;
	}
	if (i < cell.size() && (cell[i] == 'e' || cell[i] == 'E')) {
		++i;
		if (i < cell.size() && (cell[i] == '+' || cell[i] == '-')) {
			++i;
		}
		bool exp_digits = false;
		while (i < cell.size() && std::isdigit(static_cast<unsigned char>(cell[i]))) {
			++i;
			exp_digits = true;
		}
		if (!exp_digits) {
			return std::nullopt;
		}
	}
	if (i != cell.size()) {
		return std::nullopt;
	}
	std::string_view body = cell;
	if (body.front() == '+') {
		body.remove_prefix(1);
	}
	double value = 0.0;
	auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
	if (ec != std::errc() || ptr != body.data() + body.size() || !std::isfinite(value)) {
		return std::nullopt;
	}
	return value;
}

namespace detail {

inline bool read_digits(std::string_view s, std::size_t &pos, std::size_t count, int &out) {
	if (pos + count > s.size()) {
		return false;
	}
	int v = 0;
	for (std::size_t k = 0; k < count; ++k) {
		const char c = s[pos + k];
		if (!std::isdigit(static_cast<unsigned char>(c))) {
			return false;
		}
		v = v * 10 + (c - '0');
	}
	pos += count;
	out = v;
	return true;
}

} // namespace detail

// ISO-8601 calendar date or timestamp, returned as UTC epoch seconds.
// Accepted: YYYY-MM-DD, YYYY-MM-DDTHH:MM, YYYY-MM-DDTHH:MM:SS[.frac], with 'T' or
// a space separator and an optional 'Z' or ±HH:MM offset. Fractional seconds
// are truncated.
inline std::optional<std::int64_t> parse_iso8601(std::string_view cell) {
	using namespace std::chrono;
	const std::string_view s = trim(cell);
	std::size_t pos = 0;
	int y = 0, mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
	if (!detail::read_digits(s, pos, 4, y) || pos >= s.size() || s[pos++] != '-' ||
	    !detail::read_digits(s, pos, 2, mo) || pos >= s.size() || s[pos++] != '-' ||
	    !detail::read_digits(s, pos, 2, d)) {
		return std::nullopt;
	}
	const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
	if (!ymd.ok()) {
		return std::nullopt;
	}
	std::int64_t offset_seconds = 0;
	if (pos < s.size()) {
		if (s[pos] != 'T' && s[pos] != ' ') {
			return std::nullopt;
		}
		++pos;
		if (!detail::read_digits(s, pos, 2, hh) || pos >= s.size() || s[pos++] != ':' ||
		    !detail::read_digits(s, pos, 2, mm)) {
			return std::nullopt;
		}
		if (pos < s.size() && s[pos] == ':') {
			++pos;
			if (!detail::read_digits(s, pos, 2, ss)) {
				return std::nullopt;
			}
			if (pos < s.size() && s[pos] == '.') {
				++pos;
				std::size_t frac = 0;
				while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
					++pos;
					++frac;
				}
				if (frac == 0) {
					return std::nullopt;
				}
			}
		}
		if (hh > 23 || mm > 59 || ss > 60) {
			return std::nullopt;
		}
		if (pos < s.size()) {
			if (s[pos] == 'Z') {
				++pos;
			} else if (s[pos] == '+' || s[pos] == '-') {
				const int sign = s[pos] == '+' ? 1 : -1;
				++pos;
				int oh = 0, om = 0;
				if (!detail::read_digits(s, pos, 2, oh)) {
					return std::nullopt;
				}
				if (pos < s.size() && s[pos] == ':') {
					++pos;
				}
				if (!detail::read_digits(s, pos, 2, om)) {
					return std::nullopt;
				}
				offset_seconds = sign * (oh * 3600 + om * 60);
			}
		}
		if (pos != s.size()) {
			return std::nullopt;
		}
	}
	const auto days = sys_days(ymd).time_since_epoch().count();
	return static_cast<std::int64_t>(days) * 86400 + hh * 3600 + mm * 60 + ss - offset_seconds;
}

// Renders epoch seconds as "YYYY-MM-DD" at midnight and "YYYY-MM-DDTHH:MM:SSZ"
// otherwise.
inline std::string format_iso8601(std::int64_t epoch_seconds) {
	using namespace std::chrono;
	std::int64_t days = epoch_seconds / 86400;
	std::int64_t rem = epoch_seconds % 86400;
	if (rem < 0) {
		rem += 86400;
		--days;
	}
	const year_month_day ymd{sys_days{std::chrono::days{days}}};
	char buf[32];
	if (rem == 0) {
		std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
		              static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
	} else {
		std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
		              static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
		              static_cast<int>(rem / 3600), static_cast<int>((rem / 60) % 60), static_cast<int>(rem % 60));
	}
	return buf;
}

struct CivilTime {
	int year;
	unsigned month;
	unsigned day;
	std::int64_t second_of_day;
};

inline CivilTime to_civil(std::int64_t epoch_seconds) {
	using namespace std::chrono;
	std::int64_t days = epoch_seconds / 86400;
	std::int64_t rem = epoch_seconds % 86400;
	if (rem < 0) {
		rem += 86400;
		--days;
	}
	const year_month_day ymd{sys_days{std::chrono::days{days}}};
	return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), rem};
}

// Adds whole calendar months; the day of month is clamped to the target month.
inline std::int64_t add_months(std::int64_t epoch_seconds, std::int64_t months) {
	using namespace std::chrono;
	const CivilTime c = to_civil(epoch_seconds);
	std::int64_t total = static_cast<std::int64_t>(c.year) * 12 + (c.month - 1) + months;
	const int y = static_cast<int>(total >= 0 ? total / 12 : (total - 11) / 12);
	const unsigned m = static_cast<unsigned>(total - static_cast<std::int64_t>(y) * 12) + 1;
	year_month_day ymd{year{y}, month{m}, day{c.day}};
	if (!ymd.ok()) {
		ymd = year_month_day{year_month_day_last{year{y}, month_day_last{month{m}}}};
	}
	return static_cast<std::int64_t>(sys_days(ymd).time_since_epoch().count()) * 86400 + c.second_of_day;
}

// Whole months between two instants when b is exactly a calendar-month multiple
// after a (same day of month and time of day); nullopt otherwise.
inline std::optional<std::int64_t> month_distance(std::int64_t a, std::int64_t b) {
	const CivilTime ca = to_civil(a);
	const CivilTime cb = to_civil(b);
	const std::int64_t months =
	    (static_cast<std::int64_t>(cb.year) - ca.year) * 12 + (static_cast<std::int64_t>(cb.month) - ca.month);
	if (add_months(a, months) != b) {
		return std::nullopt;
	}
	return months;
}

} // namespace forecaster::ingest
