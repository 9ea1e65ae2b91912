#pragma once

#include "forecaster/common/error.hpp"
#include "forecaster/ingest/cells.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace forecaster::ingest {

enum class TimeKind { Datetime, Integer };

enum class FrequencyLabel { Hourly, Daily, Weekly, Monthly, Integer, Other, Irregular };

inline std::string_view to_string(FrequencyLabel label) {
	switch (label) {
	case FrequencyLabel::Hourly: return "hourly";
	case FrequencyLabel::Daily: return "daily";
	case FrequencyLabel::Weekly: return "weekly";
	case FrequencyLabel::Monthly: return "monthly";
	case FrequencyLabel::Integer: return "integer";
	case FrequencyLabel::Other: return "other";
	case FrequencyLabel::Irregular: return "irregular";
	}
	return "irregular";
}

inline FrequencyLabel frequency_label_from_string(std::string_view s) {
	for (auto l : {FrequencyLabel::Hourly, FrequencyLabel::Daily, FrequencyLabel::Weekly, FrequencyLabel::Monthly,
	               FrequencyLabel::Integer, FrequencyLabel::Other, FrequencyLabel::Irregular}) {
		if (to_string(l) == s) {
			return l;
		}
	}
	throw Error(ErrorCode::InvalidParameter, "unknown frequency label '" + std::string(s) + "'");
}

constexpr std::int64_t kSecondsPerHour = 3600;
constexpr std::int64_t kSecondsPerDay = 86400;
constexpr double kIrregularThreshold = 0.8;

// Sampling step of a time axis. For calendar-month data `step` counts months;
// for other datetime data it counts seconds; for integer indices it is unitless.
struct Frequency {
	TimeKind time_kind = TimeKind::Integer;
	std::int64_t step = 1;
	bool calendar_months = false;
	FrequencyLabel label = FrequencyLabel::Integer;
	double regularity = 1.0;

	// Time point `k` steps after `origin`.
	std::int64_t advance(std::int64_t origin, std::int64_t k) const {
		if (calendar_months) {
			return add_months(origin, k * step);
		}
		return origin + k * step;
	}

	// Grid offset of `t` relative to `origin`, or nullopt when `t` is off-grid.
	std::optional<std::int64_t> offset(std::int64_t origin, std::int64_t t) const {
		if (calendar_months) {
			auto months = month_distance(origin, t);
			if (!months || *months % step != 0) {
				return std::nullopt;
			}
			return *months / step;
		}
		const std::int64_t delta = t - origin;
		if (delta % step != 0) {
			return std::nullopt;
		}
		return delta / step;
	}

	std::string render(std::int64_t t) const {
		return time_kind == TimeKind::Datetime ? format_iso8601(t) : std::to_string(t);
	}
};

// Seasonal period suggested by the sampling frequency.
inline int default_seasonality(FrequencyLabel label) {
	switch (label) {
	case FrequencyLabel::Hourly: return 24;
	case FrequencyLabel::Daily: return 7;
	case FrequencyLabel::Weekly: return 52;
	case FrequencyLabel::Monthly: return 12;
	default: return 1;
	}
}

// Median consecutive delta is the step; the label comes from matching that step
// to the standard calendar periods; regularity is the share of deltas equal to
// the step. Input must be sorted ascending without duplicates.
inline Frequency infer_frequency(TimeKind kind, std::span<const std::int64_t> times) {
	if (times.size() < 2) {
		throw Error(ErrorCode::TooShort, "at least two time points are required to infer a frequency");
	}
	std::vector<std::int64_t> deltas;
	deltas.reserve(times.size() - 1);
	for (std::size_t i = 1; i < times.size(); ++i) {
		const std::int64_t d = times[i] - times[i - 1];
		if (d == 0) {
			throw Error(ErrorCode::DuplicateTimestamps, "duplicate time point " + std::to_string(times[i]));
		}
		if (d < 0) {
			throw Error(ErrorCode::InvalidParameter, "time points must be sorted ascending");
		}
		deltas.push_back(d);
	}
	std::vector<std::int64_t> sorted = deltas;
	std::nth_element(sorted.begin(), sorted.begin() + (sorted.size() - 1) / 2, sorted.end());
	const std::int64_t median = sorted[(sorted.size() - 1) / 2];

	Frequency f;
	f.time_kind = kind;
	std::size_t matching = 0;
	if (kind == TimeKind::Integer) {
		f.step = median;
		f.label = FrequencyLabel::Integer;
		matching = static_cast<std::size_t>(std::count(deltas.begin(), deltas.end(), median));
	} else if (median >= 28 * kSecondsPerDay && median <= 31 * kSecondsPerDay) {
		f.step = 1;
		f.calendar_months = true;
		f.label = FrequencyLabel::Monthly;
		for (std::size_t i = 1; i < times.size(); ++i) {
			if (month_distance(times[i - 1], times[i]) == std::optional<std::int64_t>(1)) {
				++matching;
			}
		}
	} else {
		f.step = median;
		if (median == kSecondsPerHour) {
			f.label = FrequencyLabel::Hourly;
		} else if (median == kSecondsPerDay) {
			f.label = FrequencyLabel::Daily;
		} else if (median == 7 * kSecondsPerDay) {
			f.label = FrequencyLabel::Weekly;
		} else {
			f.label = FrequencyLabel::Other;
		}
		matching = static_cast<std::size_t>(std::count(deltas.begin(), deltas.end(), median));
	}
	f.regularity = static_cast<double>(matching) / static_cast<double>(deltas.size());
	if (f.regularity < kIrregularThreshold) {
		f.label = FrequencyLabel::Irregular;
	}
	return f;
}

} // namespace forecaster::ingest
