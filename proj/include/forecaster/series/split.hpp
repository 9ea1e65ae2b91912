#pragma once

#include "forecaster/common/error.hpp"
#include "forecaster/series/bundle.hpp"

#include <algorithm>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace forecaster::series {

// Drops the last `drop` target/past-covariate rows of every group. Future
// covariates are left untouched so they stay visible past the cutoff.
inline SeriesBundle truncate(const SeriesBundle &bundle, Eigen::Index drop) {
	SeriesBundle out = bundle.empty_like();
	for (const auto &g : bundle.groups) {
		const Eigen::Index keep = g.length() - drop;
		if (keep < 1) {
			throw Error(ErrorCode::TestTooLong, "group '" + g.group_key + "' would be left empty", g.group_key);
		}
		GroupSeries t;
		t.group_key = g.group_key;
		t.times.assign(g.times.begin(), g.times.begin() + keep);
		t.target = g.target.topRows(keep);
		t.past_cov = g.past_cov.topRows(keep);
		t.future_cov = g.future_cov;
		t.static_cov = g.static_cov;
		out.groups.push_back(std::move(t));
	}
	return out;
}

// Rows [begin, begin + len) counted from each group's end minus `from_end`.
// Used to cut actuals for a window: begin = T_g - from_end.
inline SeriesBundle tail_window(const SeriesBundle &bundle, Eigen::Index from_end, Eigen::Index len) {
	SeriesBundle out = bundle.empty_like();
	for (const auto &g : bundle.groups) {
		const Eigen::Index begin = g.length() - from_end;
		if (begin < 0 || begin + len > g.length()) {
			throw Error(ErrorCode::AlignmentError, "window outside group '" + g.group_key + "'", g.group_key);
		}
		GroupSeries t;
		t.group_key = g.group_key;
		t.times.assign(g.times.begin() + begin, g.times.begin() + begin + len);
		t.target = g.target.middleRows(begin, len);
		t.past_cov = g.past_cov.middleRows(begin, len);
		const Eigen::Index fut_rows = std::min<Eigen::Index>(len, std::max<Eigen::Index>(0, g.future_cov.rows() - begin));
		t.future_cov = g.future_cov.middleRows(std::min(begin, g.future_cov.rows()), fut_rows);
		t.static_cov = g.static_cov;
		out.groups.push_back(std::move(t));
	}
	return out;
}

// Last `test_len` rows of every group go to the test bundle.
inline std::pair<SeriesBundle, SeriesBundle> holdout_split(const SeriesBundle &bundle, Eigen::Index test_len) {
	if (test_len < 1 || test_len >= bundle.min_length()) {
		throw Error(ErrorCode::TestTooLong,
		            "test length must be in [1, " + std::to_string(bundle.min_length() - 1) + "], got " +
		                std::to_string(test_len),
		            "test_len");
	}
	return {truncate(bundle, test_len), tail_window(bundle, test_len, test_len)};
}

// One expanding-window step: train on [0, train_end), forecast
// [forecast_start, forecast_end). Half-open indices.
struct Window {
	Eigen::Index train_end;
	Eigen::Index forecast_start;
	Eigen::Index forecast_end;

	Eigen::Index horizon() const {
		return forecast_end - forecast_start;
	}
	bool operator==(const Window &) const = default;
};

struct WindowSchedule {
	Eigen::Index initial_train_len = 0;
	Eigen::Index stride = 1;
	Eigen::Index horizon = 1;
	Eigen::Index total = 0;
	std::vector<Window> windows;
};

// Windows start at `initial_train_len` and advance by `stride` while the
// training end stays inside the series. Stride may not exceed the horizon,
// otherwise forecast regions would leave holes.
inline WindowSchedule expanding_schedule(Eigen::Index T, Eigen::Index initial_train_len, Eigen::Index stride,
                                         Eigen::Index horizon) {
	if (horizon < 1) {
		throw Error(ErrorCode::BadHorizon, "horizon must be >= 1", "horizon");
	}
	if (initial_train_len < 1 || initial_train_len >= T) {
		throw Error(ErrorCode::InitialTooLong,
		            "initial training length must be in [1, " + std::to_string(T - 1) + "], got " +
		                std::to_string(initial_train_len),
		            "initial_train_len");
	}
	if (stride < 1 || stride > horizon) {
		throw Error(ErrorCode::BadStride,
		            "stride must be in [1, horizon=" + std::to_string(horizon) + "], got " + std::to_string(stride),
		            "stride");
	}
	WindowSchedule s{initial_train_len, stride, horizon, T, {}};
	for (Eigen::Index end = initial_train_len; end < T; end += stride) {
		s.windows.push_back({end, end, std::min(end + horizon, T)});
	}
	return s;
}

inline Eigen::Index default_initial_train_len(Eigen::Index T, int seasonality) {
	return std::max<Eigen::Index>(2 * static_cast<Eigen::Index>(seasonality), (T + 1) / 2);
}

enum class OverlapPolicy { KeepEarliest, Average };

// Stitches per-window forecasts (rows = window horizon) into one matrix over
// [initial_train_len, total). Every window's matrix must have the same column
// count.
inline Matrix stitch(const WindowSchedule &schedule, std::span<const Matrix> forecasts,
                     OverlapPolicy policy = OverlapPolicy::KeepEarliest) {
	if (forecasts.size() != schedule.windows.size()) {
		throw Error(ErrorCode::AlignmentError, "one forecast per window is required");
	}
	const Eigen::Index len = schedule.total - schedule.initial_train_len;
	const Eigen::Index cols = forecasts.empty() ? 0 : forecasts.front().cols();
	Matrix out = Matrix::Zero(len, cols);
	std::vector<int> counts(static_cast<std::size_t>(len), 0);
	for (std::size_t w = 0; w < forecasts.size(); ++w) {
		const Window &win = schedule.windows[w];
		if (forecasts[w].rows() != win.horizon() || forecasts[w].cols() != cols) {
			throw Error(ErrorCode::AlignmentError, "window forecast has the wrong shape");
		}
		for (Eigen::Index h = 0; h < win.horizon(); ++h) {
			const Eigen::Index idx = win.forecast_start + h - schedule.initial_train_len;
			auto &n = counts[static_cast<std::size_t>(idx)];
			if (policy == OverlapPolicy::KeepEarliest) {
				if (n == 0) {
					out.row(idx) = forecasts[w].row(h);
				}
			} else {
				out.row(idx) += forecasts[w].row(h);
			}
			++n;
		}
	}
	for (Eigen::Index i = 0; i < len; ++i) {
		if (counts[static_cast<std::size_t>(i)] == 0) {
			throw Error(ErrorCode::AlignmentError, "timestep " + std::to_string(i + schedule.initial_train_len) +
			                                           " was not forecast by any window");
		}
		if (policy == OverlapPolicy::Average) {
			out.row(i) /= static_cast<double>(counts[static_cast<std::size_t>(i)]);
		}
	}
	return out;
}

} // namespace forecaster::series
