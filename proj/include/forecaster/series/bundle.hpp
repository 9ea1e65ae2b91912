#pragma once

#include "forecaster/common/error.hpp"
#include "forecaster/ingest/cells.hpp"
#include "forecaster/ingest/csv.hpp"
#include "forecaster/ingest/dataset.hpp"
#include "forecaster/ingest/frequency.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace forecaster::series {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr const char *kAllGroupsKey = "__all__";
inline constexpr int kMaxInterpolatedRun = 5;
inline constexpr double kMaxMissingFraction = 0.10;

// One group's aligned series. `times` are consecutive offsets on the bundle's
// frequency grid; rows of `target` and `past_cov` correspond to `times`;
// `future_cov` shares the same start and may have extra trailing rows.
struct GroupSeries {
	std::string group_key = kAllGroupsKey;
	std::vector<std::int64_t> times;
	Matrix target;     // T x C
	Matrix past_cov;   // T x P
	Matrix future_cov; // T' x F, T' >= T
	Vector static_cov; // S

	Eigen::Index length() const {
		return target.rows();
	}
	std::int64_t start() const {
		return times.empty() ? 0 : times.front();
	}
	std::int64_t end() const {
		return start() + static_cast<std::int64_t>(times.size());
	}
};

struct SeriesBundle {
	std::vector<GroupSeries> groups; // sorted by group_key
	std::vector<std::string> component_names;
	std::vector<std::string> past_cov_names;
	std::vector<std::string> future_cov_names;
	std::vector<std::string> static_cov_names;
	ingest::Frequency freq;
	std::int64_t origin = 0; // time value at grid offset 0

	std::size_t n_components() const {
		return component_names.size();
	}

	const GroupSeries &group(const std::string &key) const {
		for (const auto &g : groups) {
			if (g.group_key == key) {
				return g;
			}
		}
		throw Error(ErrorCode::UnknownName, "no group '" + key + "'", key);
	}

	Eigen::Index min_length() const {
		Eigen::Index m = std::numeric_limits<Eigen::Index>::max();
		for (const auto &g : groups) {
			m = std::min(m, g.length());
		}
		return groups.empty() ? 0 : m;
	}

	Eigen::Index max_length() const {
		Eigen::Index m = 0;
		for (const auto &g : groups) {
			m = std::max(m, g.length());
		}
		return m;
	}

	std::int64_t time_at(std::int64_t offset) const {
		return freq.advance(origin, offset);
	}

	std::string render_time(std::int64_t offset) const {
		return freq.render(time_at(offset));
	}

	// Same names, frequency and origin; no groups.
	SeriesBundle empty_like() const {
		SeriesBundle b;
		b.component_names = component_names;
		b.past_cov_names = past_cov_names;
		b.future_cov_names = future_cov_names;
		b.static_cov_names = static_cov_names;
		b.freq = freq;
		b.origin = origin;
		return b;
	}
};

namespace detail {

// Fills NaN runs in place: interior runs of <= max_run points are linearly
// interpolated, runs at either edge take the nearest observed value. Returns
// false when a run is too long or the column has no observation at all.
inline bool fill_gaps(std::vector<double> &v, int max_run) {
	const std::size_t n = v.size();
	std::size_t i = 0;
	bool any = std::any_of(v.begin(), v.end(), [](double x) { return !std::isnan(x); });
	if (!any) {
		return n == 0;
	}
	while (i < n) {
		if (!std::isnan(v[i])) {
			++i;
			continue;
		}
		std::size_t j = i;
		while (j < n && std::isnan(v[j])) {
			++j;
		}
		if (static_cast<int>(j - i) > max_run) {
			return false;
		}
		if (i == 0) {
			for (std::size_t k = i; k < j; ++k) {
				v[k] = v[j];
			}
		} else if (j == n) {
			for (std::size_t k = i; k < j; ++k) {
				v[k] = v[i - 1];
			}
		} else {
			const double a = v[i - 1];
			const double b = v[j];
			const double span = static_cast<double>(j - i + 1);
			for (std::size_t k = i; k < j; ++k) {
				v[k] = a + (b - a) * static_cast<double>(k - i + 1) / span;
			}
		}
		i = j;
	}
	return true;
}

inline double cell_number(const std::string &cell) {
	auto v = ingest::parse_number(cell);
	return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

} // namespace detail

// Builds per-group aligned numeric series from a role-classified table.
// Rows are sorted by time within each group, reindexed onto the inferred
// frequency grid, and short gaps are interpolated.
inline SeriesBundle build_bundle(const ingest::CsvTable &table, const std::vector<ingest::ColumnInfo> &columns,
                                 const ingest::RoleAssignment &roles) {
	using ingest::Role;
	const auto time_col = roles.single(Role::TimeComponent);
	if (!time_col) {
		throw Error(ErrorCode::NoTime, "no time column assigned");
	}
	const auto group_col = roles.single(Role::Grouping);
	SeriesBundle bundle;
	bundle.component_names = roles.columns_with(Role::Target, columns);
	bundle.past_cov_names = roles.columns_with(Role::PastCovariate, columns);
	bundle.future_cov_names = roles.columns_with(Role::FutureCovariate, columns);
	const auto static_cols = roles.columns_with(Role::StaticCovariate, columns);
	if (bundle.component_names.empty()) {
		throw Error(ErrorCode::NoTarget, "no target column assigned");
	}

	const auto &time_info = ingest::find_column(columns, *time_col);
	const ingest::TimeKind time_kind =
	    time_info.inferred_kind == ingest::ColumnKind::Datetime ? ingest::TimeKind::Datetime : ingest::TimeKind::Integer;
	const auto times = ingest::parse_time_column(table, table.column_index(*time_col), time_info.inferred_kind);

	// Group rows.
	std::map<std::string, std::vector<std::size_t>> group_rows;
	const std::size_t gi = group_col ? table.column_index(*group_col) : 0;
	for (std::size_t r = 0; r < table.rows.size(); ++r) {
		if (!times[r]) {
			throw Error(ErrorCode::TypeMismatch, "unparseable time value on row " + std::to_string(r + 1), *time_col);
		}
		const std::string key = group_col ? std::string(ingest::trim(table.rows[r][gi])) : kAllGroupsKey;
		group_rows[key].push_back(r);
	}

	auto column_indices = [&](const std::vector<std::string> &names) {
		std::vector<std::size_t> idx;
		for (const auto &n : names) {
			idx.push_back(table.column_index(n));
		}
		return idx;
	};
	const auto target_idx = column_indices(bundle.component_names);
	const auto past_idx = column_indices(bundle.past_cov_names);
	const auto future_idx = column_indices(bundle.future_cov_names);

	auto row_has_target = [&](std::size_t r) {
		return std::any_of(target_idx.begin(), target_idx.end(),
		                   [&](std::size_t c) { return !std::isnan(detail::cell_number(table.rows[r][c])); });
	};

	// Frequency from the pooled distinct time points.
	std::vector<std::int64_t> pooled;
	for (const auto &[key, rows] : group_rows) {
		std::set<std::int64_t> seen;
		for (std::size_t r : rows) {
			if (!seen.insert(*times[r]).second) {
				throw Error(ErrorCode::DuplicateTimestamps,
				            "duplicate time '" + std::string(ingest::trim(table.rows[r][table.column_index(*time_col)])) +
				                "' in group '" + key + "'",
				            *time_col);
			}
			pooled.push_back(*times[r]);
		}
	}
	std::sort(pooled.begin(), pooled.end());
	pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());
	bundle.freq = ingest::infer_frequency(time_kind, pooled);
	bundle.origin = pooled.front();

	// Static covariates: numeric columns map to one value, categorical columns
	// are one-hot encoded over the sorted set of observed categories.
	struct StaticColumn {
		std::string name;
		std::size_t index;
		bool categorical;
		std::vector<std::string> categories;
	};
	std::vector<StaticColumn> statics;
	for (const auto &name : static_cols) {
		StaticColumn sc{name, table.column_index(name),
		                ingest::find_column(columns, name).inferred_kind != ingest::ColumnKind::Numeric,
		                {}};
		if (sc.categorical) {
			std::set<std::string> cats;
			for (const auto &row : table.rows) {
				cats.insert(std::string(ingest::trim(row[sc.index])));
			}
			sc.categories.assign(cats.begin(), cats.end());
			for (const auto &c : sc.categories) {
				bundle.static_cov_names.push_back(name + "=" + c);
			}
		} else {
			bundle.static_cov_names.push_back(name);
		}
		statics.push_back(std::move(sc));
	}

	for (auto &[key, rows] : group_rows) {
		std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) { return *times[a] < *times[b]; });
		std::vector<std::int64_t> offsets;
		for (std::size_t r : rows) {
			auto off = bundle.freq.offset(bundle.origin, *times[r]);
			if (!off) {
				throw Error(ErrorCode::OffGrid,
				            "time on row " + std::to_string(r + 1) + " is not on the inferred frequency grid",
				            *time_col);
			}
			offsets.push_back(*off);
		}
		// Target span: first to last row carrying a target value.
		std::optional<std::size_t> first, last;
		for (std::size_t k = 0; k < rows.size(); ++k) {
			if (row_has_target(rows[k])) {
				if (!first) {
					first = k;
				}
				last = k;
			}
		}
		if (!first) {
			throw Error(ErrorCode::EmptyGroup, "group '" + key + "' has no rows with target values", key);
		}
		const std::int64_t start = offsets[*first];
		const std::int64_t target_end = offsets[*last] + 1;
		std::int64_t future_end = target_end;
		if (!future_idx.empty()) {
			for (std::size_t k = *last + 1; k < rows.size(); ++k) {
				future_end = offsets[k] + 1;
			}
		}
		const std::size_t T = static_cast<std::size_t>(target_end - start);
		const std::size_t Tf = static_cast<std::size_t>(future_end - start);

		const std::size_t present = *last - *first + 1;
		const double missing_fraction = 1.0 - static_cast<double>(present) / static_cast<double>(T);
		if (missing_fraction > kMaxMissingFraction) {
			throw Error(ErrorCode::ExcessiveGaps,
			            "group '" + key + "' is missing " + std::to_string(T - present) + " of " + std::to_string(T) +
			                " grid points",
			            key);
		}

		auto grid_column = [&](std::size_t col, std::size_t len, const std::string &name) {
			std::vector<double> v(len, std::numeric_limits<double>::quiet_NaN());
			for (std::size_t k = *first; k < rows.size(); ++k) {
				const std::int64_t pos = offsets[k] - start;
				if (pos >= static_cast<std::int64_t>(len)) {
					break;
				}
				v[static_cast<std::size_t>(pos)] = detail::cell_number(table.rows[rows[k]][col]);
			}
			if (!detail::fill_gaps(v, kMaxInterpolatedRun)) {
				throw Error(ErrorCode::ExcessiveGaps,
				            "column '" + name + "' in group '" + key + "' has a gap longer than " +
				                std::to_string(kMaxInterpolatedRun) + " points",
				            name);
			}
			return v;
		};

		GroupSeries g;
		g.group_key = key;
		g.times.resize(T);
		for (std::size_t t = 0; t < T; ++t) {
			g.times[t] = start + static_cast<std::int64_t>(t);
		}
		g.target.resize(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(target_idx.size()));
		for (std::size_t c = 0; c < target_idx.size(); ++c) {
			const auto v = grid_column(target_idx[c], T, bundle.component_names[c]);
			for (std::size_t t = 0; t < T; ++t) {
				g.target(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = v[t];
			}
		}
		g.past_cov.resize(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(past_idx.size()));
		for (std::size_t c = 0; c < past_idx.size(); ++c) {
			const auto v = grid_column(past_idx[c], T, bundle.past_cov_names[c]);
			for (std::size_t t = 0; t < T; ++t) {
				g.past_cov(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = v[t];
			}
		}
		g.future_cov.resize(static_cast<Eigen::Index>(future_idx.empty() ? T : Tf),
		                    static_cast<Eigen::Index>(future_idx.size()));
		for (std::size_t c = 0; c < future_idx.size(); ++c) {
			const auto v = grid_column(future_idx[c], Tf, bundle.future_cov_names[c]);
			for (std::size_t t = 0; t < Tf; ++t) {
				g.future_cov(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = v[t];
			}
		}

		// Statics from the first row; every other non-empty value must agree.
		std::vector<double> stat;
		for (const auto &sc : statics) {
			const std::string firstv(ingest::trim(table.rows[rows.front()][sc.index]));
			for (std::size_t r : rows) {
				const std::string_view v = ingest::trim(table.rows[r][sc.index]);
				if (!v.empty() && v != firstv) {
					throw Error(ErrorCode::NonConstantStatic,
					            "static covariate '" + sc.name + "' varies within group '" + key + "'", sc.name);
				}
			}
			if (sc.categorical) {
				for (const auto &cat : sc.categories) {
					stat.push_back(cat == firstv ? 1.0 : 0.0);
				}
			} else {
				const double v = detail::cell_number(firstv);
				if (std::isnan(v)) {
					throw Error(ErrorCode::TypeMismatch, "static covariate '" + sc.name + "' is empty in group '" +
					                                         key + "'",
					            sc.name);
				}
				stat.push_back(v);
			}
		}
		g.static_cov = Eigen::Map<Vector>(stat.data(), static_cast<Eigen::Index>(stat.size()));
		bundle.groups.push_back(std::move(g));
	}
	return bundle;
}

} // namespace forecaster::series
