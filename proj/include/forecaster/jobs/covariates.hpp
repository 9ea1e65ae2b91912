#pragma once

#include "forecaster/common/error.hpp"
#include "forecaster/ingest/cells.hpp"
#include "forecaster/ingest/csv.hpp"
#include "forecaster/ingest/dataset.hpp"
#include "forecaster/series/bundle.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace forecaster::jobs {

// Fills NaNs in place assuming a linear trend: interior gaps are
// interpolated, trailing ones extrapolated from the last two known points,
// leading ones take the first known value. Returns false if nothing is known.
inline bool impute_linear(std::vector<double> &v) {
	std::vector<std::size_t> known;
	for (std::size_t i = 0; i < v.size(); ++i) {
		if (!std::isnan(v[i])) {
			known.push_back(i);
		}
	}
	if (known.empty()) {
		return false;
	}
	for (std::size_t i = 0; i < known.front(); ++i) {
		v[i] = v[known.front()];
	}
	for (std::size_t k = 0; k + 1 < known.size(); ++k) {
		const std::size_t a = known[k], b = known[k + 1];
		for (std::size_t i = a + 1; i < b; ++i) {
			const double w = static_cast<double>(i - a) / static_cast<double>(b - a);
			v[i] = v[a] + w * (v[b] - v[a]);
		}
	}
	const std::size_t last = known.back();
	double slope = 0.0;
	if (known.size() >= 2) {
		const std::size_t prev = known[known.size() - 2];
		slope = (v[last] - v[prev]) / static_cast<double>(last - prev);
	}
	for (std::size_t i = last + 1; i < v.size(); ++i) {
		v[i] = v[last] + slope * static_cast<double>(i - last);
	}
	return true;
}

struct CovariateSource {
	const ingest::CsvTable *upload = nullptr; // optional uploaded future-covariate rows
	std::string time_column;
	ingest::ColumnKind time_kind = ingest::ColumnKind::Datetime;
	std::optional<std::string> group_column;
};

inline void check_covariate_schema(const ingest::CsvTable &upload, const series::SeriesBundle &bundle,
                                   const CovariateSource &src) {
	std::set<std::string> expected(bundle.future_cov_names.begin(), bundle.future_cov_names.end());
	expected.insert(src.time_column);
	std::set<std::string> got(upload.header.begin(), upload.header.end());
	if (src.group_column) {
		got.erase(*src.group_column);
		if (bundle.groups.size() > 1 && !upload.has_column(*src.group_column)) {
			throw Error(ErrorCode::CovariateSchemaMismatch,
			            "covariate file needs the grouping column '" + *src.group_column + "'", *src.group_column);
		}
	}
	for (const auto &c : got) {
		if (!expected.contains(c)) {
			throw Error(ErrorCode::CovariateSchemaMismatch,
			            "column '" + c + "' is not a future covariate of the trained models", c);
		}
	}
	for (const auto &c : expected) {
		if (!got.contains(c)) {
			throw Error(ErrorCode::CovariateSchemaMismatch, "covariate file is missing column '" + c + "'", c);
		}
	}
}

// Returns a copy whose future covariates reach at least `horizon` steps past
// each group's last target row, merging uploaded values over existing ones
// and imputing whatever is still missing. Appends a warning per imputed block.
inline series::SeriesBundle extend_future_covariates(const series::SeriesBundle &bundle, Eigen::Index horizon,
                                                     const CovariateSource &src, std::vector<std::string> *warnings) {
	series::SeriesBundle out = bundle;
	const auto F = static_cast<Eigen::Index>(bundle.future_cov_names.size());
	if (F == 0) {
		return out;
	}
	std::vector<std::optional<std::int64_t>> up_times;
	std::vector<std::size_t> up_cols;
	std::optional<std::size_t> up_group;
	if (src.upload) {
		check_covariate_schema(*src.upload, bundle, src);
		up_times = ingest::parse_time_column(*src.upload, src.upload->column_index(src.time_column), src.time_kind);
		for (const auto &name : bundle.future_cov_names) {
			up_cols.push_back(src.upload->column_index(name));
		}
		if (src.group_column && src.upload->has_column(*src.group_column)) {
			up_group = src.upload->column_index(*src.group_column);
		}
	}
	for (auto &g : out.groups) {
		const std::int64_t start = g.times.front();
		const Eigen::Index need = g.length() + horizon;
		const Eigen::Index rows = std::max(need, g.future_cov.rows());
		std::vector<std::vector<double>> cols(static_cast<std::size_t>(F),
		                                      std::vector<double>(static_cast<std::size_t>(rows),
		                                                          std::numeric_limits<double>::quiet_NaN()));
		for (Eigen::Index f = 0; f < F; ++f) {
			for (Eigen::Index r = 0; r < g.future_cov.rows(); ++r) {
				cols[static_cast<std::size_t>(f)][static_cast<std::size_t>(r)] = g.future_cov(r, f);
			}
		}
		if (src.upload) {
			for (std::size_t r = 0; r < src.upload->rows.size(); ++r) {
				const auto &row = src.upload->rows[r];
				if (up_group && ingest::trim(row[*up_group]) != g.group_key) {
					continue;
				}
				if (!up_times[r]) {
					throw Error(ErrorCode::TypeMismatch,
					            "covariate file row " + std::to_string(r + 1) + " has no valid time", src.time_column);
				}
				const auto off = bundle.freq.offset(bundle.origin, *up_times[r]);
				if (!off) {
					throw Error(ErrorCode::OffGrid,
					            "covariate file row " + std::to_string(r + 1) + " is not on the series time grid",
					            src.time_column);
				}
				const std::int64_t idx = *off - start;
				if (idx < 0 || idx >= rows) {
					continue;
				}
				for (Eigen::Index f = 0; f < F; ++f) {
					const auto v = ingest::parse_number(row[up_cols[static_cast<std::size_t>(f)]]);
					if (v) {
						cols[static_cast<std::size_t>(f)][static_cast<std::size_t>(idx)] = *v;
					}
				}
			}
		}
		g.future_cov.resize(rows, F);
		for (Eigen::Index f = 0; f < F; ++f) {
			auto &c = cols[static_cast<std::size_t>(f)];
			std::size_t missing = 0;
			for (double v : c) {
				missing += std::isnan(v) ? 1 : 0;
			}
			if (missing > 0) {
				impute_linear(c);
				if (warnings) {
					warnings->push_back("future covariate '" + bundle.future_cov_names[static_cast<std::size_t>(f)] +
					                    "' in group '" + g.group_key + "': " + std::to_string(missing) +
					                    " step(s) filled assuming a linear trend");
				}
			}
			for (Eigen::Index r = 0; r < rows; ++r) {
				g.future_cov(r, f) = c[static_cast<std::size_t>(r)];
			}
		}
	}
	return out;
}

} // namespace forecaster::jobs
