#pragma once

// Seeded synthetic datasets for tests, the acceptance run and the demo data.

#include "forecaster/common/rng.hpp"
#include "forecaster/ingest/cells.hpp"
#include "forecaster/ingest/csv.hpp"
#include "forecaster/series/bundle.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

namespace forecaster::testing {

// Daily bike-rental-like series: weekly cycle, yearly temperature swing,
// rain days that suppress rides, slow growth. Columns:
// date, rides, temperature, precipitation, holiday.
// The default roles treat all three covariates as future covariates: holidays
// are on the calendar and weather is taken as forecast ahead.
inline ingest::CsvTable bike_like(int days = 1000, std::uint64_t seed = 7) {
	Rng rng(seed);
	ingest::CsvTable t;
	t.header = {"date", "rides", "temperature", "precipitation", "holiday"};
	const std::int64_t start = 1451606400; // 2016-01-01
	static const double weekly[7] = {0.85, 1.05, 1.1, 1.1, 1.05, 1.0, 0.8};
	double temp_noise = 0.0;
	for (int d = 0; d < days; ++d) {
		const double year = 2.0 * std::numbers::pi * d / 365.25;
		temp_noise = 0.7 * temp_noise + 1.5 * rng.normal();
		const double temp = 8.0 - 9.0 * std::cos(year) + temp_noise;
		const bool rain = rng.uniform() < 0.3;
		const double precip = rain ? 2.0 + 8.0 * rng.uniform() : 0.0;
		const bool holiday = (d % 91) == 40 || (d % 365) == 358;
		const double base = 400.0 + 0.15 * d;
		const double temp_effect = 1.0 + 0.03 * std::max(0.0, temp);
		double rides = base * weekly[d % 7] * temp_effect * (rain ? 1.0 - 0.03 * precip : 1.0) *
		               (holiday ? 0.6 : 1.0);
		rides *= 1.0 + 0.05 * rng.normal();
		char buf[64];
		std::vector<std::string> row;
		row.push_back(ingest::format_iso8601(start + static_cast<std::int64_t>(d) * 86400).substr(0, 10));
		std::snprintf(buf, sizeof buf, "%.0f", std::max(0.0, rides));
		row.emplace_back(buf);
		std::snprintf(buf, sizeof buf, "%.2f", temp);
		row.emplace_back(buf);
		std::snprintf(buf, sizeof buf, "%.2f", precip);
		row.emplace_back(buf);
		row.emplace_back(holiday ? "1" : "0");
		t.rows.push_back(std::move(row));
	}
	return t;
}

inline std::string bike_like_roles_json() {
	return R"({"date":"time","rides":"target","temperature":"future_covariate",)"
	       R"("precipitation":"future_covariate","holiday":"future_covariate"})";
}

// Small multi-group integer-indexed table: columns t, store, sales, price.
inline ingest::CsvTable grouped_integer(int length = 60, int n_groups = 3, std::uint64_t seed = 11) {
	Rng rng(seed);
	ingest::CsvTable t;
	t.header = {"t", "store", "sales", "price"};
	for (int g = 0; g < n_groups; ++g) {
		for (int i = 0; i < length; ++i) {
			const double s = 50.0 + 10.0 * g + 8.0 * std::sin(2.0 * std::numbers::pi * i / 4.0) + rng.normal();
			char buf[32];
			std::vector<std::string> row{std::to_string(i), "s" + std::to_string(g)};
			std::snprintf(buf, sizeof buf, "%.3f", s);
			row.emplace_back(buf);
			std::snprintf(buf, sizeof buf, "%.2f", 3.0 + 0.01 * i);
			row.emplace_back(buf);
			t.rows.push_back(std::move(row));
		}
	}
	return t;
}

// Integer-indexed single-group, single-component bundle.
inline series::SeriesBundle univariate(const std::vector<double> &y, const std::string &name = "y") {
	series::SeriesBundle b;
	b.component_names = {name};
	series::GroupSeries g;
	g.target = Eigen::Map<const series::Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
	for (std::size_t i = 0; i < y.size(); ++i) {
		g.times.push_back(static_cast<std::int64_t>(i));
	}
	g.past_cov.resize(static_cast<Eigen::Index>(y.size()), 0);
	g.future_cov.resize(static_cast<Eigen::Index>(y.size()), 0);
	b.groups.push_back(std::move(g));
	return b;
}

} // namespace forecaster::testing
