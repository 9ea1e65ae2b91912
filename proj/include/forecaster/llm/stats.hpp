#pragma once

#include "forecaster/ingest/frequency.hpp"
#include "forecaster/series/bundle.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace forecaster::llm {

using nlohmann::json;

struct ComponentStats {
	std::string name;
	double mean = 0.0;
	double std = 0.0; // population
	double min = 0.0;
	double max = 0.0;
	double proportion_of_zeros = 0.0;
};

// What the LLM gets to see about a dataset. Never carries rows.
struct SummaryStats {
	std::size_t n_observations = 0;
	std::string frequency;
	std::int64_t step = 1;
	bool calendar_months = false;
	double regularity = 1.0;
	int suggested_seasonality = 1;
	std::size_t n_groups = 0;
	std::vector<ComponentStats> components;
	std::vector<std::string> past_covariates, future_covariates, static_covariates;
	std::int64_t length_min = 0, length_median = 0, length_max = 0;

	json to_json() const {
		json comps = json::array();
		for (const auto &c : components) {
			comps.push_back({{"name", c.name},
			                 {"mean", c.mean},
			                 {"std", c.std},
			                 {"min", c.min},
			                 {"max", c.max},
			                 {"proportion_of_zeros", c.proportion_of_zeros}});
		}
		json freq{{"label", frequency}, {"step", step}, {"regularity", regularity}};
		if (calendar_months) {
			freq["step_unit"] = "months";
		} else if (frequency != "integer") {
			freq["step_unit"] = "seconds";
		}
		return {{"n_observations", n_observations},
		        {"frequency", std::move(freq)},
		        {"suggested_seasonality", suggested_seasonality},
		        {"n_groups", n_groups},
		        {"targets", std::move(comps)},
		        {"past_covariates", past_covariates},
		        {"future_covariates", future_covariates},
		        {"static_covariates", static_covariates},
		        {"series_length", {{"min", length_min}, {"median", length_median}, {"max", length_max}}}};
	}
};

inline SummaryStats summarize_dataset(const series::SeriesBundle &b) {
	SummaryStats s;
	s.frequency = std::string(ingest::to_string(b.freq.label));
	s.step = b.freq.step;
	s.calendar_months = b.freq.calendar_months;
	s.regularity = b.freq.regularity;
	s.suggested_seasonality = ingest::default_seasonality(b.freq.label);
	s.n_groups = b.groups.size();
	s.past_covariates = b.past_cov_names;
	s.future_covariates = b.future_cov_names;
	s.static_covariates = b.static_cov_names;

	std::vector<std::int64_t> lengths;
	for (const auto &g : b.groups) {
		lengths.push_back(g.length());
		s.n_observations += static_cast<std::size_t>(g.length());
	}
	if (!lengths.empty()) {
		std::sort(lengths.begin(), lengths.end());
		s.length_min = lengths.front();
		s.length_max = lengths.back();
		const std::size_t n = lengths.size();
		s.length_median = n % 2 ? lengths[n / 2] : (lengths[n / 2 - 1] + lengths[n / 2]) / 2;
	}

	for (std::size_t c = 0; c < b.component_names.size(); ++c) {
		ComponentStats cs;
		cs.name = b.component_names[c];
		double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
		std::size_t n = 0, zeros = 0;
		for (const auto &g : b.groups) {
			for (Eigen::Index t = 0; t < g.length(); ++t) {
				const double v = g.target(t, static_cast<Eigen::Index>(c));
				sum += v;
				lo = std::min(lo, v);
				hi = std::max(hi, v);
				zeros += v == 0.0;
				++n;
			}
		}
		if (n > 0) {
			cs.mean = sum / static_cast<double>(n);
			double ss = 0.0;
			for (const auto &g : b.groups) {
				for (Eigen::Index t = 0; t < g.length(); ++t) {
					const double d = g.target(t, static_cast<Eigen::Index>(c)) - cs.mean;
					ss += d * d;
				}
			}
			cs.std = std::sqrt(ss / static_cast<double>(n));
			cs.min = lo;
			cs.max = hi;
			cs.proportion_of_zeros = static_cast<double>(zeros) / static_cast<double>(n);
		}
		s.components.push_back(cs);
	}
	return s;
}

} // namespace forecaster::llm
