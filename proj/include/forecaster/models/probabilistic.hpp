#pragma once

#include "forecaster/models/model.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace forecaster::models {

struct GroupForecast {
	Matrix mean; // H x C
	std::optional<Matrix> p10, p50, p90;
};

using Forecast = std::map<std::string, GroupForecast>;

// Linear-interpolation quantile of sorted values (the usual "type 7").
inline double quantile_sorted(const std::vector<double> &sorted, double q) {
	if (sorted.empty()) {
		return std::nan("");
	}
	const double pos = q * static_cast<double>(sorted.size() - 1);
	const auto lo = static_cast<std::size_t>(std::floor(pos));
	const auto hi = std::min(lo + 1, sorted.size() - 1);
	const double frac = pos - static_cast<double>(lo);
	return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline Forecast deterministic_forecast(const Model &model, const SeriesBundle &context, Eigen::Index horizon) {
	Forecast out;
	for (auto &[g, m] : model.predict(context, horizon, nullptr)) {
		out[g].mean = std::move(m);
	}
	return out;
}

// Monte-Carlo forecast: n_samples noisy trajectories, mean as point forecast,
// p10/p50/p90 from the sample distribution at every step.
inline Forecast probabilistic_predict(const Model &model, const SeriesBundle &context, Eigen::Index horizon,
                                      int n_samples, std::uint64_t seed) {
	if (!model.fitted()) {
		throw Error(ErrorCode::NotFitted, "model has not been fitted");
	}
	if (n_samples < 1) {
		throw Error(ErrorCode::InvalidParameter, "n_samples must be >= 1", "n_samples");
	}
	Rng rng(seed);
	std::vector<GroupMatrices> samples;
	samples.reserve(static_cast<std::size_t>(n_samples));
	for (int s = 0; s < n_samples; ++s) {
		samples.push_back(model.predict(context, horizon, &rng));
	}
	Forecast out;
	std::vector<double> cell(static_cast<std::size_t>(n_samples));
	for (const auto &[g, first] : samples.front()) {
		GroupForecast f;
		f.mean = Matrix::Zero(first.rows(), first.cols());
		f.p10 = Matrix(first.rows(), first.cols());
		f.p50 = Matrix(first.rows(), first.cols());
		f.p90 = Matrix(first.rows(), first.cols());
		for (Eigen::Index h = 0; h < first.rows(); ++h) {
			for (Eigen::Index c = 0; c < first.cols(); ++c) {
				double sum = 0.0;
				for (int s = 0; s < n_samples; ++s) {
					const double v = samples[static_cast<std::size_t>(s)].at(g)(h, c);
					cell[static_cast<std::size_t>(s)] = v;
					sum += v;
				}
				std::sort(cell.begin(), cell.end());
				f.mean(h, c) = n_samples == 1 ? cell[0] : sum / n_samples;
				(*f.p10)(h, c) = quantile_sorted(cell, 0.1);
				(*f.p50)(h, c) = quantile_sorted(cell, 0.5);
				(*f.p90)(h, c) = quantile_sorted(cell, 0.9);
			}
		}
		out.emplace(g, std::move(f));
	}
	return out;
}

} // namespace forecaster::models
