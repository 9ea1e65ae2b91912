#pragma once

#include "forecaster/common/error.hpp"
#include "forecaster/series/bundle.hpp"
#include "forecaster/series/scaler.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace forecaster::metrics {

using nlohmann::json;

enum class MetricKind { MAE, MAPE, MSE, RMSE, SMAPE, MASE };

inline constexpr std::array<MetricKind, 6> kAllMetrics = {MetricKind::MAE,  MetricKind::MAPE,  MetricKind::MSE,
                                                          MetricKind::RMSE, MetricKind::SMAPE, MetricKind::MASE};

inline std::string_view to_string(MetricKind k) {
	switch (k) {
	case MetricKind::MAE: return "mae";
	case MetricKind::MAPE: return "mape";
	case MetricKind::MSE: return "mse";
	case MetricKind::RMSE: return "rmse";
	case MetricKind::SMAPE: return "smape";
	case MetricKind::MASE: return "mase";
	}
	return "mae";
}

enum class UndefinedReason { ZerosInActuals, SeasonalLengthMismatch };

inline std::string_view to_string(UndefinedReason r) {
	return r == UndefinedReason::ZerosInActuals ? "zeros_in_actuals" : "seasonal_length_mismatch";
}

struct MetricValue {
	std::optional<double> value;
	std::optional<UndefinedReason> reason;

	static MetricValue of(double v) {
		return {v, std::nullopt};
	}
	static MetricValue undefined(UndefinedReason r) {
		return {std::nullopt, r};
	}
	bool defined() const {
		return value.has_value();
	}

	json to_json() const {
		if (value) {
			return {{"value", *value}};
		}
		return {{"value", nullptr}, {"reason", std::string(to_string(*reason))}};
	}
};

namespace detail {

inline void check_lengths(std::span<const double> pred, std::span<const double> actual) {
	if (pred.size() != actual.size()) {
		throw Error(ErrorCode::LengthMismatch,
		            "prediction has " + std::to_string(pred.size()) + " values, actuals have " +
		                std::to_string(actual.size()));
	}
	if (pred.empty()) {
		throw Error(ErrorCode::EmptyInput, "no values to score");
	}
}

inline double mean_abs(std::span<const double> p, std::span<const double> a) {
	double s = 0.0;
	for (std::size_t i = 0; i < p.size(); ++i) {
		s += std::abs(p[i] - a[i]);
	}
	return s / static_cast<double>(p.size());
}

inline double mean_sq(std::span<const double> p, std::span<const double> a) {
	double s = 0.0;
	for (std::size_t i = 0; i < p.size(); ++i) {
		const double d = p[i] - a[i];
		s += d * d;
	}
	return s / static_cast<double>(p.size());
}

} // namespace detail

// In-sample seasonal-naive MAE on the training series, or nullopt when it
// cannot be formed or is zero.
inline std::optional<double> mase_scale(std::span<const double> train, int K) {
	if (K < 1 || train.size() <= static_cast<std::size_t>(K)) {
		return std::nullopt;
	}
	double s = 0.0;
	for (std::size_t t = static_cast<std::size_t>(K); t < train.size(); ++t) {
		s += std::abs(train[t] - train[t - static_cast<std::size_t>(K)]);
	}
	const double d = s / static_cast<double>(train.size() - static_cast<std::size_t>(K));
	if (d == 0.0) {
		return std::nullopt;
	}
	return d;
}

inline MetricValue compute_metric(MetricKind kind, std::span<const double> pred, std::span<const double> actual,
                                  std::span<const double> train = {}, int K = 1) {
	detail::check_lengths(pred, actual);
	const auto n = static_cast<double>(pred.size());
	switch (kind) {
	case MetricKind::MAE: return MetricValue::of(detail::mean_abs(pred, actual));
	case MetricKind::MSE: return MetricValue::of(detail::mean_sq(pred, actual));
	case MetricKind::RMSE: return MetricValue::of(std::sqrt(detail::mean_sq(pred, actual)));
	case MetricKind::MAPE: {
		double s = 0.0;
		for (std::size_t i = 0; i < pred.size(); ++i) {
			if (actual[i] == 0.0) {
				return MetricValue::undefined(UndefinedReason::ZerosInActuals);
			}
			s += std::abs(pred[i] - actual[i]) / std::abs(actual[i]);
		}
		return MetricValue::of(100.0 * s / n);
	}
	case MetricKind::SMAPE: {
		double s = 0.0;
		for (std::size_t i = 0; i < pred.size(); ++i) {
			const double den = std::abs(pred[i]) + std::abs(actual[i]);
			if (den == 0.0) {
				return MetricValue::undefined(UndefinedReason::ZerosInActuals);
			}
			s += 2.0 * std::abs(pred[i] - actual[i]) / den;
		}
		return MetricValue::of(100.0 * s / n);
	}
	case MetricKind::MASE: {
		const auto scale = mase_scale(train, K);
		if (!scale) {
			return MetricValue::undefined(UndefinedReason::SeasonalLengthMismatch);
		}
		return MetricValue::of(detail::mean_abs(pred, actual) / *scale);
	}
	}
	throw Error(ErrorCode::Internal, "unhandled metric");
}

using MetricSet = std::map<MetricKind, MetricValue>;

inline MetricSet compute_all(std::span<const double> pred, std::span<const double> actual,
                             std::span<const double> train, int K) {
	MetricSet out;
	for (auto k : kAllMetrics) {
		out.emplace(k, compute_metric(k, pred, actual, train, K));
	}
	return out;
}

inline json to_json(const MetricSet &s) {
	json j = json::object();
	for (const auto &[k, v] : s) {
		j[std::string(to_string(k))] = v.to_json();
	}
	return j;
}

struct ScaledMetrics {
	MetricSet normalized;
	MetricSet denormalized;

	json to_json() const {
		return {{"normalized", metrics::to_json(normalized)}, {"denormalized", metrics::to_json(denormalized)}};
	}
};

struct MetricsReport {
	// group -> component -> metrics
	std::map<std::string, std::map<std::string, ScaledMetrics>> per_group;
	ScaledMetrics aggregate;

	json to_json() const {
		json pg = json::object();
		for (const auto &[g, comps] : per_group) {
			json cj = json::object();
			for (const auto &[c, m] : comps) {
				cj[c] = m.to_json();
			}
			pg[g] = std::move(cj);
		}
		return {{"metrics", aggregate.to_json()}, {"per_group", std::move(pg)}};
	}
};

// Mean over defined cells. All undefined -> undefined with the first reason.
inline MetricValue aggregate_cells(const std::vector<MetricValue> &cells) {
	double s = 0.0;
	int n = 0;
	std::optional<UndefinedReason> reason;
	for (const auto &c : cells) {
		if (c.value) {
			s += *c.value;
			++n;
		} else if (!reason) {
			reason = c.reason;
		}
	}
	if (n > 0) {
		return MetricValue::of(s / n);
	}
	return MetricValue::undefined(reason.value_or(UndefinedReason::SeasonalLengthMismatch));
}

namespace detail {

inline std::vector<double> column(const series::Matrix &m, Eigen::Index c) {
	std::vector<double> v(static_cast<std::size_t>(m.rows()));
	for (Eigen::Index r = 0; r < m.rows(); ++r) {
		v[static_cast<std::size_t>(r)] = m(r, c);
	}
	return v;
}

} // namespace detail

// `pred` holds de-normalized forecasts per group (rows aligned with the
// target rows of `actual`). Normalized metrics apply `scaler` to prediction,
// actuals and training series alike.
inline MetricsReport compute_report(const std::map<std::string, series::Matrix> &pred,
                                    const series::SeriesBundle &actual, const series::SeriesBundle &train,
                                    const series::ScalerParams &scaler, int K) {
	MetricsReport report;
	std::map<MetricKind, std::vector<MetricValue>> cells_norm, cells_denorm;
	for (const auto &g : actual.groups) {
		auto it = pred.find(g.group_key);
		if (it == pred.end()) {
			throw Error(ErrorCode::AlignmentError, "no forecast for group '" + g.group_key + "'", g.group_key);
		}
		const series::Matrix &p = it->second;
		if (p.rows() != g.target.rows() || p.cols() != g.target.cols()) {
			throw Error(ErrorCode::AlignmentError,
			            "forecast for group '" + g.group_key + "' has shape " + std::to_string(p.rows()) + "x" +
			                std::to_string(p.cols()) + ", actuals " + std::to_string(g.target.rows()) + "x" +
			                std::to_string(g.target.cols()),
			            g.group_key);
		}
		const series::GroupSeries &tr = train.group(g.group_key);
		for (std::size_t c = 0; c < actual.component_names.size(); ++c) {
			const auto ci = static_cast<Eigen::Index>(c);
			const std::string &name = actual.component_names[c];
			const auto pv = detail::column(p, ci);
			const auto av = detail::column(g.target, ci);
			const auto tv = detail::column(tr.target, ci);
			ScaledMetrics m;
			m.denormalized = compute_all(pv, av, tv, K);
			m.normalized = compute_all(series::apply_values(pv, name, g.group_key, scaler),
			                           series::apply_values(av, name, g.group_key, scaler),
			                           series::apply_values(tv, name, g.group_key, scaler), K);
			for (auto k : kAllMetrics) {
				cells_norm[k].push_back(m.normalized.at(k));
				cells_denorm[k].push_back(m.denormalized.at(k));
			}
			report.per_group[g.group_key][name] = std::move(m);
		}
	}
	for (auto k : kAllMetrics) {
		report.aggregate.normalized.emplace(k, aggregate_cells(cells_norm[k]));
		report.aggregate.denormalized.emplace(k, aggregate_cells(cells_denorm[k]));
	}
	return report;
}

} // namespace forecaster::metrics
