#pragma once

#include "forecaster/common/error.hpp"
#include "forecaster/series/bundle.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace forecaster::series {

using nlohmann::json;

// Per-name min-max range. A degenerate range (max == min) maps every value to 0.
struct ScaleRange {
	double min = 0.0;
	double max = 1.0;
	bool degenerate = false;

	double apply(double x) const {
		return degenerate ? 0.0 : (x - min) / (max - min);
	}
	double invert(double y) const {
		return degenerate ? min : y * (max - min) + min;
	}
	double span() const {
		return degenerate ? 0.0 : max - min;
	}
};

inline ScaleRange fit_range(std::span<const double> values) {
	double lo = std::numeric_limits<double>::infinity();
	double hi = -std::numeric_limits<double>::infinity();
	for (double v : values) {
		lo = std::min(lo, v);
		hi = std::max(hi, v);
	}
	if (values.empty()) {
		return {0.0, 0.0, true};
	}
	return {lo, hi, hi == lo};
}

// Local models scale each series within its own group; global models share
// one range per name across all groups. Static covariates are always scaled
// across groups.
enum class ScalerScope { PerGroup, Global };

inline constexpr const char *kGlobalScalerKey = "*";

struct ScalerParams {
	ScalerScope scope = ScalerScope::PerGroup;
	// group key (or "*") -> series name -> range
	std::map<std::string, std::map<std::string, ScaleRange>> ranges;

	const ScaleRange &get(const std::string &group, const std::string &name) const {
		const std::string &key = scope == ScalerScope::Global ? std::string(kGlobalScalerKey) : group;
		auto g = ranges.find(key);
		if (g != ranges.end()) {
			auto it = g->second.find(name);
			if (it != g->second.end()) {
				return it->second;
			}
		}
		// Statics live under "*" for both scopes.
		auto s = ranges.find(kGlobalScalerKey);
		if (s != ranges.end()) {
			auto it = s->second.find(name);
			if (it != s->second.end()) {
				return it->second;
			}
		}
		throw Error(ErrorCode::UnknownName, "no scaler range for '" + name + "' in group '" + group + "'", name);
	}

	json to_json() const {
		json j;
		j["scope"] = scope == ScalerScope::Global ? "global" : "per_group";
		json r = json::object();
		for (const auto &[group, names] : ranges) {
			json g = json::object();
			for (const auto &[name, range] : names) {
				g[name] = {{"min", range.min}, {"max", range.max}, {"degenerate", range.degenerate}};
			}
			r[group] = std::move(g);
		}
		j["ranges"] = std::move(r);
		return j;
	}

	static ScalerParams from_json(const json &j) {
		ScalerParams p;
		p.scope = j.at("scope").get<std::string>() == "global" ? ScalerScope::Global : ScalerScope::PerGroup;
		for (auto g = j.at("ranges").begin(); g != j.at("ranges").end(); ++g) {
			for (auto n = g.value().begin(); n != g.value().end(); ++n) {
				p.ranges[g.key()][n.key()] = {n.value().at("min").get<double>(), n.value().at("max").get<double>(),
				                              n.value().at("degenerate").get<bool>()};
			}
		}
		return p;
	}
};

namespace detail {

inline std::vector<double> column_values(const Matrix &m, Eigen::Index col, Eigen::Index rows) {
	std::vector<double> out;
	out.reserve(static_cast<std::size_t>(rows));
	for (Eigen::Index r = 0; r < rows; ++r) {
		out.push_back(m(r, col));
	}
	return out;
}

} // namespace detail

// Fits ranges on `train`, which must contain only the training region. Future
// covariate rows past the target's end are excluded from the fit.
inline ScalerParams fit_scaler(const SeriesBundle &train, ScalerScope scope) {
	ScalerParams p;
	p.scope = scope;
	auto fit_block = [&](const std::vector<std::string> &names, auto get_matrix) {
		if (scope == ScalerScope::PerGroup) {
			for (const auto &g : train.groups) {
				const Matrix &m = get_matrix(g);
				for (std::size_t c = 0; c < names.size(); ++c) {
					const auto v = detail::column_values(m, static_cast<Eigen::Index>(c), g.length());
					p.ranges[g.group_key][names[c]] = fit_range(v);
				}
			}
			return;
		}
		for (std::size_t c = 0; c < names.size(); ++c) {
			std::vector<double> pooled;
			for (const auto &g : train.groups) {
				const auto v = detail::column_values(get_matrix(g), static_cast<Eigen::Index>(c), g.length());
				pooled.insert(pooled.end(), v.begin(), v.end());
			}
			p.ranges[kGlobalScalerKey][names[c]] = fit_range(pooled);
		}
	};
	fit_block(train.component_names, [](const GroupSeries &g) -> const Matrix & { return g.target; });
	fit_block(train.past_cov_names, [](const GroupSeries &g) -> const Matrix & { return g.past_cov; });
	fit_block(train.future_cov_names, [](const GroupSeries &g) -> const Matrix & { return g.future_cov; });
	for (std::size_t s = 0; s < train.static_cov_names.size(); ++s) {
		std::vector<double> pooled;
		for (const auto &g : train.groups) {
			pooled.push_back(g.static_cov(static_cast<Eigen::Index>(s)));
		}
		p.ranges[kGlobalScalerKey][train.static_cov_names[s]] = fit_range(pooled);
	}
	return p;
}

namespace detail {

template <typename F>
void transform_block(Matrix &m, const std::vector<std::string> &names, const std::string &group,
                     const ScalerParams &params, F &&f) {
	for (std::size_t c = 0; c < names.size(); ++c) {
		const ScaleRange &r = params.get(group, names[c]);
		for (Eigen::Index t = 0; t < m.rows(); ++t) {
			m(t, static_cast<Eigen::Index>(c)) = f(r, m(t, static_cast<Eigen::Index>(c)));
		}
	}
}

} // namespace detail

inline SeriesBundle apply_scaler(const SeriesBundle &bundle, const ScalerParams &params) {
	SeriesBundle out = bundle;
	auto fwd = [](const ScaleRange &r, double x) { return r.apply(x); };
	for (auto &g : out.groups) {
		detail::transform_block(g.target, out.component_names, g.group_key, params, fwd);
		detail::transform_block(g.past_cov, out.past_cov_names, g.group_key, params, fwd);
		detail::transform_block(g.future_cov, out.future_cov_names, g.group_key, params, fwd);
		for (std::size_t s = 0; s < out.static_cov_names.size(); ++s) {
			auto i = static_cast<Eigen::Index>(s);
			g.static_cov(i) = params.get(g.group_key, out.static_cov_names[s]).apply(g.static_cov(i));
		}
	}
	return out;
}

inline std::vector<double> invert_values(std::span<const double> values, const std::string &name,
                                         const std::string &group, const ScalerParams &params) {
	const ScaleRange &r = params.get(group, name);
	std::vector<double> out;
	out.reserve(values.size());
	for (double v : values) {
		out.push_back(r.invert(v));
	}
	return out;
}

inline std::vector<double> apply_values(std::span<const double> values, const std::string &name,
                                        const std::string &group, const ScalerParams &params) {
	const ScaleRange &r = params.get(group, name);
	std::vector<double> out;
	out.reserve(values.size());
	for (double v : values) {
		out.push_back(r.apply(v));
	}
	return out;
}

} // namespace forecaster::series
