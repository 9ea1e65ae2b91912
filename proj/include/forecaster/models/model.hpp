#pragma once

#include "forecaster/common/error.hpp"
#include "forecaster/common/rng.hpp"
#include "forecaster/models/params.hpp"
#include "forecaster/series/bundle.hpp"
#include "forecaster/series/scaler.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace forecaster::models {

using series::Matrix;
using series::SeriesBundle;
using series::Vector;

enum class FutureCovSupport { Allowed, Forbidden, Required };
enum class FanOut { PerGroup, PerGroupComponent, Global };

struct Capabilities {
	bool past_cov;
	FutureCovSupport future_cov;
	bool static_cov;
	bool multivariate;
	FanOut fan_out;
	bool probabilistic;
	series::ScalerScope scaler_scope;
};

inline Capabilities capabilities(ModelKind k) {
	using series::ScalerScope;
	switch (k) {
	case ModelKind::NaiveSeasonal:
		return {false, FutureCovSupport::Forbidden, false, false, FanOut::PerGroupComponent, false, ScalerScope::PerGroup};
	case ModelKind::Arima:
		return {true, FutureCovSupport::Forbidden, false, false, FanOut::PerGroupComponent, true, ScalerScope::PerGroup};
	case ModelKind::ExpSmoothing:
		return {false, FutureCovSupport::Forbidden, false, false, FanOut::PerGroupComponent, true, ScalerScope::PerGroup};
	case ModelKind::LinearLagged:
	case ModelKind::RandomForest:
		return {true, FutureCovSupport::Allowed, true, true, FanOut::Global, true, ScalerScope::Global};
	case ModelKind::NLinear:
		// listed as covariate-capable, but the model itself only reads the target window
		return {true, FutureCovSupport::Allowed, true, true, FanOut::Global, true, ScalerScope::Global};
	}
	return {};
}

struct FitPlan {
	ModelKind kind = ModelKind::NaiveSeasonal;
	bool global = false;
	bool use_past = false;
	bool use_future = false;
	bool use_static = false;
	std::vector<std::pair<std::string, std::string>> sub_fits; // (group, component); empty for global fits
	std::vector<std::string> warnings;
};

// Decides which covariate blocks a kind may see and how it fans out. Dropped
// covariates produce warnings, never errors.
inline FitPlan check_capabilities(const ModelSpec &spec, const SeriesBundle &bundle) {
	const Capabilities cap = capabilities(spec.kind);
	const std::string name(to_string(spec.kind));
	FitPlan plan;
	plan.kind = spec.kind;
	plan.global = cap.fan_out == FanOut::Global;
	const bool model_reads_covs = spec.kind != ModelKind::NLinear;

	auto decide = [&](bool present, bool allowed, const char *what) {
		if (!present) {
			return false;
		}
		if (!allowed) {
			plan.warnings.push_back(name + " cannot use " + what + "; they were dropped for this model");
			return false;
		}
		if (!model_reads_covs) {
			plan.warnings.push_back(name + " only reads the target window; " + what + " are ignored");
			return false;
		}
		return true;
	};
	if (cap.future_cov == FutureCovSupport::Required && bundle.future_cov_names.empty()) {
		throw Error(ErrorCode::MissingRequiredCovariate, name + " requires future covariates", "future_covariate");
	}
	plan.use_past = decide(!bundle.past_cov_names.empty(), cap.past_cov, "past covariates");
	plan.use_future =
	    decide(!bundle.future_cov_names.empty(), cap.future_cov != FutureCovSupport::Forbidden, "future covariates");
	plan.use_static = decide(!bundle.static_cov_names.empty(), cap.static_cov, "static covariates");
	if (spec.kind == ModelKind::Arima && plan.use_past) {
		plan.warnings.push_back("arima holds past covariates at their last observed value when forecasting");
	}
	if (spec.kind == ModelKind::NLinear && spec.params.contains("epochs")) {
		plan.warnings.push_back("nlinear is fitted in closed form; 'epochs' is ignored");
	}
	if (!plan.global) {
		for (const auto &g : bundle.groups) {
			for (const auto &c : bundle.component_names) {
				plan.sub_fits.emplace_back(g.group_key, c);
			}
		}
	}
	return plan;
}

// Copy of `bundle` without the covariate blocks the plan excludes.
inline SeriesBundle restrict_bundle(const SeriesBundle &bundle, const FitPlan &plan) {
	SeriesBundle out = bundle;
	for (auto &g : out.groups) {
		if (!plan.use_past) {
			g.past_cov.resize(g.target.rows(), 0);
		}
		if (!plan.use_future) {
			g.future_cov.resize(g.target.rows(), 0);
		}
		if (!plan.use_static) {
			g.static_cov.resize(0);
		}
	}
	if (!plan.use_past) {
		out.past_cov_names.clear();
	}
	if (!plan.use_future) {
		out.future_cov_names.clear();
	}
	if (!plan.use_static) {
		out.static_cov_names.clear();
	}
	return out;
}

// Per-group point forecasts, rows = horizon, cols = components (scaled space).
using GroupMatrices = std::map<std::string, Matrix>;

// Fitted state lives in scaled space. predict() conditions on the history in
// `context`; when `noise` is set, Gaussian noise with the model's residual
// sigma is added at every step and fed back into later steps.
class Model {
public:
	virtual ~Model() = default;
	virtual ModelKind kind() const = 0;
	virtual void fit(const SeriesBundle &train, std::uint64_t seed) = 0;
	virtual GroupMatrices predict(const SeriesBundle &context, Eigen::Index horizon, Rng *noise) const = 0;
	virtual bool fitted() const = 0;
	virtual json payload() const = 0;
	virtual void load_payload(const json &j) = 0;
};

namespace detail {

inline json matrix_to_json(const Matrix &m) {
	json rows = json::array();
	for (Eigen::Index r = 0; r < m.rows(); ++r) {
		json row = json::array();
		for (Eigen::Index c = 0; c < m.cols(); ++c) {
			row.push_back(m(r, c));
		}
		rows.push_back(std::move(row));
	}
	return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

inline Matrix matrix_from_json(const json &j) {
	Matrix m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
	const json &data = j.at("data");
	if (static_cast<Eigen::Index>(data.size()) != m.rows()) {
		throw Error(ErrorCode::BadArtifact, "matrix row count mismatch");
	}
	for (Eigen::Index r = 0; r < m.rows(); ++r) {
		const json &row = data[static_cast<std::size_t>(r)];
		if (static_cast<Eigen::Index>(row.size()) != m.cols()) {
			throw Error(ErrorCode::BadArtifact, "matrix column count mismatch");
		}
		for (Eigen::Index c = 0; c < m.cols(); ++c) {
			m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
		}
	}
	return m;
}

inline json vector_to_json(const Vector &v) {
	json a = json::array();
	for (Eigen::Index i = 0; i < v.size(); ++i) {
		a.push_back(v(i));
	}
	return a;
}

inline Vector vector_from_json(const json &j) {
	Vector v(static_cast<Eigen::Index>(j.size()));
	for (std::size_t i = 0; i < j.size(); ++i) {
		v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
	}
	return v;
}

inline double residual_std(const std::vector<double> &res) {
	if (res.empty()) {
		return 0.0;
	}
	double ss = 0.0;
	for (double r : res) {
		ss += r * r;
	}
	return std::sqrt(ss / static_cast<double>(res.size()));
}

inline const std::string &component_key_sep() {
	static const std::string sep("\x1f");
	return sep;
}

} // namespace detail

// Adapts a univariate sub-model to the bundle interface by fitting one copy
// per (group, component). Sub must provide:
//   void fit(const Vector &y, const Matrix &exog, std::uint64_t seed)
//   Vector forecast(const Vector &y, const Matrix &exog, Eigen::Index h, Rng *noise) const
//   json to_json() const; static Sub from_json(const json &)
template <typename Sub, ModelKind Kind>
class LocalModel : public Model {
public:
	using Factory = std::function<Sub()>;

	explicit LocalModel(Factory make) : make_(std::move(make)) {}

	ModelKind kind() const override {
		return Kind;
	}
	bool fitted() const override {
		return !subs_.empty();
	}

	void fit(const SeriesBundle &train, std::uint64_t seed) override {
		subs_.clear();
		for (const auto &g : train.groups) {
			for (std::size_t c = 0; c < train.component_names.size(); ++c) {
				Sub s = make_();
				const Vector y = g.target.col(static_cast<Eigen::Index>(c));
				s.fit(y, g.past_cov, fnv1a(g.group_key + detail::component_key_sep() + train.component_names[c], seed));
				subs_.emplace(key(g.group_key, train.component_names[c]), std::move(s));
			}
		}
	}

	GroupMatrices predict(const SeriesBundle &context, Eigen::Index horizon, Rng *noise) const override {
		if (!fitted()) {
			throw Error(ErrorCode::NotFitted, std::string(to_string(Kind)) + " has not been fitted");
		}
		GroupMatrices out;
		for (const auto &g : context.groups) {
			Matrix m(horizon, static_cast<Eigen::Index>(context.component_names.size()));
			for (std::size_t c = 0; c < context.component_names.size(); ++c) {
				auto it = subs_.find(key(g.group_key, context.component_names[c]));
				if (it == subs_.end()) {
					throw Error(ErrorCode::UnknownName,
					            "no fitted sub-model for group '" + g.group_key + "', component '" +
					                context.component_names[c] + "'",
					            g.group_key);
				}
				const Vector y = g.target.col(static_cast<Eigen::Index>(c));
				m.col(static_cast<Eigen::Index>(c)) = it->second.forecast(y, g.past_cov, horizon, noise);
			}
			out.emplace(g.group_key, std::move(m));
		}
		return out;
	}

	json payload() const override {
		json subs = json::array();
		for (const auto &[k, s] : subs_) {
			const auto pos = k.find(detail::component_key_sep());
			subs.push_back({{"group", k.substr(0, pos)}, {"component", k.substr(pos + 1)}, {"state", s.to_json()}});
		}
		return {{"sub_models", std::move(subs)}};
	}

	void load_payload(const json &j) override {
		subs_.clear();
		for (const auto &s : j.at("sub_models")) {
			subs_.emplace(key(s.at("group").get<std::string>(), s.at("component").get<std::string>()),
			              Sub::from_json(s.at("state")));
		}
	}

	const Sub &sub(const std::string &group, const std::string &component) const {
		auto it = subs_.find(key(group, component));
		if (it == subs_.end()) {
			throw Error(ErrorCode::UnknownName, "no sub-model for " + group + "/" + component, group);
		}
		return it->second;
	}

	std::size_t sub_count() const {
		return subs_.size();
	}

private:
	static std::string key(const std::string &group, const std::string &component) {
		return group + detail::component_key_sep() + component;
	}

	Factory make_;
	std::map<std::string, Sub> subs_;
};

} // namespace forecaster::models
