#pragma once

#include "forecaster/models/arima.hpp"
#include "forecaster/models/exp_smoothing.hpp"
#include "forecaster/models/linear_lagged.hpp"
#include "forecaster/models/naive.hpp"
#include "forecaster/models/nlinear.hpp"
#include "forecaster/models/probabilistic.hpp"
#include "forecaster/models/random_forest.hpp"
#include "forecaster/series/scaler.hpp"

#include <memory>

namespace forecaster::models {

inline constexpr int kArtifactFormatVersion = 1;

// Builds an unfitted model from a spec whose defaults are already resolved.
inline std::unique_ptr<Model> make_model(const ModelSpec &spec) {
	const auto &p = spec.params;
	auto need_int = [&](const char *key) {
		if (!p.contains(key)) {
			throw Error(ErrorCode::InvalidParameter, std::string("missing parameter '") + key + "'", key);
		}
		return p.get_int(key, 0);
	};
	switch (spec.kind) {
	case ModelKind::NaiveSeasonal:
		return make_naive_seasonal(static_cast<int>(need_int("seasonality")));
	case ModelKind::Arima:
		return make_arima({static_cast<int>(need_int("p")), static_cast<int>(need_int("d")),
		                   static_cast<int>(need_int("q"))});
	case ModelKind::ExpSmoothing:
		return make_exp_smoothing(static_cast<int>(need_int("seasonality")),
		                          parse_trend(p.get_string("trend", ParamDefaults::trend)));
	case ModelKind::LinearLagged:
		return std::make_unique<LinearLaggedModel>(need_int("input_chunk"), need_int("output_chunk"),
		                                           p.get_float("ridge_lambda", ParamDefaults::ridge_lambda));
	case ModelKind::NLinear:
		return std::make_unique<NLinearModel>(need_int("input_chunk"), need_int("output_chunk"),
		                                      p.get_float("ridge_lambda", ParamDefaults::ridge_lambda));
	case ModelKind::RandomForest:
		return std::make_unique<RandomForestModel>(
		    need_int("input_chunk"), need_int("output_chunk"),
		    ForestOptions{static_cast<int>(need_int("n_trees")), static_cast<int>(need_int("max_depth")),
		                  static_cast<int>(need_int("min_leaf"))});
	}
	throw Error(ErrorCode::Internal, "unhandled model kind");
}

// Fitted model plus everything needed to use it on raw (unscaled) data.
struct TrainedModel {
	ModelSpec spec;
	FitPlan plan;
	series::ScalerParams scaler;
	std::shared_ptr<Model> model;

	bool probabilistic() const {
		return capabilities(spec.kind).probabilistic && spec.params.get_bool("probabilistic", false);
	}
	int n_samples() const {
		return static_cast<int>(spec.params.get_int("n_samples", ParamDefaults::n_samples));
	}

	// Scaled-space forecast for every group of the raw context bundle.
	Forecast forecast(const SeriesBundle &raw_context, Eigen::Index horizon, std::uint64_t seed) const {
		const SeriesBundle ctx = restrict_bundle(series::apply_scaler(raw_context, scaler), plan);
		if (probabilistic()) {
			return probabilistic_predict(*model, ctx, horizon, n_samples(), seed);
		}
		return deterministic_forecast(*model, ctx, horizon);
	}

	json to_json() const {
		json sub = json::array();
		for (const auto &[g, c] : plan.sub_fits) {
			sub.push_back({{"group", g}, {"component", c}});
		}
		return {{"format_version", kArtifactFormatVersion},
		        {"kind", std::string(to_string(spec.kind))},
		        {"spec", spec.to_json()},
		        {"plan",
		         {{"global", plan.global},
		          {"use_past", plan.use_past},
		          {"use_future", plan.use_future},
		          {"use_static", plan.use_static},
		          {"sub_fits", std::move(sub)},
		          {"warnings", plan.warnings}}},
		        {"scaler", scaler.to_json()},
		        {"payload", model->payload()}};
	}

	static TrainedModel from_json(const json &j) {
		try {
			if (j.at("format_version").get<int>() != kArtifactFormatVersion) {
				throw Error(ErrorCode::BadArtifact, "unsupported model artifact version");
			}
			TrainedModel t;
			t.spec = ModelSpec::from_json(j.at("spec"));
			const json &p = j.at("plan");
			t.plan.kind = t.spec.kind;
			t.plan.global = p.at("global").get<bool>();
			t.plan.use_past = p.at("use_past").get<bool>();
			t.plan.use_future = p.at("use_future").get<bool>();
			t.plan.use_static = p.at("use_static").get<bool>();
			for (const auto &s : p.at("sub_fits")) {
				t.plan.sub_fits.emplace_back(s.at("group").get<std::string>(), s.at("component").get<std::string>());
			}
			t.plan.warnings = p.at("warnings").get<std::vector<std::string>>();
			t.scaler = series::ScalerParams::from_json(j.at("scaler"));
			auto m = make_model(t.spec);
			m->load_payload(j.at("payload"));
			t.model = std::move(m);
			return t;
		} catch (const json::exception &e) {
			throw Error(ErrorCode::BadArtifact, std::string("malformed model artifact: ") + e.what());
		}
	}
};

// Fits scaler (unless one is supplied), restricts covariates per the
// capability plan, and fits the model in scaled space.
inline TrainedModel train_model(const ModelSpec &resolved, const SeriesBundle &raw_train, std::uint64_t seed,
                                const std::optional<series::ScalerParams> &scaler = std::nullopt) {
	TrainedModel t;
	t.spec = resolved;
	t.plan = check_capabilities(resolved, raw_train);
	t.scaler = scaler ? *scaler : series::fit_scaler(raw_train, capabilities(resolved.kind).scaler_scope);
	const SeriesBundle train = restrict_bundle(series::apply_scaler(raw_train, t.scaler), t.plan);
	auto m = make_model(resolved);
	m->fit(train, seed);
	t.model = std::move(m);
	return t;
}

inline std::string model_artifact_key(const std::string &job_id, ModelKind kind) {
	return job_id + "/models/" + std::string(to_string(kind)) + ".json";
}

} // namespace forecaster::models
