#pragma once

#include "forecaster/common/error.hpp"
#include "forecaster/common/rng.hpp"
#include "forecaster/ingest/dataset.hpp"
#include "forecaster/models/params.hpp"
#include "forecaster/series/bundle.hpp"
#include "forecaster/series/split.hpp"

#include <json.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace forecaster::jobs {

using nlohmann::json;

enum class Regime { Holdout, FullTrainForecast, ExpandingWindow };

inline std::string_view to_string(Regime r) {
	switch (r) {
	case Regime::Holdout: return "holdout";
	case Regime::FullTrainForecast: return "full_train_forecast";
	case Regime::ExpandingWindow: return "expanding_window";
	}
	return "holdout";
}

inline Regime parse_regime(std::string_view s) {
	for (auto r : {Regime::Holdout, Regime::FullTrainForecast, Regime::ExpandingWindow}) {
		if (to_string(r) == s) {
			return r;
		}
	}
	throw Error(ErrorCode::ValidationFailed, "unknown regime '" + std::string(s) + "'", "eval.regime");
}

namespace detail {

inline std::optional<int> opt_positive_int(const json &j, const char *key, const std::string &field, int min = 1) {
	if (!j.contains(key) || j[key].is_null()) {
		return std::nullopt;
	}
	if (!j[key].is_number_integer()) {
		throw Error(ErrorCode::ValidationFailed, field + " must be an integer", field);
	}
	const auto v = j[key].get<std::int64_t>();
	if (v < min || v > 100'000'000) {
		throw Error(ErrorCode::ValidationFailed, field + " must be >= " + std::to_string(min), field);
	}
	return static_cast<int>(v);
}

} // namespace detail

struct EvaluationConfig {
	Regime regime = Regime::Holdout;
	std::optional<int> test_len;          // holdout
	std::optional<int> horizon;           // full_train_forecast, expanding_window
	std::optional<int> initial_train_len; // expanding_window
	std::optional<int> stride;            // expanding_window
	bool probabilistic = false;
	int n_samples = models::ParamDefaults::n_samples;
	std::optional<int> seasonality; // naive baseline and MASE; frequency default otherwise

	// Steps each model is asked to predict per fit.
	int forecast_len() const {
		return regime == Regime::Holdout ? test_len.value_or(1) : horizon.value_or(1);
	}

	int effective_seasonality(ingest::FrequencyLabel label) const {
		return seasonality.value_or(ingest::default_seasonality(label));
	}

	json to_json() const {
		json j{{"regime", std::string(to_string(regime))}, {"probabilistic", probabilistic}, {"n_samples", n_samples}};
		auto put = [&](const char *k, const std::optional<int> &v) {
			if (v) {
				j[k] = *v;
			}
		};
		put("test_len", test_len);
		put("horizon", horizon);
		put("initial_train_len", initial_train_len);
		put("stride", stride);
		put("seasonality", seasonality);
		return j;
	}

	static EvaluationConfig from_json(const json &j) {
		if (!j.is_object()) {
			throw Error(ErrorCode::ValidationFailed, "eval must be an object", "eval");
		}
		static const std::set<std::string> known = {"regime", "test_len", "horizon", "initial_train_len",
		                                            "stride", "probabilistic", "n_samples", "seasonality"};
		for (auto it = j.begin(); it != j.end(); ++it) {
			if (!known.contains(it.key())) {
				throw Error(ErrorCode::ValidationFailed, "unknown eval field '" + it.key() + "'", "eval." + it.key());
			}
		}
		EvaluationConfig c;
		if (!j.contains("regime") || !j["regime"].is_string()) {
			throw Error(ErrorCode::ValidationFailed, "eval.regime is required", "eval.regime");
		}
		c.regime = parse_regime(j["regime"].get<std::string>());
		c.test_len = detail::opt_positive_int(j, "test_len", "eval.test_len");
		c.horizon = detail::opt_positive_int(j, "horizon", "eval.horizon");
		c.initial_train_len = detail::opt_positive_int(j, "initial_train_len", "eval.initial_train_len");
		c.stride = detail::opt_positive_int(j, "stride", "eval.stride");
		c.seasonality = detail::opt_positive_int(j, "seasonality", "eval.seasonality");
		if (j.contains("probabilistic")) {
			if (!j["probabilistic"].is_boolean()) {
				throw Error(ErrorCode::ValidationFailed, "eval.probabilistic must be a boolean", "eval.probabilistic");
			}
			c.probabilistic = j["probabilistic"].get<bool>();
		}
		c.n_samples = detail::opt_positive_int(j, "n_samples", "eval.n_samples").value_or(c.n_samples);

		switch (c.regime) {
		case Regime::Holdout:
			if (!c.test_len) {
				throw Error(ErrorCode::ValidationFailed, "holdout needs eval.test_len", "eval.test_len");
			}
			break;
		case Regime::FullTrainForecast:
			if (!c.horizon) {
				throw Error(ErrorCode::ValidationFailed, "full_train_forecast needs eval.horizon", "eval.horizon");
			}
			break;
		case Regime::ExpandingWindow:
			if (!c.horizon) {
				throw Error(ErrorCode::ValidationFailed, "expanding_window needs eval.horizon", "eval.horizon");
			}
			if (c.stride && *c.stride > *c.horizon) {
				throw Error(ErrorCode::BadStride, "eval.stride may not exceed eval.horizon", "eval.stride");
			}
			break;
		}
		return c;
	}

	// Expanding-window schedule over the shortest group.
	series::WindowSchedule schedule(Eigen::Index T, ingest::FrequencyLabel label) const {
		const int K = effective_seasonality(label);
		const Eigen::Index h = horizon.value_or(1);
		const Eigen::Index initial = initial_train_len ? *initial_train_len : series::default_initial_train_len(T, K);
		return series::expanding_schedule(T, initial, stride.value_or(static_cast<int>(h)), h);
	}

	// Length checks that need the data.
	void validate_against(const series::SeriesBundle &bundle) const {
		const Eigen::Index T = bundle.min_length();
		switch (regime) {
		case Regime::Holdout:
			if (*test_len >= T) {
				throw Error(ErrorCode::TestTooLong,
				            "eval.test_len must be < " + std::to_string(T) + " (shortest series)", "eval.test_len");
			}
			break;
		case Regime::FullTrainForecast: break;
		case Regime::ExpandingWindow: schedule(T, bundle.freq.label); break;
		}
	}
};

struct TrainJobParams {
	std::optional<ingest::RoleAssignment> roles; // falls back to the dataset's stored roles
	std::vector<models::ModelSpec> model_specs;
	EvaluationConfig eval;
	std::int64_t seed = 0;

	int models_total() const {
		return static_cast<int>(model_specs.size()) + 1;
	}

	json to_json() const {
		json specs = json::array();
		for (const auto &s : model_specs) {
			specs.push_back(s.to_json());
		}
		json j{{"model_specs", std::move(specs)}, {"eval", eval.to_json()}, {"seed", seed}};
		if (roles) {
			j["roles"] = roles->to_json();
		}
		return j;
	}

	static TrainJobParams from_json(const json &j) {
		if (!j.is_object()) {
			throw Error(ErrorCode::ValidationFailed, "job params must be an object");
		}
		static const std::set<std::string> known = {"roles", "model_specs", "eval", "seed"};
		for (auto it = j.begin(); it != j.end(); ++it) {
			if (!known.contains(it.key())) {
				throw Error(ErrorCode::ValidationFailed, "unknown job field '" + it.key() + "'", it.key());
			}
		}
		TrainJobParams p;
		if (j.contains("roles") && !j["roles"].is_null()) {
			p.roles = ingest::RoleAssignment::from_json(j["roles"]);
		}
		if (j.contains("model_specs")) {
			if (!j["model_specs"].is_array()) {
				throw Error(ErrorCode::ValidationFailed, "model_specs must be an array", "model_specs");
			}
			std::set<models::ModelKind> seen;
			for (std::size_t i = 0; i < j["model_specs"].size(); ++i) {
				const std::string field = "model_specs[" + std::to_string(i) + "]";
				models::ModelSpec s;
				try {
					s = models::ModelSpec::from_json(j["model_specs"][i]);
				} catch (const Error &e) {
					throw Error(ErrorCode::ValidationFailed, field + ": " + e.message(), field + "." + (e.field().empty() ? std::string("kind") : e.field()));
				}
				if (s.kind == models::ModelKind::NaiveSeasonal) {
					throw Error(ErrorCode::ValidationFailed,
					            field + ": the naive seasonal baseline is always trained and cannot be selected",
					            field + ".kind");
				}
				if (!seen.insert(s.kind).second) {
					throw Error(ErrorCode::ValidationFailed, field + ": model kind listed twice", field + ".kind");
				}
				p.model_specs.push_back(std::move(s));
			}
		}
		if (!j.contains("eval")) {
			throw Error(ErrorCode::ValidationFailed, "eval is required", "eval");
		}
		p.eval = EvaluationConfig::from_json(j["eval"]);
		if (j.contains("seed")) {
			if (!j["seed"].is_number_integer()) {
				throw Error(ErrorCode::ValidationFailed, "seed must be an integer", "seed");
			}
			p.seed = j["seed"].get<std::int64_t>();
		}
		return p;
	}
};

struct ForecastJobParams {
	std::string source_job_id;
	std::vector<models::ModelKind> models; // empty -> every model the source job stored
	int horizon = 1;
	std::optional<std::string> covariates_key; // uploaded future-covariate CSV in the object store
	int sequence = 1;                          // n in "{source_job_id}/forecast-{n}.json"
	std::int64_t seed = 0;
	std::optional<ingest::RoleAssignment> roles; // copied from the source job when enqueued

	json to_json() const {
		json ms = json::array();
		for (auto k : models) {
			ms.push_back(std::string(models::to_string(k)));
		}
		json j{{"source_job_id", source_job_id}, {"models", std::move(ms)}, {"horizon", horizon},
		       {"sequence", sequence},           {"seed", seed}};
		if (covariates_key) {
			j["covariates_key"] = *covariates_key;
		}
		if (roles) {
			j["roles"] = roles->to_json();
		}
		return j;
	}

	static ForecastJobParams from_json(const json &j) {
		if (!j.is_object()) {
			throw Error(ErrorCode::ValidationFailed, "forecast params must be an object");
		}
		ForecastJobParams p;
		if (!j.contains("source_job_id") || !j["source_job_id"].is_string()) {
			throw Error(ErrorCode::ValidationFailed, "source_job_id is required", "source_job_id");
		}
		p.source_job_id = j["source_job_id"].get<std::string>();
		if (j.contains("models")) {
			if (!j["models"].is_array()) {
				throw Error(ErrorCode::ValidationFailed, "models must be an array of kinds", "models");
			}
			std::set<models::ModelKind> seen;
			for (const auto &m : j["models"]) {
				if (!m.is_string()) {
					throw Error(ErrorCode::ValidationFailed, "models must be an array of kinds", "models");
				}
				const auto k = models::parse_model_kind(m.get<std::string>());
				if (seen.insert(k).second) {
					p.models.push_back(k);
				}
			}
		}
		const auto h = detail::opt_positive_int(j, "horizon", "horizon");
		if (!h) {
			throw Error(ErrorCode::ValidationFailed, "horizon is required", "horizon");
		}
		p.horizon = *h;
		if (j.contains("covariates_key") && j["covariates_key"].is_string()) {
			p.covariates_key = j["covariates_key"].get<std::string>();
		}
		p.sequence = detail::opt_positive_int(j, "sequence", "sequence").value_or(1);
		if (j.contains("seed") && j["seed"].is_number_integer()) {
			p.seed = j["seed"].get<std::int64_t>();
		}
		if (j.contains("roles") && j["roles"].is_object()) {
			p.roles = ingest::RoleAssignment::from_json(j["roles"]);
		}
		return p;
	}
};

// Seed for one model of one job.
inline std::uint64_t model_seed(const std::string &job_id, std::int64_t seed, models::ModelKind kind) {
	return seed_for(job_id + "#" + std::to_string(seed), models::to_string(kind));
}

} // namespace forecaster::jobs
