#pragma once

#include "forecaster/common/error.hpp"
#include "forecaster/ingest/frequency.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace forecaster::models {

using nlohmann::json;

enum class ModelKind { NaiveSeasonal, Arima, ExpSmoothing, LinearLagged, NLinear, RandomForest };

inline constexpr ModelKind kAllKinds[] = {ModelKind::NaiveSeasonal, ModelKind::Arima,   ModelKind::ExpSmoothing,
                                          ModelKind::LinearLagged,  ModelKind::NLinear, ModelKind::RandomForest};

inline std::string_view to_string(ModelKind k) {
	switch (k) {
	case ModelKind::NaiveSeasonal: return "naive_seasonal";
	case ModelKind::Arima: return "arima";
	case ModelKind::ExpSmoothing: return "exp_smoothing";
	case ModelKind::LinearLagged: return "linear_lagged";
	case ModelKind::NLinear: return "nlinear";
	case ModelKind::RandomForest: return "random_forest";
	}
	return "naive_seasonal";
}

inline std::optional<ModelKind> model_kind_from_string(std::string_view s) {
	for (auto k : kAllKinds) {
		if (to_string(k) == s) {
			return k;
		}
	}
	return std::nullopt;
}

inline ModelKind parse_model_kind(std::string_view s) {
	auto k = model_kind_from_string(s);
	if (!k) {
		throw Error(ErrorCode::ValidationFailed, "unknown model kind '" + std::string(s) + "'", "kind");
	}
	return *k;
}

enum class ParamType { Int, Float, Bool, Choice };

// One entry of the parameter registry shared by model validation, the LLM
// prompt, and the UI.
struct ParamSpec {
	std::string key;
	ParamType type;
	double min = 0.0;
	std::optional<double> max;
	std::vector<std::string> choices; // ParamType::Choice only
	std::vector<ModelKind> applies_to;
	std::string description;

	bool applies(ModelKind k) const {
		for (auto a : applies_to) {
			if (a == k) {
				return true;
			}
		}
		return false;
	}
};

inline const std::vector<ParamSpec> &parameter_registry() {
	using enum ModelKind;
	static const std::vector<ParamSpec> registry = {
	    {"seasonality", ParamType::Int, 1, 1000, {}, {NaiveSeasonal, ExpSmoothing},
	     "seasonal period K in timesteps (also used for the MASE denominator); hourly data suggests 12 or 24, "
	     "daily data 7 or 30, weekly 52, monthly 12; 1 means non-seasonal"},
	    {"trend", ParamType::Choice, 0, std::nullopt, {"none", "additive", "damped"}, {ExpSmoothing},
	     "trend component of exponential smoothing"},
	    {"p", ParamType::Int, 0, 10, {}, {Arima}, "ARIMA autoregressive order"},
	    {"d", ParamType::Int, 0, 2, {}, {Arima}, "ARIMA differencing order"},
	    {"q", ParamType::Int, 0, 10, {}, {Arima}, "ARIMA moving-average order"},
	    {"input_chunk", ParamType::Int, 1, 2000, {}, {LinearLagged, NLinear, RandomForest},
	     "number of past timesteps fed to the model; multiples of the seasonal period work well"},
	    {"output_chunk", ParamType::Int, 1, 2000, {}, {LinearLagged, NLinear, RandomForest},
	     "number of timesteps predicted per model call; longer horizons are chained"},
	    {"epochs", ParamType::Int, 1, 10000, {}, {NLinear},
	     "training epochs (accepted for compatibility; the linear map is fitted in closed form)"},
	    {"n_trees", ParamType::Int, 1, 1000, {}, {RandomForest}, "number of trees in the forest"},
	    {"max_depth", ParamType::Int, 1, 32, {}, {RandomForest}, "maximum tree depth"},
	    {"min_leaf", ParamType::Int, 1, 1000, {}, {RandomForest}, "minimum samples per leaf"},
	    {"ridge_lambda", ParamType::Float, 0, 1e6, {}, {LinearLagged, NLinear},
	     "ridge penalty on the regression weights (0 = ordinary least squares)"},
	    {"probabilistic", ParamType::Bool, 0, std::nullopt, {}, {Arima, ExpSmoothing, LinearLagged, NLinear, RandomForest},
	     "sample many noisy forecast trajectories and report their mean and quantiles"},
	    {"n_samples", ParamType::Int, 1, 10000, {}, {Arima, ExpSmoothing, LinearLagged, NLinear, RandomForest},
	     "number of sampled trajectories for probabilistic forecasts"},
	};
	return registry;
}

inline const ParamSpec *find_param(std::string_view key) {
	for (const auto &p : parameter_registry()) {
		if (p.key == key) {
			return &p;
		}
	}
	return nullptr;
}

using ParamValue = std::variant<std::int64_t, double, bool, std::string>;

// Validated parameter values keyed by registry name.
class ParamMap {
public:
	bool contains(const std::string &key) const {
		return values_.contains(key);
	}
	const std::map<std::string, ParamValue> &values() const {
		return values_;
	}
	void set(const std::string &key, ParamValue v) {
		values_[key] = std::move(v);
	}
	void erase(const std::string &key) {
		values_.erase(key);
	}

	std::int64_t get_int(const std::string &key, std::int64_t fallback) const {
		auto it = values_.find(key);
		if (it == values_.end()) {
			return fallback;
		}
		if (auto *v = std::get_if<std::int64_t>(&it->second)) {
			return *v;
		}
		throw Error(ErrorCode::InvalidParameter, "parameter '" + key + "' is not an integer", key);
	}
	double get_float(const std::string &key, double fallback) const {
		auto it = values_.find(key);
		if (it == values_.end()) {
			return fallback;
		}
		if (auto *v = std::get_if<double>(&it->second)) {
			return *v;
		}
		if (auto *i = std::get_if<std::int64_t>(&it->second)) {
			return static_cast<double>(*i);
		}
		throw Error(ErrorCode::InvalidParameter, "parameter '" + key + "' is not a number", key);
	}
	bool get_bool(const std::string &key, bool fallback) const {
		auto it = values_.find(key);
		if (it == values_.end()) {
			return fallback;
		}
		if (auto *v = std::get_if<bool>(&it->second)) {
			return *v;
		}
		throw Error(ErrorCode::InvalidParameter, "parameter '" + key + "' is not a boolean", key);
	}
	std::string get_string(const std::string &key, const std::string &fallback) const {
		auto it = values_.find(key);
		if (it == values_.end()) {
			return fallback;
		}
		if (auto *v = std::get_if<std::string>(&it->second)) {
			return *v;
		}
		throw Error(ErrorCode::InvalidParameter, "parameter '" + key + "' is not a string", key);
	}

	json to_json() const {
		json j = json::object();
		for (const auto &[k, v] : values_) {
			std::visit([&](const auto &x) { j[k] = x; }, v);
		}
		return j;
	}

	bool operator==(const ParamMap &) const = default;

private:
	std::map<std::string, ParamValue> values_;
};

// Converts one JSON value to a registry-typed value, or throws InvalidParameter.
inline ParamValue coerce_param(const ParamSpec &spec, const json &v) {
	auto fail = [&](const std::string &why) -> ParamValue {
		throw Error(ErrorCode::InvalidParameter, "parameter '" + spec.key + "' " + why, spec.key);
	};
	switch (spec.type) {
	case ParamType::Int: {
		if (!v.is_number_integer() && !(v.is_number_float() && std::nearbyint(v.get<double>()) == v.get<double>())) {
			return fail("must be an integer");
		}
		const auto x = v.is_number_integer() ? v.get<std::int64_t>() : static_cast<std::int64_t>(v.get<double>());
		if (static_cast<double>(x) < spec.min || (spec.max && static_cast<double>(x) > *spec.max)) {
			return fail("out of range");
		}
		return x;
	}
	case ParamType::Float: {
		if (!v.is_number()) {
			return fail("must be a number");
		}
		const double x = v.get<double>();
		if (!std::isfinite(x) || x < spec.min || (spec.max && x > *spec.max)) {
			return fail("out of range");
		}
		return x;
	}
	case ParamType::Bool:
		if (!v.is_boolean()) {
			return fail("must be a boolean");
		}
		return v.get<bool>();
	case ParamType::Choice: {
		if (!v.is_string()) {
			return fail("must be a string");
		}
		const auto s = v.get<std::string>();
		for (const auto &c : spec.choices) {
			if (c == s) {
				return s;
			}
		}
		return fail("must be one of the allowed choices");
	}
	}
	return fail("has an unsupported type");
}

struct ModelSpec {
	ModelKind kind = ModelKind::NaiveSeasonal;
	ParamMap params;

	json to_json() const {
		return {{"kind", std::string(to_string(kind))}, {"params", params.to_json()}};
	}

	// Every key must exist in the registry, apply to `kind`, and be in range.
	static ModelSpec from_json(const json &j) {
		ModelSpec s;
		if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
			throw Error(ErrorCode::ValidationFailed, "model spec needs a string 'kind'", "kind");
		}
		s.kind = parse_model_kind(j["kind"].get<std::string>());
		if (j.contains("params")) {
			const json &p = j["params"];
			if (!p.is_object()) {
				throw Error(ErrorCode::ValidationFailed, "'params' must be an object", "params");
			}
			for (auto it = p.begin(); it != p.end(); ++it) {
				const ParamSpec *spec = find_param(it.key());
				if (!spec) {
					throw Error(ErrorCode::InvalidParameter, "unknown parameter '" + it.key() + "'", it.key());
				}
				if (!spec->applies(s.kind)) {
					throw Error(ErrorCode::InvalidParameter,
					            "parameter '" + it.key() + "' does not apply to " + std::string(to_string(s.kind)),
					            it.key());
				}
				s.params.set(it.key(), coerce_param(*spec, it.value()));
			}
		}
		return s;
	}

	bool operator==(const ModelSpec &) const = default;
};

// Defaults when neither the user nor the LLM supplied a value.
struct ParamDefaults {
	static constexpr double ridge_lambda = 1e-3;
	static constexpr int n_trees = 100;
	static constexpr int max_depth = 8;
	static constexpr int min_leaf = 2;
	static constexpr int n_samples = 100;
	static constexpr int arima_p = 1;
	static constexpr int arima_d = 1;
	static constexpr int arima_q = 1;
	static constexpr int epochs = 1;
	static constexpr const char *trend = "additive";
};

// Fills every registry key relevant to `kind` that `spec` leaves unset.
inline ModelSpec resolve_defaults(const ModelSpec &spec, ingest::FrequencyLabel freq, int horizon,
                                  std::optional<int> seasonality_override = std::nullopt) {
	ModelSpec out = spec;
	const int K = seasonality_override.value_or(ingest::default_seasonality(freq));
	auto fill = [&](const std::string &key, ParamValue v) {
		const ParamSpec *p = find_param(key);
		if (p && p->applies(spec.kind) && !out.params.contains(key)) {
			out.params.set(key, std::move(v));
		}
	};
	fill("seasonality", std::int64_t{K});
	fill("trend", std::string(ParamDefaults::trend));
	fill("p", std::int64_t{ParamDefaults::arima_p});
	fill("d", std::int64_t{ParamDefaults::arima_d});
	fill("q", std::int64_t{ParamDefaults::arima_q});
	fill("input_chunk", std::int64_t{2 * K});
	fill("output_chunk", std::int64_t{std::max(1, horizon)});
	fill("n_trees", std::int64_t{ParamDefaults::n_trees});
	fill("max_depth", std::int64_t{ParamDefaults::max_depth});
	fill("min_leaf", std::int64_t{ParamDefaults::min_leaf});
	fill("ridge_lambda", ParamDefaults::ridge_lambda);
	fill("probabilistic", false);
	fill("n_samples", std::int64_t{ParamDefaults::n_samples});
	return out;
}

} // namespace forecaster::models
