#pragma once

#include "forecaster/llm/chat.hpp"
#include "forecaster/llm/stats.hpp"
#include "forecaster/models/params.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace forecaster::llm {

using models::ModelKind;
using models::ParamMap;
using models::ParamSpec;
using models::ParamType;

inline constexpr const char *kFallbackExplanation = "heuristic defaults (LLM unavailable)";

struct Recommendation {
	ParamMap params;
	std::vector<ModelKind> recommended_models;
	std::string explanation;
	std::string source = "fallback"; // "llm" | "fallback"
	std::vector<std::string> notes;  // clamps, dropped keys, failures

	json to_json() const {
		json models = json::array();
		for (auto k : recommended_models) {
			models.push_back(std::string(models::to_string(k)));
		}
		return {{"params", params.to_json()},
		        {"recommended_models", std::move(models)},
		        {"explanation", explanation},
		        {"source", source},
		        {"notes", notes}};
	}
};

// Removes every open...close block; if a close marker remains without its
// opener (some servers drop the opening tag), everything before it goes too.
// An unterminated opener swallows the rest.
inline std::string strip_reasoning(std::string_view text, std::string_view open, std::string_view close) {
	std::string s(text);
	if (open.empty() || close.empty()) {
		return s;
	}
	for (;;) {
		const auto a = s.find(open);
		if (a == std::string::npos) {
			break;
		}
		const auto b = s.find(close, a + open.size());
		if (b == std::string::npos) {
			s.erase(a);
			break;
		}
		s.erase(a, b + close.size() - a);
	}
	if (const auto c = s.rfind(close); c != std::string::npos) {
		s.erase(0, c + close.size());
	}
	return s;
}

// First balanced {...} in `text`, honouring JSON string quoting.
inline std::optional<std::string> extract_json_object(std::string_view text) {
	for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
		int depth = 0;
		bool in_string = false, escaped = false;
		for (std::size_t i = start; i < text.size(); ++i) {
			const char ch = text[i];
			if (in_string) {
				if (escaped) {
					escaped = false;
				} else if (ch == '\\') {
					escaped = true;
				} else if (ch == '"') {
					in_string = false;
				}
				continue;
			}
			if (ch == '"') {
				in_string = true;
			} else if (ch == '{') {
				++depth;
			} else if (ch == '}' && --depth == 0) {
				std::string candidate(text.substr(start, i - start + 1));
				if (json::accept(candidate)) {
					return candidate;
				}
				break;
			}
		}
	}
	return std::nullopt;
}

namespace detail {

inline std::vector<ModelKind> candidate_models(const std::vector<ModelKind> &selected) {
	if (!selected.empty()) {
		return selected;
	}
	std::vector<ModelKind> all;
	for (auto k : models::kAllKinds) {
		if (k != ModelKind::NaiveSeasonal) {
			all.push_back(k);
		}
	}
	return all;
}

// The naive baseline is always trained, so its keys always count.
inline bool applies_to_any(const ParamSpec &p, const std::vector<ModelKind> &kinds) {
	return p.applies(ModelKind::NaiveSeasonal) ||
	       std::any_of(kinds.begin(), kinds.end(), [&](ModelKind k) { return p.applies(k); });
}

inline std::optional<double> as_number(const json &v) {
	if (v.is_number()) {
		return v.get<double>();
	}
	if (v.is_string()) {
		try {
			std::size_t used = 0;
			const std::string s = v.get<std::string>();
			const double d = std::stod(s, &used);
			if (used == s.size()) {
				return d;
			}
		} catch (const std::exception &) {
		}
	}
	return std::nullopt;
}

// Registry-typed, in-range value for an arbitrary JSON value, clamping
// numbers. nullopt when the value cannot be interpreted.
inline std::optional<models::ParamValue> clamp_value(const ParamSpec &spec, const json &v,
                                                     std::vector<std::string> &notes) {
	const double hi = spec.max.value_or(std::numeric_limits<double>::max());
	switch (spec.type) {
	case ParamType::Int:
	case ParamType::Float: {
		auto x = as_number(v);
		if (!x || !std::isfinite(*x)) {
			notes.push_back("dropped '" + spec.key + "': not a number");
			return std::nullopt;
		}
		double y = spec.type == ParamType::Int ? std::round(*x) : *x;
		const double clamped = std::clamp(y, spec.min, hi);
		if (clamped != *x) {
			std::ostringstream os;
			os << (clamped != y ? "clamped '" : "rounded '") << spec.key << "' from " << *x << " to " << clamped;
			notes.push_back(os.str());
		}
		if (spec.type == ParamType::Int) {
			return static_cast<std::int64_t>(clamped);
		}
		return clamped;
	}
	case ParamType::Bool:
		if (v.is_boolean()) {
			return v.get<bool>();
		}
		if (v.is_string() && (v == "true" || v == "false")) {
			return v == "true";
		}
		notes.push_back("dropped '" + spec.key + "': not a boolean");
		return std::nullopt;
	case ParamType::Choice:
		if (v.is_string()) {
			std::string s = v.get<std::string>();
			std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
			for (const auto &c : spec.choices) {
				if (c == s) {
					return s;
				}
			}
		}
		notes.push_back("dropped '" + spec.key + "': not one of the allowed choices");
		return std::nullopt;
	}
	return std::nullopt;
}

} // namespace detail

// Registry defaults for the selected models: K from the frequency, input
// window 2K, output chunk K (the forecast horizon is not known yet).
inline Recommendation heuristic_recommendation(const SummaryStats &stats, const std::vector<ModelKind> &selected) {
	Recommendation r;
	r.source = "fallback";
	r.explanation = kFallbackExplanation;
	r.recommended_models = detail::candidate_models(selected);
	const auto label = ingest::frequency_label_from_string(stats.frequency);
	const int K = ingest::default_seasonality(label);
	auto kinds = r.recommended_models;
	kinds.push_back(ModelKind::NaiveSeasonal);
	for (auto k : kinds) {
		models::ModelSpec spec;
		spec.kind = k;
		const auto resolved = models::resolve_defaults(spec, label, K);
		for (const auto &[key, v] : resolved.params.values()) {
			if (key != "probabilistic" && key != "n_samples") {
				r.params.set(key, v);
			}
		}
	}
	return r;
}

// Validates an LLM JSON object against the registry. Unknown keys, keys that
// apply to none of the models and uninterpretable values are dropped; numbers
// are clamped into range. Every adjustment is noted.
inline Recommendation recommendation_from_json(const json &j, const std::vector<ModelKind> &selected) {
	Recommendation r;
	r.source = "llm";
	const auto kinds = detail::candidate_models(selected);
	for (auto it = j.begin(); it != j.end(); ++it) {
		const std::string &key = it.key();
		if (key == "params" && it->is_object()) {
			// some models nest the parameters despite the instructions
			for (auto p = it->begin(); p != it->end(); ++p) {
				const ParamSpec *spec = models::find_param(p.key());
				if (!spec) {
					r.notes.push_back("dropped unknown parameter '" + p.key() + "'");
				} else if (!detail::applies_to_any(*spec, kinds)) {
					r.notes.push_back("dropped '" + p.key() + "': it applies to none of the selected models");
				} else if (auto v = detail::clamp_value(*spec, *p, r.notes)) {
					r.params.set(p.key(), *v);
				}
			}
			continue;
		}
		if (key == "explanation") {
			r.explanation = it->is_string() ? it->get<std::string>() : it->dump();
			continue;
		}
		if (key == "recommended_models") {
			if (it->is_array()) {
				for (const auto &m : *it) {
					const auto k = m.is_string() ? models::model_kind_from_string(m.get<std::string>()) : std::nullopt;
					if (k && *k != ModelKind::NaiveSeasonal &&
					    std::find(r.recommended_models.begin(), r.recommended_models.end(), *k) ==
					        r.recommended_models.end()) {
						r.recommended_models.push_back(*k);
					} else if (!k) {
						r.notes.push_back("ignored unknown model " + m.dump());
					}
				}
			}
			continue;
		}
		const ParamSpec *spec = models::find_param(key);
		if (!spec) {
			r.notes.push_back("dropped unknown parameter '" + key + "'");
			continue;
		}
		if (!detail::applies_to_any(*spec, kinds)) {
			r.notes.push_back("dropped '" + key + "': it applies to none of the selected models");
			continue;
		}
		if (auto v = detail::clamp_value(*spec, *it, r.notes)) {
			r.params.set(key, *v);
		}
	}
	return r;
}

inline std::string recommendation_prompt(const SummaryStats &stats, const std::vector<ModelKind> &selected) {
	const auto kinds = detail::candidate_models(selected);
	std::ostringstream os;
	os << "Dataset summary statistics (JSON):\n" << stats.to_json().dump(2) << "\n\n";
	os << "Models to configure:";
	for (auto k : kinds) {
		os << ' ' << models::to_string(k);
	}
	os << "\n\nParameters (name, type, allowed range, models, meaning):\n";
	for (const auto &p : models::parameter_registry()) {
		if (!detail::applies_to_any(p, kinds)) {
			continue;
		}
		os << "- " << p.key << ": ";
		switch (p.type) {
		case ParamType::Int: os << "integer"; break;
		case ParamType::Float: os << "number"; break;
		case ParamType::Bool: os << "boolean"; break;
		case ParamType::Choice: {
			os << "one of";
			for (const auto &c : p.choices) {
				os << ' ' << c;
			}
			break;
		}
		}
		if (p.type == ParamType::Int || p.type == ParamType::Float) {
			os << ", " << p.min << " to " << (p.max ? std::to_string(static_cast<long long>(*p.max)) : "unbounded");
		}
		os << "; models:";
		for (auto k : p.applies_to) {
			if (k == ModelKind::NaiveSeasonal || std::find(kinds.begin(), kinds.end(), k) != kinds.end()) {
				os << ' ' << models::to_string(k);
			}
		}
		os << "; " << p.description << "\n";
	}
	os << "\nHints: window lengths that are multiples of the seasonal period tend to work; for daily data "
	      "increments of 7 or 30 align with weekly or monthly periods, for hourly data 24, for monthly data 12. "
	      "The input window should be well below the shortest series length ("
	   << stats.length_min << ").\n\n";
	os << "Reply with exactly one JSON object. Its keys are parameter names from the list above, plus "
	      "\"recommended_models\" (array of model names from the list) and \"explanation\" (a few sentences "
	      "explaining the picks). No other text.";
	return os.str();
}

inline std::vector<ChatMessage> recommendation_messages(const SummaryStats &stats,
                                                        const std::vector<ModelKind> &selected) {
	return {{"system", "You are a time series forecasting assistant. You pick model parameters from dataset "
	                   "summary statistics and answer with JSON only."},
	        {"user", recommendation_prompt(stats, selected)}};
}

// Total: always returns a recommendation. A null client, a failed call or an
// unparseable reply (after one retry) yields the heuristic defaults.
inline Recommendation recommend_parameters(const SummaryStats &stats, const std::vector<ModelKind> &selected,
                                           ChatClient *client, const LlmConfig &cfg = {}) {
	std::vector<std::string> failures;
	if (client) {
		const auto messages = recommendation_messages(stats, selected);
		for (int attempt = 0; attempt < 2; ++attempt) {
			try {
				const std::string reply = client->complete(messages);
				const auto obj = extract_json_object(strip_reasoning(reply, cfg.think_open, cfg.think_close));
				if (!obj) {
					failures.push_back("attempt " + std::to_string(attempt + 1) + ": no JSON object in the reply");
					continue;
				}
				Recommendation r = recommendation_from_json(json::parse(*obj), selected);
				r.notes.insert(r.notes.begin(), failures.begin(), failures.end());
				if (r.recommended_models.empty()) {
					r.recommended_models = detail::candidate_models(selected);
				}
				return r;
			} catch (const std::exception &e) {
				failures.push_back("attempt " + std::to_string(attempt + 1) + ": " + e.what());
			}
		}
	} else {
		failures.push_back("no LLM endpoint configured");
	}
	Recommendation r = heuristic_recommendation(stats, selected);
	r.notes = std::move(failures);
	return r;
}

struct ResultsSummary {
	std::string text;
	std::string source = "fallback";

	json to_json() const {
		return {{"summary", text}, {"source", source}};
	}
};

namespace detail {

inline std::optional<double> metric_value(const json &model_entry, const char *scale, const char *metric) {
	const json *m = &model_entry;
	for (const char *k : {"metrics", scale, metric}) {
		if (!m->is_object() || !m->contains(k)) {
			return std::nullopt;
		}
		m = &(*m)[k];
	}
	if (m->is_object() && m->contains("value") && (*m)["value"].is_number()) {
		return (*m)["value"].get<double>();
	}
	return std::nullopt;
}

// Metrics-only view of a results document for the prompt.
inline json metrics_context(const json &results) {
	json out = json::object();
	if (!results.contains("models")) {
		return out;
	}
	for (const auto &[kind, entry] : results["models"].items()) {
		json m{{"status", entry.value("status", "unknown")}};
		if (entry.contains("metrics")) {
			m["metrics"] = entry["metrics"];
		}
		if (entry.contains("error")) {
			m["error"] = entry["error"];
		}
		out[kind] = std::move(m);
	}
	return out;
}

} // namespace detail

// Deterministic summary: best and worst model by aggregate normalized RMSE,
// plus which metrics were undefined.
inline std::string template_summary(const json &results) {
	std::vector<std::pair<double, std::string>> ranked;
	std::vector<std::string> failed, undefined;
	if (results.contains("models")) {
		for (const auto &[kind, entry] : results["models"].items()) {
			if (entry.value("status", "") != "completed") {
				failed.push_back(kind);
				continue;
			}
			if (auto v = detail::metric_value(entry, "normalized", "rmse")) {
				ranked.emplace_back(*v, kind);
			}
			if (entry.contains("metrics") && entry["metrics"].contains("normalized")) {
				for (const auto &[metric, mv] : entry["metrics"]["normalized"].items()) {
					if (mv.is_object() && mv.contains("value") && mv["value"].is_null()) {
						undefined.push_back(kind + " " + metric + " (" + mv.value("reason", "undefined") + ")");
					}
				}
			}
		}
	}
	std::ostringstream os;
	std::sort(ranked.begin(), ranked.end());
	if (ranked.empty()) {
		os << "No ranking possible: no model has a defined normalized RMSE.";
	} else {
		os << "Best model by normalized RMSE: " << ranked.front().second << " (" << ranked.front().first << ").";
		if (ranked.size() > 1) {
			os << " Worst: " << ranked.back().second << " (" << ranked.back().first << ").";
		}
		os << " Ranking:";
		for (std::size_t i = 0; i < ranked.size(); ++i) {
			os << (i ? ", " : " ") << ranked[i].second;
		}
		os << '.';
	}
	if (!failed.empty()) {
		os << " Failed models:";
		for (std::size_t i = 0; i < failed.size(); ++i) {
			os << (i ? ", " : " ") << failed[i];
		}
		os << '.';
	}
	if (!undefined.empty()) {
		os << " Undefined metrics:";
		for (std::size_t i = 0; i < undefined.size(); ++i) {
			os << (i ? ", " : " ") << undefined[i];
		}
		os << '.';
	}
	return os.str();
}

inline ResultsSummary summarize_results(const json &results, ChatClient *client, const LlmConfig &cfg = {}) {
	if (client) {
		try {
			const std::string prompt =
			    "Forecasting results per model (normalized metrics are on min-max scaled data; undefined values "
			    "are null with a reason):\n" +
			    detail::metrics_context(results).dump(2) +
			    "\n\nSummarize these results in plain language for a non-expert, say which models appear best "
			    "suited and why, and give recommendations.";
			std::string text = client->complete(
			    {{"system", "You are a time series forecasting assistant explaining evaluation results."},
			     {"user", prompt}});
			text = strip_reasoning(text, cfg.think_open, cfg.think_close);
			const auto first = text.find_first_not_of(" \t\r\n");
			if (first != std::string::npos) {
				return {text.substr(first, text.find_last_not_of(" \t\r\n") - first + 1), "llm"};
			}
		} catch (const std::exception &) {
		}
	}
	return {template_summary(results), "fallback"};
}

} // namespace forecaster::llm
