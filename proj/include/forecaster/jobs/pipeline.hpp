#pragma once

#include "forecaster/common/error.hpp"
#include "forecaster/common/rng.hpp"
#include "forecaster/ingest/csv.hpp"
#include "forecaster/ingest/dataset.hpp"
#include "forecaster/jobs/covariates.hpp"
#include "forecaster/jobs/params.hpp"
#include "forecaster/metrics/metrics.hpp"
#include "forecaster/models/factory.hpp"
#include "forecaster/series/bundle.hpp"
#include "forecaster/series/scaler.hpp"
#include "forecaster/series/split.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace forecaster::jobs {

using models::ModelKind;
using series::Matrix;
using series::SeriesBundle;

// Receives progress after each model, in model order.
class ProgressSink {
public:
	virtual ~ProgressSink() = default;
	virtual void on_progress(int models_done, int models_total, const std::vector<std::string> &lines) = 0;
};

class NullProgress : public ProgressSink {
public:
	void on_progress(int, int, const std::vector<std::string> &) override {}
};

struct TrainingOutput {
	json results;
	std::vector<std::pair<ModelKind, json>> artifacts; // successfully trained models
};

namespace detail {

// {"times": [...], "<component>": [...]} per group from de-normalized values.
inline json series_json(const SeriesBundle &b, const std::map<std::string, Matrix> &values,
                        const std::map<std::string, std::vector<std::int64_t>> &offsets) {
	json out = json::object();
	for (const auto &[g, m] : values) {
		json gj;
		json times = json::array();
		for (auto off : offsets.at(g)) {
			times.push_back(b.render_time(off));
		}
		gj["times"] = std::move(times);
		for (std::size_t c = 0; c < b.component_names.size(); ++c) {
			json col = json::array();
			for (Eigen::Index r = 0; r < m.rows(); ++r) {
				col.push_back(m(r, static_cast<Eigen::Index>(c)));
			}
			gj[b.component_names[c]] = std::move(col);
		}
		out[g] = std::move(gj);
	}
	return out;
}

inline json quantiles_json(const SeriesBundle &b, const std::map<std::string, std::array<Matrix, 3>> &q,
                           const std::map<std::string, std::vector<std::int64_t>> &offsets) {
	static const char *names[3] = {"p10", "p50", "p90"};
	json out = json::object();
	for (const auto &[g, qs] : q) {
		json gj;
		json times = json::array();
		for (auto off : offsets.at(g)) {
			times.push_back(b.render_time(off));
		}
		gj["times"] = std::move(times);
		for (std::size_t c = 0; c < b.component_names.size(); ++c) {
			json cj;
			for (int k = 0; k < 3; ++k) {
				json col = json::array();
				for (Eigen::Index r = 0; r < qs[static_cast<std::size_t>(k)].rows(); ++r) {
					col.push_back(qs[static_cast<std::size_t>(k)](r, static_cast<Eigen::Index>(c)));
				}
				cj[names[k]] = std::move(col);
			}
			gj[b.component_names[c]] = std::move(cj);
		}
		out[g] = std::move(gj);
	}
	return out;
}

inline Matrix invert_matrix(const Matrix &scaled, const std::string &group, const std::vector<std::string> &names,
                            const series::ScalerParams &scaler) {
	Matrix out(scaled.rows(), scaled.cols());
	for (Eigen::Index c = 0; c < scaled.cols(); ++c) {
		const auto &r = scaler.get(group, names[static_cast<std::size_t>(c)]);
		for (Eigen::Index t = 0; t < scaled.rows(); ++t) {
			out(t, c) = r.invert(scaled(t, c));
		}
	}
	return out;
}

// De-normalized forecast for every group: mean plus optional quantiles.
struct RawForecast {
	std::map<std::string, Matrix> mean;
	std::map<std::string, std::array<Matrix, 3>> quantiles;
};

inline RawForecast to_raw(const models::Forecast &fc, const SeriesBundle &b, const series::ScalerParams &scaler) {
	RawForecast out;
	for (const auto &[g, f] : fc) {
		out.mean[g] = invert_matrix(f.mean, g, b.component_names, scaler);
		if (f.p10) {
			out.quantiles[g] = {invert_matrix(*f.p10, g, b.component_names, scaler),
			                    invert_matrix(*f.p50, g, b.component_names, scaler),
			                    invert_matrix(*f.p90, g, b.component_names, scaler)};
		}
	}
	return out;
}

inline json error_json(const std::exception &e) {
	if (const auto *fe = dynamic_cast<const Error *>(&e)) {
		json j{{"code", std::string(to_string(fe->code()))}, {"message", fe->message()}};
		if (!fe->field().empty()) {
			j["field"] = fe->field();
		}
		return j;
	}
	return {{"code", "Internal"}, {"message", e.what()}};
}

inline std::map<std::string, std::vector<std::int64_t>> offsets_after_end(const SeriesBundle &b, Eigen::Index h) {
	std::map<std::string, std::vector<std::int64_t>> out;
	for (const auto &g : b.groups) {
		auto &v = out[g.group_key];
		for (Eigen::Index i = 1; i <= h; ++i) {
			v.push_back(g.times.back() + i);
		}
	}
	return out;
}

inline std::map<std::string, std::vector<std::int64_t>> offsets_of(const SeriesBundle &b) {
	std::map<std::string, std::vector<std::int64_t>> out;
	for (const auto &g : b.groups) {
		out[g.group_key] = g.times;
	}
	return out;
}

inline std::map<std::string, Matrix> targets_of(const SeriesBundle &b) {
	std::map<std::string, Matrix> out;
	for (const auto &g : b.groups) {
		out[g.group_key] = g.target;
	}
	return out;
}

} // namespace detail

// Spec with defaults filled in for this job; the eval-level probabilistic
// settings apply unless the model overrides them.
inline models::ModelSpec resolve_spec(const models::ModelSpec &spec, const TrainJobParams &params,
                                      ingest::FrequencyLabel label) {
	models::ModelSpec s = spec;
	const auto *prob = models::find_param("probabilistic");
	if (prob->applies(s.kind)) {
		if (!s.params.contains("probabilistic")) {
			s.params.set("probabilistic", params.eval.probabilistic);
		}
		if (!s.params.contains("n_samples")) {
			s.params.set("n_samples", std::int64_t{params.eval.n_samples});
		}
	}
	return models::resolve_defaults(s, label, params.eval.forecast_len(), params.eval.seasonality);
}

inline models::ModelSpec naive_baseline_spec(const TrainJobParams &params, ingest::FrequencyLabel label) {
	models::ModelSpec s;
	s.kind = ModelKind::NaiveSeasonal;
	s.params.set("seasonality", std::int64_t{params.eval.effective_seasonality(label)});
	return s;
}

// Full training pipeline on an already-built bundle. Model failures are
// isolated: the model is marked failed and the job carries on.
inline TrainingOutput run_training(const std::string &job_id, const SeriesBundle &bundle, const TrainJobParams &params,
                                   ProgressSink &progress) {
	const auto label = bundle.freq.label;
	const int K = params.eval.effective_seasonality(label);
	params.eval.validate_against(bundle);

	std::vector<models::ModelSpec> plan{naive_baseline_spec(params, label)};
	for (const auto &s : params.model_specs) {
		plan.push_back(resolve_spec(s, params, label));
	}
	const int total = static_cast<int>(plan.size());

	TrainingOutput out;
	json models_json = json::object();
	std::vector<std::string> warnings;
	std::vector<std::string> job_log;

	// Regime-level data shared by every model.
	const Eigen::Index Tmin = bundle.min_length();
	SeriesBundle metric_train, actual;
	std::optional<series::WindowSchedule> schedule;
	switch (params.eval.regime) {
	case Regime::Holdout: {
		auto [tr, te] = series::holdout_split(bundle, *params.eval.test_len);
		metric_train = std::move(tr);
		actual = std::move(te);
		break;
	}
	case Regime::ExpandingWindow: {
		schedule = params.eval.schedule(Tmin, label);
		metric_train = series::truncate(bundle, Tmin - schedule->initial_train_len);
		actual = series::tail_window(bundle, Tmin - schedule->initial_train_len, Tmin - schedule->initial_train_len);
		break;
	}
	case Regime::FullTrainForecast: break;
	}
	const bool has_actuals = params.eval.regime != Regime::FullTrainForecast;
	const series::ScalerParams eval_scaler =
	    has_actuals ? series::fit_scaler(metric_train, series::ScalerScope::PerGroup) : series::ScalerParams{};

	std::vector<std::string> cov_warnings;
	SeriesBundle full_context;
	if (params.eval.regime == Regime::FullTrainForecast) {
		full_context = extend_future_covariates(bundle, *params.eval.horizon, {}, &cov_warnings);
	}

	for (int i = 0; i < total; ++i) {
		const models::ModelSpec &spec = plan[static_cast<std::size_t>(i)];
		const std::string kind(models::to_string(spec.kind));
		const std::uint64_t seed = model_seed(job_id, params.seed, spec.kind);
		const std::uint64_t predict_seed = fnv1a("predict", seed);
		std::vector<std::string> lines{"training " + kind};
		json entry{{"status", "completed"}, {"spec", spec.to_json()}};
		try {
			models::TrainedModel final_model;
			detail::RawForecast raw;
			std::map<std::string, std::vector<std::int64_t>> pred_offsets;
			switch (params.eval.regime) {
			case Regime::Holdout: {
				final_model = models::train_model(spec, metric_train, seed);
				raw = detail::to_raw(final_model.forecast(metric_train, *params.eval.test_len, predict_seed),
				                     bundle, final_model.scaler);
				pred_offsets = detail::offsets_of(actual);
				break;
			}
			case Regime::FullTrainForecast: {
				final_model = models::train_model(spec, bundle, seed);
				raw = detail::to_raw(final_model.forecast(full_context, *params.eval.horizon, predict_seed), bundle,
				                     final_model.scaler);
				pred_offsets = detail::offsets_after_end(bundle, *params.eval.horizon);
				if (final_model.plan.use_future) {
					lines.insert(lines.end(), cov_warnings.begin(), cov_warnings.end());
				}
				break;
			}
			case Regime::ExpandingWindow: {
				std::map<std::string, std::vector<Matrix>> means;
				std::map<std::string, std::array<std::vector<Matrix>, 3>> qs;
				for (std::size_t w = 0; w < schedule->windows.size(); ++w) {
					const auto &win = schedule->windows[w];
					const SeriesBundle train = series::truncate(bundle, Tmin - win.train_end);
					final_model = models::train_model(spec, train, seed);
					auto r = detail::to_raw(
					    final_model.forecast(train, win.horizon(), fnv1a(std::to_string(w), predict_seed)), bundle,
					    final_model.scaler);
					for (auto &[g, m] : r.mean) {
						means[g].push_back(std::move(m));
					}
					for (auto &[g, q] : r.quantiles) {
						for (int k = 0; k < 3; ++k) {
							qs[g][static_cast<std::size_t>(k)].push_back(std::move(q[static_cast<std::size_t>(k)]));
						}
					}
				}
				lines.push_back(kind + " refitted on " + std::to_string(schedule->windows.size()) + " window(s)");
				for (auto &[g, ms] : means) {
					raw.mean[g] = series::stitch(*schedule, ms);
				}
				for (auto &[g, q] : qs) {
					raw.quantiles[g] = {series::stitch(*schedule, q[0]), series::stitch(*schedule, q[1]),
					                    series::stitch(*schedule, q[2])};
				}
				pred_offsets = detail::offsets_of(actual);
				break;
			}
			}
			for (const auto &w : final_model.plan.warnings) {
				lines.push_back("warning: " + w);
				warnings.push_back(w);
			}
			entry["predictions"] = detail::series_json(bundle, raw.mean, pred_offsets);
			if (!raw.quantiles.empty()) {
				entry["quantiles"] = detail::quantiles_json(bundle, raw.quantiles, pred_offsets);
			}
			if (has_actuals) {
				entry["actuals"] = detail::series_json(bundle, detail::targets_of(actual), pred_offsets);
				const auto report = metrics::compute_report(raw.mean, actual, metric_train, eval_scaler, K);
				const json rj = report.to_json();
				entry["metrics"] = rj["metrics"];
				entry["per_group"] = rj["per_group"];
			}
			out.artifacts.emplace_back(spec.kind, final_model.to_json());
			lines.push_back(kind + " completed");
		} catch (const std::exception &e) {
			entry = {{"status", "failed"}, {"spec", spec.to_json()}, {"error", detail::error_json(e)}};
			lines.push_back("error: " + kind + " failed: " + std::string(e.what()));
		}
		models_json[kind] = std::move(entry);
		job_log.insert(job_log.end(), lines.begin(), lines.end());
		progress.on_progress(i + 1, total, lines);
	}

	json history = detail::series_json(bundle, detail::targets_of(bundle), detail::offsets_of(bundle));
	out.results = {{"job_id", job_id},
	               {"kind", "train"},
	               {"status", "completed"},
	               {"regime", std::string(to_string(params.eval.regime))},
	               {"seasonality", K},
	               {"frequency", std::string(ingest::to_string(label))},
	               {"components", bundle.component_names},
	               {"history", std::move(history)},
	               {"models", std::move(models_json)},
	               {"warnings", warnings},
	               {"log", job_log}};
	return out;
}

struct LoadedModel {
	ModelKind kind;
	models::TrainedModel model;
};

// Forecast `horizon` steps past the end of `bundle` with previously trained
// models. Missing future covariates are imputed.
inline json run_forecast(const std::string &job_id, const SeriesBundle &bundle, const ForecastJobParams &params,
                         const std::vector<std::pair<ModelKind, std::optional<json>>> &artifacts,
                         const CovariateSource &cov, ProgressSink &progress) {
	const int total = static_cast<int>(artifacts.size());
	json models_json = json::object();
	std::vector<std::string> warnings, job_log;
	std::vector<std::string> cov_warnings;
	const bool any_future = !bundle.future_cov_names.empty();
	const SeriesBundle context =
	    any_future ? extend_future_covariates(bundle, params.horizon, cov, &cov_warnings) : bundle;
	if (!any_future && cov.upload) {
		warnings.push_back("covariate file ignored: the dataset has no future covariates");
	}
	const auto offsets = detail::offsets_after_end(bundle, params.horizon);
	for (int i = 0; i < total; ++i) {
		const auto &[kind_enum, artifact] = artifacts[static_cast<std::size_t>(i)];
		const std::string kind(models::to_string(kind_enum));
		std::vector<std::string> lines{"forecasting with " + kind};
		json entry;
		try {
			if (!artifact) {
				throw Error(ErrorCode::ModelArtifactMissing,
				            "no stored " + kind + " model for job '" + params.source_job_id + "'", kind);
			}
			const auto tm = models::TrainedModel::from_json(*artifact);
			if (tm.plan.use_future) {
				lines.insert(lines.end(), cov_warnings.begin(), cov_warnings.end());
			}
			const std::uint64_t seed = fnv1a("forecast", model_seed(job_id, params.seed, kind_enum));
			const auto raw = detail::to_raw(tm.forecast(context, params.horizon, seed), bundle, tm.scaler);
			entry = {{"status", "completed"}, {"spec", tm.spec.to_json()},
			         {"predictions", detail::series_json(bundle, raw.mean, offsets)}};
			if (!raw.quantiles.empty()) {
				entry["quantiles"] = detail::quantiles_json(bundle, raw.quantiles, offsets);
			}
			lines.push_back(kind + " completed");
		} catch (const std::exception &e) {
			if (const auto *fe = dynamic_cast<const Error *>(&e);
			    fe && fe->code() == ErrorCode::CovariateSchemaMismatch) {
				throw;
			}
			entry = {{"status", "failed"}, {"error", detail::error_json(e)}};
			lines.push_back("error: " + kind + " failed: " + std::string(e.what()));
		}
		models_json[kind] = std::move(entry);
		job_log.insert(job_log.end(), lines.begin(), lines.end());
		progress.on_progress(i + 1, total, lines);
	}
	return {{"job_id", job_id},
	        {"kind", "forecast"},
	        {"source_job_id", params.source_job_id},
	        {"sequence", params.sequence},
	        {"status", "completed"},
	        {"horizon", params.horizon},
	        {"frequency", std::string(ingest::to_string(bundle.freq.label))},
	        {"components", bundle.component_names},
	        {"models", std::move(models_json)},
	        {"warnings", warnings},
	        {"log", job_log}};
}

} // namespace forecaster::jobs
