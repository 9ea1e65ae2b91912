#pragma once

#include "forecaster/ingest/csv.hpp"
#include "forecaster/ingest/dataset.hpp"
#include "forecaster/jobs/job_record.hpp"
#include "forecaster/jobs/pipeline.hpp"
#include "forecaster/series/bundle.hpp"
#include "forecaster/store/object_store.hpp"

#include <string>

namespace forecaster::jobs {

inline std::string results_key(const std::string &job_id) {
	return job_id + "/results.json";
}

inline std::string forecast_key(const std::string &source_job_id, int sequence) {
	return source_job_id + "/forecast-" + std::to_string(sequence) + ".json";
}

inline std::string dump_artifact(const json &j) {
	return j.dump(1);
}

// Stored model kinds of a completed training job, in key order.
inline std::vector<ModelKind> stored_models(const store::ObjectStore &objects, const std::string &job_id) {
	std::vector<ModelKind> out;
	const std::string prefix = job_id + "/models/";
	for (const auto &key : objects.list(prefix)) {
		std::string name = key.substr(prefix.size());
		if (name.size() > 5 && name.ends_with(".json")) {
			name.resize(name.size() - 5);
			if (auto k = models::model_kind_from_string(name)) {
				out.push_back(*k);
			}
		}
	}
	return out;
}

inline series::SeriesBundle bundle_for(const ingest::DatasetRecord &dataset, const ingest::CsvTable &table,
                                       const std::optional<ingest::RoleAssignment> &job_roles) {
	const auto &roles = job_roles ? job_roles : dataset.roles;
	if (!roles) {
		throw Error(ErrorCode::ValidationFailed, "dataset '" + dataset.dataset_id + "' has no role assignment",
		            "roles");
	}
	return series::build_bundle(table, dataset.columns, ingest::validate_roles(table, dataset.columns, *roles));
}

// Trains every planned model and writes "{job_id}/models/{kind}.json" plus
// "{job_id}/results.json". Returns the results document.
inline json execute_training(const JobRecord &job, const ingest::DatasetRecord &dataset, std::string_view csv,
                             store::ObjectStore &objects, ProgressSink &progress) {
	const auto params = TrainJobParams::from_json(job.params);
	const auto table = ingest::parse_csv(csv);
	const auto bundle = bundle_for(dataset, table, params.roles);
	auto out = run_training(job.job_id, bundle, params, progress);
	for (const auto &[kind, artifact] : out.artifacts) {
		objects.put(models::model_artifact_key(job.job_id, kind), dump_artifact(artifact));
	}
	out.results["dataset_id"] = dataset.dataset_id;
	objects.put(results_key(job.job_id), dump_artifact(out.results));
	return out.results;
}

// Forecasts past the end of the dataset with a training job's stored models.
// The artifact goes to "{source}/forecast-{n}.json" and, for uniform access,
// "{job_id}/results.json".
inline json execute_forecast(const JobRecord &job, const ingest::DatasetRecord &dataset, std::string_view csv,
                             store::ObjectStore &objects, ProgressSink &progress) {
	const auto params = ForecastJobParams::from_json(job.params);
	const auto table = ingest::parse_csv(csv);
	const auto bundle = bundle_for(dataset, table, params.roles);

	const auto kinds = params.models.empty() ? stored_models(objects, params.source_job_id) : params.models;
	if (kinds.empty()) {
		throw Error(ErrorCode::ModelArtifactMissing, "job '" + params.source_job_id + "' has no stored models");
	}
	std::vector<std::pair<ModelKind, std::optional<json>>> artifacts;
	for (auto k : kinds) {
		auto raw = objects.get(models::model_artifact_key(params.source_job_id, k));
		artifacts.emplace_back(k, raw ? std::optional<json>(json::parse(*raw)) : std::nullopt);
	}

	std::optional<ingest::CsvTable> upload;
	CovariateSource cov;
	const auto &roles = params.roles ? params.roles : dataset.roles;
	cov.time_column = *roles->single(ingest::Role::TimeComponent);
	cov.time_kind = ingest::find_column(dataset.columns, cov.time_column).inferred_kind;
	cov.group_column = roles->single(ingest::Role::Grouping);
	if (params.covariates_key) {
		upload = ingest::parse_csv(objects.get_or_throw(*params.covariates_key));
		cov.upload = &*upload;
	}

	json result = run_forecast(job.job_id, bundle, params, artifacts, cov, progress);
	result["dataset_id"] = dataset.dataset_id;
	const std::string body = dump_artifact(result);
	objects.put(forecast_key(params.source_job_id, params.sequence), body);
	objects.put(results_key(job.job_id), body);
	return result;
}

inline json execute_job(const JobRecord &job, const ingest::DatasetRecord &dataset, std::string_view csv,
                        store::ObjectStore &objects, ProgressSink &progress) {
	return job.kind == JobKind::Train ? execute_training(job, dataset, csv, objects, progress)
	                                  : execute_forecast(job, dataset, csv, objects, progress);
}

} // namespace forecaster::jobs
