#pragma once

#include "forecaster/api/auth.hpp"
#include "forecaster/common/error.hpp"
#include "forecaster/ingest/registry.hpp"
#include "forecaster/jobs/params.hpp"
#include "forecaster/jobs/pipeline.hpp"
#include "forecaster/jobs/runner.hpp"
#include "forecaster/llm/assist.hpp"
#include "forecaster/llm/http_chat.hpp"
#include "forecaster/llm/stats.hpp"
#include "forecaster/models/factory.hpp"
#include "forecaster/store/metadata_store.hpp"
#include "forecaster/store/object_store.hpp"

#include <httplib.h>
#include <json.hpp>

#include <functional>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>

namespace forecaster::api {

using nlohmann::json;

inline int http_status(ErrorCode code) {
	switch (code) {
	case ErrorCode::TooLarge: return 413;
	case ErrorCode::DuplicateName:
	case ErrorCode::Conflict: return 409;
	case ErrorCode::DatasetNotFound:
	case ErrorCode::JobNotFound:
	case ErrorCode::UnknownJob:
	case ErrorCode::NotFound: return 404;
	case ErrorCode::Unauthorized: return 401;
	case ErrorCode::Forbidden: return 403;
	case ErrorCode::StoreError:
	case ErrorCode::Internal: return 500;
	default: return 400;
	}
}

inline json error_body(ErrorCode code, const std::string &message, const std::string &field = {}) {
	json j{{"code", std::string(to_string(code))}, {"message", message}};
	if (!field.empty()) {
		j["field"] = field;
	}
	return j;
}

struct ServiceOptions {
	std::size_t max_upload_bytes = ingest::kDefaultMaxUploadBytes;
	std::int64_t staleness_ms = 3'600'000;
	llm::LlmConfig llm;
	// Overrides the HTTP chat client (tests); returning null means "no LLM".
	std::function<std::unique_ptr<llm::ChatClient>()> chat_factory;
};

struct Reply {
	Reply() = default;
	Reply(int s, json b) : status(s), body(std::move(b)) {}

	int status = 200;
	json body;
	std::string raw; // sent verbatim when non-empty
	std::string content_type = "application/json";
	std::string disposition;
};

// REST service under /api/v1. Handlers are stateless; everything shared lives
// in the metadata and object stores.
class ApiService {
public:
	ApiService(store::MetadataStore &meta, store::ObjectStore &objects, TokenStore tokens, ServiceOptions opts = {})
	    : meta_(meta), objects_(objects), tokens_(std::move(tokens)), opts_(std::move(opts)),
	      registry_(meta, objects, opts_.max_upload_bytes) {}

	void register_routes(httplib::Server &srv) {
		srv.set_payload_max_length(opts_.max_upload_bytes + (1u << 20));
		const std::string id = "([A-Za-z0-9_-]+)";
		srv.Get("/api/v1/health", [](const httplib::Request &, httplib::Response &res) {
			res.set_content(R"({"status":"ok"})", "application/json");
		});
		user(srv, "GET", "/api/v1/registry", [this](auto &p, auto &r) { return registry_info(p, r); });
		user(srv, "POST", "/api/v1/datasets", [this](auto &p, auto &r) { return upload_dataset(p, r); });
		user(srv, "GET", "/api/v1/datasets", [this](auto &p, auto &r) { return list_datasets(p, r); });
		user(srv, "GET", "/api/v1/datasets/" + id, [this](auto &p, auto &r) { return get_dataset(p, r); });
		user(srv, "POST", "/api/v1/datasets/" + id + "/roles", [this](auto &p, auto &r) { return set_roles(p, r); });
		user(srv, "GET", "/api/v1/datasets/" + id + "/plot", [this](auto &p, auto &r) { return plot(p, r); });
		user(srv, "GET", "/api/v1/datasets/" + id + "/stats", [this](auto &p, auto &r) { return stats(p, r); });
		user(srv, "POST", "/api/v1/datasets/" + id + "/recommendations",
		     [this](auto &p, auto &r) { return recommendations(p, r); });
		user(srv, "POST", "/api/v1/jobs", [this](auto &p, auto &r) { return create_job(p, r); });
		user(srv, "GET", "/api/v1/jobs", [this](auto &p, auto &r) { return list_jobs(p, r); });
		user(srv, "GET", "/api/v1/jobs/" + id, [this](auto &p, auto &r) { return get_job(p, r); });
		user(srv, "GET", "/api/v1/jobs/" + id + "/results", [this](auto &p, auto &r) { return results(p, r, false); });
		user(srv, "GET", "/api/v1/jobs/" + id + "/download", [this](auto &p, auto &r) { return results(p, r, true); });
		user(srv, "GET", "/api/v1/jobs/" + id + "/log", [this](auto &p, auto &r) { return job_log(p, r); });
		user(srv, "POST", "/api/v1/jobs/" + id + "/forecast", [this](auto &p, auto &r) { return create_forecast(p, r); });
		user(srv, "POST", "/api/v1/jobs/" + id + "/summary", [this](auto &p, auto &r) { return summary(p, r); });
		worker(srv, "POST", "/api/v1/worker/claim", [this](auto &p, auto &r) { return claim(p, r); });
		worker(srv, "POST", "/api/v1/jobs/" + id + "/progress", [this](auto &p, auto &r) { return progress(p, r); });
	}

private:
	using Handler = std::function<Reply(const Principal &, const httplib::Request &)>;

	void user(httplib::Server &srv, const char *method, const std::string &pattern, Handler h) {
		route(srv, method, pattern, Principal::Kind::User, std::move(h));
	}
	void worker(httplib::Server &srv, const char *method, const std::string &pattern, Handler h) {
		route(srv, method, pattern, Principal::Kind::Worker, std::move(h));
	}

	void route(httplib::Server &srv, const char *method, const std::string &pattern, Principal::Kind need,
	           Handler h) {
		auto wrapped = [this, need, h = std::move(h)](const httplib::Request &req, httplib::Response &res) {
			Reply reply;
			try {
				const auto who = tokens_.find(bearer_token(req.get_header_value("Authorization")));
				if (!who) {
					throw Error(ErrorCode::Unauthorized, "missing or invalid bearer token");
				}
				if (who->kind != need) {
					throw Error(ErrorCode::Forbidden, need == Principal::Kind::Worker
					                                      ? "this endpoint requires a worker token"
					                                      : "worker tokens cannot use user endpoints");
				}
				if (who->kind == Principal::Kind::User) {
					meta_.touch_user(who->id);
				}
				reply = h(*who, req);
			} catch (const Error &e) {
				reply.status = http_status(e.code());
				reply.body = error_body(e.code(), e.message(), e.field());
			} catch (const json::exception &e) {
				reply.status = 400;
				reply.body = error_body(ErrorCode::ValidationFailed, std::string("malformed JSON: ") + e.what());
			} catch (const std::exception &) {
				reply.status = 500;
				reply.body = error_body(ErrorCode::Internal, "internal error");
			}
			res.status = reply.status;
			if (!reply.disposition.empty()) {
				res.set_header("Content-Disposition", reply.disposition);
			}
			if (!reply.raw.empty()) {
				res.set_content(reply.raw, reply.content_type);
			} else if (reply.status != 204) {
				res.set_content(reply.body.dump(), "application/json");
			}
		};
		const std::string m = method;
		if (m == "GET") {
			srv.Get(pattern, wrapped);
		} else {
			srv.Post(pattern, wrapped);
		}
	}

	static json parse_body(const httplib::Request &req) {
		if (req.body.empty()) {
			return json::object();
		}
		return json::parse(req.body);
	}

	// ---- ownership ------------------------------------------------------

	ingest::DatasetRecord owned_dataset(const Principal &p, const std::string &id) {
		auto rec = meta_.get_dataset(id);
		if (!rec || rec->owner_id != p.id) {
			throw Error(ErrorCode::DatasetNotFound, "unknown dataset '" + id + "'", "dataset_id");
		}
		return *rec;
	}

	jobs::JobRecord owned_job(const Principal &p, const std::string &id, bool with_log = false) {
		auto job = meta_.get_job(id, with_log);
		if (!job || job->owner_id != p.id) {
			throw Error(ErrorCode::JobNotFound, "unknown job '" + id + "'", "job_id");
		}
		return *job;
	}

	series::SeriesBundle bundle_of(const ingest::DatasetRecord &rec, const std::optional<ingest::RoleAssignment> &roles) {
		return jobs::bundle_for(rec, registry_.table(rec), roles);
	}

	// ---- datasets -------------------------------------------------------

	Reply registry_info(const Principal &, const httplib::Request &) {
		json params = json::array();
		for (const auto &p : models::parameter_registry()) {
			json applies = json::array();
			for (auto k : p.applies_to) {
				applies.push_back(std::string(models::to_string(k)));
			}
			json e{{"key", p.key}, {"min", p.min}, {"applies_to", std::move(applies)}, {"description", p.description}};
			static const char *types[] = {"int", "float", "bool", "choice"};
			e["type"] = types[static_cast<int>(p.type)];
			e["max"] = p.max ? json(*p.max) : json(nullptr);
			if (!p.choices.empty()) {
				e["choices"] = p.choices;
			}
			params.push_back(std::move(e));
		}
		json kinds = json::array();
		for (auto k : models::kAllKinds) {
			const auto c = models::capabilities(k);
			static const char *fut[] = {"allowed", "forbidden", "required"};
			kinds.push_back({{"kind", std::string(models::to_string(k))},
			                 {"past_covariates", c.past_cov},
			                 {"future_covariates", fut[static_cast<int>(c.future_cov)]},
			                 {"static_covariates", c.static_cov},
			                 {"multivariate", c.multivariate},
			                 {"probabilistic", c.probabilistic}});
		}
		return {200, {{"parameters", std::move(params)}, {"models", std::move(kinds)}}};
	}

	Reply upload_dataset(const Principal &p, const httplib::Request &req) {
		if (!req.has_file("file")) {
			throw Error(ErrorCode::ValidationFailed, "multipart field 'file' is required", "file");
		}
		const auto file = req.get_file_value("file");
		std::string filename = file.filename;
		if (req.has_file("filename")) {
			filename = req.get_file_value("filename").content;
		}
		auto rec = registry_.validate_and_register(file.content, p.id, filename);
		return {201, rec.to_json()};
	}

	Reply list_datasets(const Principal &p, const httplib::Request &) {
		json out = json::array();
		for (const auto &d : meta_.list_datasets(p.id)) {
			json j = d.to_json();
			if (auto job = meta_.latest_job_for_dataset(d.dataset_id)) {
				j["latest_job"] = {{"job_id", job->job_id},
				                   {"kind", std::string(to_string(job->kind))},
				                   {"state", std::string(to_string(job->state))},
				                   {"models_done", job->models_done},
				                   {"models_total", job->models_total}};
			} else {
				j["latest_job"] = nullptr;
			}
			out.push_back(std::move(j));
		}
		return {200, {{"datasets", std::move(out)}}};
	}

	Reply get_dataset(const Principal &p, const httplib::Request &req) {
		return {200, owned_dataset(p, req.matches[1]).to_json()};
	}

	Reply set_roles(const Principal &p, const httplib::Request &req) {
		const auto rec = owned_dataset(p, req.matches[1]);
		json body = parse_body(req);
		if (body.contains("roles") && body["roles"].is_object()) {
			body = body["roles"];
		}
		const auto roles = registry_.assign_roles(rec.dataset_id, ingest::RoleAssignment::from_json(body));
		return {200, {{"dataset_id", rec.dataset_id}, {"roles", roles.to_json()}}};
	}

	Reply plot(const Principal &p, const httplib::Request &req) {
		const auto rec = owned_dataset(p, req.matches[1]);
		if (!req.has_param("x")) {
			throw Error(ErrorCode::ValidationFailed, "query parameter 'x' is required", "x");
		}
		std::vector<std::string> ys;
		for (std::size_t i = 0; i < req.get_param_value_count("y"); ++i) {
			std::stringstream ss(req.get_param_value("y", i));
			std::string part;
			while (std::getline(ss, part, ',')) {
				if (!part.empty()) {
					ys.push_back(part);
				}
			}
		}
		if (ys.empty()) {
			throw Error(ErrorCode::ValidationFailed, "at least one 'y' column is required", "y");
		}
		return {200, registry_.plot(rec.dataset_id, req.get_param_value("x"), ys).to_json()};
	}

	Reply stats(const Principal &p, const httplib::Request &req) {
		const auto rec = owned_dataset(p, req.matches[1]);
		return {200, llm::summarize_dataset(bundle_of(rec, std::nullopt)).to_json()};
	}

	std::unique_ptr<llm::ChatClient> chat_client() const {
		if (opts_.chat_factory) {
			return opts_.chat_factory();
		}
		if (opts_.llm.configured()) {
			return std::make_unique<llm::HttpChatClient>(opts_.llm);
		}
		return nullptr;
	}

	Reply recommendations(const Principal &p, const httplib::Request &req) {
		const auto rec = owned_dataset(p, req.matches[1]);
		const json body = parse_body(req);
		std::vector<models::ModelKind> selected;
		if (body.contains("selected_models")) {
			for (const auto &m : body["selected_models"]) {
				selected.push_back(models::parse_model_kind(m.get<std::string>()));
			}
		}
		const auto s = llm::summarize_dataset(bundle_of(rec, std::nullopt));
		auto client = chat_client();
		return {200, llm::recommend_parameters(s, selected, client.get(), opts_.llm).to_json()};
	}

	// ---- jobs -------------------------------------------------------------

	// Validation beyond the JSON shape: roles, data-dependent lengths, and a
	// trial construction of every model.
	void validate_train(const ingest::DatasetRecord &rec, const jobs::TrainJobParams &params) {
		const auto bundle = bundle_of(rec, params.roles);
		params.eval.validate_against(bundle);
		for (std::size_t i = 0; i < params.model_specs.size(); ++i) {
			const std::string field = "model_specs[" + std::to_string(i) + "]";
			try {
				const auto spec = jobs::resolve_spec(params.model_specs[i], params, bundle.freq.label);
				models::make_model(spec);
				models::check_capabilities(spec, bundle);
			} catch (const Error &e) {
				throw Error(ErrorCode::ValidationFailed, field + ": " + e.message(),
				            field + (e.field().empty() ? "" : "." + e.field()));
			}
		}
	}

	Reply create_job(const Principal &p, const httplib::Request &req) {
		const json body = parse_body(req);
		if (body.value("kind", "train") != "train") {
			throw Error(ErrorCode::ValidationFailed, "use POST /jobs/{id}/forecast for forecast jobs", "kind");
		}
		if (!body.contains("dataset_id") || !body["dataset_id"].is_string()) {
			throw Error(ErrorCode::ValidationFailed, "dataset_id is required", "dataset_id");
		}
		const auto rec = owned_dataset(p, body["dataset_id"].get<std::string>());
		const auto params = jobs::TrainJobParams::from_json(body.value("params", json::object()));
		if (!params.roles && !rec.roles) {
			throw Error(ErrorCode::ValidationFailed, "assign column roles before training", "roles");
		}
		validate_train(rec, params);
		jobs::JobRecord job;
		job.job_id = random_id("job_");
		job.owner_id = p.id;
		job.kind = jobs::JobKind::Train;
		job.dataset_id = rec.dataset_id;
		job.params = params.to_json();
		job.models_total = params.models_total();
		meta_.insert_job(job);
		return {202, owned_job(p, job.job_id).to_json()};
	}

	Reply list_jobs(const Principal &p, const httplib::Request &) {
		json out = json::array();
		for (const auto &j : meta_.list_jobs(p.id)) {
			out.push_back(j.to_json());
		}
		return {200, {{"jobs", std::move(out)}}};
	}

	Reply get_job(const Principal &p, const httplib::Request &req) {
		return {200, owned_job(p, req.matches[1]).to_json()};
	}

	Reply job_log(const Principal &p, const httplib::Request &req) {
		const auto job = owned_job(p, req.matches[1], true);
		return {200, {{"job_id", job.job_id}, {"state", std::string(to_string(job.state))}, {"log", job.to_json(true)["log"]}}};
	}

	static Reply not_ready(const jobs::JobRecord &job) {
		json b = error_body(ErrorCode::Conflict, "job is " + std::string(to_string(job.state)) + "; results are not available");
		b["state"] = std::string(to_string(job.state));
		b["models_done"] = job.models_done;
		b["models_total"] = job.models_total;
		return {409, std::move(b)};
	}

	Reply results(const Principal &p, const httplib::Request &req, bool download) {
		const auto job = owned_job(p, req.matches[1]);
		if (job.state != jobs::JobState::Completed) {
			return not_ready(job);
		}
		Reply r;
		r.raw = objects_.get_or_throw(jobs::results_key(job.job_id));
		if (download) {
			r.disposition = "attachment; filename=\"" + job.job_id + "-results.json\"";
		}
		return r;
	}

	Reply create_forecast(const Principal &p, const httplib::Request &req) {
		const auto source = owned_job(p, req.matches[1]);
		if (source.kind != jobs::JobKind::Train) {
			throw Error(ErrorCode::ValidationFailed, "forecasts start from a training job", "source_job_id");
		}
		if (source.state != jobs::JobState::Completed) {
			throw Error(ErrorCode::ValidationFailed, "training job is " + std::string(to_string(source.state)),
			            "source_job_id");
		}
		json body;
		std::optional<std::string> covariates;
		if (req.is_multipart_form_data()) {
			body = req.has_file("params") ? json::parse(req.get_file_value("params").content) : json::object();
			if (req.has_file("covariates")) {
				covariates = req.get_file_value("covariates").content;
			}
		} else {
			body = parse_body(req);
			if (body.contains("covariates_csv") && body["covariates_csv"].is_string()) {
				covariates = body["covariates_csv"].get<std::string>();
			}
			body.erase("covariates_csv");
		}
		body.erase("covariates_key");
		body["source_job_id"] = source.job_id;
		auto params = jobs::ForecastJobParams::from_json(body);

		const auto stored = jobs::stored_models(objects_, source.job_id);
		if (stored.empty()) {
			throw Error(ErrorCode::ValidationFailed, "job '" + source.job_id + "' has no stored models", "models");
		}
		for (auto k : params.models) {
			if (std::find(stored.begin(), stored.end(), k) == stored.end()) {
				throw Error(ErrorCode::ValidationFailed,
				            "model " + std::string(models::to_string(k)) + " was not trained by this job", "models");
			}
		}
		const auto train_params = jobs::TrainJobParams::from_json(source.params);
		const auto rec = owned_dataset(p, source.dataset_id);
		params.roles = train_params.roles ? train_params.roles : rec.roles;
		if (params.models.empty()) {
			params.models = stored;
		}

		std::lock_guard lock(forecast_mutex_);
		params.sequence = meta_.count_forecast_jobs(source.job_id) + 1;
		if (covariates) {
			if (covariates->size() > opts_.max_upload_bytes) {
				throw Error(ErrorCode::TooLarge, "covariate file too large", "covariates");
			}
			const auto table = ingest::parse_csv(*covariates);
			const auto bundle = bundle_of(rec, params.roles);
			jobs::CovariateSource src;
			src.time_column = *params.roles->single(ingest::Role::TimeComponent);
			src.time_kind = ingest::find_column(rec.columns, src.time_column).inferred_kind;
			src.group_column = params.roles->single(ingest::Role::Grouping);
			jobs::check_covariate_schema(table, bundle, src);
			params.covariates_key = source.job_id + "/covariates-" + std::to_string(params.sequence) + ".csv";
			objects_.put(*params.covariates_key, *covariates);
		}
		jobs::JobRecord job;
		job.job_id = random_id("job_");
		job.owner_id = p.id;
		job.kind = jobs::JobKind::Forecast;
		job.dataset_id = source.dataset_id;
		job.params = params.to_json();
		job.models_total = static_cast<int>(params.models.size());
		meta_.insert_job(job);
		return {202, owned_job(p, job.job_id).to_json()};
	}

	Reply summary(const Principal &p, const httplib::Request &req) {
		const auto job = owned_job(p, req.matches[1]);
		if (job.state != jobs::JobState::Completed) {
			return not_ready(job);
		}
		const auto results = json::parse(objects_.get_or_throw(jobs::results_key(job.job_id)));
		auto client = chat_client();
		return {200, llm::summarize_results(results, client.get(), opts_.llm).to_json()};
	}

	// ---- worker ---------------------------------------------------------

	Reply claim(const Principal &, const httplib::Request &req) {
		const json body = parse_body(req);
		const std::string worker_id = body.value("worker_id", "");
		if (worker_id.empty()) {
			throw Error(ErrorCode::ValidationFailed, "worker_id is required", "worker_id");
		}
		auto job = meta_.claim_next(worker_id, opts_.staleness_ms);
		if (!job) {
			return {204, nullptr};
		}
		auto rec = meta_.get_dataset(job->dataset_id);
		if (!rec) {
			meta_.fail_job(job->job_id, "dataset was deleted");
			return {204, nullptr};
		}
		return {200, {{"job", job->to_json()}, {"dataset", rec->to_json()}}};
	}

	Reply progress(const Principal &, const httplib::Request &req) {
		const std::string job_id = req.matches[1];
		const json body = parse_body(req);
		std::optional<std::string> worker_id;
		if (body.contains("worker_id") && body["worker_id"].is_string()) {
			worker_id = body["worker_id"].get<std::string>();
		}
		const int done = body.value("models_done", 0);
		std::optional<int> total;
		if (body.contains("models_total") && body["models_total"].is_number_integer()) {
			total = body["models_total"].get<int>();
		}
		std::vector<std::string> lines = body.value("lines", std::vector<std::string>{});
		std::optional<jobs::JobState> final_state;
		if (body.contains("state") && body["state"].is_string()) {
			final_state = jobs::job_state_from_string(body["state"].get<std::string>());
			if (!jobs::is_terminal(*final_state)) {
				throw Error(ErrorCode::ValidationFailed, "state must be completed or failed", "state");
			}
		}
		const auto outcome = meta_.record_progress(job_id, worker_id, done, lines, final_state, total);
		json out{{"ack", true}};
		switch (outcome) {
		case store::ProgressOutcome::Applied: out["outcome"] = "applied"; break;
		case store::ProgressOutcome::Duplicate: out["outcome"] = "duplicate"; break;
		case store::ProgressOutcome::Stale:
			out["outcome"] = "stale";
			out["warning"] = error_body(ErrorCode::StaleUpdate, "models_done is lower than the stored value; ignored");
			break;
		}
		return {200, std::move(out)};
	}

	store::MetadataStore &meta_;
	store::ObjectStore &objects_;
	TokenStore tokens_;
	ServiceOptions opts_;
	ingest::DatasetRegistry registry_;
	std::mutex forecast_mutex_;
};

} // namespace forecaster::api
