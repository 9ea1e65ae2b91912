#pragma once

#include "forecaster/common/error.hpp"
#include "forecaster/ingest/dataset.hpp"
#include "forecaster/jobs/job_record.hpp"
#include "forecaster/jobs/pipeline.hpp"
#include "forecaster/jobs/runner.hpp"
#include "forecaster/store/object_store.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

namespace forecaster::jobs {

struct WorkerOptions {
	std::string api_url = "http://127.0.0.1:8080";
	std::string token;
	std::string worker_id;
	std::chrono::milliseconds poll_interval{2000};
};

struct ClaimedJob {
	JobRecord job;
	ingest::DatasetRecord dataset;
};

// Thin HTTP client for the two worker endpoints.
class WorkerApi {
public:
	explicit WorkerApi(const WorkerOptions &opts) : opts_(opts), client_(opts.api_url) {
		client_.set_connection_timeout(10);
		client_.set_read_timeout(60);
		client_.set_bearer_token_auth(opts.token);
	}

	std::optional<ClaimedJob> claim() {
		auto res = client_.Post("/api/v1/worker/claim", json{{"worker_id", opts_.worker_id}}.dump(), "application/json");
		if (!res) {
			throw Error(ErrorCode::Internal, "claim failed: " + httplib::to_string(res.error()));
		}
		if (res->status == 204) {
			return std::nullopt;
		}
		if (res->status != 200) {
			throw Error(ErrorCode::Internal, "claim returned HTTP " + std::to_string(res->status) + ": " + res->body);
		}
		const auto j = json::parse(res->body);
		return ClaimedJob{JobRecord::from_json(j.at("job")), ingest::dataset_record_from_json(j.at("dataset"))};
	}

	// Returns the server's outcome string ("applied", "duplicate", "stale"),
	// or throws when the update was rejected.
	std::string progress(const std::string &job_id, int done, std::optional<int> total,
	                     const std::vector<std::string> &lines, std::optional<JobState> final_state = std::nullopt) {
		json body{{"worker_id", opts_.worker_id}, {"models_done", done}, {"lines", lines}};
		if (total) {
			body["models_total"] = *total;
		}
		if (final_state) {
			body["state"] = std::string(to_string(*final_state));
		}
		auto res = client_.Post("/api/v1/jobs/" + job_id + "/progress", body.dump(), "application/json");
		if (!res) {
			throw Error(ErrorCode::Internal, "progress post failed: " + httplib::to_string(res.error()));
		}
		if (res->status != 200) {
			throw Error(ErrorCode::Conflict, "progress rejected (HTTP " + std::to_string(res->status) + "): " + res->body);
		}
		return json::parse(res->body).value("outcome", "applied");
	}

private:
	WorkerOptions opts_;
	httplib::Client client_;
};

class HttpProgress final : public ProgressSink {
public:
	HttpProgress(WorkerApi &api, std::string job_id) : api_(api), job_id_(std::move(job_id)) {}

	void on_progress(int done, int total, const std::vector<std::string> &lines) override {
		// a lost progress post is not fatal; the final report carries the count
		last_done_ = done;
		try {
			api_.progress(job_id_, done, total, lines);
		} catch (const Error &e) {
			if (e.code() == ErrorCode::Conflict) {
				throw; // job was taken over or cancelled
			}
		}
	}

	int last_done() const {
		return last_done_;
	}

private:
	WorkerApi &api_;
	std::string job_id_;
	int last_done_ = 0;
};

class Worker {
public:
	Worker(WorkerOptions opts, store::ObjectStore &objects) : opts_(std::move(opts)), api_(opts_), objects_(objects) {}

	// Claims and runs at most one job. Returns false when the queue was empty.
	bool run_once() {
		auto claimed = api_.claim();
		if (!claimed) {
			return false;
		}
		const auto &job = claimed->job;
		HttpProgress sink(api_, job.job_id);
		std::string summary;
		JobState final_state = JobState::Completed;
		try {
			const std::string csv = objects_.get_or_throw(claimed->dataset.object_key());
			const json result = execute_job(job, claimed->dataset, csv, objects_, sink);
			summary = "worker " + opts_.worker_id + ": job " + std::string(result.value("status", "completed"));
		} catch (const Error &e) {
			if (e.code() == ErrorCode::Conflict) {
				std::cerr << "worker " << opts_.worker_id << ": lost job " << job.job_id << ": " << e.message() << "\n";
				return true;
			}
			final_state = JobState::Failed;
			summary = "job failed: " + std::string(to_string(e.code())) + ": " + e.message();
		} catch (const std::exception &e) {
			final_state = JobState::Failed;
			summary = std::string("job failed: ") + e.what();
		}
		try {
			api_.progress(job.job_id, sink.last_done(), std::nullopt, {summary}, final_state);
		} catch (const Error &e) {
			std::cerr << "worker " << opts_.worker_id << ": final report for " << job.job_id
			          << " rejected: " << e.message() << "\n";
		}
		return true;
	}

	void run(const std::atomic<bool> &stop) {
		while (!stop.load()) {
			bool worked = false;
			try {
				worked = run_once();
			} catch (const std::exception &e) {
				std::cerr << "worker " << opts_.worker_id << ": " << e.what() << "\n";
			}
			if (!worked) {
				const auto until = std::chrono::steady_clock::now() + opts_.poll_interval;
				while (!stop.load() && std::chrono::steady_clock::now() < until) {
					std::this_thread::sleep_for(std::chrono::milliseconds(20));
				}
			}
		}
	}

private:
	WorkerOptions opts_;
	WorkerApi api_;
	store::ObjectStore &objects_;
};

} // namespace forecaster::jobs
