#pragma once

#include "forecaster/common/error.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace forecaster::jobs {

using nlohmann::json;

enum class JobKind { Train, Forecast };
enum class JobState { Queued, Running, Completed, Failed };

inline std::string_view to_string(JobKind k) {
	return k == JobKind::Train ? "train" : "forecast";
}

inline std::string_view to_string(JobState s) {
	switch (s) {
	case JobState::Queued: return "queued";
	case JobState::Running: return "running";
	case JobState::Completed: return "completed";
	case JobState::Failed: return "failed";
	}
	return "failed";
}

inline JobKind job_kind_from_string(std::string_view s) {
	if (s == "train") {
		return JobKind::Train;
	}
	if (s == "forecast") {
		return JobKind::Forecast;
	}
	throw Error(ErrorCode::ValidationFailed, "unknown job kind '" + std::string(s) + "'", "kind");
}

inline JobState job_state_from_string(std::string_view s) {
	for (auto st : {JobState::Queued, JobState::Running, JobState::Completed, JobState::Failed}) {
		if (to_string(st) == s) {
			return st;
		}
	}
	throw Error(ErrorCode::Internal, "unknown job state '" + std::string(s) + "'");
}

inline bool is_terminal(JobState s) {
	return s == JobState::Completed || s == JobState::Failed;
}

struct LogLine {
	std::string at; // ISO-8601 UTC with milliseconds
	std::string line;
};

struct JobRecord {
	std::string job_id;
	std::string owner_id;
	JobKind kind = JobKind::Train;
	std::string dataset_id;
	json params; // JobParams (train) or ForecastParams (forecast) as JSON
	JobState state = JobState::Queued;
	int models_done = 0;
	int models_total = 0;
	std::vector<LogLine> log;
	std::optional<std::string> worker_id;
	std::string created_at;
	std::optional<std::string> started_at;
	std::optional<std::string> finished_at;
	int claim_count = 0;

	json to_json(bool with_log = false) const {
		json j{{"job_id", job_id},
		       {"owner_id", owner_id},
		       {"kind", std::string(to_string(kind))},
		       {"dataset_id", dataset_id},
		       {"params", params},
		       {"state", std::string(to_string(state))},
		       {"progress", {{"models_done", models_done}, {"models_total", models_total}}},
		       {"worker_id", worker_id ? json(*worker_id) : json(nullptr)},
		       {"created_at", created_at},
		       {"started_at", started_at ? json(*started_at) : json(nullptr)},
		       {"finished_at", finished_at ? json(*finished_at) : json(nullptr)},
		       {"claim_count", claim_count}};
		if (with_log) {
			json lines = json::array();
			for (const auto &l : log) {
				lines.push_back({{"at", l.at}, {"line", l.line}});
			}
			j["log"] = std::move(lines);
		}
		return j;
	}

	static JobRecord from_json(const json &j) {
		JobRecord r;
		r.job_id = j.at("job_id").get<std::string>();
		r.owner_id = j.value("owner_id", "");
		r.kind = job_kind_from_string(j.at("kind").get<std::string>());
		r.dataset_id = j.at("dataset_id").get<std::string>();
		r.params = j.at("params");
		r.state = job_state_from_string(j.at("state").get<std::string>());
		r.models_done = j.at("progress").at("models_done").get<int>();
		r.models_total = j.at("progress").at("models_total").get<int>();
		if (j.contains("worker_id") && j["worker_id"].is_string()) {
			r.worker_id = j["worker_id"].get<std::string>();
		}
		r.created_at = j.value("created_at", "");
		if (j.contains("started_at") && j["started_at"].is_string()) {
			r.started_at = j["started_at"].get<std::string>();
		}
		if (j.contains("finished_at") && j["finished_at"].is_string()) {
			r.finished_at = j["finished_at"].get<std::string>();
		}
		r.claim_count = j.value("claim_count", 0);
		if (j.contains("log")) {
			for (const auto &l : j["log"]) {
				r.log.push_back({l.at("at").get<std::string>(), l.at("line").get<std::string>()});
			}
		}
		return r;
	}
};

} // namespace forecaster::jobs
