#pragma once

#include "forecaster/common/clock.hpp"
#include "forecaster/common/error.hpp"
#include "forecaster/ingest/dataset.hpp"
#include "forecaster/jobs/job_record.hpp"

#include <sqlite3.h>

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace forecaster::store {

using nlohmann::json;

namespace detail {

struct DbCloser {
	void operator()(sqlite3 *db) const {
		sqlite3_close_v2(db);
	}
};

struct StmtFinalizer {
	void operator()(sqlite3_stmt *s) const {
		sqlite3_finalize(s);
	}
};

// One prepared statement with positional binding helpers.
class Statement {
public:
	Statement(sqlite3 *db, const std::string &sql) : db_(db) {
		sqlite3_stmt *raw = nullptr;
		if (sqlite3_prepare_v2(db, sql.c_str(), -1, &raw, nullptr) != SQLITE_OK) {
			throw Error(ErrorCode::StoreError, std::string("prepare failed: ") + sqlite3_errmsg(db));
		}
		stmt_.reset(raw);
	}

	Statement &bind(int i, const std::string &v) {
		sqlite3_bind_text(stmt_.get(), i, v.c_str(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
		return *this;
	}
	Statement &bind(int i, std::int64_t v) {
		sqlite3_bind_int64(stmt_.get(), i, v);
		return *this;
	}
	Statement &bind_null(int i) {
		sqlite3_bind_null(stmt_.get(), i);
		return *this;
	}
	Statement &bind(int i, const std::optional<std::string> &v) {
		return v ? bind(i, *v) : bind_null(i);
	}

	// True while a row is available.
	bool step() {
		const int rc = sqlite3_step(stmt_.get());
		if (rc == SQLITE_ROW) {
			return true;
		}
		if (rc == SQLITE_DONE) {
			return false;
		}
		last_rc_ = sqlite3_extended_errcode(db_);
		throw Error(ErrorCode::StoreError, std::string("step failed: ") + sqlite3_errmsg(db_));
	}

	// Executes a statement that yields no rows; returns the extended result code
	// instead of throwing so callers can map constraint violations.
	int exec() {
		const int rc = sqlite3_step(stmt_.get());
		if (rc == SQLITE_DONE || rc == SQLITE_ROW) {
			return SQLITE_OK;
		}
		return sqlite3_extended_errcode(db_);
	}

	std::string text(int col) const {
		const auto *p = sqlite3_column_text(stmt_.get(), col);
		return p ? std::string(reinterpret_cast<const char *>(p)) : std::string();
	}
	std::optional<std::string> opt_text(int col) const {
		if (sqlite3_column_type(stmt_.get(), col) == SQLITE_NULL) {
			return std::nullopt;
		}
		return text(col);
	}
	std::int64_t integer(int col) const {
		return sqlite3_column_int64(stmt_.get(), col);
	}

private:
	sqlite3 *db_;
	std::unique_ptr<sqlite3_stmt, StmtFinalizer> stmt_;
	int last_rc_ = SQLITE_OK;
};

} // namespace detail

enum class ProgressOutcome { Applied, Duplicate, Stale };

// Relational metadata store: datasets, role assignments, jobs, and job logs.
// All access is serialized through one connection; every multi-statement
// operation runs inside an IMMEDIATE transaction so state transitions are
// atomic with respect to concurrent callers.
class MetadataStore {
public:
	explicit MetadataStore(const std::string &path = ":memory:", Clock clock = system_clock_ms())
	    : clock_(std::move(clock)) {
		sqlite3 *raw = nullptr;
		const int flags = SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX;
		if (sqlite3_open_v2(path.c_str(), &raw, flags, nullptr) != SQLITE_OK) {
			std::string msg = raw ? sqlite3_errmsg(raw) : "out of memory";
			sqlite3_close_v2(raw);
			throw Error(ErrorCode::StoreError, "cannot open metadata store '" + path + "': " + msg);
		}
		db_.reset(raw);
		sqlite3_busy_timeout(raw, 5000);
		exec_sql("PRAGMA foreign_keys = ON;");
		exec_sql(R"sql(
			CREATE TABLE IF NOT EXISTS users (
				user_id TEXT PRIMARY KEY,
				first_seen TEXT NOT NULL
			);
			CREATE TABLE IF NOT EXISTS datasets (
				dataset_id TEXT PRIMARY KEY,
				owner_id TEXT NOT NULL,
				filename TEXT NOT NULL,
				uploaded_at TEXT NOT NULL,
				byte_size INTEGER NOT NULL,
				row_count INTEGER NOT NULL,
				columns_json TEXT NOT NULL,
				UNIQUE (owner_id, filename)
			);
			CREATE TABLE IF NOT EXISTS roles (
				dataset_id TEXT PRIMARY KEY REFERENCES datasets(dataset_id) ON DELETE CASCADE,
				roles_json TEXT NOT NULL,
				updated_at TEXT NOT NULL
			);
			CREATE TABLE IF NOT EXISTS jobs (
				seq INTEGER PRIMARY KEY AUTOINCREMENT,
				job_id TEXT NOT NULL UNIQUE,
				owner_id TEXT NOT NULL,
				kind TEXT NOT NULL,
				dataset_id TEXT NOT NULL,
				params_json TEXT NOT NULL,
				state TEXT NOT NULL,
				worker_id TEXT,
				created_at TEXT NOT NULL,
				started_at TEXT,
				finished_at TEXT,
				claim_count INTEGER NOT NULL DEFAULT 0
			);
			CREATE INDEX IF NOT EXISTS jobs_state ON jobs(state, seq);
			CREATE TABLE IF NOT EXISTS progress (
				job_id TEXT PRIMARY KEY REFERENCES jobs(job_id),
				models_done INTEGER NOT NULL,
				models_total INTEGER NOT NULL,
				last_update_ms INTEGER NOT NULL
			);
			CREATE TABLE IF NOT EXISTS job_log (
				id INTEGER PRIMARY KEY AUTOINCREMENT,
				job_id TEXT NOT NULL REFERENCES jobs(job_id),
				at TEXT NOT NULL,
				line TEXT NOT NULL
			);
			CREATE INDEX IF NOT EXISTS job_log_job ON job_log(job_id, id);
		)sql");
	}

	std::int64_t now_ms() const {
		return clock_();
	}

	void touch_user(const std::string &user_id) {
		std::lock_guard lock(mutex_);
		detail::Statement st(db(), "INSERT OR IGNORE INTO users (user_id, first_seen) VALUES (?, ?)");
		st.bind(1, user_id).bind(2, format_timestamp_ms(clock_()));
		check(st.exec());
	}

	// ---- datasets --------------------------------------------------------

	// Fails with DuplicateName through the (owner_id, filename) constraint.
	void insert_dataset(const ingest::DatasetRecord &rec) {
		std::lock_guard lock(mutex_);
		detail::Statement st(db(), "INSERT INTO datasets (dataset_id, owner_id, filename, uploaded_at, byte_size, "
		                           "row_count, columns_json) VALUES (?, ?, ?, ?, ?, ?, ?)");
		st.bind(1, rec.dataset_id)
		    .bind(2, rec.owner_id)
		    .bind(3, rec.filename)
		    .bind(4, rec.uploaded_at)
		    .bind(5, static_cast<std::int64_t>(rec.byte_size))
		    .bind(6, static_cast<std::int64_t>(rec.row_count))
		    .bind(7, ingest::columns_to_json(rec.columns).dump());
		const int rc = st.exec();
		if (rc == SQLITE_CONSTRAINT_UNIQUE) {
			throw Error(ErrorCode::DuplicateName, "a file named '" + rec.filename + "' already exists", "filename");
		}
		check(rc);
	}

	void delete_dataset(const std::string &dataset_id) {
		std::lock_guard lock(mutex_);
		detail::Statement st(db(), "DELETE FROM datasets WHERE dataset_id = ?");
		st.bind(1, dataset_id);
		check(st.exec());
	}

	std::optional<ingest::DatasetRecord> get_dataset(const std::string &dataset_id) {
		std::lock_guard lock(mutex_);
		detail::Statement st(db(), std::string(kDatasetSelect) + " WHERE d.dataset_id = ?");
		st.bind(1, dataset_id);
		if (!st.step()) {
			return std::nullopt;
		}
		return read_dataset(st);
	}

	std::vector<ingest::DatasetRecord> list_datasets(const std::string &owner_id) {
		std::lock_guard lock(mutex_);
		detail::Statement st(db(), std::string(kDatasetSelect) + " WHERE d.owner_id = ? ORDER BY d.uploaded_at DESC, d.rowid DESC");
		st.bind(1, owner_id);
		std::vector<ingest::DatasetRecord> out;
		while (st.step()) {
			out.push_back(read_dataset(st));
		}
		return out;
	}

	void set_roles(const std::string &dataset_id, const ingest::RoleAssignment &roles) {
		std::lock_guard lock(mutex_);
		detail::Statement st(db(), "INSERT INTO roles (dataset_id, roles_json, updated_at) VALUES (?, ?, ?) "
		                           "ON CONFLICT(dataset_id) DO UPDATE SET roles_json = excluded.roles_json, "
		                           "updated_at = excluded.updated_at");
		st.bind(1, dataset_id).bind(2, roles.to_json().dump()).bind(3, format_timestamp_ms(clock_()));
		check(st.exec());
	}

	// ---- jobs ------------------------------------------------------------

	void insert_job(const jobs::JobRecord &job) {
		std::lock_guard lock(mutex_);
		Transaction tx(*this);
		{
			detail::Statement st(db(), "INSERT INTO jobs (job_id, owner_id, kind, dataset_id, params_json, state, "
			                           "created_at) VALUES (?, ?, ?, ?, ?, 'queued', ?)");
			st.bind(1, job.job_id)
			    .bind(2, job.owner_id)
			    .bind(3, std::string(to_string(job.kind)))
			    .bind(4, job.dataset_id)
			    .bind(5, job.params.dump())
			    .bind(6, job.created_at.empty() ? format_timestamp_ms(clock_()) : job.created_at);
			check(st.exec());
		}
		{
			detail::Statement st(db(), "INSERT INTO progress (job_id, models_done, models_total, last_update_ms) "
			                           "VALUES (?, 0, ?, ?)");
			st.bind(1, job.job_id).bind(2, static_cast<std::int64_t>(job.models_total)).bind(3, clock_());
			check(st.exec());
		}
		append_log_locked(job.job_id, {"job queued"});
		tx.commit();
	}

	std::optional<jobs::JobRecord> get_job(const std::string &job_id, bool with_log = false) {
		std::lock_guard lock(mutex_);
		return get_job_locked(job_id, with_log);
	}

	// Newest first.
	std::vector<jobs::JobRecord> list_jobs(const std::string &owner_id) {
		std::lock_guard lock(mutex_);
		detail::Statement st(db(), std::string(kJobSelect) + " WHERE j.owner_id = ? ORDER BY j.seq DESC");
		st.bind(1, owner_id);
		std::vector<jobs::JobRecord> out;
		while (st.step()) {
			out.push_back(read_job(st));
		}
		return out;
	}

	std::optional<jobs::JobRecord> latest_job_for_dataset(const std::string &dataset_id) {
		std::lock_guard lock(mutex_);
		detail::Statement st(db(), std::string(kJobSelect) + " WHERE j.dataset_id = ? ORDER BY j.seq DESC LIMIT 1");
		st.bind(1, dataset_id);
		if (!st.step()) {
			return std::nullopt;
		}
		return read_job(st);
	}

	// Number of forecast jobs whose params reference `source_job_id`.
	int count_forecast_jobs(const std::string &source_job_id) {
		std::lock_guard lock(mutex_);
		detail::Statement st(db(), "SELECT COUNT(*) FROM jobs WHERE kind = 'forecast' AND "
		                           "json_extract(params_json, '$.source_job_id') = ?");
		st.bind(1, source_job_id);
		st.step();
		return static_cast<int>(st.integer(0));
	}

	// Re-queues running jobs whose last progress is older than `staleness_ms`,
	// then moves the oldest queued job to running for `worker_id`. The whole
	// operation is one IMMEDIATE transaction, so two concurrent claimers never
	// receive the same job.
	std::optional<jobs::JobRecord> claim_next(const std::string &worker_id, std::int64_t staleness_ms) {
		std::lock_guard lock(mutex_);
		Transaction tx(*this);
		const std::int64_t now = clock_();
		requeue_stale_locked(now, staleness_ms);
		std::string job_id;
		{
			detail::Statement st(db(), "SELECT job_id FROM jobs WHERE state = 'queued' ORDER BY seq LIMIT 1");
			if (!st.step()) {
				tx.commit();
				return std::nullopt;
			}
			job_id = st.text(0);
		}
		{
			detail::Statement st(db(), "UPDATE jobs SET state = 'running', worker_id = ?, started_at = ?, "
			                           "claim_count = claim_count + 1 WHERE job_id = ? AND state = 'queued'");
			st.bind(1, worker_id).bind(2, format_timestamp_ms(now)).bind(3, job_id);
			check(st.exec());
			if (sqlite3_changes(db()) != 1) {
				throw Error(ErrorCode::Internal, "claim lost a race inside a transaction");
			}
		}
		{
			detail::Statement st(db(), "UPDATE progress SET last_update_ms = ? WHERE job_id = ?");
			st.bind(1, now).bind(2, job_id);
			check(st.exec());
		}
		append_log_locked(job_id, {"claimed by worker " + worker_id});
		auto job = get_job_locked(job_id, false);
		tx.commit();
		return job;
	}

	// Applies a worker progress report. Reports from a worker that no longer
	// holds the job are rejected; lower counts are Stale (stored count kept, log
	// lines still appended); equal counts without new lines are Duplicate.
	// `final_state` flips a running job to completed/failed; repeating the
	// final call on a terminal job is a Duplicate no-op.
	ProgressOutcome record_progress(const std::string &job_id, const std::optional<std::string> &worker_id,
	                                int models_done, const std::vector<std::string> &lines,
	                                std::optional<jobs::JobState> final_state,
	                                std::optional<int> models_total = std::nullopt) {
		std::lock_guard lock(mutex_);
		Transaction tx(*this);
		auto job = get_job_locked(job_id, false);
		if (!job) {
			throw Error(ErrorCode::UnknownJob, "unknown job '" + job_id + "'", "job_id");
		}
		if (is_terminal(job->state)) {
			if (final_state && *final_state == job->state) {
				tx.commit();
				return ProgressOutcome::Duplicate;
			}
			throw Error(ErrorCode::Conflict, "job '" + job_id + "' already " + std::string(to_string(job->state)));
		}
		if (job->state != jobs::JobState::Running) {
			throw Error(ErrorCode::Conflict, "job '" + job_id + "' is not running");
		}
		if (worker_id && job->worker_id && *worker_id != *job->worker_id) {
			throw Error(ErrorCode::Conflict, "job '" + job_id + "' is held by another worker", "worker_id");
		}
		const std::int64_t now = clock_();
		ProgressOutcome outcome = ProgressOutcome::Applied;
		if (models_done < job->models_done) {
			outcome = ProgressOutcome::Stale;
		} else if (models_done == job->models_done && lines.empty() && !final_state) {
			outcome = ProgressOutcome::Duplicate;
		}
		const int total = models_total.value_or(job->models_total);
		if (outcome != ProgressOutcome::Stale && models_done > total) {
			throw Error(ErrorCode::ValidationFailed, "models_done exceeds models_total", "models_done");
		}
		{
			detail::Statement st(db(), "UPDATE progress SET models_done = MAX(models_done, ?), models_total = ?, "
			                           "last_update_ms = ? WHERE job_id = ?");
			st.bind(1, static_cast<std::int64_t>(models_done))
			    .bind(2, static_cast<std::int64_t>(total))
			    .bind(3, now)
			    .bind(4, job_id);
			check(st.exec());
		}
		append_log_locked(job_id, lines);
		if (outcome == ProgressOutcome::Stale) {
			append_log_locked(job_id, {"warning: stale progress update ignored (" + std::to_string(models_done) +
			                               " < " + std::to_string(job->models_done) + ")"});
		}
		if (final_state) {
			detail::Statement st(db(), "UPDATE jobs SET state = ?, finished_at = ? WHERE job_id = ?");
			st.bind(1, std::string(to_string(*final_state))).bind(2, format_timestamp_ms(now)).bind(3, job_id);
			check(st.exec());
			append_log_locked(job_id, {"job " + std::string(to_string(*final_state))});
		}
		tx.commit();
		return outcome;
	}

	// Marks a queued or running job failed (used for jobs that cannot start).
	void fail_job(const std::string &job_id, const std::string &reason) {
		std::lock_guard lock(mutex_);
		Transaction tx(*this);
		detail::Statement st(db(), "UPDATE jobs SET state = 'failed', finished_at = ? WHERE job_id = ? AND "
		                           "state IN ('queued', 'running')");
		st.bind(1, format_timestamp_ms(clock_())).bind(2, job_id);
		check(st.exec());
		append_log_locked(job_id, {"error: " + reason, "job failed"});
		tx.commit();
	}

private:
	static constexpr const char *kDatasetSelect =
	    "SELECT d.dataset_id, d.owner_id, d.filename, d.uploaded_at, d.byte_size, d.row_count, d.columns_json, "
	    "r.roles_json FROM datasets d LEFT JOIN roles r ON r.dataset_id = d.dataset_id";
	static constexpr const char *kJobSelect =
	    "SELECT j.job_id, j.owner_id, j.kind, j.dataset_id, j.params_json, j.state, j.worker_id, j.created_at, "
	    "j.started_at, j.finished_at, j.claim_count, p.models_done, p.models_total FROM jobs j "
	    "JOIN progress p ON p.job_id = j.job_id";

	class Transaction {
	public:
		explicit Transaction(MetadataStore &s) : store_(s) {
			store_.exec_sql("BEGIN IMMEDIATE;");
		}
		void commit() {
			store_.exec_sql("COMMIT;");
			done_ = true;
		}
		~Transaction() {
			if (!done_) {
				sqlite3_exec(store_.db(), "ROLLBACK;", nullptr, nullptr, nullptr);
			}
		}
		Transaction(const Transaction &) = delete;
		Transaction &operator=(const Transaction &) = delete;

	private:
		MetadataStore &store_;
		bool done_ = false;
	};

	sqlite3 *db() const {
		return db_.get();
	}

	void exec_sql(const char *sql) {
		char *err = nullptr;
		if (sqlite3_exec(db(), sql, nullptr, nullptr, &err) != SQLITE_OK) {
			std::string msg = err ? err : "unknown error";
			sqlite3_free(err);
			throw Error(ErrorCode::StoreError, "metadata store: " + msg);
		}
	}

	void check(int rc) const {
		if (rc != SQLITE_OK) {
			throw Error(ErrorCode::StoreError, std::string("metadata store: ") + sqlite3_errstr(rc));
		}
	}

	static ingest::DatasetRecord read_dataset(detail::Statement &st) {
		ingest::DatasetRecord r;
		r.dataset_id = st.text(0);
		r.owner_id = st.text(1);
		r.filename = st.text(2);
		r.uploaded_at = st.text(3);
		r.byte_size = static_cast<std::size_t>(st.integer(4));
		r.row_count = static_cast<std::size_t>(st.integer(5));
		r.columns = ingest::columns_from_json(json::parse(st.text(6)));
		if (auto roles = st.opt_text(7)) {
			r.roles = ingest::RoleAssignment::from_json(json::parse(*roles));
		}
		return r;
	}

	static jobs::JobRecord read_job(detail::Statement &st) {
		jobs::JobRecord r;
		r.job_id = st.text(0);
		r.owner_id = st.text(1);
		r.kind = jobs::job_kind_from_string(st.text(2));
		r.dataset_id = st.text(3);
		r.params = json::parse(st.text(4));
		r.state = jobs::job_state_from_string(st.text(5));
		r.worker_id = st.opt_text(6);
		r.created_at = st.text(7);
		r.started_at = st.opt_text(8);
		r.finished_at = st.opt_text(9);
		r.claim_count = static_cast<int>(st.integer(10));
		r.models_done = static_cast<int>(st.integer(11));
		r.models_total = static_cast<int>(st.integer(12));
		return r;
	}

	std::optional<jobs::JobRecord> get_job_locked(const std::string &job_id, bool with_log) {
		detail::Statement st(db(), std::string(kJobSelect) + " WHERE j.job_id = ?");
		st.bind(1, job_id);
		if (!st.step()) {
			return std::nullopt;
		}
		auto job = read_job(st);
		if (with_log) {
			detail::Statement lg(db(), "SELECT at, line FROM job_log WHERE job_id = ? ORDER BY id");
			lg.bind(1, job_id);
			while (lg.step()) {
				job.log.push_back({lg.text(0), lg.text(1)});
			}
		}
		return job;
	}

	void append_log_locked(const std::string &job_id, const std::vector<std::string> &lines) {
		const std::string at = format_timestamp_ms(clock_());
		for (const auto &line : lines) {
			detail::Statement st(db(), "INSERT INTO job_log (job_id, at, line) VALUES (?, ?, ?)");
			st.bind(1, job_id).bind(2, at).bind(3, line);
			check(st.exec());
		}
	}

	void requeue_stale_locked(std::int64_t now, std::int64_t staleness_ms) {
		std::vector<std::string> stale;
		{
			detail::Statement st(db(), "SELECT j.job_id FROM jobs j JOIN progress p ON p.job_id = j.job_id "
			                           "WHERE j.state = 'running' AND p.last_update_ms < ?");
			st.bind(1, now - staleness_ms);
			while (st.step()) {
				stale.push_back(st.text(0));
			}
		}
		for (const auto &id : stale) {
			detail::Statement st(db(), "UPDATE jobs SET state = 'queued', worker_id = NULL WHERE job_id = ?");
			st.bind(1, id);
			check(st.exec());
			append_log_locked(id, {"warning: no progress within the staleness timeout; job re-queued"});
		}
	}

	Clock clock_;
	std::mutex mutex_;
	std::unique_ptr<sqlite3, detail::DbCloser> db_;
};

} // namespace forecaster::store
