#include "expect_code.hpp"

#include "forecaster/ingest/registry.hpp"
#include "forecaster/jobs/pipeline.hpp"
#include "forecaster/jobs/runner.hpp"
#include "forecaster/store/metadata_store.hpp"
#include "forecaster/store/object_store.hpp"
#include "forecaster/testing/synthetic.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <memory>

using namespace forecaster;
using namespace forecaster::jobs;
using store::ProgressOutcome;

namespace {

struct FakeClock {
	std::shared_ptr<std::atomic<std::int64_t>> now = std::make_shared<std::atomic<std::int64_t>>(1'000'000);
	Clock fn() const {
		auto n = now;
		return [n] { return n->load(); };
	}
	void advance(std::int64_t ms) {
		*now += ms;
	}
};

JobRecord job(const std::string &id, int total = 3) {
	JobRecord j;
	j.job_id = id;
	j.owner_id = "alice";
	j.dataset_id = "ds_x";
	j.params = json::object();
	j.models_total = total;
	return j;
}

int count_lines(const JobRecord &j, const std::string &line) {
	int n = 0;
	for (const auto &l : j.log) {
		n += l.line == line;
	}
	return n;
}

} // namespace

TEST(Queue, ClaimsInFifoOrder) {
	store::MetadataStore meta(":memory:");
	for (const char *id : {"j1", "j2", "j3"}) {
		meta.insert_job(job(id));
	}
	EXPECT_EQ(meta.claim_next("w", 60'000)->job_id, "j1");
	EXPECT_EQ(meta.claim_next("w", 60'000)->job_id, "j2");
	const auto j3 = meta.claim_next("w2", 60'000);
	EXPECT_EQ(j3->state, JobState::Running);
	EXPECT_EQ(j3->worker_id, std::optional<std::string>("w2"));
	EXPECT_EQ(j3->claim_count, 1);
	EXPECT_FALSE(meta.claim_next("w", 60'000));
}

TEST(Queue, StaleJobIsRequeuedAndOldWorkerRejected) {
	FakeClock clock;
	store::MetadataStore meta(":memory:", clock.fn());
	meta.insert_job(job("j1"));
	ASSERT_TRUE(meta.claim_next("dead", 5'000));
	clock.advance(4'000);
	EXPECT_FALSE(meta.claim_next("live", 5'000)); // not stale yet
	clock.advance(2'000);
	const auto again = meta.claim_next("live", 5'000);
	ASSERT_TRUE(again);
	EXPECT_EQ(again->claim_count, 2);
	EXPECT_EQ(again->worker_id, std::optional<std::string>("live"));
	EXPECT_CODE(meta.record_progress("j1", std::string("dead"), 1, {"late"}, std::nullopt), ErrorCode::Conflict);
	EXPECT_EQ(meta.record_progress("j1", std::string("live"), 1, {"ok"}, std::nullopt), ProgressOutcome::Applied);
}

TEST(Queue, ProgressKeepsJobAlive) {
	FakeClock clock;
	store::MetadataStore meta(":memory:", clock.fn());
	meta.insert_job(job("j1"));
	meta.claim_next("w", 5'000);
	for (int i = 1; i <= 3; ++i) {
		clock.advance(4'000);
		meta.record_progress("j1", std::string("w"), i, {"step"}, std::nullopt);
		EXPECT_FALSE(meta.claim_next("other", 5'000));
	}
}

TEST(Queue, ProgressOutcomes) {
	store::MetadataStore meta(":memory:");
	meta.insert_job(job("j1"));
	EXPECT_CODE(meta.record_progress("j1", std::string("w"), 1, {}, std::nullopt), ErrorCode::Conflict); // not running
	meta.claim_next("w", 60'000);
	const std::optional<std::string> w("w");
	EXPECT_EQ(meta.record_progress("j1", w, 2, {"two"}, std::nullopt), ProgressOutcome::Applied);
	EXPECT_EQ(meta.record_progress("j1", w, 2, {}, std::nullopt), ProgressOutcome::Duplicate);
	EXPECT_EQ(meta.record_progress("j1", w, 1, {"old"}, std::nullopt), ProgressOutcome::Stale);
	EXPECT_EQ(meta.get_job("j1")->models_done, 2);
	EXPECT_CODE(meta.record_progress("j1", w, 4, {}, std::nullopt), ErrorCode::ValidationFailed);
	EXPECT_EQ(meta.record_progress("j1", w, 3, {"done"}, JobState::Completed), ProgressOutcome::Applied);
	// retrying the final report is harmless
	EXPECT_EQ(meta.record_progress("j1", w, 3, {"done"}, JobState::Completed), ProgressOutcome::Duplicate);
	EXPECT_CODE(meta.record_progress("j1", w, 3, {}, JobState::Failed), ErrorCode::Conflict);
	const auto j = *meta.get_job("j1", true);
	EXPECT_EQ(j.state, JobState::Completed);
	EXPECT_EQ(count_lines(j, "job completed"), 1);
	EXPECT_TRUE(j.finished_at);
	EXPECT_CODE(meta.record_progress("nope", w, 1, {}, std::nullopt), ErrorCode::UnknownJob);
}

TEST(Queue, FailJob) {
	store::MetadataStore meta(":memory:");
	meta.insert_job(job("j1"));
	meta.fail_job("j1", "dataset vanished");
	const auto j = *meta.get_job("j1", true);
	EXPECT_EQ(j.state, JobState::Failed);
	EXPECT_EQ(count_lines(j, "job failed"), 1);
	EXPECT_FALSE(meta.claim_next("w", 1000));
}

TEST(Params, TrainJobValidation) {
	auto parse = [](const json &j) { return TrainJobParams::from_json(j); };
	const json eval = {{"regime", "holdout"}, {"test_len", 10}};
	EXPECT_EQ(parse({{"eval", eval}}).models_total(), 1);
	EXPECT_CODE(parse(json::object()), ErrorCode::ValidationFailed);
	EXPECT_CODE(parse({{"eval", eval}, {"extra", 1}}), ErrorCode::ValidationFailed);
	EXPECT_CODE(parse({{"eval", eval}, {"model_specs", {{{"kind", "naive_seasonal"}}}}}), ErrorCode::ValidationFailed);
	EXPECT_CODE(parse({{"eval", eval}, {"model_specs", {{{"kind", "arima"}}, {{"kind", "arima"}}}}}),
	            ErrorCode::ValidationFailed);
	EXPECT_CODE(parse({{"eval", {{"regime", "holdout"}}}}), ErrorCode::ValidationFailed);
	EXPECT_CODE(parse({{"eval", {{"regime", "full_train_forecast"}}}}), ErrorCode::ValidationFailed);
	EXPECT_CODE(parse({{"eval", {{"regime", "expanding_window"}, {"horizon", 5}, {"stride", 6}}}}), ErrorCode::BadStride);
	EXPECT_CODE(parse({{"eval", {{"regime", "holdout"}, {"test_len", 0}}}}), ErrorCode::ValidationFailed);
	const auto p = parse({{"eval", eval}, {"model_specs", {{{"kind", "arima"}, {"params", {{"p", 2}}}}}}, {"seed", 4}});
	EXPECT_EQ(TrainJobParams::from_json(p.to_json()).to_json(), p.to_json());
}

namespace {

series::SeriesBundle bike(int days) {
	const auto t = forecaster::testing::bike_like(days, 4);
	const auto cols = ingest::extract_schema(t);
	const auto roles = ingest::RoleAssignment::from_json(json::parse(forecaster::testing::bike_like_roles_json()));
	return series::build_bundle(t, cols, ingest::validate_roles(t, cols, roles));
}

class CountingProgress : public ProgressSink {
public:
	void on_progress(int done, int total, const std::vector<std::string> &) override {
		calls.emplace_back(done, total);
	}
	std::vector<std::pair<int, int>> calls;
};

} // namespace

TEST(Pipeline, FailedModelDoesNotStopOthers) {
	const auto b = bike(200);
	const auto params = TrainJobParams::from_json(
	    {{"model_specs",
	      {{{"kind", "linear_lagged"}, {"params", {{"input_chunk", 2000}}}}, {{"kind", "exp_smoothing"}}}},
	     {"eval", {{"regime", "holdout"}, {"test_len", 14}}}});
	CountingProgress progress;
	const auto out = run_training("job-a", b, params, progress);
	const auto &m = out.results["models"];
	EXPECT_EQ(m["linear_lagged"]["status"], "failed");
	EXPECT_EQ(m["linear_lagged"]["error"]["code"], "TooFewWindows");
	EXPECT_EQ(m["exp_smoothing"]["status"], "completed");
	EXPECT_EQ(m["naive_seasonal"]["status"], "completed");
	EXPECT_EQ(out.artifacts.size(), 2u);
	ASSERT_EQ(progress.calls.size(), 3u);
	EXPECT_EQ(progress.calls.back(), std::make_pair(3, 3));
	EXPECT_EQ(out.results["status"], "completed");
}

TEST(Pipeline, DeterministicForJobIdAndSeed) {
	const auto b = bike(160);
	const auto params = TrainJobParams::from_json(
	    {{"model_specs", {{{"kind", "random_forest"}, {"params", {{"n_trees", 5}}}}}},
	     {"eval", {{"regime", "holdout"}, {"test_len", 14}, {"probabilistic", true}, {"n_samples", 20}}},
	     {"seed", 9}});
	NullProgress np;
	const auto a = run_training("job-a", b, params, np).results;
	EXPECT_EQ(a, run_training("job-a", b, params, np).results);
	EXPECT_NE(a["models"]["random_forest"]["predictions"],
	          run_training("job-b", b, params, np).results["models"]["random_forest"]["predictions"]);
}

TEST(Pipeline, ExpandingWindowCoversTail) {
	const auto b = bike(120);
	const auto params = TrainJobParams::from_json(
	    {{"model_specs", {{{"kind", "exp_smoothing"}}}},
	     {"eval", {{"regime", "expanding_window"}, {"horizon", 7}, {"initial_train_len", 92}}}});
	NullProgress np;
	const auto r = run_training("job-e", b, params, np).results;
	const auto &pred = r["models"]["exp_smoothing"]["predictions"][series::kAllGroupsKey];
	EXPECT_EQ(pred["times"].size(), 28u);
	EXPECT_EQ(pred["rides"].size(), 28u);
	EXPECT_EQ(r["models"]["exp_smoothing"]["actuals"][series::kAllGroupsKey]["rides"].size(), 28u);
}

TEST(Pipeline, DataLengthErrors) {
	const auto b = bike(60);
	NullProgress np;
	EXPECT_CODE(run_training("j", b, TrainJobParams::from_json({{"eval", {{"regime", "holdout"}, {"test_len", 60}}}}), np),
	            ErrorCode::TestTooLong);
}

namespace {

struct Env {
	store::MetadataStore meta{":memory:"};
	store::MemoryStore objects;
	ingest::DatasetRegistry registry{meta, objects};
	ingest::DatasetRecord dataset;

	explicit Env(int days) {
		dataset = registry.validate_and_register(ingest::write_csv(forecaster::testing::bike_like(days, 4)), "alice",
		                                         "bike.csv");
		dataset.roles = registry.assign_roles(
		    dataset.dataset_id,
		    ingest::RoleAssignment::from_json(json::parse(forecaster::testing::bike_like_roles_json())));
	}

	std::string csv() const {
		return registry.raw(dataset);
	}

	JobRecord train(const std::string &id, const json &params) {
		JobRecord j = job(id);
		j.dataset_id = dataset.dataset_id;
		j.params = params;
		NullProgress np;
		execute_training(j, dataset, csv(), objects, np);
		return j;
	}

	json forecast(const std::string &id, const json &params) {
		JobRecord j = job(id);
		j.kind = JobKind::Forecast;
		j.dataset_id = dataset.dataset_id;
		j.params = params;
		NullProgress np;
		return execute_forecast(j, dataset, csv(), objects, np);
	}
};

const json kTrain = {{"model_specs", {{{"kind", "linear_lagged"}}, {{"kind", "exp_smoothing"}}}},
                     {"eval", {{"regime", "full_train_forecast"}, {"horizon", 7}}}};

} // namespace

TEST(Runner, TrainThenForecastWithImputedCovariates) {
	Env env(150);
	env.train("t1", kTrain);
	EXPECT_TRUE(env.objects.exists(results_key("t1")));
	const auto kinds = stored_models(env.objects, "t1");
	EXPECT_EQ(kinds.size(), 3u);
	const auto r = env.forecast("f1", {{"source_job_id", "t1"}, {"horizon", 10}, {"sequence", 1}});
	EXPECT_EQ(r["kind"], "forecast");
	for (const char *k : {"linear_lagged", "exp_smoothing", "naive_seasonal"}) {
		EXPECT_EQ(r["models"][k]["status"], "completed") << k;
		EXPECT_EQ(r["models"][k]["predictions"][series::kAllGroupsKey]["rides"].size(), 10u) << k;
	}
	EXPECT_TRUE(env.objects.exists(forecast_key("t1", 1)));
	// the linear model used covariates that had to be imputed past the data
	bool imputed = false;
	for (const auto &l : r["log"]) {
		imputed = imputed || l.get<std::string>().find("linear trend") != std::string::npos;
	}
	EXPECT_TRUE(imputed);
}

TEST(Runner, UploadedCovariatesChangeTheForecast) {
	Env env(150);
	env.train("t1", kTrain);
	const auto base = env.forecast("f1", {{"source_job_id", "t1"}, {"horizon", 5}});
	std::string cov = "date,temperature,precipitation,holiday\n";
	for (int d = 0; d < 5; ++d) {
		cov += ingest::format_iso8601(1451606400 + (150 + d) * 86400).substr(0, 10) + ",30,9.5,1\n";
	}
	env.objects.put("t1/covariates-2.csv", cov);
	const auto with = env.forecast("f2", {{"source_job_id", "t1"}, {"horizon", 5}, {"sequence", 2},
	                                      {"covariates_key", "t1/covariates-2.csv"}});
	EXPECT_NE(with["models"]["linear_lagged"]["predictions"], base["models"]["linear_lagged"]["predictions"]);
	// univariate models ignore covariates
	EXPECT_EQ(with["models"]["exp_smoothing"]["predictions"], base["models"]["exp_smoothing"]["predictions"]);
}

TEST(Runner, CovariateSchemaMismatch) {
	Env env(120);
	env.train("t1", kTrain);
	env.objects.put("bad.csv", "date,temperature,wind\n2016-05-01,1,2\n");
	EXPECT_CODE(env.forecast("f1", {{"source_job_id", "t1"}, {"horizon", 3}, {"covariates_key", "bad.csv"}}),
	            ErrorCode::CovariateSchemaMismatch);
}

TEST(Runner, MissingArtifactFailsOnlyThatModel) {
	Env env(120);
	env.train("t1", kTrain);
	env.objects.remove(models::model_artifact_key("t1", models::ModelKind::ExpSmoothing));
	const auto r = env.forecast("f1", {{"source_job_id", "t1"}, {"horizon", 3}, {"models", {"exp_smoothing", "linear_lagged"}}});
	EXPECT_EQ(r["models"]["exp_smoothing"]["error"]["code"], "ModelArtifactMissing");
	EXPECT_EQ(r["models"]["linear_lagged"]["status"], "completed");
	EXPECT_CODE(env.forecast("f2", {{"source_job_id", "none"}, {"horizon", 3}}), ErrorCode::ModelArtifactMissing);
}
