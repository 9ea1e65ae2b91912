#include "../support.hpp"

#include "forecaster/jobs/worker.hpp"
#include "forecaster/testing/synthetic.hpp"

#include <gtest/gtest.h>

#include <set>
#include <thread>

using namespace forecaster;
namespace ft = forecaster::testing;
using json = nlohmann::json;

namespace {

const std::string kCsv = [] { return ingest::write_csv(ft::bike_like(120, 2)); }();

std::string upload_bike(ft::TestServer &s, httplib::Client &c) {
	auto r = ft::upload(c, "bike.csv", kCsv);
	EXPECT_EQ(r->status, 201) << r->body;
	const std::string id = ft::body_of(r)["dataset_id"];
	auto roles = ft::post_json(c, "/api/v1/datasets/" + id + "/roles", json::parse(ft::bike_like_roles_json()));
	EXPECT_EQ(roles->status, 200) << roles->body;
	return id;
}

const json kParams = {{"model_specs", {{{"kind", "linear_lagged"}}}},
                      {"eval", {{"regime", "full_train_forecast"}, {"horizon", 7}}}};

std::string enqueue(httplib::Client &c, const std::string &ds, const json &params = kParams) {
	auto r = ft::post_json(c, "/api/v1/jobs", {{"dataset_id", ds}, {"params", params}});
	EXPECT_EQ(r->status, 202) << r->body;
	return ft::body_of(r)["job_id"];
}

bool drain(ft::TestServer &s) {
	jobs::Worker w({s.url(), ft::kWorkerToken, "w1", std::chrono::milliseconds(10)}, s.objects);
	bool any = false;
	while (w.run_once()) {
		any = true;
	}
	return any;
}

} // namespace

TEST(Api, HealthNeedsNoToken) {
	ft::TestServer s;
	auto c = s.client("");
	EXPECT_EQ(c.Get("/api/v1/health")->status, 200);
}

TEST(Api, AuthErrors) {
	ft::TestServer s;
	EXPECT_EQ(s.client("").Get("/api/v1/datasets")->status, 401);
	EXPECT_EQ(s.client("wrong").Get("/api/v1/datasets")->status, 401);
	EXPECT_EQ(s.client(ft::kWorkerToken).Get("/api/v1/datasets")->status, 403);
	auto user = s.client();
	EXPECT_EQ(ft::post_json(user, "/api/v1/worker/claim", {{"worker_id", "x"}})->status, 403);
	const auto body = ft::body_of(s.client("").Get("/api/v1/jobs"));
	EXPECT_EQ(body["code"], "Unauthorized");
}

TEST(Api, UploadStatusCodes) {
	api::ServiceOptions opts;
	opts.max_upload_bytes = 4096;
	ft::TestServer s(opts);
	auto c = s.client();
	auto ok = ft::upload(c, "small.csv", "t,y\n0,1\n1,2\n");
	ASSERT_EQ(ok->status, 201);
	const auto rec = ft::body_of(ok);
	EXPECT_EQ(rec["row_count"], 2);
	EXPECT_EQ(rec["columns"][1]["inferred_kind"], "numeric");
	EXPECT_EQ(ft::upload(c, "small.csv", "t,y\n0,1\n")->status, 409);
	EXPECT_EQ(ft::upload(c, "big.csv", std::string(5000, '1'))->status, 413);
	EXPECT_EQ(ft::upload(c, "bad/name.csv", "t,y\n0,1\n")->status, 400);
	auto ragged = ft::upload(c, "ragged.csv", "t,y\n0,1,2\n");
	EXPECT_EQ(ragged->status, 400);
	EXPECT_EQ(ft::body_of(ragged)["code"], "Unparseable");
	EXPECT_EQ(ft::body_of(c.Get("/api/v1/datasets"))["datasets"].size(), 1u);
}

TEST(Api, OwnerIsolation) {
	ft::TestServer s;
	auto alice = s.client();
	auto bob = s.client(ft::kOtherUserToken);
	const auto ds = upload_bike(s, alice);
	EXPECT_EQ(bob.Get("/api/v1/datasets/" + ds)->status, 404);
	EXPECT_TRUE(ft::body_of(bob.Get("/api/v1/datasets"))["datasets"].empty());
	EXPECT_EQ(ft::post_json(bob, "/api/v1/jobs", {{"dataset_id", ds}, {"params", kParams}})->status, 404);
	const auto job = enqueue(alice, ds);
	EXPECT_EQ(bob.Get("/api/v1/jobs/" + job)->status, 404);
	EXPECT_EQ(bob.Get("/api/v1/jobs/" + job + "/results")->status, 404);
	// the same file name is fine for another user
	EXPECT_EQ(ft::upload(bob, "bike.csv", kCsv)->status, 201);
}

TEST(Api, RolesValidation) {
	ft::TestServer s;
	auto c = s.client();
	const std::string ds = ft::body_of(ft::upload(c, "b.csv", kCsv))["dataset_id"];
	auto r = ft::post_json(c, "/api/v1/datasets/" + ds + "/roles", {{"date", "time"}, {"rides", "time"}});
	EXPECT_EQ(r->status, 400);
	// training before roles exist is rejected
	EXPECT_EQ(ft::post_json(c, "/api/v1/jobs", {{"dataset_id", ds}, {"params", kParams}})->status, 400);
	EXPECT_EQ(ft::post_json(c, "/api/v1/datasets/" + ds + "/roles", "{not json")->status, 400);
}

TEST(Api, JobValidationErrorsNameTheField) {
	ft::TestServer s;
	auto c = s.client();
	const auto ds = upload_bike(s, c);
	json bad = kParams;
	bad["model_specs"][0]["params"] = {{"input_chunk", 5000}};
	auto r = ft::post_json(c, "/api/v1/jobs", {{"dataset_id", ds}, {"params", bad}});
	EXPECT_EQ(r->status, 400);
	EXPECT_EQ(ft::body_of(r)["field"], "model_specs[0].input_chunk");
	json too_long = {{"eval", {{"regime", "holdout"}, {"test_len", 500}}}};
	EXPECT_EQ(ft::post_json(c, "/api/v1/jobs", {{"dataset_id", ds}, {"params", too_long}})->status, 400);
}

TEST(Api, TrainForecastAndDownloadFlow) {
	ft::TestServer s;
	auto c = s.client();
	const auto ds = upload_bike(s, c);
	const auto job = enqueue(c, ds);

	auto early = c.Get("/api/v1/jobs/" + job + "/results");
	EXPECT_EQ(early->status, 409);
	EXPECT_EQ(ft::body_of(early)["state"], "queued");
	EXPECT_EQ(ft::body_of(early)["models_total"], 2);
	EXPECT_EQ(ft::post_json(c, "/api/v1/jobs/" + job + "/summary", json::object())->status, 409);

	ASSERT_TRUE(drain(s));
	const auto rec = ft::body_of(c.Get("/api/v1/jobs/" + job));
	EXPECT_EQ(rec["state"], "completed");
	EXPECT_EQ(rec["progress"]["models_done"], 2);

	auto res = c.Get("/api/v1/jobs/" + job + "/results");
	ASSERT_EQ(res->status, 200);
	const auto results = json::parse(res->body);
	EXPECT_EQ(results["models"]["linear_lagged"]["status"], "completed");
	EXPECT_EQ(results["dataset_id"], ds);

	auto dl = c.Get("/api/v1/jobs/" + job + "/download");
	EXPECT_EQ(dl->body, res->body);
	EXPECT_NE(dl->get_header_value("Content-Disposition").find("attachment"), std::string::npos);

	const auto log = ft::body_of(c.Get("/api/v1/jobs/" + job + "/log"))["log"];
	EXPECT_EQ(log.front()["line"], "job queued");
	EXPECT_EQ(log.back()["line"], "job completed");

	auto sum = ft::post_json(c, "/api/v1/jobs/" + job + "/summary", json::object());
	EXPECT_EQ(ft::body_of(sum)["source"], "fallback");

	// forecast with an uploaded covariate file as multipart
	std::string cov = "date,temperature,precipitation,holiday\n";
	for (int d = 0; d < 5; ++d) {
		cov += ingest::format_iso8601(1451606400 + (120 + d) * 86400).substr(0, 10) + ",20,0,0\n";
	}
	httplib::MultipartFormDataItems items = {{"params", R"({"horizon": 5})", "", "application/json"},
	                                         {"covariates", cov, "cov.csv", "text/csv"}};
	auto f1 = c.Post("/api/v1/jobs/" + job + "/forecast", items);
	ASSERT_EQ(f1->status, 202) << f1->body;
	const std::string fid = ft::body_of(f1)["job_id"];
	EXPECT_TRUE(s.objects.exists(job + "/covariates-1.csv"));
	auto f2 = ft::post_json(c, "/api/v1/jobs/" + job + "/forecast", {{"horizon", 3}, {"models", {"naive_seasonal"}}});
	ASSERT_EQ(f2->status, 202) << f2->body;
	ASSERT_TRUE(drain(s));
	const auto fr = json::parse(c.Get("/api/v1/jobs/" + fid + "/results")->body);
	EXPECT_EQ(fr["sequence"], 1);
	EXPECT_EQ(fr["models"]["linear_lagged"]["predictions"][series::kAllGroupsKey]["rides"].size(), 5u);
	EXPECT_TRUE(s.objects.exists(job + "/forecast-1.json"));
	EXPECT_TRUE(s.objects.exists(job + "/forecast-2.json"));

	// forecasting from a forecast job or with a wrong covariate schema
	EXPECT_EQ(ft::post_json(c, "/api/v1/jobs/" + fid + "/forecast", {{"horizon", 3}})->status, 400);
	auto mismatch = ft::post_json(c, "/api/v1/jobs/" + job + "/forecast",
	                              {{"horizon", 3}, {"covariates_csv", "date,wind\n2016-05-01,3\n"}});
	EXPECT_EQ(mismatch->status, 400);
	EXPECT_EQ(ft::body_of(mismatch)["code"], "CovariateSchemaMismatch");
	EXPECT_EQ(ft::post_json(c, "/api/v1/jobs/" + job + "/forecast", {{"horizon", 3}, {"models", {"arima"}}})->status, 400);
}

TEST(Api, WorkerProtocol) {
	ft::TestServer s;
	auto c = s.client();
	auto w = s.client(ft::kWorkerToken);
	EXPECT_EQ(ft::post_json(w, "/api/v1/worker/claim", {{"worker_id", "w"}})->status, 204);
	EXPECT_EQ(ft::post_json(w, "/api/v1/worker/claim", json::object())->status, 400);
	const auto ds = upload_bike(s, c);
	const auto job = enqueue(c, ds);
	auto claimed = ft::post_json(w, "/api/v1/worker/claim", {{"worker_id", "w"}});
	ASSERT_EQ(claimed->status, 200);
	EXPECT_EQ(ft::body_of(claimed)["job"]["job_id"], job);
	EXPECT_EQ(ft::body_of(claimed)["dataset"]["dataset_id"], ds);

	const std::string p = "/api/v1/jobs/" + job + "/progress";
	EXPECT_EQ(ft::body_of(ft::post_json(w, p, {{"worker_id", "w"}, {"models_done", 1}, {"lines", {"a"}}}))["outcome"],
	          "applied");
	EXPECT_EQ(ft::body_of(ft::post_json(w, p, {{"worker_id", "w"}, {"models_done", 1}}))["outcome"], "duplicate");
	const auto stale = ft::body_of(ft::post_json(w, p, {{"worker_id", "w"}, {"models_done", 0}, {"lines", {"b"}}}));
	EXPECT_EQ(stale["outcome"], "stale");
	EXPECT_EQ(stale["warning"]["code"], "StaleUpdate");
	EXPECT_EQ(ft::post_json(w, p, {{"worker_id", "other"}, {"models_done", 2}})->status, 409);
	EXPECT_EQ(ft::post_json(w, p, {{"worker_id", "w"}, {"models_done", 2}, {"state", "running"}})->status, 400);
	EXPECT_EQ(ft::post_json(w, "/api/v1/jobs/job_nope/progress", {{"models_done", 1}})->status, 404);
	EXPECT_EQ(ft::post_json(c, p, {{"models_done", 1}})->status, 403);
	// the user still sees the job running
	EXPECT_EQ(ft::body_of(c.Get("/api/v1/jobs/" + job))["state"], "running");
}

TEST(Api, RecommendationsFallBackWithoutLlm) {
	ft::TestServer s;
	auto c = s.client();
	const auto ds = upload_bike(s, c);
	auto r = ft::post_json(c, "/api/v1/datasets/" + ds + "/recommendations", {{"selected_models", {"arima"}}});
	ASSERT_EQ(r->status, 200) << r->body;
	const auto b = ft::body_of(r);
	EXPECT_EQ(b["source"], "fallback");
	EXPECT_EQ(b["params"]["seasonality"], 7);
	EXPECT_EQ(ft::post_json(c, "/api/v1/datasets/" + ds + "/recommendations", {{"selected_models", {"x"}}})->status, 400);
	const auto stats = ft::body_of(c.Get("/api/v1/datasets/" + ds + "/stats"));
	EXPECT_EQ(stats["frequency"]["label"], "daily");
	EXPECT_EQ(stats["n_observations"], 120);
}

TEST(Api, RecommendationsUseConfiguredChat) {
	class Fixed : public llm::ChatClient {
	public:
		std::string complete(const std::vector<llm::ChatMessage> &) override {
			return R"({"seasonality": 14, "explanation": "two weeks"})";
		}
	};
	api::ServiceOptions opts;
	opts.chat_factory = [] { return std::make_unique<Fixed>(); };
	ft::TestServer s(opts);
	auto c = s.client();
	const auto ds = upload_bike(s, c);
	const auto b = ft::body_of(ft::post_json(c, "/api/v1/datasets/" + ds + "/recommendations", json::object()));
	EXPECT_EQ(b["source"], "llm");
	EXPECT_EQ(b["params"]["seasonality"], 14);
}

TEST(Api, PlotAndRegistry) {
	ft::TestServer s;
	auto c = s.client();
	const auto ds = upload_bike(s, c);
	auto plot = c.Get("/api/v1/datasets/" + ds + "/plot?x=date&y=rides&y=temperature");
	ASSERT_EQ(plot->status, 200) << plot->body;
	EXPECT_EQ(ft::body_of(c.Get("/api/v1/datasets/" + ds + "/plot?x=date&y=rides&y=nope"))["code"],
	          "UnknownColumn");
	const auto reg = ft::body_of(c.Get("/api/v1/registry"));
	EXPECT_EQ(reg["models"].size(), 6u);
	EXPECT_FALSE(reg["parameters"].empty());
}

TEST(Api, OwnerIsolationProbes) {
	ft::TestServer s;
	auto alice = s.client();
	auto bob = s.client(ft::kOtherUserToken);
	const auto ds = upload_bike(s, alice);
	const auto job = enqueue(alice, ds);
	std::vector<std::string> ids = {ds, job};
	Rng rng(17);
	for (int i = 0; i < 20; ++i) {
		ids.push_back((i % 2 ? "ds_" : "job_") + std::to_string(rng.next()));
	}
	for (const auto &id : ids) {
		for (const char *path : {"/api/v1/datasets/", "/api/v1/jobs/"}) {
			for (const char *suffix : {"", "/results", "/download", "/log", "/stats", "/plot?x=date&y=rides"}) {
				const auto r = bob.Get(std::string(path) + id + suffix);
				ASSERT_TRUE(r);
				EXPECT_EQ(r->status, 404) << path << id << suffix;
			}
		}
		EXPECT_EQ(ft::post_json(bob, "/api/v1/datasets/" + id + "/roles", json::parse(ft::bike_like_roles_json()))->status,
		          404);
		EXPECT_EQ(ft::post_json(bob, "/api/v1/jobs/" + id + "/forecast", {{"horizon", 2}})->status, 404);
		EXPECT_EQ(ft::post_json(bob, "/api/v1/jobs/" + id + "/summary", json::object())->status, 404);
	}
}

TEST(Api, ConcurrentIdenticalRequests) {
	ft::TestServer s;
	std::vector<int> codes(8);
	std::vector<std::thread> ts;
	for (int i = 0; i < 8; ++i) {
		ts.emplace_back([&, i] {
			auto c = s.client();
			codes[i] = ft::upload(c, "same.csv", kCsv)->status;
		});
	}
	for (auto &t : ts) {
		t.join();
	}
	EXPECT_EQ(std::count(codes.begin(), codes.end(), 201), 1);
	EXPECT_EQ(std::count(codes.begin(), codes.end(), 409), 7);

	auto c = s.client();
	const std::string ds = ft::body_of(c.Get("/api/v1/datasets"))["datasets"][0]["dataset_id"];
	ft::post_json(c, "/api/v1/datasets/" + ds + "/roles", json::parse(ft::bike_like_roles_json()));
	std::vector<std::string> jobs(6);
	ts.clear();
	for (int i = 0; i < 6; ++i) {
		ts.emplace_back([&, i] {
			auto cc = s.client();
			jobs[i] = ft::body_of(ft::post_json(cc, "/api/v1/jobs", {{"dataset_id", ds}, {"params", kParams}}))["job_id"];
		});
	}
	for (auto &t : ts) {
		t.join();
	}
	EXPECT_EQ(std::set<std::string>(jobs.begin(), jobs.end()).size(), 6u);
}
