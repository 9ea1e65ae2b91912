#include "forecaster/llm/assist.hpp"
#include "forecaster/llm/stats.hpp"
#include "forecaster/testing/synthetic.hpp"

#include <gtest/gtest.h>

#include <deque>
#include <stdexcept>

using namespace forecaster;
using namespace forecaster::llm;
using models::ModelKind;

namespace {

class ScriptedChat : public ChatClient {
public:
	explicit ScriptedChat(std::deque<std::string> replies) : replies_(std::move(replies)) {}
	std::string complete(const std::vector<ChatMessage> &messages) override {
		seen.push_back(messages);
		if (replies_.empty()) {
			throw std::runtime_error("connection refused");
		}
		auto r = replies_.front();
		replies_.pop_front();
		return r;
	}
	std::vector<std::vector<ChatMessage>> seen;

private:
	std::deque<std::string> replies_;
};

SummaryStats stats() {
	std::vector<double> y;
	for (int i = 0; i < 60; ++i) {
		y.push_back(i % 7 == 0 ? 0.0 : 10.0 + i);
	}
	auto b = forecaster::testing::univariate(y, "sales");
	b.freq.label = ingest::FrequencyLabel::Daily;
	b.freq.time_kind = ingest::TimeKind::Datetime;
	b.freq.step = 86400;
	return summarize_dataset(b);
}

bool has_note(const Recommendation &r, const std::string &needle) {
	for (const auto &n : r.notes) {
		if (n.find(needle) != std::string::npos) {
			return true;
		}
	}
	return false;
}

} // namespace

TEST(Llm, StripReasoning) {
	EXPECT_EQ(strip_reasoning("<think>a</think>b<think>c</think>d", "<think>", "</think>"), "bd");
	EXPECT_EQ(strip_reasoning("answer<think>never closed", "<think>", "</think>"), "answer");
	// a reply that starts mid-reasoning with only the close marker
	EXPECT_EQ(strip_reasoning("leftover thoughts</think>{}", "<think>", "</think>"), "{}");
	EXPECT_EQ(strip_reasoning("plain", "<think>", "</think>"), "plain");
}

TEST(Llm, ExtractJsonObject) {
	EXPECT_EQ(extract_json_object("sure: {\"a\": \"}\"} trailing"), std::optional<std::string>("{\"a\": \"}\"}"));
	EXPECT_EQ(extract_json_object("{broken {\"b\": 1}"), std::optional<std::string>("{\"b\": 1}"));
	EXPECT_FALSE(extract_json_object("no braces here"));
	EXPECT_FALSE(extract_json_object("{\"unterminated\": 1"));
}

TEST(Llm, StatsCarryNoRows) {
	const auto s = stats();
	EXPECT_EQ(s.n_observations, 60u);
	EXPECT_EQ(s.suggested_seasonality, 7);
	ASSERT_EQ(s.components.size(), 1u);
	EXPECT_NEAR(s.components[0].proportion_of_zeros, 9.0 / 60.0, 1e-12);
	const std::string dumped = s.to_json().dump();
	EXPECT_EQ(dumped.find("\"rows\""), std::string::npos);
	EXPECT_LT(dumped.size(), 1000u);
}

TEST(Llm, ValidatesAndClampsReply) {
	ScriptedChat chat({R"({"seasonality": 7, "p": 40, "input_chunk": "28", "n_trees": 50, "trend": "DAMPED",
	                       "made_up": 1, "recommended_models": ["arima", "prophet"], "explanation": "ok"})"});
	const auto r = recommend_parameters(stats(), {ModelKind::Arima, ModelKind::ExpSmoothing, ModelKind::LinearLagged}, &chat);
	EXPECT_EQ(r.source, "llm");
	EXPECT_EQ(r.params.get_int("p", -1), 10);
	EXPECT_EQ(r.params.get_int("input_chunk", -1), 28);
	EXPECT_EQ(r.params.get_string("trend", ""), "damped");
	EXPECT_FALSE(r.params.contains("made_up"));
	EXPECT_FALSE(r.params.contains("n_trees")); // random_forest not selected
	EXPECT_TRUE(has_note(r, "clamped 'p'"));
	EXPECT_TRUE(has_note(r, "made_up"));
	EXPECT_TRUE(has_note(r, "prophet"));
	EXPECT_EQ(r.recommended_models, std::vector<ModelKind>{ModelKind::Arima});
	// the prompt describes the registry and the dataset, not the rows
	const auto &prompt = chat.seen.at(0).at(1).content;
	EXPECT_NE(prompt.find("input_chunk"), std::string::npos);
	EXPECT_NE(prompt.find("suggested_seasonality"), std::string::npos);
}

TEST(Llm, RetriesOnceThenFallsBack) {
	ScriptedChat retry({"no json at all", R"({"seasonality": 14})"});
	const auto r = recommend_parameters(stats(), {}, &retry);
	EXPECT_EQ(r.source, "llm");
	EXPECT_EQ(r.params.get_int("seasonality", 0), 14);
	EXPECT_EQ(retry.seen.size(), 2u);
	EXPECT_EQ(r.recommended_models.size(), 5u);

	ScriptedChat garbage({"nope", "still nope"});
	const auto g = recommend_parameters(stats(), {ModelKind::Arima}, &garbage);
	EXPECT_EQ(g.source, "fallback");
	EXPECT_EQ(g.params.get_int("seasonality", 0), 7);
	EXPECT_EQ(g.params.get_int("p", -1), models::ParamDefaults::arima_p);
	EXPECT_EQ(g.notes.size(), 2u);

	ScriptedChat down({});
	EXPECT_EQ(recommend_parameters(stats(), {}, &down).source, "fallback");
	const auto none = recommend_parameters(stats(), {ModelKind::LinearLagged}, nullptr);
	EXPECT_EQ(none.source, "fallback");
	EXPECT_EQ(none.params.get_int("input_chunk", 0), 14);
	EXPECT_EQ(none.explanation, kFallbackExplanation);
}

namespace {

json results() {
	auto metric = [](double rmse) {
		return json{{"normalized", {{"rmse", {{"value", rmse}}}, {"mape", {{"value", nullptr}, {"reason", "zeros_in_actuals"}}}}}};
	};
	return {{"models",
	         {{"arima", {{"status", "completed"}, {"metrics", metric(0.2)}}},
	          {"naive_seasonal", {{"status", "completed"}, {"metrics", metric(0.4)}}},
	          {"nlinear", {{"status", "failed"}, {"error", {{"code", "TooFewWindows"}, {"message", "x"}}}}}}}};
}

} // namespace

TEST(Llm, SummaryFallbackTemplate) {
	const auto s = summarize_results(results(), nullptr);
	EXPECT_EQ(s.source, "fallback");
	EXPECT_NE(s.text.find("Best model by normalized RMSE: arima"), std::string::npos);
	EXPECT_NE(s.text.find("Failed models: nlinear"), std::string::npos);
	EXPECT_NE(s.text.find("zeros_in_actuals"), std::string::npos);
}

TEST(Llm, SummaryFromModelSeesMetricsOnly) {
	ScriptedChat chat({"<think>hmm</think>\n  ARIMA wins.  "});
	auto r = results();
	r["models"]["arima"]["predictions"] = {{"secret", {1, 2, 3}}};
	const auto s = summarize_results(r, &chat);
	EXPECT_EQ(s.source, "llm");
	EXPECT_EQ(s.text, "ARIMA wins.");
	EXPECT_EQ(chat.seen[0][1].content.find("secret"), std::string::npos);

	ScriptedChat empty({"<think>only thinking</think>   "});
	EXPECT_EQ(summarize_results(results(), &empty).source, "fallback");
}
