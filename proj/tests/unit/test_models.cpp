#include "expect_code.hpp"

#include "forecaster/ingest/dataset.hpp"
#include "forecaster/models/arima.hpp"
#include "forecaster/models/exp_smoothing.hpp"
#include "forecaster/models/factory.hpp"
#include "forecaster/models/linear_lagged.hpp"
#include "forecaster/models/naive.hpp"
#include "forecaster/models/nlinear.hpp"
#include "forecaster/series/bundle.hpp"
#include "forecaster/series/split.hpp"
#include "forecaster/testing/synthetic.hpp"

#include <gtest/gtest.h>

using namespace forecaster;
using namespace forecaster::models;

namespace {

series::SeriesBundle bike(int days) {
	const auto t = forecaster::testing::bike_like(days, 3);
	const auto cols = ingest::extract_schema(t);
	const auto roles = ingest::RoleAssignment::from_json(json::parse(forecaster::testing::bike_like_roles_json()));
	return series::build_bundle(t, cols, ingest::validate_roles(t, cols, roles));
}

ModelSpec spec(const json &j) {
	return ModelSpec::from_json(j);
}

ModelSpec resolved(const json &j, int horizon = 14) {
	return resolve_defaults(spec(j), ingest::FrequencyLabel::Daily, horizon);
}

} // namespace

TEST(Params, SpecValidation) {
	EXPECT_CODE(spec({{"kind", "prophet"}}), ErrorCode::ValidationFailed);
	EXPECT_CODE(spec({{"params", json::object()}}), ErrorCode::ValidationFailed);
	EXPECT_CODE(spec({{"kind", "arima"}, {"params", {{"bogus", 1}}}}), ErrorCode::InvalidParameter);
	EXPECT_CODE(spec({{"kind", "arima"}, {"params", {{"n_trees", 10}}}}), ErrorCode::InvalidParameter);
	EXPECT_CODE(spec({{"kind", "arima"}, {"params", {{"p", 11}}}}), ErrorCode::InvalidParameter);
	EXPECT_CODE(spec({{"kind", "arima"}, {"params", {{"p", 1.5}}}}), ErrorCode::InvalidParameter);
	EXPECT_CODE(spec({{"kind", "exp_smoothing"}, {"params", {{"trend", "cubic"}}}}), ErrorCode::InvalidParameter);
	EXPECT_CODE(spec({{"kind", "linear_lagged"}, {"params", {{"ridge_lambda", -1}}}}), ErrorCode::InvalidParameter);
	const auto s = spec({{"kind", "arima"}, {"params", {{"p", 2.0}}}});
	EXPECT_EQ(s.params.get_int("p", -1), 2);
	EXPECT_EQ(ModelSpec::from_json(s.to_json()), s);
}

TEST(Params, DefaultsFollowFrequencyAndHorizon) {
	const auto ll = resolved({{"kind", "linear_lagged"}}, 30);
	EXPECT_EQ(ll.params.get_int("input_chunk", 0), 14);
	EXPECT_EQ(ll.params.get_int("output_chunk", 0), 30);
	EXPECT_FALSE(ll.params.contains("seasonality"));
	const auto hw = resolve_defaults(spec({{"kind", "exp_smoothing"}}), ingest::FrequencyLabel::Monthly, 6);
	EXPECT_EQ(hw.params.get_int("seasonality", 0), 12);
	EXPECT_EQ(hw.params.get_string("trend", ""), "additive");
	// user values win
	EXPECT_EQ(resolved({{"kind", "naive_seasonal"}, {"params", {{"seasonality", 3}}}}).params.get_int("seasonality", 0), 3);
}

TEST(Params, RegistryIsConsistent) {
	for (const auto &p : parameter_registry()) {
		EXPECT_FALSE(p.applies_to.empty()) << p.key;
		EXPECT_FALSE(p.description.empty()) << p.key;
		if (p.type == ParamType::Choice) {
			EXPECT_FALSE(p.choices.empty()) << p.key;
		}
		EXPECT_EQ(find_param(p.key), &p);
	}
}

TEST(Capabilities, CovariatesDroppedWithWarnings) {
	const auto b = bike(120);
	const auto arima = check_capabilities(resolved({{"kind", "arima"}}), b);
	EXPECT_FALSE(arima.use_future);
	EXPECT_FALSE(arima.warnings.empty());
	EXPECT_FALSE(arima.global);
	EXPECT_EQ(arima.sub_fits.size(), 1u);
	const auto ll = check_capabilities(resolved({{"kind", "linear_lagged"}}), b);
	EXPECT_TRUE(ll.use_future);
	EXPECT_TRUE(ll.global);
	EXPECT_TRUE(ll.warnings.empty());
	const auto nl = check_capabilities(resolved({{"kind", "nlinear"}}), b);
	EXPECT_FALSE(nl.use_future);
}

class EveryKind : public ::testing::TestWithParam<ModelKind> {};

TEST_P(EveryKind, FitForecastAndArtifactRoundTrip) {
	const int h = 14;
	const auto full = bike(300);
	const auto train = series::truncate(full, h);
	json j = {{"kind", std::string(to_string(GetParam()))}};
	if (GetParam() == ModelKind::RandomForest) {
		j["params"] = {{"n_trees", 10}};
	}
	const auto s = resolved(j, h);
	const auto trained = train_model(s, train, 42);
	const auto f = trained.forecast(train, h, 42);
	ASSERT_EQ(f.size(), 1u);
	const auto &mean = f.at(series::kAllGroupsKey).mean;
	EXPECT_EQ(mean.rows(), h);
	EXPECT_EQ(mean.cols(), 1);
	EXPECT_TRUE(mean.allFinite());

	const auto restored = TrainedModel::from_json(json::parse(trained.to_json().dump()));
	const auto g = restored.forecast(train, h, 42);
	EXPECT_TRUE(g.at(series::kAllGroupsKey).mean.isApprox(mean, 1e-12));

	// refit with the same seed is identical
	const auto again = train_model(s, train, 42).forecast(train, h, 42);
	EXPECT_EQ(again.at(series::kAllGroupsKey).mean, mean);
}

INSTANTIATE_TEST_SUITE_P(Models, EveryKind, ::testing::ValuesIn(kAllKinds),
                         [](const auto &info) { return std::string(to_string(info.param)); });

TEST(Models, ProbabilisticQuantilesOrdered) {
	const auto train = series::truncate(bike(200), 10);
	for (const char *kind : {"arima", "linear_lagged", "exp_smoothing"}) {
		const auto s = resolved({{"kind", kind}, {"params", {{"probabilistic", true}, {"n_samples", 200}}}}, 10);
		const auto t = train_model(s, train, 1);
		const auto f = t.forecast(train, 10, 5).at(series::kAllGroupsKey);
		ASSERT_TRUE(f.p10 && f.p50 && f.p90) << kind;
		EXPECT_TRUE(((f.p90->array() - f.p10->array()) >= 0).all()) << kind;
		EXPECT_TRUE(((f.p50->array() - f.p10->array()) >= 0).all()) << kind;
		EXPECT_TRUE(((f.p90->array() - f.p50->array()) >= 0).all()) << kind;
		EXPECT_GT((f.p90->array() - f.p10->array()).sum(), 0.0) << kind;
		// same seed, same samples
		EXPECT_EQ(*t.forecast(train, 10, 5).at(series::kAllGroupsKey).p90, *f.p90);
	}
}

TEST(Models, NaiveNeedsKPoints) {
	auto m = make_naive_seasonal(7);
	EXPECT_CODE(m->fit(forecaster::testing::univariate({1, 2, 3}), 0), ErrorCode::SeriesShorterThanK);
	EXPECT_CODE(make_naive_seasonal(0), ErrorCode::InvalidParameter);
}

TEST(Models, PredictBeforeFit) {
	auto m = make_model(resolved({{"kind", "linear_lagged"}}));
	EXPECT_CODE(m->predict(forecaster::testing::univariate({1, 2, 3}), 2, nullptr), ErrorCode::NotFitted);
}

TEST(Models, LinearLaggedOlsRankDeficientThrows) {
	// a constant series makes the lag column collinear with the intercept
	LinearLaggedModel m(3, 1, 0.0);
	EXPECT_CODE(m.fit(forecaster::testing::univariate(std::vector<double>(40, 2.0)), 0), ErrorCode::SingularSystem);
	// the default ridge handles it
	LinearLaggedModel r(3, 1, ParamDefaults::ridge_lambda);
	EXPECT_NO_THROW(r.fit(forecaster::testing::univariate(std::vector<double>(40, 2.0)), 0));
}

TEST(Models, WindowModelsNeedEnoughHistory) {
	LinearLaggedModel m(30, 10, 0.1);
	EXPECT_CODE(m.fit(forecaster::testing::univariate(std::vector<double>(35, 1.0)), 0), ErrorCode::TooFewWindows);
}

TEST(Models, ArimaRandomWalkRepeatsLastValue) {
	ArimaSub a(ArimaOrder{0, 1, 0});
	Vector y(30);
	for (int i = 0; i < 30; ++i) {
		y(i) = (i * 7) % 11;
	}
	a.fit(y, Matrix(30, 0), 0);
	const Vector f = a.forecast(y, Matrix(33, 0), 3, nullptr);
	EXPECT_TRUE(f.isApproxToConstant(y(29)));
}

TEST(Models, BadArtifactRejected) {
	EXPECT_CODE(TrainedModel::from_json({{"format_version", 1}}), ErrorCode::BadArtifact);
	EXPECT_CODE(TrainedModel::from_json({{"format_version", 99}}), ErrorCode::BadArtifact);
}
