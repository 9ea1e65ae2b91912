#include "forecaster/metrics/metrics.hpp"
#include "forecaster/models/naive.hpp"
#include "forecaster/testing/synthetic.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace forecaster;
using metrics::MetricKind;
using metrics::UndefinedReason;

namespace {

metrics::MetricValue m(MetricKind k, std::vector<double> p, std::vector<double> a, std::vector<double> train = {},
                       int K = 1) {
	return metrics::compute_metric(k, p, a, train, K);
}

} // namespace

TEST(Metrics, HandComputedExample) {
	const std::vector<double> p{0.5, 0.5}, a{0.0, 1.0};
	EXPECT_DOUBLE_EQ(*m(MetricKind::MAE, p, a).value, 0.5);
	EXPECT_DOUBLE_EQ(*m(MetricKind::MSE, p, a).value, 0.25);
	EXPECT_DOUBLE_EQ(*m(MetricKind::RMSE, p, a).value, 0.5);
	const auto mape = m(MetricKind::MAPE, p, a);
	EXPECT_FALSE(mape.defined());
	EXPECT_EQ(*mape.reason, UndefinedReason::ZerosInActuals);
}

TEST(Metrics, PerfectForecastIsZero) {
	const std::vector<double> y{3, 1, 4, 1, 5};
	for (auto k : metrics::kAllMetrics) {
		const auto v = m(k, y, y, {1, 2, 3, 4, 5, 6}, 2);
		ASSERT_TRUE(v.defined()) << metrics::to_string(k);
		EXPECT_EQ(*v.value, 0.0);
	}
}

TEST(Metrics, MaseDenominatorByHand) {
	const auto v = m(MetricKind::MASE, {7, 7}, {7, 8}, {1, 2, 3, 4, 5, 6}, 3);
	ASSERT_TRUE(v.defined());
	EXPECT_NEAR(*v.value, 0.5 / 3.0, 1e-15);
}

TEST(Metrics, MaseUndefinedWhenTrainTooShortOrFlat) {
	EXPECT_EQ(*m(MetricKind::MASE, {1}, {2}, {1, 2, 3}, 3).reason, UndefinedReason::SeasonalLengthMismatch);
	EXPECT_EQ(*m(MetricKind::MASE, {1}, {2}, {4, 4, 4, 4}, 1).reason, UndefinedReason::SeasonalLengthMismatch);
}

TEST(Metrics, SmapeUndefinedOnlyWhenBothZero) {
	EXPECT_TRUE(m(MetricKind::SMAPE, {1, 0}, {0, 1}).defined());
	EXPECT_FALSE(m(MetricKind::SMAPE, {1, 0}, {1, 0}).defined());
}

TEST(Metrics, PercentScale) {
	EXPECT_NEAR(*m(MetricKind::MAPE, {110}, {100}).value, 10.0, 1e-12);
}

TEST(Metrics, LengthErrors) {
	EXPECT_THROW(m(MetricKind::MAE, {1, 2}, {1}), Error);
	try {
		m(MetricKind::MAE, {}, {});
		FAIL();
	} catch (const Error &e) {
		EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
	}
}

TEST(Metrics, PropertiesOnRandomInputs) {
	std::mt19937_64 rng(5);
	std::uniform_real_distribution<double> u(-50, 50);
	for (int trial = 0; trial < 300; ++trial) {
		const int n = 1 + trial % 37;
		std::vector<double> p(n), a(n), train(40);
		for (int i = 0; i < n; ++i) {
			p[i] = u(rng);
			a[i] = u(rng);
		}
		for (auto &v : train) {
			v = u(rng);
		}
		const auto s = metrics::compute_all(p, a, train, 4);
		for (const auto &[k, v] : s) {
			if (v.defined()) {
				EXPECT_GE(*v.value, 0.0);
			}
		}
		EXPECT_NEAR(*s.at(MetricKind::RMSE).value, std::sqrt(*s.at(MetricKind::MSE).value), 1e-9);
		EXPECT_LE(*s.at(MetricKind::MAE).value, *s.at(MetricKind::RMSE).value + 1e-12);

		// permutation invariance of the pointwise-averaged metrics
		std::vector<std::size_t> idx(n);
		std::iota(idx.begin(), idx.end(), 0);
		std::shuffle(idx.begin(), idx.end(), rng);
		std::vector<double> ps(n), as(n);
		for (int i = 0; i < n; ++i) {
			ps[i] = p[idx[i]];
			as[i] = a[idx[i]];
		}
		const auto t = metrics::compute_all(ps, as, train, 4);
		for (auto k : {MetricKind::MAE, MetricKind::MSE, MetricKind::RMSE}) {
			EXPECT_NEAR(*s.at(k).value, *t.at(k).value, 1e-9);
		}
	}
}

TEST(Metrics, NaiveInSampleMaseIsOne) {
	// the seasonal-naive one-step in-sample forecasts are exactly the MASE denominator
	std::mt19937_64 rng(2);
	std::uniform_real_distribution<double> u(0, 10);
	std::vector<double> y(50);
	for (auto &v : y) {
		v = u(rng);
	}
	const int K = 5;
	std::vector<double> pred(y.begin(), y.end() - K), actual(y.begin() + K, y.end());
	EXPECT_NEAR(*m(MetricKind::MASE, pred, actual, y, K).value, 1.0, 1e-12);
}

TEST(Metrics, AggregateSkipsUndefined) {
	using metrics::MetricValue;
	const auto agg = metrics::aggregate_cells(
	    {MetricValue::of(2.0), MetricValue::undefined(UndefinedReason::ZerosInActuals), MetricValue::of(4.0)});
	EXPECT_DOUBLE_EQ(*agg.value, 3.0);
	const auto none = metrics::aggregate_cells({MetricValue::undefined(UndefinedReason::ZerosInActuals)});
	EXPECT_FALSE(none.defined());
	EXPECT_EQ(*none.reason, UndefinedReason::ZerosInActuals);
}

TEST(Metrics, UndefinedSerializesAsNullWithReason) {
	const auto j = metrics::MetricValue::undefined(UndefinedReason::ZerosInActuals).to_json();
	EXPECT_TRUE(j["value"].is_null());
	EXPECT_EQ(j["reason"], "zeros_in_actuals");
}

TEST(MetricsReport, NormalizedVersusDenormalized) {
	// min = 0 makes min-max scaling multiplicative, so MAPE/SMAPE/MASE agree
	// across scales and MAE scales by the range
	std::vector<double> train{0, 4, 8, 2, 6, 10, 3, 7};
	std::vector<double> test{5, 9, 1, 6};
	const auto train_b = forecaster::testing::univariate(train);
	const auto test_b = forecaster::testing::univariate(test);
	const auto scaler = series::fit_scaler(train_b, series::ScalerScope::PerGroup);
	series::Matrix pred(4, 1);
	pred << 4.5, 8.0, 2.0, 6.5;
	const auto r = metrics::compute_report({{series::kAllGroupsKey, pred}}, test_b, train_b, scaler, 3);
	const auto &n = r.aggregate.normalized;
	const auto &d = r.aggregate.denormalized;
	for (auto k : {MetricKind::MAPE, MetricKind::SMAPE, MetricKind::MASE}) {
		EXPECT_NEAR(*n.at(k).value, *d.at(k).value, 1e-9) << metrics::to_string(k);
	}
	EXPECT_NEAR(*d.at(MetricKind::MAE).value, *n.at(MetricKind::MAE).value * 10.0, 1e-9);
	// one cell: aggregate equals the cell
	EXPECT_EQ(*r.per_group.at(series::kAllGroupsKey).at("y").denormalized.at(MetricKind::MAE).value,
	          *d.at(MetricKind::MAE).value);
}

TEST(MetricsReport, AlignmentError) {
	const auto b = forecaster::testing::univariate({1, 2, 3, 4});
	const auto scaler = series::fit_scaler(b, series::ScalerScope::PerGroup);
	series::Matrix wrong(3, 1);
	wrong.setZero();
	EXPECT_THROW(metrics::compute_report({{series::kAllGroupsKey, wrong}}, b, b, scaler, 1), Error);
	EXPECT_THROW(metrics::compute_report({{"other", wrong}}, b, b, scaler, 1), Error);
}
