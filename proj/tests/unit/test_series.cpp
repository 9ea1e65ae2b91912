#include "expect_code.hpp"

#include "forecaster/ingest/dataset.hpp"
#include "forecaster/series/bundle.hpp"
#include "forecaster/series/scaler.hpp"
#include "forecaster/series/split.hpp"
#include "forecaster/testing/synthetic.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace forecaster;
using namespace forecaster::series;

namespace {

SeriesBundle bundle_from(const std::string &csv, const json &roles) {
	const auto t = ingest::parse_csv(csv);
	const auto cols = ingest::extract_schema(t);
	return build_bundle(t, cols, ingest::validate_roles(t, cols, ingest::RoleAssignment::from_json(roles)));
}

SeriesBundle grouped() {
	const auto t = forecaster::testing::grouped_integer(40, 3);
	const auto cols = ingest::extract_schema(t);
	const json roles = {{"t", "time"}, {"store", "grouping"}, {"sales", "target"}, {"price", "past_covariate"}};
	return build_bundle(t, cols, ingest::validate_roles(t, cols, ingest::RoleAssignment::from_json(roles)));
}

} // namespace

TEST(Bundle, GroupsSortedWithCovariates) {
	const auto b = grouped();
	ASSERT_EQ(b.groups.size(), 3u);
	EXPECT_EQ(b.groups[0].group_key, "s0");
	EXPECT_EQ(b.groups[2].group_key, "s2");
	EXPECT_EQ(b.component_names, std::vector<std::string>{"sales"});
	EXPECT_EQ(b.past_cov_names, std::vector<std::string>{"price"});
	EXPECT_EQ(b.groups[1].length(), 40);
	EXPECT_EQ(b.groups[1].past_cov.cols(), 1);
	EXPECT_CODE(b.group("s9"), ErrorCode::UnknownName);
}

TEST(Bundle, ShortGapsInterpolated) {
	const auto b = bundle_from("t,y\n0,1\n1,\n2,\n3,4\n4,5\n5,6\n6,7\n7,8\n8,9\n9,10\n10,11\n11,12\n12,13\n13,14\n14,15\n"
	                           "15,16\n16,17\n17,18\n18,19\n19,20\n20,21\n",
	                           {{"t", "time"}, {"y", "target"}});
	const auto &y = b.groups[0].target;
	EXPECT_DOUBLE_EQ(y(1, 0), 2.0);
	EXPECT_DOUBLE_EQ(y(2, 0), 3.0);
}

TEST(Bundle, LongGapRejected) {
	std::string csv = "t,y\n";
	for (int i = 0; i < 100; ++i) {
		csv += std::to_string(i) + "," + ((i >= 10 && i < 17) ? "" : std::to_string(i)) + "\n";
	}
	EXPECT_CODE(bundle_from(csv, {{"t", "time"}, {"y", "target"}}), ErrorCode::ExcessiveGaps);
}

TEST(Bundle, DuplicateTimestampsAndStatics) {
	EXPECT_CODE(bundle_from("t,y\n0,1\n0,2\n1,3\n", {{"t", "time"}, {"y", "target"}}), ErrorCode::DuplicateTimestamps);
	EXPECT_CODE(bundle_from("t,g,s,y\n0,a,1,1\n1,a,2,2\n2,a,1,3\n",
	                        {{"t", "time"}, {"g", "grouping"}, {"s", "static_covariate"}, {"y", "target"}}),
	            ErrorCode::NonConstantStatic);
}

TEST(Split, Holdout) {
	const auto b = grouped();
	const auto [train, test] = holdout_split(b, 8);
	for (std::size_t i = 0; i < b.groups.size(); ++i) {
		EXPECT_EQ(train.groups[i].length(), 32);
		EXPECT_EQ(test.groups[i].length(), 8);
		EXPECT_EQ(test.groups[i].target(0, 0), b.groups[i].target(32, 0));
	}
	EXPECT_CODE(holdout_split(b, 40), ErrorCode::TestTooLong);
}

TEST(Split, ScheduleErrors) {
	EXPECT_CODE(expanding_schedule(100, 10, 5, 0), ErrorCode::BadHorizon);
	EXPECT_CODE(expanding_schedule(100, 100, 5, 5), ErrorCode::InitialTooLong);
	EXPECT_CODE(expanding_schedule(100, 0, 5, 5), ErrorCode::InitialTooLong);
	EXPECT_CODE(expanding_schedule(100, 10, 6, 5), ErrorCode::BadStride);
}

TEST(Split, ScheduleShape) {
	const auto s = expanding_schedule(20, 10, 3, 4);
	ASSERT_EQ(s.windows.size(), 4u);
	EXPECT_EQ(s.windows[0].train_end, 10);
	EXPECT_EQ(s.windows[3].forecast_start, 19);
	EXPECT_EQ(s.windows[3].forecast_end, 20);
}

TEST(Split, StitchKeepEarliestAndAverage) {
	const auto s = expanding_schedule(8, 4, 2, 3);
	std::vector<Matrix> f;
	for (const auto &w : s.windows) {
		Matrix m(w.forecast_end - w.forecast_start, 1);
		m.setConstant(static_cast<double>(w.train_end));
		f.push_back(m);
	}
	const Matrix keep = stitch(s, f);
	ASSERT_EQ(keep.rows(), 4);
	EXPECT_EQ(keep(0, 0), 4);
	EXPECT_EQ(keep(2, 0), 4); // overlap keeps the earlier window
	EXPECT_EQ(keep(3, 0), 6);
	const Matrix avg = stitch(s, f, OverlapPolicy::Average);
	EXPECT_EQ(avg(2, 0), 5);
	f.pop_back();
	EXPECT_CODE(stitch(s, f), ErrorCode::AlignmentError);
}

TEST(Scaler, UnitRangeAndInverse) {
	const auto b = grouped();
	const auto p = fit_scaler(b, ScalerScope::PerGroup);
	const auto scaled = apply_scaler(b, p);
	for (const auto &g : scaled.groups) {
		EXPECT_NEAR(g.target.minCoeff(), 0.0, 1e-12);
		EXPECT_NEAR(g.target.maxCoeff(), 1.0, 1e-12);
	}
	const auto &g = scaled.groups[1];
	std::vector<double> v(g.target.data(), g.target.data() + g.length());
	const auto back = invert_values(v, "sales", "s1", p);
	for (Eigen::Index i = 0; i < g.length(); ++i) {
		EXPECT_NEAR(back[i], b.groups[1].target(i, 0), 1e-9);
	}
	EXPECT_EQ(ScalerParams::from_json(p.to_json()).to_json(), p.to_json());
}

TEST(Scaler, GlobalScopeSharesRange) {
	const auto b = grouped();
	const auto scaled = apply_scaler(b, fit_scaler(b, ScalerScope::Global));
	double lo = 1e9, hi = -1e9;
	for (const auto &g : scaled.groups) {
		lo = std::min(lo, g.target.minCoeff());
		hi = std::max(hi, g.target.maxCoeff());
	}
	EXPECT_NEAR(lo, 0.0, 1e-12);
	EXPECT_NEAR(hi, 1.0, 1e-12);
	// the lowest-level group does not reach 1 on its own
	EXPECT_LT(scaled.groups[0].target.maxCoeff(), 1.0);
}

TEST(Scaler, ConstantSeriesIsDegenerate) {
	const auto b = forecaster::testing::univariate({5, 5, 5, 5});
	const auto p = fit_scaler(b, ScalerScope::PerGroup);
	const auto scaled = apply_scaler(b, p);
	EXPECT_TRUE(scaled.groups[0].target.allFinite());
	const std::vector<double> v(4, scaled.groups[0].target(0, 0));
	for (double x : invert_values(v, "y", kAllGroupsKey, p)) {
		EXPECT_DOUBLE_EQ(x, 5.0);
	}
}

TEST(Scaler, RoundTripProperty) {
	std::mt19937_64 rng(9);
	std::normal_distribution<double> n(0, 100);
	for (int trial = 0; trial < 100; ++trial) {
		std::vector<double> y(10 + trial);
		for (auto &v : y) {
			v = n(rng);
		}
		const auto b = forecaster::testing::univariate(y);
		const auto p = fit_scaler(b, ScalerScope::PerGroup);
		const Matrix s = apply_scaler(b, p).groups[0].target;
		const auto back = invert_values(std::vector<double>(s.data(), s.data() + s.rows()), "y", kAllGroupsKey, p);
		for (std::size_t i = 0; i < y.size(); ++i) {
			ASSERT_NEAR(back[i], y[i], 1e-9 * std::max(1.0, std::abs(y[i])));
		}
	}
}
