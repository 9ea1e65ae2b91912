#pragma once

#include "forecaster/models/model.hpp"

namespace forecaster::models {

// Repeats the last K observations cyclically.
class NaiveSeasonalSub {
public:
	explicit NaiveSeasonalSub(int K = 1) : K_(K) {
		if (K < 1) {
			throw Error(ErrorCode::InvalidParameter, "seasonality must be >= 1", "seasonality");
		}
	}

	void fit(const Vector &y, const Matrix &, std::uint64_t) {
		check(y);
	}

	Vector forecast(const Vector &y, const Matrix &, Eigen::Index h, Rng *) const {
		check(y);
		const Eigen::Index T = y.size();
		Vector out(h);
		for (Eigen::Index t = 0; t < h; ++t) {
			out(t) = y(T - K_ + t % K_);
		}
		return out;
	}

	int seasonality() const {
		return K_;
	}

	json to_json() const {
		return {{"seasonality", K_}};
	}
	static NaiveSeasonalSub from_json(const json &j) {
		return NaiveSeasonalSub(j.at("seasonality").get<int>());
	}

private:
	void check(const Vector &y) const {
		if (y.size() < K_) {
			throw Error(ErrorCode::SeriesShorterThanK,
			            "series has " + std::to_string(y.size()) + " points, seasonality is " + std::to_string(K_),
			            "seasonality");
		}
	}

	int K_;
};

using NaiveSeasonalModel = LocalModel<NaiveSeasonalSub, ModelKind::NaiveSeasonal>;

inline std::unique_ptr<Model> make_naive_seasonal(int K) {
	NaiveSeasonalSub{K}; // validate eagerly
	return std::make_unique<NaiveSeasonalModel>([K] { return NaiveSeasonalSub(K); });
}

// Convenience for a single series.
inline Vector naive_seasonal_forecast(const Vector &train, int K, Eigen::Index h) {
	NaiveSeasonalSub s(K);
	s.fit(train, Matrix(), 0);
	return s.forecast(train, Matrix(), h, nullptr);
}

} // namespace forecaster::models
