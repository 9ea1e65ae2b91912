#pragma once

#include "forecaster/models/model.hpp"
#include "forecaster/models/nelder_mead.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace forecaster::models {

enum class Trend { None, Additive, Damped };

inline std::string to_string(Trend t) {
	switch (t) {
	case Trend::None: return "none";
	case Trend::Additive: return "additive";
	case Trend::Damped: return "damped";
	}
	return "none";
}

inline Trend parse_trend(const std::string &s) {
	if (s == "none") {
		return Trend::None;
	}
	if (s == "additive") {
		return Trend::Additive;
	}
	if (s == "damped") {
		return Trend::Damped;
	}
	throw Error(ErrorCode::InvalidParameter, "unknown trend '" + s + "'", "trend");
}

struct HoltWintersParams {
	double alpha = 0.3;
	double beta = 0.1;
	double gamma = 0.1;
	double phi = 1.0;
};

namespace detail {

// Level/trend/seasonal state of additive Holt-Winters.
struct HwState {
	double level = 0.0;
	double trend = 0.0;
	std::vector<double> season; // ring buffer, season[t % K] is s_{t-K} when stepping t
	Eigen::Index t = 0;         // index of the next observation
};

// Classical start from the first two cycles. The first observation stepped
// afterwards is t = K (t = 1 when K == 1).
inline HwState hw_initial(const Vector &y, int K, Trend trend) {
	HwState s;
	const double k = K;
	double m1 = 0.0, m2 = 0.0;
	for (int i = 0; i < K; ++i) {
		m1 += y(i);
		m2 += y(K + i);
	}
	m1 /= k;
	m2 /= k;
	const double b0 = trend == Trend::None ? 0.0 : (m2 - m1) / k;
	s.season.assign(static_cast<std::size_t>(K), 0.0);
	if (K > 1) {
		double mean = 0.0;
		for (int i = 0; i < K; ++i) {
			const double off = b0 * (i - (k - 1.0) / 2.0);
			const double a = y(i) - (m1 + off);
			const double b = y(K + i) - (m2 + off);
			s.season[static_cast<std::size_t>(i)] = 0.5 * (a + b);
			mean += s.season[static_cast<std::size_t>(i)];
		}
		mean /= k;
		for (auto &v : s.season) {
			v -= mean;
		}
		s.level = m1 + b0 * (k - 1.0) / 2.0;
	} else {
		s.level = y(0);
	}
	s.trend = b0;
	s.t = K;
	return s;
}

inline double hw_one_step(const HwState &s, int K, double phi) {
	return s.level + phi * s.trend + (K > 1 ? s.season[static_cast<std::size_t>(s.t % K)] : 0.0);
}

inline void hw_update(HwState &s, double y, int K, Trend trend, const HoltWintersParams &p) {
	const double phi = trend == Trend::Damped ? p.phi : 1.0;
	const double s_old = K > 1 ? s.season[static_cast<std::size_t>(s.t % K)] : 0.0;
	const double prev_level = s.level;
	s.level = p.alpha * (y - s_old) + (1.0 - p.alpha) * (prev_level + phi * s.trend);
	if (trend != Trend::None) {
		s.trend = p.beta * (s.level - prev_level) + (1.0 - p.beta) * phi * s.trend;
	}
	if (K > 1) {
		s.season[static_cast<std::size_t>(s.t % K)] = p.gamma * (y - s.level) + (1.0 - p.gamma) * s_old;
	}
	++s.t;
}

} // namespace detail

// Additive Holt-Winters with optional (damped) trend. Smoothing parameters
// are fitted by bounded Nelder-Mead on the one-step SSE; predict re-runs the
// filter over the context with those parameters.
class ExpSmoothingSub {
public:
	ExpSmoothingSub(int K = 1, Trend trend = Trend::Additive) : K_(K), trend_(trend) {
		if (K < 1) {
			throw Error(ErrorCode::InvalidParameter, "seasonality must be >= 1", "seasonality");
		}
	}

	Eigen::Index min_length() const {
		return std::max(2 * K_, 3);
	}

	void fit(const Vector &y, const Matrix &, std::uint64_t) {
		check(y);
		// parameter vector layout: alpha [beta] [gamma] [phi]
		const bool use_beta = trend_ != Trend::None, use_gamma = K_ > 1, use_phi = trend_ == Trend::Damped;
		const Eigen::Index n = 1 + use_beta + use_gamma + use_phi;
		auto unpack = [&](const Vector &x) {
			HoltWintersParams p;
			Eigen::Index i = 0;
			p.alpha = x(i++);
			p.beta = use_beta ? x(i++) : 0.0;
			p.gamma = use_gamma ? x(i++) : 0.0;
			p.phi = use_phi ? x(i++) : 1.0;
			return p;
		};
		auto sse = [&](const Vector &x) {
			const HoltWintersParams p = unpack(x);
			auto s = detail::hw_initial(y, K_, trend_);
			const double phi = trend_ == Trend::Damped ? p.phi : 1.0;
			double total = 0.0;
			for (Eigen::Index t = s.t; t < y.size(); ++t) {
				const double e = y(t) - detail::hw_one_step(s, K_, phi);
				total += e * e;
				detail::hw_update(s, y(t), K_, trend_, p);
			}
			return total;
		};
		Vector x0(n);
		{
			Eigen::Index i = 0;
			x0(i++) = 0.3;
			if (use_beta) {
				x0(i++) = 0.1;
			}
			if (use_gamma) {
				x0(i++) = 0.1;
			}
			if (use_phi) {
				x0(i++) = 0.9;
			}
		}
		NelderMeadOptions opt;
		opt.initial_step = 0.2;
		opt.max_evaluations = 1000 * static_cast<int>(n + 1);
		const Box box{Vector::Zero(n), Vector::Ones(n)};
		const auto res = nelder_mead(sse, x0, opt, box);
		if (!std::isfinite(res.f)) {
			throw Error(ErrorCode::NonFiniteLoss, "exponential smoothing fit diverged");
		}
		params_ = unpack(res.x);
		const Eigen::Index m = y.size() - detail::hw_initial(y, K_, trend_).t;
		sigma_ = m > 0 ? std::sqrt(res.f / static_cast<double>(m)) : 0.0;
		fitted_ = true;
	}

	Vector forecast(const Vector &y, const Matrix &, Eigen::Index h, Rng *noise) const {
		if (!fitted_) {
			throw Error(ErrorCode::NotFitted, "exponential smoothing has not been fitted");
		}
		check(y);
		auto s = detail::hw_initial(y, K_, trend_);
		for (Eigen::Index t = s.t; t < y.size(); ++t) {
			detail::hw_update(s, y(t), K_, trend_, params_);
		}
		const double phi = trend_ == Trend::Damped ? params_.phi : 1.0;
		Vector out(h);
		for (Eigen::Index step = 0; step < h; ++step) {
			const double shock = noise ? sigma_ * noise->normal() : 0.0;
			const double v = detail::hw_one_step(s, K_, phi) + shock;
			out(step) = v;
			detail::hw_update(s, v, K_, trend_, params_);
		}
		return out;
	}

	const HoltWintersParams &params() const {
		return params_;
	}
	double sigma() const {
		return sigma_;
	}

	json to_json() const {
		return {{"seasonality", K_},     {"trend", to_string(trend_)}, {"alpha", params_.alpha},
		        {"beta", params_.beta},  {"gamma", params_.gamma},     {"phi", params_.phi},
		        {"sigma", sigma_}};
	}

	static ExpSmoothingSub from_json(const json &j) {
		ExpSmoothingSub s(j.at("seasonality").get<int>(), parse_trend(j.at("trend").get<std::string>()));
		s.params_ = {j.at("alpha").get<double>(), j.at("beta").get<double>(), j.at("gamma").get<double>(),
		             j.at("phi").get<double>()};
		s.sigma_ = j.at("sigma").get<double>();
		s.fitted_ = true;
		return s;
	}

private:
	void check(const Vector &y) const {
		if (y.size() < min_length()) {
			throw Error(ErrorCode::TooShort,
			            "exponential smoothing needs at least " + std::to_string(min_length()) + " points, got " +
			                std::to_string(y.size()),
			            "seasonality");
		}
	}

	int K_;
	Trend trend_;
	HoltWintersParams params_;
	double sigma_ = 0.0;
	bool fitted_ = false;
};

using ExpSmoothingModel = LocalModel<ExpSmoothingSub, ModelKind::ExpSmoothing>;

inline std::unique_ptr<Model> make_exp_smoothing(int K, Trend trend) {
	ExpSmoothingSub{K, trend};
	return std::make_unique<ExpSmoothingModel>([K, trend] { return ExpSmoothingSub(K, trend); });
}

} // namespace forecaster::models
