#pragma once

#include "forecaster/models/model.hpp"
#include "forecaster/models/nelder_mead.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace forecaster::models {

struct ArimaOrder {
	int p = 1;
	int d = 1;
	int q = 1;
};

namespace detail {

inline Vector difference(const Vector &y, int d) {
	Vector w = y;
	for (int k = 0; k < d; ++k) {
		if (w.size() < 1) {
			break;
		}
		Vector next(std::max<Eigen::Index>(0, w.size() - 1));
		for (Eigen::Index t = 1; t < w.size(); ++t) {
			next(t - 1) = w(t) - w(t - 1);
		}
		w = std::move(next);
	}
	return w;
}

inline Matrix difference_cols(const Matrix &x, int d) {
	Matrix out(std::max<Eigen::Index>(0, x.rows() - d), x.cols());
	for (Eigen::Index c = 0; c < x.cols(); ++c) {
		out.col(c) = difference(x.col(c), d);
	}
	return out;
}

// CSS residuals e_t for t >= p; e_t = 0 before that.
inline std::vector<double> arma_residuals(const Vector &u, const Vector &phi, const Vector &theta) {
	const Eigen::Index n = u.size(), p = phi.size(), q = theta.size();
	std::vector<double> e(static_cast<std::size_t>(n), 0.0);
	for (Eigen::Index t = p; t < n; ++t) {
		double pred = 0.0;
		for (Eigen::Index i = 0; i < p; ++i) {
			pred += phi(i) * u(t - 1 - i);
		}
		for (Eigen::Index j = 0; j < q && t - 1 - j >= 0; ++j) {
			pred += theta(j) * e[static_cast<std::size_t>(t - 1 - j)];
		}
		e[static_cast<std::size_t>(t)] = u(t) - pred;
	}
	return e;
}

} // namespace detail

// ARIMA(p,d,q) with optional exogenous regressors, fitted by conditional sum
// of squares. The regression on exogenous terms is done on the differenced
// series by OLS (with an intercept only when d == 0), then the AR/MA
// coefficients are found by Nelder-Mead on the residuals.
class ArimaSub {
public:
	explicit ArimaSub(ArimaOrder order = {}) : order_(order) {
		if (order.p < 0 || order.d < 0 || order.q < 0) {
			throw Error(ErrorCode::InvalidParameter, "ARIMA orders must be >= 0", "p");
		}
	}

	Eigen::Index min_length() const {
		return order_.p + order_.d + order_.q + 20;
	}

	void fit(const Vector &y, const Matrix &exog, std::uint64_t) {
		if (y.size() < min_length()) {
			throw Error(ErrorCode::TooShort,
			            "ARIMA(" + std::to_string(order_.p) + "," + std::to_string(order_.d) + "," +
			                std::to_string(order_.q) + ") needs at least " + std::to_string(min_length()) +
			                " points, got " + std::to_string(y.size()),
			            "p");
		}
		const Vector w = detail::difference(y, order_.d);
		const Matrix z = design(exog, w.size());
		if (z.cols() > 0) {
			beta_ = z.completeOrthogonalDecomposition().solve(w);
		} else {
			beta_.resize(0);
		}
		const Vector u = z.cols() > 0 ? Vector(w - z * beta_) : w;

		const int p = order_.p, q = order_.q;
		Vector start = Vector::Zero(p + q);
		if (p > 0 && u.size() > p) {
			// OLS on lags as a starting point for phi
			Matrix lags(u.size() - p, p);
			for (Eigen::Index t = p; t < u.size(); ++t) {
				for (int i = 0; i < p; ++i) {
					lags(t - p, i) = u(t - 1 - i);
				}
			}
			start.head(p) = lags.completeOrthogonalDecomposition().solve(u.tail(u.size() - p));
		}
		auto loss = [&](const Vector &x) {
			const auto e = detail::arma_residuals(u, x.head(p), x.tail(q));
			double ss = 0.0;
			for (double v : e) {
				ss += v * v;
			}
			return ss;
		};
		Vector x = start;
		if (p + q > 0) {
			NelderMeadOptions opt;
			opt.initial_step = 0.1;
			opt.max_evaluations = 2000 * (p + q + 1);
			x = nelder_mead(loss, start, opt).x;
		}
		const double f = loss(x);
		if (!std::isfinite(f)) {
			throw Error(ErrorCode::NonFiniteLoss, "ARIMA optimizer diverged");
		}
		phi_ = x.head(p);
		theta_ = x.tail(q);
		auto e = detail::arma_residuals(u, phi_, theta_);
		e.erase(e.begin(), e.begin() + std::min<std::ptrdiff_t>(p, static_cast<std::ptrdiff_t>(e.size())));
		sigma_ = detail::residual_std(e);
		n_exog_ = exog.cols();
		fitted_ = true;
	}

	Vector forecast(const Vector &y, const Matrix &exog, Eigen::Index h, Rng *noise) const {
		if (!fitted_) {
			throw Error(ErrorCode::NotFitted, "ARIMA has not been fitted");
		}
		if (exog.cols() != n_exog_) {
			throw Error(ErrorCode::AlignmentError, "ARIMA exogenous column count changed since fitting");
		}
		const int d = order_.d;
		if (y.size() <= d) {
			throw Error(ErrorCode::TooShort, "context too short for differencing", "d");
		}
		// levels[k] = k-times differenced context
		std::vector<std::vector<double>> levels;
		Vector cur = y;
		for (int k = 0; k <= d; ++k) {
			levels.emplace_back(cur.data(), cur.data() + cur.size());
			if (k < d) {
				cur = detail::difference(cur, 1);
			}
		}
		const Vector w = cur;
		const Matrix z = design(exog, w.size());
		std::vector<double> u(static_cast<std::size_t>(w.size()));
		for (Eigen::Index t = 0; t < w.size(); ++t) {
			u[static_cast<std::size_t>(t)] = w(t) - (z.cols() > 0 ? z.row(t).dot(beta_) : 0.0);
		}
		std::vector<double> e =
		    detail::arma_residuals(Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(u.size())), phi_, theta_);

		// Regression term over the horizon: with d == 0 the exogenous values
		// are held at their last observation; once differenced they contribute 0.
		double reg_future = 0.0;
		if (d == 0 && beta_.size() > 0) {
			reg_future = beta_(0);
			for (Eigen::Index c = 0; c < n_exog_; ++c) {
				reg_future += beta_(1 + c) * exog(exog.rows() - 1, c);
			}
		}

		Vector out(h);
		for (Eigen::Index step = 0; step < h; ++step) {
			const std::size_t n = u.size();
			double un = 0.0;
			for (Eigen::Index i = 0; i < phi_.size(); ++i) {
				if (n >= static_cast<std::size_t>(i + 1)) {
					un += phi_(i) * u[n - 1 - static_cast<std::size_t>(i)];
				}
			}
			for (Eigen::Index j = 0; j < theta_.size(); ++j) {
				if (n >= static_cast<std::size_t>(j + 1)) {
					un += theta_(j) * e[n - 1 - static_cast<std::size_t>(j)];
				}
			}
			const double shock = noise ? sigma_ * noise->normal() : 0.0;
			un += shock;
			u.push_back(un);
			e.push_back(shock);
			// integrate back up through the differencing levels
			double v = un + reg_future;
			levels[static_cast<std::size_t>(d)].push_back(v);
			for (int k = d - 1; k >= 0; --k) {
				auto &lv = levels[static_cast<std::size_t>(k)];
				v = lv.back() + v;
				lv.push_back(v);
			}
			out(step) = v;
		}
		return out;
	}

	const Vector &phi() const {
		return phi_;
	}
	const Vector &theta() const {
		return theta_;
	}
	const Vector &beta() const {
		return beta_;
	}
	double sigma() const {
		return sigma_;
	}
	ArimaOrder order() const {
		return order_;
	}

	json to_json() const {
		return {{"p", order_.p},
		        {"d", order_.d},
		        {"q", order_.q},
		        {"phi", detail::vector_to_json(phi_)},
		        {"theta", detail::vector_to_json(theta_)},
		        {"beta", detail::vector_to_json(beta_)},
		        {"n_exog", n_exog_},
		        {"sigma", sigma_}};
	}

	static ArimaSub from_json(const json &j) {
		ArimaSub s({j.at("p").get<int>(), j.at("d").get<int>(), j.at("q").get<int>()});
		s.phi_ = detail::vector_from_json(j.at("phi"));
		s.theta_ = detail::vector_from_json(j.at("theta"));
		s.beta_ = detail::vector_from_json(j.at("beta"));
		s.n_exog_ = j.at("n_exog").get<Eigen::Index>();
		s.sigma_ = j.at("sigma").get<double>();
		s.fitted_ = true;
		return s;
	}

private:
	// [1 (only when d == 0) | differenced exogenous columns], last `rows` rows
	Matrix design(const Matrix &exog, Eigen::Index rows) const {
		const Matrix zx = exog.cols() > 0 ? detail::difference_cols(exog, order_.d) : Matrix(rows, 0);
		const Eigen::Index extra = order_.d == 0 ? 1 : 0;
		Matrix z(rows, extra + zx.cols());
		if (extra) {
			z.col(0).setOnes();
		}
		if (zx.cols() > 0) {
			z.rightCols(zx.cols()) = zx.bottomRows(rows);
		}
		return z;
	}

	ArimaOrder order_;
	Vector phi_, theta_, beta_;
	Eigen::Index n_exog_ = 0;
	double sigma_ = 0.0;
	bool fitted_ = false;
};

using ArimaModel = LocalModel<ArimaSub, ModelKind::Arima>;

inline std::unique_ptr<Model> make_arima(ArimaOrder order) {
	ArimaSub{order};
	return std::make_unique<ArimaModel>([order] { return ArimaSub(order); });
}

} // namespace forecaster::models
