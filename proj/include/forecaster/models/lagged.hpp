#pragma once

#include "forecaster/models/model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace forecaster::models {

// One training/prediction window. Output rows start at index t of the group;
// inputs are the L_in rows before it.
struct LagWindow {
	Matrix target_in;  // L_in x C
	Matrix past_in;    // L_in x P
	Matrix future_out; // L_out x F
	Vector statics;    // S
	Matrix target_out; // L_out x C (training only)
};

// Solves min ||X W - Y||^2 + lambda ||W_penalized||^2. Columns listed in
// `unpenalized` get no ridge term. lambda == 0 uses pivoted QR and rejects a
// rank-deficient X unless `min_norm` is set, in which case the
// minimum-norm least-squares solution is returned.
inline Matrix ridge_solve(const Matrix &X, const Matrix &Y, double lambda, const std::vector<Eigen::Index> &unpenalized,
                          bool min_norm = false) {
	if (lambda == 0.0) {
		if (min_norm) {
			return X.completeOrthogonalDecomposition().solve(Y);
		}
		Eigen::ColPivHouseholderQR<Matrix> qr(X);
		if (qr.rank() < X.cols()) {
			throw Error(ErrorCode::SingularSystem,
			            "design matrix is rank-deficient (rank " + std::to_string(qr.rank()) + " of " +
			                std::to_string(X.cols()) + "); set ridge_lambda > 0",
			            "ridge_lambda");
		}
		return qr.solve(Y);
	}
	Matrix A = X.transpose() * X;
	Vector pen = Vector::Constant(X.cols(), lambda);
	for (auto i : unpenalized) {
		pen(i) = 0.0;
	}
	A.diagonal() += pen;
	Eigen::LDLT<Matrix> ldlt(A);
	if (ldlt.info() != Eigen::Success) {
		throw Error(ErrorCode::SingularSystem, "ridge normal equations could not be factorized", "ridge_lambda");
	}
	Matrix W = ldlt.solve(X.transpose() * Y);
	if (!W.allFinite()) {
		throw Error(ErrorCode::SingularSystem, "ridge solution is not finite", "ridge_lambda");
	}
	return W;
}

// Global model over fixed-length windows. Subclasses map one window to an
// L_out x C block; horizons longer than L_out are chained, feeding earlier
// blocks back as inputs. Past covariates beyond the context are held at
// their last value; future covariates must cover the horizon.
class WindowModel : public Model {
public:
	WindowModel(Eigen::Index input_chunk, Eigen::Index output_chunk) : L_in_(input_chunk), L_out_(output_chunk) {
		if (L_in_ < 1) {
			throw Error(ErrorCode::InvalidParameter, "input_chunk must be >= 1", "input_chunk");
		}
		if (L_out_ < 1) {
			throw Error(ErrorCode::InvalidParameter, "output_chunk must be >= 1", "output_chunk");
		}
	}

	Eigen::Index input_chunk() const {
		return L_in_;
	}
	Eigen::Index output_chunk() const {
		return L_out_;
	}
	bool fitted() const override {
		return fitted_;
	}
	const Vector &sigma() const {
		return sigma_;
	}

	void fit(const SeriesBundle &train, std::uint64_t seed) override {
		n_comp_ = static_cast<Eigen::Index>(train.component_names.size());
		n_past_ = static_cast<Eigen::Index>(train.past_cov_names.size());
		n_future_ = static_cast<Eigen::Index>(train.future_cov_names.size());
		n_static_ = static_cast<Eigen::Index>(train.static_cov_names.size());
		std::vector<LagWindow> windows;
		for (const auto &g : train.groups) {
			for (Eigen::Index t = L_in_; t + L_out_ <= g.length(); ++t) {
				LagWindow w = window_at(g.target, g.past_cov, g.future_cov, g.static_cov, t, g.group_key);
				w.target_out = g.target.middleRows(t, L_out_);
				windows.push_back(std::move(w));
			}
		}
		if (windows.empty()) {
			throw Error(ErrorCode::TooFewWindows,
			            "series are too short for input_chunk=" + std::to_string(L_in_) +
			                " and output_chunk=" + std::to_string(L_out_),
			            "input_chunk");
		}
		fit_windows(windows, seed);
		fitted_ = true;

		Vector ss = Vector::Zero(n_comp_);
		double count = 0.0;
		for (const auto &w : windows) {
			const Matrix r = predict_block(w) - w.target_out;
			ss += r.colwise().squaredNorm().transpose();
			count += static_cast<double>(r.rows());
		}
		sigma_ = (ss / count).cwiseSqrt();
	}

	GroupMatrices predict(const SeriesBundle &context, Eigen::Index horizon, Rng *noise) const override {
		if (!fitted_) {
			throw Error(ErrorCode::NotFitted, std::string(to_string(kind())) + " has not been fitted");
		}
		check_schema(context);
		GroupMatrices out;
		for (const auto &g : context.groups) {
			const Eigen::Index T = g.length();
			if (T < L_in_) {
				throw Error(ErrorCode::TooShort,
				            "group '" + g.group_key + "' has " + std::to_string(T) + " points, input_chunk is " +
				                std::to_string(L_in_),
				            "input_chunk");
			}
			const Eigen::Index blocks = (horizon + L_out_ - 1) / L_out_;
			const Eigen::Index total = T + blocks * L_out_;
			if (n_future_ > 0 && g.future_cov.rows() < total) {
				if (g.future_cov.rows() < T + horizon) {
					throw Error(ErrorCode::AlignmentError,
					            "future covariates for group '" + g.group_key + "' end before the forecast horizon",
					            "future_covariate");
				}
			}
			Matrix target(total, n_comp_);
			target.topRows(T) = g.target;
			Matrix past(total, n_past_);
			past.topRows(T) = g.past_cov;
			for (Eigen::Index r = T; r < total; ++r) {
				past.row(r) = g.past_cov.row(T - 1);
			}
			Matrix future(total, n_future_);
			if (n_future_ > 0) {
				const Eigen::Index avail = std::min(total, g.future_cov.rows());
				future.topRows(avail) = g.future_cov.topRows(avail);
				// rows past the requested horizon only feed the discarded tail of the last block
				for (Eigen::Index r = avail; r < total; ++r) {
					future.row(r) = g.future_cov.row(avail - 1);
				}
			}
			for (Eigen::Index b = 0; b < blocks; ++b) {
				const Eigen::Index t = T + b * L_out_;
				const LagWindow w = window_at(target, past, future, g.static_cov, t, g.group_key);
				Matrix block = predict_block(w);
				if (noise) {
					for (Eigen::Index h = 0; h < L_out_; ++h) {
						for (Eigen::Index c = 0; c < n_comp_; ++c) {
							block(h, c) += sigma_(c) * noise->normal();
						}
					}
				}
				target.middleRows(t, L_out_) = block;
			}
			out.emplace(g.group_key, target.middleRows(T, horizon));
		}
		return out;
	}

	json payload() const override {
		return {{"input_chunk", L_in_},    {"output_chunk", L_out_},   {"n_components", n_comp_},
		        {"n_past", n_past_},       {"n_future", n_future_},    {"n_static", n_static_},
		        {"sigma", detail::vector_to_json(sigma_)}, {"state", state_json()}};
	}

	void load_payload(const json &j) override {
		L_in_ = j.at("input_chunk").get<Eigen::Index>();
		L_out_ = j.at("output_chunk").get<Eigen::Index>();
		n_comp_ = j.at("n_components").get<Eigen::Index>();
		n_past_ = j.at("n_past").get<Eigen::Index>();
		n_future_ = j.at("n_future").get<Eigen::Index>();
		n_static_ = j.at("n_static").get<Eigen::Index>();
		sigma_ = detail::vector_from_json(j.at("sigma"));
		load_state(j.at("state"));
		fitted_ = true;
	}

protected:
	virtual void fit_windows(const std::vector<LagWindow> &windows, std::uint64_t seed) = 0;
	virtual Matrix predict_block(const LagWindow &w) const = 0;
	virtual json state_json() const = 0;
	virtual void load_state(const json &j) = 0;

	Eigen::Index n_features_flat() const {
		return L_in_ * n_comp_ + L_in_ * n_past_ + L_out_ * n_future_ + n_static_;
	}

	// [target window | past window | future block | statics], row-major per block
	Vector flatten(const LagWindow &w) const {
		Vector x(n_features_flat());
		Eigen::Index i = 0;
		for (Eigen::Index r = 0; r < L_in_; ++r) {
			for (Eigen::Index c = 0; c < n_comp_; ++c) {
				x(i++) = w.target_in(r, c);
			}
		}
		for (Eigen::Index r = 0; r < L_in_; ++r) {
			for (Eigen::Index c = 0; c < n_past_; ++c) {
				x(i++) = w.past_in(r, c);
			}
		}
		for (Eigen::Index r = 0; r < L_out_; ++r) {
			for (Eigen::Index c = 0; c < n_future_; ++c) {
				x(i++) = w.future_out(r, c);
			}
		}
		for (Eigen::Index s = 0; s < n_static_; ++s) {
			x(i++) = w.statics(s);
		}
		return x;
	}

	// Output layout shared by all subclasses: index h * C + c.
	Matrix unflatten_output(const Vector &y) const {
		Matrix m(L_out_, n_comp_);
		for (Eigen::Index h = 0; h < L_out_; ++h) {
			for (Eigen::Index c = 0; c < n_comp_; ++c) {
				m(h, c) = y(h * n_comp_ + c);
			}
		}
		return m;
	}

	Vector flatten_output(const Matrix &m) const {
		Vector y(L_out_ * n_comp_);
		for (Eigen::Index h = 0; h < L_out_; ++h) {
			for (Eigen::Index c = 0; c < n_comp_; ++c) {
				y(h * n_comp_ + c) = m(h, c);
			}
		}
		return y;
	}

	Eigen::Index L_in_, L_out_;
	Eigen::Index n_comp_ = 0, n_past_ = 0, n_future_ = 0, n_static_ = 0;

private:
	LagWindow window_at(const Matrix &target, const Matrix &past, const Matrix &future, const Vector &statics,
	                    Eigen::Index t, const std::string &group) const {
		LagWindow w;
		w.target_in = target.middleRows(t - L_in_, L_in_);
		w.past_in = n_past_ > 0 ? Matrix(past.middleRows(t - L_in_, L_in_)) : Matrix(L_in_, 0);
		if (n_future_ > 0) {
			if (future.rows() < t + L_out_) {
				throw Error(ErrorCode::AlignmentError,
				            "future covariates for group '" + group + "' do not cover the output window",
				            "future_covariate");
			}
			w.future_out = future.middleRows(t, L_out_);
		} else {
			w.future_out = Matrix(L_out_, 0);
		}
		w.statics = n_static_ > 0 ? statics : Vector(0);
		return w;
	}

	void check_schema(const SeriesBundle &b) const {
		if (static_cast<Eigen::Index>(b.component_names.size()) != n_comp_ ||
		    static_cast<Eigen::Index>(b.past_cov_names.size()) != n_past_ ||
		    static_cast<Eigen::Index>(b.future_cov_names.size()) != n_future_ ||
		    static_cast<Eigen::Index>(b.static_cov_names.size()) != n_static_) {
			throw Error(ErrorCode::CovariateSchemaMismatch, "context columns differ from the training data");
		}
	}

	Vector sigma_;
	bool fitted_ = false;
};

} // namespace forecaster::models
