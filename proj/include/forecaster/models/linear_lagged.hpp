#pragma once

#include "forecaster/models/lagged.hpp"

namespace forecaster::models {

// Ridge regression of the next L_out values on lagged target / past
// covariates, future covariates over the output window, statics and an
// intercept. One joint solve for all C x L_out outputs.
class LinearLaggedModel : public WindowModel {
public:
	LinearLaggedModel(Eigen::Index input_chunk, Eigen::Index output_chunk, double lambda)
	    : WindowModel(input_chunk, output_chunk), lambda_(lambda) {
		if (!(lambda >= 0.0)) {
			throw Error(ErrorCode::InvalidParameter, "ridge_lambda must be >= 0", "ridge_lambda");
		}
	}

	ModelKind kind() const override {
		return ModelKind::LinearLagged;
	}

	// rows = features + 1 (intercept last), cols = L_out * C
	const Matrix &coefficients() const {
		return W_;
	}

protected:
	void fit_windows(const std::vector<LagWindow> &windows, std::uint64_t) override {
		const Eigen::Index k = n_features_flat() + 1;
		Matrix X(static_cast<Eigen::Index>(windows.size()), k);
		Matrix Y(static_cast<Eigen::Index>(windows.size()), L_out_ * n_comp_);
		for (std::size_t i = 0; i < windows.size(); ++i) {
			const auto r = static_cast<Eigen::Index>(i);
			X.row(r).head(k - 1) = flatten(windows[i]).transpose();
			X(r, k - 1) = 1.0;
			Y.row(r) = flatten_output(windows[i].target_out).transpose();
		}
		W_ = ridge_solve(X, Y, lambda_, {k - 1});
	}

	Matrix predict_block(const LagWindow &w) const override {
		const Eigen::Index k = W_.rows();
		const Vector x = flatten(w);
		const Vector y = W_.topRows(k - 1).transpose() * x + W_.row(k - 1).transpose();
		return unflatten_output(y);
	}

	json state_json() const override {
		return {{"ridge_lambda", lambda_}, {"weights", detail::matrix_to_json(W_)}};
	}
	void load_state(const json &j) override {
		lambda_ = j.at("ridge_lambda").get<double>();
		W_ = detail::matrix_from_json(j.at("weights"));
	}

private:
	double lambda_;
	Matrix W_;
};

} // namespace forecaster::models
