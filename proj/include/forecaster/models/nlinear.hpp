#pragma once

#include "forecaster/models/lagged.hpp"

#include <vector>

namespace forecaster::models {

// NLinear: subtract the last input value, apply one linear map L_in -> L_out
// (plus bias) per component, add the last value back. Reads the target
// window only.
class NLinearModel : public WindowModel {
public:
	NLinearModel(Eigen::Index input_chunk, Eigen::Index output_chunk, double lambda)
	    : WindowModel(input_chunk, output_chunk), lambda_(lambda) {
		if (!(lambda >= 0.0)) {
			throw Error(ErrorCode::InvalidParameter, "ridge_lambda must be >= 0", "ridge_lambda");
		}
	}

	ModelKind kind() const override {
		return ModelKind::NLinear;
	}

	// per component: (L_in + 1) x L_out, bias in the last row
	const std::vector<Matrix> &maps() const {
		return maps_;
	}

protected:
	void fit_windows(const std::vector<LagWindow> &windows, std::uint64_t) override {
		maps_.clear();
		const auto n = static_cast<Eigen::Index>(windows.size());
		for (Eigen::Index c = 0; c < n_comp_; ++c) {
			Matrix X(n, L_in_ + 1);
			Matrix Y(n, L_out_);
			for (Eigen::Index i = 0; i < n; ++i) {
				const auto &w = windows[static_cast<std::size_t>(i)];
				const double last = w.target_in(L_in_ - 1, c);
				X.row(i).head(L_in_) = (w.target_in.col(c).array() - last).matrix().transpose();
				X(i, L_in_) = 1.0;
				Y.row(i) = (w.target_out.col(c).array() - last).matrix().transpose();
			}
			// the last normalized input is always 0, so the plain design is
			// rank-deficient; at lambda == 0 take the minimum-norm solution
			maps_.push_back(ridge_solve(X, Y, lambda_, {L_in_}, true));
		}
	}

	Matrix predict_block(const LagWindow &w) const override {
		Matrix out(L_out_, n_comp_);
		for (Eigen::Index c = 0; c < n_comp_; ++c) {
			const Matrix &M = maps_[static_cast<std::size_t>(c)];
			const double last = w.target_in(L_in_ - 1, c);
			const Vector x = (w.target_in.col(c).array() - last).matrix();
			out.col(c) = (M.topRows(L_in_).transpose() * x + M.row(L_in_).transpose()).array() + last;
		}
		return out;
	}

	json state_json() const override {
		json m = json::array();
		for (const auto &M : maps_) {
			m.push_back(detail::matrix_to_json(M));
		}
		return {{"ridge_lambda", lambda_}, {"maps", std::move(m)}};
	}
	void load_state(const json &j) override {
		lambda_ = j.at("ridge_lambda").get<double>();
		maps_.clear();
		for (const auto &m : j.at("maps")) {
			maps_.push_back(detail::matrix_from_json(m));
		}
	}

private:
	double lambda_;
	std::vector<Matrix> maps_;
};

} // namespace forecaster::models
