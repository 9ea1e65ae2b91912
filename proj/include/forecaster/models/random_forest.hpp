#pragma once

#include "forecaster/models/lagged.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace forecaster::models {

struct ForestOptions {
	int n_trees = 100;
	int max_depth = 8;
	int min_leaf = 2;
};

// CART regression tree stored as flat arrays; feature < 0 marks a leaf.
struct RegressionTree {
	std::vector<int> feature;
	std::vector<double> threshold;
	std::vector<int> left;
	std::vector<int> right;
	std::vector<double> value;

	double predict(const double *x) const {
		int n = 0;
		while (feature[static_cast<std::size_t>(n)] >= 0) {
			const auto i = static_cast<std::size_t>(n);
			n = x[feature[i]] <= threshold[i] ? left[i] : right[i];
		}
		return value[static_cast<std::size_t>(n)];
	}

	json to_json() const {
		return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
	}
	static RegressionTree from_json(const json &j) {
		RegressionTree t;
		t.feature = j.at("feature").get<std::vector<int>>();
		t.threshold = j.at("threshold").get<std::vector<double>>();
		t.left = j.at("left").get<std::vector<int>>();
		t.right = j.at("right").get<std::vector<int>>();
		t.value = j.at("value").get<std::vector<double>>();
		if (t.feature.empty() || t.threshold.size() != t.feature.size() || t.left.size() != t.feature.size() ||
		    t.right.size() != t.feature.size() || t.value.size() != t.feature.size()) {
			throw Error(ErrorCode::BadArtifact, "malformed regression tree");
		}
		return t;
	}
};

namespace detail {

// X is row-major n x k (one sample per row) so a sample is contiguous.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class TreeBuilder {
public:
	TreeBuilder(const RowMatrix &X, const Vector &y, const ForestOptions &opt, Rng &rng)
	    : X_(X), y_(y), opt_(opt), rng_(rng), mtry_(static_cast<int>(std::ceil(std::sqrt(double(X.cols()))))) {
		features_.resize(static_cast<std::size_t>(X.cols()));
		std::iota(features_.begin(), features_.end(), 0);
	}

	RegressionTree build(std::vector<int> rows) {
		tree_ = {};
		grow(rows, 0);
		return std::move(tree_);
	}

private:
	int add_node() {
		tree_.feature.push_back(-1);
		tree_.threshold.push_back(0.0);
		tree_.left.push_back(-1);
		tree_.right.push_back(-1);
		tree_.value.push_back(0.0);
		return static_cast<int>(tree_.feature.size() - 1);
	}

	int grow(std::vector<int> &rows, int depth) {
		const int node = add_node();
		const auto n = static_cast<double>(rows.size());
		double sum = 0.0, sq = 0.0;
		for (int r : rows) {
			sum += y_(r);
			sq += y_(r) * y_(r);
		}
		tree_.value[static_cast<std::size_t>(node)] = sum / n;
		const double sse = sq - sum * sum / n;
		if (depth >= opt_.max_depth || rows.size() < 2 * static_cast<std::size_t>(opt_.min_leaf) ||
		    sse <= 1e-14 * std::max(1.0, sq)) {
			return node;
		}

		// partial Fisher-Yates picks mtry distinct features
		const int k = static_cast<int>(features_.size());
		const int m = std::min(mtry_, k);
		for (int i = 0; i < m; ++i) {
			const int j = i + static_cast<int>(rng_.below(static_cast<std::uint64_t>(k - i)));
			std::swap(features_[static_cast<std::size_t>(i)], features_[static_cast<std::size_t>(j)]);
		}

		const double parent = sum * sum / n;
		double best_gain = 0.0;
		int best_feature = -1;
		double best_threshold = 0.0;
		std::vector<std::pair<double, double>> xs(rows.size());
		for (int fi = 0; fi < m; ++fi) {
			const int f = features_[static_cast<std::size_t>(fi)];
			for (std::size_t i = 0; i < rows.size(); ++i) {
				xs[i] = {X_(rows[i], f), y_(rows[i])};
			}
			std::sort(xs.begin(), xs.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
			double left_sum = 0.0;
			const std::size_t min_leaf = static_cast<std::size_t>(opt_.min_leaf);
			for (std::size_t i = 1; i < xs.size(); ++i) {
				left_sum += xs[i - 1].second;
				if (i < min_leaf || xs.size() - i < min_leaf || !(xs[i - 1].first < xs[i].first)) {
					continue;
				}
				const double nl = static_cast<double>(i), nr = n - nl;
				const double right_sum = sum - left_sum;
				const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
				if (gain > best_gain + 1e-12 * std::max(1.0, sse)) {
					best_gain = gain;
					best_feature = f;
					double thr = xs[i - 1].first + 0.5 * (xs[i].first - xs[i - 1].first);
					if (!(thr < xs[i].first)) {
						thr = xs[i - 1].first;
					}
					best_threshold = thr;
				}
			}
		}
		if (best_feature < 0) {
			return node;
		}
		std::vector<int> lrows, rrows;
		for (int r : rows) {
			(X_(r, best_feature) <= best_threshold ? lrows : rrows).push_back(r);
		}
		rows.clear();
		rows.shrink_to_fit();
		const auto idx = static_cast<std::size_t>(node);
		tree_.feature[idx] = best_feature;
		tree_.threshold[idx] = best_threshold;
		const int l = grow(lrows, depth + 1);
		tree_.left[idx] = l;
		const int r = grow(rrows, depth + 1);
		tree_.right[idx] = r;
		return node;
	}

	const RowMatrix &X_;
	const Vector &y_;
	const ForestOptions &opt_;
	Rng &rng_;
	int mtry_;
	std::vector<int> features_;
	RegressionTree tree_;
};

} // namespace detail

// One bootstrap forest per (output step, component) over the lagged design.
class RandomForestModel : public WindowModel {
public:
	RandomForestModel(Eigen::Index input_chunk, Eigen::Index output_chunk, ForestOptions opt)
	    : WindowModel(input_chunk, output_chunk), opt_(opt) {
		if (opt.n_trees < 1) {
			throw Error(ErrorCode::InvalidParameter, "n_trees must be >= 1", "n_trees");
		}
		if (opt.max_depth < 1) {
			throw Error(ErrorCode::InvalidParameter, "max_depth must be >= 1", "max_depth");
		}
		if (opt.min_leaf < 1) {
			throw Error(ErrorCode::InvalidParameter, "min_leaf must be >= 1", "min_leaf");
		}
	}

	ModelKind kind() const override {
		return ModelKind::RandomForest;
	}

	const std::vector<std::vector<RegressionTree>> &forests() const {
		return forests_;
	}

protected:
	void fit_windows(const std::vector<LagWindow> &windows, std::uint64_t seed) override {
		const auto n = static_cast<Eigen::Index>(windows.size());
		detail::RowMatrix X(n, n_features_flat());
		Matrix Y(n, L_out_ * n_comp_);
		for (Eigen::Index i = 0; i < n; ++i) {
			X.row(i) = flatten(windows[static_cast<std::size_t>(i)]).transpose();
			Y.row(i) = flatten_output(windows[static_cast<std::size_t>(i)].target_out).transpose();
		}
		forests_.assign(static_cast<std::size_t>(Y.cols()), {});
		for (Eigen::Index j = 0; j < Y.cols(); ++j) {
			Rng rng(fnv1a(std::to_string(j), seed));
			const Vector y = Y.col(j);
			detail::TreeBuilder builder(X, y, opt_, rng);
			auto &forest = forests_[static_cast<std::size_t>(j)];
			for (int t = 0; t < opt_.n_trees; ++t) {
				std::vector<int> rows(static_cast<std::size_t>(n));
				for (auto &r : rows) {
					r = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
				}
				forest.push_back(builder.build(std::move(rows)));
			}
		}
	}

	Matrix predict_block(const LagWindow &w) const override {
		const Vector x = flatten(w);
		Vector y(static_cast<Eigen::Index>(forests_.size()));
		for (std::size_t j = 0; j < forests_.size(); ++j) {
			double s = 0.0;
			for (const auto &t : forests_[j]) {
				s += t.predict(x.data());
			}
			y(static_cast<Eigen::Index>(j)) = s / static_cast<double>(forests_[j].size());
		}
		return unflatten_output(y);
	}

	json state_json() const override {
		json f = json::array();
		for (const auto &forest : forests_) {
			json trees = json::array();
			for (const auto &t : forest) {
				trees.push_back(t.to_json());
			}
			f.push_back(std::move(trees));
		}
		return {{"n_trees", opt_.n_trees}, {"max_depth", opt_.max_depth}, {"min_leaf", opt_.min_leaf},
		        {"forests", std::move(f)}};
	}
	void load_state(const json &j) override {
		opt_ = {j.at("n_trees").get<int>(), j.at("max_depth").get<int>(), j.at("min_leaf").get<int>()};
		forests_.clear();
		for (const auto &forest : j.at("forests")) {
			std::vector<RegressionTree> trees;
			for (const auto &t : forest) {
				trees.push_back(RegressionTree::from_json(t));
			}
			forests_.push_back(std::move(trees));
		}
		if (static_cast<Eigen::Index>(forests_.size()) != L_out_ * n_comp_) {
			throw Error(ErrorCode::BadArtifact, "forest count does not match output_chunk x components");
		}
	}

private:
	ForestOptions opt_;
	std::vector<std::vector<RegressionTree>> forests_;
};

} // namespace forecaster::models
