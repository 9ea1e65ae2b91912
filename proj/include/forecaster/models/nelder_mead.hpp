#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

namespace forecaster::models {

struct Box {
	Eigen::VectorXd lower;
	Eigen::VectorXd upper;
};

struct NelderMeadOptions {
	double initial_step = 0.1;
	int max_evaluations = 0; // 0 -> 400 * (n + 1)
	double f_tol = 1e-12;
	double x_tol = 1e-10;
};

struct NelderMeadResult {
	Eigen::VectorXd x;
	double f = std::numeric_limits<double>::infinity();
	int evaluations = 0;
};

// Plain Nelder-Mead (reflection 1, expansion 2, contraction 0.5, shrink 0.5).
// With a box, every trial point is clamped into it. Non-finite objective
// values are treated as +inf so the simplex backs away from them.
inline NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd &)> &f, Eigen::VectorXd x0,
                                    const NelderMeadOptions &opt = {}, const std::optional<Box> &box = std::nullopt) {
	const Eigen::Index n = x0.size();
	NelderMeadResult res;
	auto clamp = [&](Eigen::VectorXd x) {
		if (box) {
			x = x.cwiseMax(box->lower).cwiseMin(box->upper);
		}
		return x;
	};
	auto eval = [&](const Eigen::VectorXd &x) {
		++res.evaluations;
		const double v = f(x);
		return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
	};
	x0 = clamp(x0);
	if (n == 0) {
		res.x = x0;
		res.f = eval(x0);
		return res;
	}
	const int max_eval = opt.max_evaluations > 0 ? opt.max_evaluations : 400 * static_cast<int>(n + 1);

	std::vector<Eigen::VectorXd> pts{x0};
	for (Eigen::Index i = 0; i < n; ++i) {
		Eigen::VectorXd p = x0;
		double step = opt.initial_step * std::max(1.0, std::abs(x0(i)));
		p(i) += step;
		if (box && p(i) > box->upper(i)) {
			p(i) = x0(i) - step;
		}
		pts.push_back(clamp(p));
	}
	std::vector<double> fv;
	for (const auto &p : pts) {
		fv.push_back(eval(p));
	}
	std::vector<std::size_t> order(pts.size());

	while (res.evaluations < max_eval) {
		std::iota(order.begin(), order.end(), 0);
		std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
		const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];

		double size = 0.0;
		for (const auto &p : pts) {
			size = std::max(size, (p - pts[best]).cwiseAbs().maxCoeff());
		}
		if (std::isfinite(fv[worst]) && std::abs(fv[worst] - fv[best]) <= opt.f_tol * (1.0 + std::abs(fv[best])) &&
		    size <= opt.x_tol * (1.0 + pts[best].cwiseAbs().maxCoeff())) {
			break;
		}
		if (size == 0.0) {
			break;
		}

		Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
		for (std::size_t i = 0; i < pts.size(); ++i) {
			if (i != worst) {
				centroid += pts[i];
			}
		}
		centroid /= static_cast<double>(n);

		const Eigen::VectorXd xr = clamp(centroid + (centroid - pts[worst]));
		const double fr = eval(xr);
		if (fr < fv[best]) {
			const Eigen::VectorXd xe = clamp(centroid + 2.0 * (centroid - pts[worst]));
			const double fe = eval(xe);
			if (fe < fr) {
				pts[worst] = xe;
				fv[worst] = fe;
			} else {
				pts[worst] = xr;
				fv[worst] = fr;
			}
			continue;
		}
		if (fr < fv[second]) {
			pts[worst] = xr;
			fv[worst] = fr;
			continue;
		}
		const bool outside = fr < fv[worst];
		const Eigen::VectorXd xc =
		    outside ? clamp(centroid + 0.5 * (xr - centroid)) : clamp(centroid + 0.5 * (pts[worst] - centroid));
		const double fc = eval(xc);
		if (fc < (outside ? fr : fv[worst])) {
			pts[worst] = xc;
			fv[worst] = fc;
			continue;
		}
		for (std::size_t i = 0; i < pts.size(); ++i) {
			if (i != best) {
				pts[i] = clamp(pts[best] + 0.5 * (pts[i] - pts[best]));
				fv[i] = eval(pts[i]);
			}
		}
	}
	const auto it = std::min_element(fv.begin(), fv.end());
	res.x = pts[static_cast<std::size_t>(it - fv.begin())];
	res.f = *it;
	return res;
}

} // namespace forecaster::models
