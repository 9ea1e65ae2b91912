#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace forecaster {

// mt19937_64 is specified bit-for-bit by the standard; the distributions are
// not, so uniform and normal draws are done by hand to keep runs reproducible
// across standard libraries.
class Rng {
public:
	explicit Rng(std::uint64_t seed) : engine_(seed) {}

	double uniform() {
		return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
	}

	// [0, n)
	std::uint64_t below(std::uint64_t n) {
		return n == 0 ? 0 : engine_() % n;
	}

	double normal() {
		if (has_spare_) {
			has_spare_ = false;
			return spare_;
		}
		double u1 = uniform();
		while (u1 <= 0.0) {
			u1 = uniform();
		}
		const double u2 = uniform();
		const double r = std::sqrt(-2.0 * std::log(u1));
		const double a = 2.0 * std::numbers::pi * u2;
		spare_ = r * std::sin(a);
		has_spare_ = true;
		return r * std::cos(a);
	}

	std::uint64_t next() {
		return engine_();
	}

private:
	std::mt19937_64 engine_;
	double spare_ = 0.0;
	bool has_spare_ = false;
};

// FNV-1a, used to derive per-(job, model) seeds.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 14695981039346656037ull) {
	for (unsigned char c : s) {
		h ^= c;
		h *= 1099511628211ull;
	}
	return h;
}

inline std::uint64_t seed_for(std::string_view job_id, std::string_view kind) {
	return fnv1a(kind, fnv1a("/", fnv1a(job_id)));
}

} // namespace forecaster
