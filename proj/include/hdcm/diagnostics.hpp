#ifndef HDCM_DIAGNOSTICS_HPP
#define HDCM_DIAGNOSTICS_HPP

// Multi-chain convergence diagnostics: split R-hat and effective sample size
// (Geyer initial monotone sequence over FFT autocovariances).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "error.hpp"
#include "model.hpp"
#include "sampler.hpp"

namespace hdcm {

struct ParameterDiagnostic {
	std::string name;
	double rhat = 1.0;
	double ess = 0.0;
	/// Zero within-chain variance; rhat/ess are conventions, not estimates.
	bool degenerate = false;
	/// rhat > 1.1 (or degenerate with disagreeing chains).
	bool flagged = false;
};

inline constexpr double kRhatThreshold = 1.1;

namespace detail {

/// Biased autocovariance of x at lags 0..n-1.
inline std::vector<double> autocovariance(std::span<const double> x) {
	const std::size_t n = x.size();
	double mean = 0.0;
	for (const double v : x) {
		mean += v;
	}
	mean /= static_cast<double>(n);
	std::size_t padded = 1;
	while (padded < 2 * n) {
		padded <<= 1;
	}
	std::vector<double> centered(padded, 0.0);
	for (std::size_t t = 0; t < n; ++t) {
		centered[t] = x[t] - mean;
	}
	Eigen::FFT<double> fft;
	std::vector<std::complex<double>> freq;
	fft.fwd(freq, centered);
	for (auto &f : freq) {
		f = std::complex<double>(std::norm(f), 0.0);
	}
	std::vector<double> back;
	fft.inv(back, freq);
	std::vector<double> acov(n);
	for (std::size_t t = 0; t < n; ++t) {
		acov[t] = back[t] / static_cast<double>(n);
	}
	return acov;
}

inline double sample_variance(std::span<const double> x) {
	double mean = 0.0;
	for (const double v : x) {
		mean += v;
	}
	mean /= static_cast<double>(x.size());
	double ss = 0.0;
	for (const double v : x) {
		ss += (v - mean) * (v - mean);
	}
	return ss / static_cast<double>(x.size() - 1);
}

} // namespace detail

/// Split-R-hat and ESS for one scalar parameter given one draw sequence per chain.
[[nodiscard]] inline ParameterDiagnostic diagnose_parameter(const std::string &name, const std::vector<std::vector<double>> &chains) {
	if (chains.empty()) {
		throw ConfigurationError("convergence diagnostics need at least one chain");
	}
	std::size_t n_min = chains.front().size();
	for (const auto &c : chains) {
		n_min = std::min(n_min, c.size());
	}
	if (n_min < 4) {
		throw ConfigurationError("convergence diagnostics need at least 4 draws per chain");
	}
	const std::size_t half = n_min / 2;
	std::vector<std::span<const double>> splits;
	for (const auto &c : chains) {
		// drop the middle draw of odd-length chains
		const std::size_t offset = c.size() - 2 * half;
		splits.emplace_back(c.data(), half);
		splits.emplace_back(c.data() + half + offset, half);
	}
	const auto m = static_cast<double>(splits.size());
	const auto n = static_cast<double>(half);

	std::vector<double> means;
	std::vector<double> vars;
	for (const auto &s : splits) {
		double mean = 0.0;
		for (const double v : s) {
			mean += v;
		}
		means.push_back(mean / n);
		vars.push_back(detail::sample_variance(s));
	}
	double grand = 0.0;
	for (const double v : means) {
		grand += v;
	}
	grand /= m;
	double between = 0.0;
	for (const double v : means) {
		between += (v - grand) * (v - grand);
	}
	between *= n / (m - 1.0);
	double within = 0.0;
	for (const double v : vars) {
		within += v;
	}
	within /= m;

	ParameterDiagnostic out;
	out.name = name;
	if (!(within > 0.0)) {
		out.degenerate = true;
		out.rhat = between > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
		out.ess = 0.0;
		out.flagged = between > 0.0;
		return out;
	}
	const double var_plus = (n - 1.0) / n * within + between / n;
	out.rhat = std::sqrt(var_plus / within);
	out.flagged = out.rhat > kRhatThreshold;

	std::vector<std::vector<double>> acov;
	for (const auto &s : splits) {
		acov.push_back(detail::autocovariance(s));
	}
	auto rho = [&](std::size_t t) {
		double mean_acov = 0.0;
		for (const auto &a : acov) {
			mean_acov += a[t];
		}
		mean_acov /= m;
		return 1.0 - (within - mean_acov) / var_plus;
	};
	// Geyer: sum consecutive pairs while positive, enforcing monotone decrease.
	double tau = 0.0;
	double prev_pair = std::numeric_limits<double>::infinity();
	const auto max_lag = static_cast<std::size_t>(n);
	for (std::size_t t = 0; t + 1 < max_lag; t += 2) {
		double pair = rho(t) + rho(t + 1);
		if (pair <= 0.0) {
			break;
		}
		pair = std::min(pair, prev_pair);
		prev_pair = pair;
		tau += 2.0 * pair;
	}
	tau -= 1.0;
	out.ess = m * n / std::max(tau, 1.0 / std::log10(m * n));
	return out;
}

/// Diagnostics per column; each matrix is one chain with rows = draws.
[[nodiscard]] inline std::vector<ParameterDiagnostic> convergence_diagnostics(const std::vector<Eigen::MatrixXd> &chains,
                                                                              const std::vector<std::string> &names) {
	if (chains.empty()) {
		throw ConfigurationError("convergence diagnostics need at least one chain");
	}
	for (const auto &c : chains) {
		if (static_cast<std::size_t>(c.cols()) != names.size()) {
			throw ConfigurationError("chains disagree on the number of parameters");
		}
	}
	std::vector<ParameterDiagnostic> out;
	for (std::size_t p = 0; p < names.size(); ++p) {
		std::vector<std::vector<double>> series;
		for (const auto &c : chains) {
			std::vector<double> s(static_cast<std::size_t>(c.rows()));
			for (Eigen::Index r = 0; r < c.rows(); ++r) {
				s[static_cast<std::size_t>(r)] = c(r, static_cast<Eigen::Index>(p));
			}
			series.push_back(std::move(s));
		}
		out.push_back(diagnose_parameter(names[p], series));
	}
	return out;
}

/// Population-level draws of one chain as a draws x parameters matrix.
[[nodiscard]] inline Eigen::MatrixXd population_matrix(const ModelSpec &spec, const CoefficientLayout &layout, const PosteriorDraws &draws) {
	const auto P = static_cast<Eigen::Index>(population_names(spec, layout).size());
	Eigen::MatrixXd out(static_cast<Eigen::Index>(draws.states.size()), P);
	for (std::size_t d = 0; d < draws.states.size(); ++d) {
		out.row(static_cast<Eigen::Index>(d)) = flatten_population(spec, layout, draws.states[d]).transpose();
	}
	return out;
}

[[nodiscard]] inline std::vector<ParameterDiagnostic> convergence_diagnostics(const CompiledModel &model, std::span<const PosteriorDraws> chains) {
	std::vector<Eigen::MatrixXd> mats;
	for (const auto &c : chains) {
		mats.push_back(population_matrix(model.spec(), model.layout(), c));
	}
	return convergence_diagnostics(mats, population_names(model.spec(), model.layout()));
}

} // namespace hdcm

#endif
