#ifndef HDCM_POSTERIOR_HPP
#define HDCM_POSTERIOR_HPP

// Posterior summaries, sign probabilities, individual marginal willingness to
// pay and the regression of MWTP on socioeconomic characteristics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <Eigen/Dense>

#include "diagnostics.hpp"
#include "error.hpp"
#include "model.hpp"
#include "sampler.hpp"

namespace hdcm {

struct ParameterSummary {
	std::string name;
	double mean = 0.0;
	double sd = 0.0;
	double t_stat = 0.0; ///< mean / sd; NaN when degenerate
	double lower = 0.0;  ///< 2.5% quantile
	double upper = 0.0;  ///< 97.5% quantile
	bool degenerate = false;
};

struct PosteriorSummary {
	std::vector<ParameterSummary> parameters;
	double loglik_null = 0.0;
	double loglik_final = 0.0;
	double rho_squared = 0.0;
	double adjusted_rho_squared = 0.0;
	std::size_t n_params = 0;
};

[[nodiscard]] inline double rho_squared(double loglik_null, double loglik_final) { return 1.0 - loglik_final / loglik_null; }

[[nodiscard]] inline double adjusted_rho_squared(double loglik_null, double loglik_final, std::size_t n_params) {
	return 1.0 - (loglik_final - static_cast<double>(n_params)) / loglik_null;
}

/// Linear-interpolated quantile (type 7) of a sorted sample.
[[nodiscard]] inline double quantile_sorted(std::span<const double> sorted, double p) {
	if (sorted.empty()) {
		return std::numeric_limits<double>::quiet_NaN();
	}
	const double h = p * static_cast<double>(sorted.size() - 1);
	const auto lo = static_cast<std::size_t>(std::floor(h));
	const auto hi = std::min(lo + 1, sorted.size() - 1);
	return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Mean and sample SD by Welford's streaming update.
struct RunningMoments {
	std::size_t n = 0;
	double mean = 0.0;
	double m2 = 0.0;

	void push(double x) {
		++n;
		const double delta = x - mean;
		mean += delta / static_cast<double>(n);
		m2 += delta * (x - mean);
	}
	[[nodiscard]] double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
	[[nodiscard]] double sd() const { return std::sqrt(variance()); }
};

[[nodiscard]] inline ParameterSummary summarize_parameter(const std::string &name, std::span<const double> draws) {
	if (draws.size() < 2) {
		throw ConfigurationError("summarize needs at least 2 draws");
	}
	RunningMoments m;
	for (const double x : draws) {
		m.push(x);
	}
	std::vector<double> sorted(draws.begin(), draws.end());
	std::sort(sorted.begin(), sorted.end());
	ParameterSummary s;
	s.name = name;
	s.mean = m.mean;
	s.sd = m.sd();
	s.lower = quantile_sorted(sorted, 0.025);
	s.upper = quantile_sorted(sorted, 0.975);
	s.degenerate = !(s.sd > 0.0);
	s.t_stat = s.degenerate ? std::numeric_limits<double>::quiet_NaN() : s.mean / s.sd;
	return s;
}

/// Summary of a draws x parameters matrix plus the model-level fit indices.
[[nodiscard]] inline PosteriorSummary summarize(const Eigen::MatrixXd &draws, const std::vector<std::string> &names, double loglik_null,
                                                double loglik_final, std::size_t n_params) {
	if (draws.rows() < 2) {
		throw ConfigurationError("summarize needs at least 2 stored draws");
	}
	if (static_cast<std::size_t>(draws.cols()) != names.size()) {
		throw ConfigurationError("summarize: names do not match draw columns");
	}
	PosteriorSummary out;
	for (Eigen::Index p = 0; p < draws.cols(); ++p) {
		const Eigen::VectorXd col = draws.col(p);
		out.parameters.push_back(summarize_parameter(names[static_cast<std::size_t>(p)], std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))));
	}
	out.loglik_null = loglik_null;
	out.loglik_final = loglik_final;
	out.n_params = n_params;
	out.rho_squared = rho_squared(loglik_null, loglik_final);
	out.adjusted_rho_squared = adjusted_rho_squared(loglik_null, loglik_final, n_params);
	return out;
}

[[nodiscard]] inline PosteriorSummary summarize(const ModelSpec &spec, const CoefficientLayout &layout, std::span<const PosteriorDraws> chains,
                                                double loglik_null, double loglik_final, std::size_t n_params) {
	std::vector<Eigen::MatrixXd> mats;
	Eigen::Index rows = 0;
	for (const auto &c : chains) {
		mats.push_back(population_matrix(spec, layout, c));
		rows += mats.back().rows();
	}
	const auto names = population_names(spec, layout);
	Eigen::MatrixXd pooled(rows, static_cast<Eigen::Index>(names.size()));
	Eigen::Index r = 0;
	for (const auto &m : mats) {
		pooled.middleRows(r, m.rows()) = m;
		r += m.rows();
	}
	return summarize(pooled, names, loglik_null, loglik_final, n_params);
}

enum class SignDirection { positive, negative };

[[nodiscard]] inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Share of a Normal(mu, sd^2) population whose coefficient has the given sign.
[[nodiscard]] inline double sign_probability(double mu, double sd, SignDirection direction) {
	if (sd < 0.0) {
		throw ParameterError("sign_probability: sd must be non-negative");
	}
	const double signed_mu = direction == SignDirection::positive ? mu : -mu;
	if (sd == 0.0) {
		return signed_mu > 0.0 ? 1.0 : (signed_mu < 0.0 ? 0.0 : 0.5);
	}
	return standard_normal_cdf(signed_mu / sd);
}

struct MwtpRecord {
	std::string individual_id;
	std::string attribute;
	std::optional<double> value; ///< empty when the cost coefficient mean is exactly 0
	double ratio_sd = std::numeric_limits<double>::quiet_NaN();
	bool unstable = false;
};

/// MWTP = -(posterior mean of the attribute coefficient) / (posterior mean of
/// the cost coefficient) for one individual; draws are paired by index.
[[nodiscard]] inline MwtpRecord mwtp_individual(std::span<const double> beta_a_draws, std::span<const double> beta_c_draws,
                                                std::string individual_id = {}, std::string attribute = {}) {
	if (beta_a_draws.size() != beta_c_draws.size() || beta_a_draws.empty()) {
		throw ConfigurationError("mwtp_individual needs equally many, non-zero, paired draws");
	}
	MwtpRecord rec;
	rec.individual_id = std::move(individual_id);
	rec.attribute = std::move(attribute);
	const auto n = static_cast<double>(beta_a_draws.size());
	double mean_a = 0.0;
	double mean_c = 0.0;
	for (std::size_t d = 0; d < beta_a_draws.size(); ++d) {
		mean_a += beta_a_draws[d];
		mean_c += beta_c_draws[d];
	}
	mean_a /= n;
	mean_c /= n;
	if (mean_c == 0.0) {
		rec.unstable = true;
		return rec;
	}
	rec.value = -mean_a / mean_c;
	const double eps = 1e-6 * std::abs(mean_c);
	std::size_t near_zero = 0;
	RunningMoments ratio;
	for (std::size_t d = 0; d < beta_a_draws.size(); ++d) {
		if (std::abs(beta_c_draws[d]) < eps) {
			++near_zero;
		}
		if (beta_c_draws[d] != 0.0) {
			ratio.push(-beta_a_draws[d] / beta_c_draws[d]);
		}
	}
	rec.unstable = static_cast<double>(near_zero) / n > 0.01;
	if (ratio.n > 1) {
		rec.ratio_sd = ratio.sd();
	}
	return rec;
}

struct MwtpDistribution {
	std::size_t count = 0;
	double mean = 0.0;
	double sd = 0.0;
	double median = 0.0;
	double min = 0.0;
	double max = 0.0;
};

/// Distribution statistics over individual MWTP values (records without a value skipped).
[[nodiscard]] inline MwtpDistribution mwtp_distribution(std::span<const MwtpRecord> records, double unit_factor = 1.0) {
	std::vector<double> values;
	for (const auto &r : records) {
		if (r.value) {
			values.push_back(*r.value * unit_factor);
		}
	}
	MwtpDistribution out;
	out.count = values.size();
	if (values.empty()) {
		return out;
	}
	RunningMoments m;
	for (const double v : values) {
		m.push(v);
	}
	std::sort(values.begin(), values.end());
	out.mean = m.mean;
	out.sd = m.sd();
	out.median = quantile_sorted(values, 0.5);
	out.min = values.front();
	out.max = values.back();
	return out;
}

struct RegressionResult {
	double intercept = 0.0;
	Eigen::VectorXd coefficients;    ///< gamma'
	Eigen::VectorXd standard_errors; ///< intercept first
	Eigen::VectorXd p_values;        ///< intercept first, two-sided t
	double r_squared = 0.0;
	double residual_variance = 0.0;
	bool ridge_applied = false;
	/// Response had zero variance; r_squared set to 0 by convention.
	bool zero_variance_response = false;
	std::vector<std::string> names;
};

/// Ordinary least squares of y on [1, q] via the normal equations, with a
/// 1e-8 ridge when the design is rank deficient.
[[nodiscard]] inline RegressionResult ols(const Eigen::VectorXd &y, const Eigen::MatrixXd &q, std::vector<std::string> names = {}) {
	const Eigen::Index n = y.size();
	const Eigen::Index p = q.cols() + 1;
	if (q.rows() != n) {
		throw ConfigurationError("regression: response and design have different row counts");
	}
	if (n < p) {
		throw ConfigurationError("regression needs at least columns + 1 rows");
	}
	Eigen::MatrixXd X(n, p);
	X.col(0).setOnes();
	X.rightCols(q.cols()) = q;
	Eigen::MatrixXd xtx = X.transpose() * X;
	const Eigen::VectorXd xty = X.transpose() * y;

	RegressionResult out;
	out.names = std::move(names);
	const Eigen::FullPivLU<Eigen::MatrixXd> lu(xtx);
	if (lu.rank() < p) {
		xtx += 1e-8 * Eigen::MatrixXd::Identity(p, p);
		out.ridge_applied = true;
	}
	const Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
	const Eigen::VectorXd coef = ldlt.solve(xty);
	out.intercept = coef[0];
	out.coefficients = coef.tail(q.cols());

	const Eigen::VectorXd resid = y - X * coef;
	const double ssr = resid.squaredNorm();
	const double ybar = y.mean();
	const double sst = (y.array() - ybar).square().sum();
	if (!(sst > 0.0)) {
		out.r_squared = 0.0;
		out.zero_variance_response = true;
	} else {
		out.r_squared = std::clamp(1.0 - ssr / sst, 0.0, 1.0);
	}
	const auto df = static_cast<double>(n - p);
	out.residual_variance = df > 0 ? ssr / df : std::numeric_limits<double>::quiet_NaN();
	const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p)) * out.residual_variance;
	out.standard_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
	out.p_values = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
	if (df > 0) {
		const boost::math::students_t dist(df);
		for (Eigen::Index j = 0; j < p; ++j) {
			const double se = out.standard_errors[j];
			if (se > 0.0) {
				const double t = std::abs(coef[j] / se);
				out.p_values[j] = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
			} else {
				out.p_values[j] = coef[j] == 0.0 ? 1.0 : 0.0;
			}
		}
	}
	return out;
}

/// Regression of individual MWTP on socioeconomic columns. Rows
/// of q must align with records; records without a value are dropped.
[[nodiscard]] inline RegressionResult mwtp_regression(std::span<const MwtpRecord> records, const Eigen::MatrixXd &q,
                                                      std::vector<std::string> names = {}) {
	if (static_cast<std::size_t>(q.rows()) != records.size()) {
		throw ConfigurationError("mwtp_regression: q needs one row per MWTP record");
	}
	std::vector<Eigen::Index> keep;
	for (std::size_t i = 0; i < records.size(); ++i) {
		if (records[i].value) {
			keep.push_back(static_cast<Eigen::Index>(i));
		}
	}
	Eigen::VectorXd y(static_cast<Eigen::Index>(keep.size()));
	Eigen::MatrixXd x(static_cast<Eigen::Index>(keep.size()), q.cols());
	for (std::size_t r = 0; r < keep.size(); ++r) {
		y[static_cast<Eigen::Index>(r)] = *records[static_cast<std::size_t>(keep[r])].value;
		x.row(static_cast<Eigen::Index>(r)) = q.row(keep[r]);
	}
	return ols(y, x, std::move(names));
}

/// Divides each column by its sample SD (columns with zero SD left as is).
inline void scale_to_unit_variance(Eigen::MatrixXd &q) {
	for (Eigen::Index c = 0; c < q.cols(); ++c) {
		const double mean = q.col(c).mean();
		const double var = q.rows() > 1 ? (q.col(c).array() - mean).square().sum() / static_cast<double>(q.rows() - 1) : 0.0;
		if (var > 0.0) {
			q.col(c) /= std::sqrt(var);
		}
	}
}

/// Per-individual posterior draws of one coefficient slot, one vector per
/// individual. Random slots need stored individual draws; fixed slots repeat
/// the population draw for everyone.
[[nodiscard]] inline std::vector<std::vector<double>> coefficient_draws(const CoefficientLayout &layout, std::span<const PosteriorDraws> chains,
                                                                        std::size_t slot, std::size_t n_individuals) {
	const auto &s = layout.slots().at(slot);
	std::vector<std::vector<double>> out(n_individuals);
	for (const auto &chain : chains) {
		for (const auto &state : chain.states) {
			for (std::size_t i = 0; i < n_individuals; ++i) {
				if (s.kind == CoefficientKind::fixed) {
					out[i].push_back(state.fixed[static_cast<Eigen::Index>(s.index)]);
				} else {
					if (static_cast<std::size_t>(state.beta.rows()) != n_individuals) {
						throw ConfigurationError("individual-level draws were not stored; rerun with individual storage enabled");
					}
					out[i].push_back(state.beta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s.index)));
				}
			}
		}
	}
	return out;
}

} // namespace hdcm

#endif
