#ifndef HDCM_REPORT_HPP
#define HDCM_REPORT_HPP

// CSV writers for summaries, diagnostics, share tables and MWTP output, and
// the fit statistics reported alongside a posterior summary.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csv.hpp"
#include "diagnostics.hpp"
#include "likelihood.hpp"
#include "posterior.hpp"
#include "scenario.hpp"

namespace hdcm {

/// Number of population-level choice-model parameters (fixed coefficients,
/// random-coefficient means and free omega entries), used for adjusted rho^2.
[[nodiscard]] inline std::size_t choice_parameter_count(const ModelSpec &spec, const CoefficientLayout &layout) {
	const std::size_t R = layout.n_random();
	return layout.n_fixed() + R + (spec.full_covariance ? R * (R + 1) / 2 : R);
}

/// Choice log-likelihood at the posterior means: pooled mean of the fixed
/// coefficients and each individual's posterior-mean beta and alpha.
[[nodiscard]] inline double choice_loglik_at_means(const CompiledModel &model, std::span<const PosteriorDraws> chains) {
	const auto &layout = model.layout();
	const auto N = static_cast<Eigen::Index>(model.n_individuals());
	Eigen::VectorXd fixed = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.n_fixed()));
	RowMatrix beta = RowMatrix::Zero(N, static_cast<Eigen::Index>(layout.n_random()));
	RowMatrix alpha = RowMatrix::Zero(N, static_cast<Eigen::Index>(model.n_latent()));
	std::size_t n_states = 0;
	for (const auto &c : chains) {
		if (c.beta_mean.rows() != N || c.alpha_mean.rows() != N) {
			throw DataError("posterior individual means do not match the dataset");
		}
		const auto n = static_cast<double>(c.states.size());
		for (const auto &s : c.states) {
			fixed += s.fixed;
		}
		beta += n * c.beta_mean;
		alpha += n * c.alpha_mean;
		n_states += c.states.size();
	}
	if (n_states == 0) {
		throw NumericError("fit statistics need at least one posterior draw");
	}
	const auto total = static_cast<double>(n_states);
	fixed /= total;
	beta /= total;
	alpha /= total;
	double ll = 0.0;
	std::vector<double> coef;
	std::vector<double> scratch;
	for (Eigen::Index i = 0; i < N; ++i) {
		layout.assemble(fixed, beta.row(i).transpose(), coef);
		const Eigen::VectorXd a = alpha.row(i).transpose();
		ll += log_choice_probability(model.individuals()[static_cast<std::size_t>(i)], coef, a.data(), scratch);
	}
	return ll;
}

inline void write_summary(const std::filesystem::path &path, const PosteriorSummary &summary) {
	std::vector<std::vector<std::string>> rows;
	for (const auto &p : summary.parameters) {
		rows.push_back({p.name, format_number(p.mean), format_number(p.sd), format_number(p.t_stat), format_number(p.lower), format_number(p.upper),
		                p.degenerate ? "1" : "0"});
	}
	write_csv(path, {"parameter", "mean", "sd", "t_stat", "lower_95", "upper_95", "degenerate"}, rows);
}

inline void write_fit(const std::filesystem::path &path, const PosteriorSummary &summary) {
	write_csv(path, {"measure", "value"},
	          {{"loglik_null", format_number(summary.loglik_null)},
	           {"loglik_final", format_number(summary.loglik_final)},
	           {"n_params", std::to_string(summary.n_params)},
	           {"rho_squared", format_number(summary.rho_squared)},
	           {"adjusted_rho_squared", format_number(summary.adjusted_rho_squared)}});
}

inline void write_diagnostics(std::ostream &out, const std::vector<ParameterDiagnostic> &diagnostics) {
	write_csv_row(out, {"parameter", "rhat", "ess", "degenerate", "flagged"});
	for (const auto &d : diagnostics) {
		write_csv_row(out, {d.name, format_number(d.rhat), format_number(d.ess), d.degenerate ? "1" : "0", d.flagged ? "1" : "0"});
	}
}

/// One row per (scenario, measure), one column per alternative.
inline void write_share_table(std::ostream &out, const ShareTable &table) {
	std::vector<std::string> header{"scenario", "measure"};
	header.insert(header.end(), table.alternatives.begin(), table.alternatives.end());
	write_csv_row(out, header);
	const auto row = [&](const std::string &scenario, const std::string &measure, const std::vector<double> &values) {
		std::vector<std::string> fields{scenario, measure};
		for (const double v : values) {
			fields.push_back(format_number(v));
		}
		write_csv_row(out, fields);
	};
	row("observed", "share", table.observed);
	row("baseline", "share", table.baseline);
	for (const auto &s : table.scenarios) {
		row(s.name, "share", s.shares);
		row(s.name, "delta", s.deltas);
	}
}

inline void write_mwtp_records(std::ostream &out, std::span<const MwtpRecord> records, double unit_factor) {
	write_csv_row(out, {"individual_id", "attribute", "mwtp", "ratio_sd", "unstable"});
	for (const auto &r : records) {
		write_csv_row(out, {r.individual_id, r.attribute, r.value ? format_number(*r.value * unit_factor) : "NaN",
		                    format_number(r.ratio_sd * std::abs(unit_factor)), r.unstable ? "1" : "0"});
	}
}

inline void write_mwtp_distribution(std::ostream &out, const std::string &attribute, const MwtpDistribution &d) {
	write_csv_row(out, {"attribute", "count", "mean", "sd", "median", "min", "max"});
	write_csv_row(out, {attribute, std::to_string(d.count), format_number(d.mean), format_number(d.sd), format_number(d.median), format_number(d.min),
	                    format_number(d.max)});
}

inline void write_regression(std::ostream &out, const RegressionResult &r) {
	write_csv_row(out, {"term", "estimate", "std_error", "p_value"});
	write_csv_row(out, {"intercept", format_number(r.intercept), format_number(r.standard_errors[0]), format_number(r.p_values[0])});
	for (Eigen::Index k = 0; k < r.coefficients.size(); ++k) {
		const auto name = static_cast<std::size_t>(k) < r.names.size() ? r.names[static_cast<std::size_t>(k)] : "q" + std::to_string(k + 1);
		write_csv_row(out, {name, format_number(r.coefficients[k]), format_number(r.standard_errors[k + 1]), format_number(r.p_values[k + 1])});
	}
	write_csv_row(out, {"r_squared", format_number(r.r_squared), "", ""});
	write_csv_row(out, {"residual_variance", format_number(r.residual_variance), "", ""});
	write_csv_row(out, {"ridge_applied", r.ridge_applied ? "1" : "0", "", ""});
}

} // namespace hdcm

#endif
