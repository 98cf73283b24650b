#ifndef HDCM_SAMPLER_HPP
#define HDCM_SAMPLER_HPP

// Hierarchical-Bayes MCMC for hybrid choice models.
//
// One sweep updates four blocks in fixed order:
//   alpha      per-individual latent values (random-walk MH)
//   gamma      structural coefficients (exact conjugate draw)
//   zeta, tau  ordered-logit loadings and thresholds per indicator (MH)
//   theta      per-individual random coefficients (MH), population-fixed
//              coefficients (MH), joint location/scale moves of (beta, mu, omega)
//              (MH), then mu and omega (exact conjugate draws)
//
// After the measurement block each LV is reflected if its anchor loading is
// negative, which removes the sign indeterminacy of the latent scale.
//
// Proposal scales adapt during burn-in by Robbins-Monro on the log scale and
// are frozen afterwards.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "likelihood.hpp"
#include "model.hpp"
#include "random.hpp"

namespace hdcm {

struct PriorSpec {
	double coefficient_variance = 100.0; ///< Normal prior on mu and fixed coefficients
	double gamma_variance = 100.0;
	double zeta_variance = 100.0;
	double threshold_variance = 100.0; ///< first threshold and log-increments
	double wishart_extra_dof = 2.0;    ///< inverse-Wishart dof = dimension + this
	double wishart_scale = 1.0;
	double inverse_gamma_shape = 2.0; ///< diagonal omega
	double inverse_gamma_scale = 1.0;
};

struct ProposalScales {
	double alpha = 0.5;
	double beta = 0.5; ///< multiplies chol(omega)
	double fixed = 0.1;
	double zeta = 0.1;
	double tau = 0.1;
};

struct SamplerConfig {
	std::size_t n_sweeps = 2000;
	std::size_t burn_in = 1000;
	std::size_t thin = 1;
	std::uint64_t seed = 1;
	std::size_t n_chains = 1;
	ProposalScales proposal_scales;
	bool adapt_during_burn_in = true;
	PriorSpec prior;
	/// Keep per-individual beta and alpha in every stored state.
	bool store_individual = false;
	/// When false every choice/indicator likelihood term is dropped (prior-only run).
	bool likelihood_enabled = true;

	void validate() const {
		if (n_sweeps == 0) {
			throw ConfigurationError("n_sweeps must be positive");
		}
		if (burn_in >= n_sweeps) {
			throw ConfigurationError("burn_in must be smaller than n_sweeps");
		}
		if (thin == 0) {
			throw ConfigurationError("thin must be positive");
		}
		if (n_chains == 0) {
			throw ConfigurationError("n_chains must be positive");
		}
		const auto &s = proposal_scales;
		if (s.alpha < 0 || s.beta < 0 || s.fixed < 0 || s.zeta < 0 || s.tau < 0) {
			throw ConfigurationError("proposal scales must be non-negative");
		}
		const auto &p = prior;
		if (p.coefficient_variance <= 0 || p.gamma_variance <= 0 || p.zeta_variance <= 0 || p.threshold_variance <= 0 ||
		    p.wishart_scale <= 0 || p.inverse_gamma_shape <= 0 || p.inverse_gamma_scale <= 0 || p.wishart_extra_dof <= -1.0) {
			throw ConfigurationError("prior variances, scales and shapes must be positive");
		}
	}

	[[nodiscard]] std::size_t stored_count() const { return (n_sweeps - burn_in) / thin; }
};

struct PosteriorDraws {
	std::vector<ParameterState> states;
	/// Post-burn-in acceptance rate per MH block.
	std::map<std::string, double> acceptance;
	SamplerConfig config;
	std::size_t chain = 0;
	std::vector<std::string> individual_ids;
	/// Posterior means over stored states of each individual's random coefficients and LVs.
	RowMatrix beta_mean;
	RowMatrix alpha_mean;
	std::size_t omega_jitter_retries = 0;
};

/// Everything a block update reads besides the state.
struct SamplerContext {
	const CompiledModel &model;
	PriorSpec prior;
	bool likelihood = true;
};

// ---------------------------------------------------------------------------
// Metropolis-Hastings acceptance

namespace detail {
inline void warn_degenerate_mh() {
	static std::once_flag once;
	std::call_once(once, [] { std::cerr << "warning: MH comparison with both targets at -inf; rejecting\n"; });
}
} // namespace detail

/// Accept with probability min(1, exp(cand - curr + correction)). The
/// correction is log q(curr | cand) - log q(cand | curr); 0 for symmetric walks.
[[nodiscard]] inline bool mh_accept(double log_target_cand, double log_target_curr, double log_proposal_correction, Rng &rng) {
	if (log_target_cand == kNegInf && log_target_curr == kNegInf) {
		detail::warn_degenerate_mh();
		return false;
	}
	const double log_ratio = log_target_cand - log_target_curr + log_proposal_correction;
	if (std::isnan(log_ratio)) {
		return false;
	}
	if (log_ratio >= 0.0) {
		return true;
	}
	return std::log(uniform01(rng)) < log_ratio;
}

// ---------------------------------------------------------------------------
// Threshold parameterization: tau_1 free, then log-increments.

[[nodiscard]] inline std::vector<double> thresholds_to_unconstrained(std::span<const double> tau) {
	std::vector<double> u(tau.size());
	for (std::size_t k = 0; k < tau.size(); ++k) {
		u[k] = k == 0 ? tau[0] : std::log(tau[k] - tau[k - 1]);
	}
	return u;
}

[[nodiscard]] inline std::vector<double> thresholds_from_unconstrained(std::span<const double> u) {
	std::vector<double> tau(u.size());
	for (std::size_t k = 0; k < u.size(); ++k) {
		tau[k] = k == 0 ? u[0] : tau[k - 1] + std::exp(u[k]);
	}
	return tau;
}

// ---------------------------------------------------------------------------
// Conditional log-targets

[[nodiscard]] inline double log_normal_kernel(double x, double variance) { return -0.5 * x * x / variance; }

/// log target of alpha_i: structural prior x choice likelihood x indicator likelihoods.
[[nodiscard]] inline double log_alpha_target(const SamplerContext &ctx, const ParameterState &state, std::size_t i, const double *alpha,
                                             std::span<const double> coef, std::vector<double> &scratch) {
	const auto &person = ctx.model.individuals()[i];
	const Eigen::VectorXd mean = structural_mean(state.gamma, person.z);
	double lp = 0.0;
	for (Eigen::Index l = 0; l < mean.size(); ++l) {
		const double d = alpha[l] - mean[l];
		lp -= 0.5 * d * d;
	}
	if (ctx.likelihood) {
		lp += log_choice_probability(person, coef, alpha, scratch);
		lp += log_indicator_probability(ctx.model, person, state.zeta, state.tau, alpha);
	}
	return lp;
}

struct AlphaUpdate {
	Eigen::VectorXd alpha;
	bool accepted = false;
};

/// Random-walk MH step on one individual's latent vector.
[[nodiscard]] inline AlphaUpdate draw_alpha(const SamplerContext &ctx, const ParameterState &state, std::size_t i, double proposal_scale, Rng &rng) {
	const std::size_t L = ctx.model.n_latent();
	AlphaUpdate out;
	out.alpha = state.alpha.row(static_cast<Eigen::Index>(i)).transpose();
	if (L == 0) {
		out.accepted = true;
		return out;
	}
	thread_local std::vector<double> coef;
	thread_local std::vector<double> scratch;
	individual_coefficients(ctx.model, state, i, coef);
	Eigen::VectorXd cand = out.alpha;
	for (std::size_t l = 0; l < L; ++l) {
		cand[static_cast<Eigen::Index>(l)] += proposal_scale * standard_normal(rng);
	}
	const double curr = log_alpha_target(ctx, state, i, out.alpha.data(), coef, scratch);
	const double next = log_alpha_target(ctx, state, i, cand.data(), coef, scratch);
	if (mh_accept(next, curr, 0.0, rng)) {
		out.alpha = cand;
		out.accepted = true;
	}
	return out;
}

/// Exact conjugate draw of gamma given alpha: each LV row is a Bayesian
/// regression of alpha_l on its covariates with unit error variance and a
/// Normal(0, c I) prior.
[[nodiscard]] inline Eigen::MatrixXd draw_gamma(const SamplerContext &ctx, const ParameterState &state, Rng &rng) {
	const auto &model = ctx.model;
	const auto L = static_cast<Eigen::Index>(model.n_latent());
	const auto Z = static_cast<Eigen::Index>(model.n_covariates());
	const auto N = static_cast<Eigen::Index>(model.n_individuals());
	Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(L, Z);
	for (Eigen::Index l = 0; l < L; ++l) {
		std::vector<Eigen::Index> cols;
		for (Eigen::Index c = 0; c < Z; ++c) {
			if (model.structural_mask()(l, c) != 0.0) {
				cols.push_back(c);
			}
		}
		const auto P = static_cast<Eigen::Index>(cols.size());
		if (P == 0) {
			continue;
		}
		Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(P, P) / ctx.prior.gamma_variance;
		Eigen::VectorXd rhs = Eigen::VectorXd::Zero(P);
		for (Eigen::Index i = 0; i < N; ++i) {
			const auto &z = model.individuals()[static_cast<std::size_t>(i)].z;
			const double a = state.alpha(i, l);
			for (Eigen::Index j = 0; j < P; ++j) {
				const double zj = z[static_cast<std::size_t>(cols[static_cast<std::size_t>(j)])];
				rhs[j] += zj * a;
				for (Eigen::Index k = 0; k <= j; ++k) {
					precision(j, k) += zj * z[static_cast<std::size_t>(cols[static_cast<std::size_t>(k)])];
				}
			}
		}
		precision = precision.selfadjointView<Eigen::Lower>();
		const Eigen::LLT<Eigen::MatrixXd> llt(precision);
		const Eigen::VectorXd mean = llt.solve(rhs);
		Eigen::VectorXd e(P);
		for (Eigen::Index j = 0; j < P; ++j) {
			e[j] = standard_normal(rng);
		}
		const Eigen::VectorXd draw = mean + llt.matrixU().solve(e);
		for (Eigen::Index j = 0; j < P; ++j) {
			gamma(l, cols[static_cast<std::size_t>(j)]) = draw[j];
		}
	}
	return gamma;
}

/// Ordered-logit log-likelihood of one indicator over all respondents.
[[nodiscard]] inline double indicator_loglik(const SamplerContext &ctx, const ParameterState &state, std::size_t q, double zeta,
                                             std::span<const double> tau) {
	if (!ctx.likelihood) {
		return 0.0;
	}
	const std::size_t l = ctx.model.indicator_latent(q);
	double total = 0.0;
	const auto &people = ctx.model.individuals();
	for (std::size_t i = 0; i < people.size(); ++i) {
		const int r = people[i].responses[q];
		if (r >= 0) {
			total += log_ordered_logit(r, zeta * state.alpha(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)), tau);
		}
	}
	return total;
}

struct MeasurementScales {
	std::vector<double> zeta;
	std::vector<double> tau;
};

struct MeasurementUpdate {
	std::vector<double> zeta;
	std::vector<std::vector<double>> tau;
	std::vector<bool> zeta_accepted;
	std::vector<bool> tau_accepted;
};

/// MH updates of each indicator's loading and thresholds.
[[nodiscard]] inline MeasurementUpdate draw_measurement(const SamplerContext &ctx, const ParameterState &state, const MeasurementScales &scales,
                                                        Rng &rng) {
	const std::size_t Q = ctx.model.n_indicators();
	MeasurementUpdate out{state.zeta, state.tau, std::vector<bool>(Q, false), std::vector<bool>(Q, false)};
	const double zv = ctx.prior.zeta_variance;
	const double tv = ctx.prior.threshold_variance;
	for (std::size_t q = 0; q < Q; ++q) {
		double curr_ll = indicator_loglik(ctx, state, q, out.zeta[q], out.tau[q]);

		const double zeta_cand = out.zeta[q] + scales.zeta[q] * standard_normal(rng);
		const double cand_target = indicator_loglik(ctx, state, q, zeta_cand, out.tau[q]) + log_normal_kernel(zeta_cand, zv);
		if (mh_accept(cand_target, curr_ll + log_normal_kernel(out.zeta[q], zv), 0.0, rng)) {
			curr_ll = cand_target - log_normal_kernel(zeta_cand, zv);
			out.zeta[q] = zeta_cand;
			out.zeta_accepted[q] = true;
		}

		const auto u = thresholds_to_unconstrained(out.tau[q]);
		auto u_cand = u;
		double prior_curr = 0.0;
		double prior_cand = 0.0;
		for (std::size_t k = 0; k < u.size(); ++k) {
			u_cand[k] += scales.tau[q] * standard_normal(rng);
			prior_curr += log_normal_kernel(u[k], tv);
			prior_cand += log_normal_kernel(u_cand[k], tv);
		}
		auto tau_cand = thresholds_from_unconstrained(u_cand);
		double tau_target = kNegInf;
		if (strictly_increasing(tau_cand)) {
			tau_target = indicator_loglik(ctx, state, q, out.zeta[q], tau_cand) + prior_cand;
		}
		if (mh_accept(tau_target, curr_ll + prior_curr, 0.0, rng)) {
			out.tau[q] = std::move(tau_cand);
			out.tau_accepted[q] = true;
		}
	}
	return out;
}

/// Sign identification. Negating one LV's alpha column together with its
/// gamma row, its loadings zeta and its utility loadings Lambda leaves the
/// likelihood and every (symmetric) prior unchanged, so the posterior has a
/// mirror mode per LV. Whenever the anchor (first) indicator's loading is
/// negative the whole LV is reflected, which folds the chain onto zeta >= 0.
/// Returns the number of LVs reflected.
inline std::size_t reflect_latent_signs(const CompiledModel &model, ParameterState &state) {
	const auto &layout = model.layout();
	std::size_t flipped = 0;
	for (std::size_t q = 0; q < model.n_indicators(); ++q) {
		if (!model.is_anchor_indicator(q) || !(state.zeta[q] < 0.0)) {
			continue;
		}
		const std::size_t l = model.indicator_latent(q);
		const auto li = static_cast<Eigen::Index>(l);
		++flipped;
		if (state.alpha.cols() > li) {
			state.alpha.col(li) *= -1.0;
		}
		state.gamma.row(li) *= -1.0;
		for (std::size_t r = 0; r < model.n_indicators(); ++r) {
			if (model.indicator_latent(r) == l) {
				state.zeta[r] = -state.zeta[r];
			}
		}
		for (const auto &slot : layout.slots()) {
			if (slot.source != CoefficientSource::latent || model.spec().latent_index(slot.attribute_or_lv) != l) {
				continue;
			}
			const auto k = static_cast<Eigen::Index>(slot.index);
			if (slot.kind == CoefficientKind::fixed) {
				state.fixed[k] = -state.fixed[k];
			} else {
				state.mu[k] = -state.mu[k];
				if (state.beta.rows() > 0) {
					state.beta.col(k) *= -1.0;
				}
				state.omega.row(k) *= -1.0;
				state.omega.col(k) *= -1.0;
			}
		}
	}
	return flipped;
}

struct ThetaScales {
	std::vector<double> beta;        ///< per individual
	std::vector<double> fixed;       ///< per fixed coefficient
	std::vector<double> mu_shift;    ///< per random coefficient
	std::vector<double> omega_scale; ///< per random coefficient
};

struct ThetaUpdate {
	RowMatrix beta;
	Eigen::VectorXd fixed;
	Eigen::VectorXd mu;
	Eigen::MatrixXd omega;
	std::vector<bool> beta_accepted;
	std::vector<bool> fixed_accepted;
	std::vector<bool> shift_accepted;
	std::vector<bool> scale_accepted;
	std::size_t jitter_retries = 0;
};

/// Inverse-Wishart(dof, scale) draw via the Bartlett decomposition of the
/// matching Wishart(dof, scale^-1).
[[nodiscard]] inline Eigen::MatrixXd draw_inverse_wishart(double dof, const Eigen::MatrixXd &scale, Rng &rng) {
	const Eigen::Index K = scale.rows();
	const Eigen::MatrixXd scale_inv = scale.llt().solve(Eigen::MatrixXd::Identity(K, K));
	const Eigen::MatrixXd C = scale_inv.llt().matrixL();
	Eigen::MatrixXd A = Eigen::MatrixXd::Zero(K, K);
	for (Eigen::Index j = 0; j < K; ++j) {
		std::chi_squared_distribution<double> chi(dof - static_cast<double>(j));
		A(j, j) = std::sqrt(chi(rng));
		for (Eigen::Index k = 0; k < j; ++k) {
			A(j, k) = standard_normal(rng);
		}
	}
	const Eigen::MatrixXd CA = C * A;
	const Eigen::MatrixXd wishart = CA * CA.transpose();
	Eigen::MatrixXd out = wishart.llt().solve(Eigen::MatrixXd::Identity(K, K));
	return 0.5 * (out + out.transpose());
}

/// Exact conjugate draw of mu | beta, omega under a Normal(0, v I) prior.
[[nodiscard]] inline Eigen::VectorXd draw_mu(const RowMatrix &beta, const Eigen::MatrixXd &omega, double prior_variance, Rng &rng) {
	const Eigen::Index R = omega.rows();
	if (R == 0) {
		return Eigen::VectorXd(0);
	}
	const auto N = static_cast<double>(beta.rows());
	const Eigen::MatrixXd omega_inv = omega.llt().solve(Eigen::MatrixXd::Identity(R, R));
	const Eigen::MatrixXd precision = N * omega_inv + Eigen::MatrixXd::Identity(R, R) / prior_variance;
	const Eigen::VectorXd sum = beta.rows() > 0 ? Eigen::VectorXd(beta.colwise().sum().transpose()) : Eigen::VectorXd::Zero(R);
	const Eigen::LLT<Eigen::MatrixXd> llt(precision);
	const Eigen::VectorXd mean = llt.solve(omega_inv * sum);
	Eigen::VectorXd e(R);
	for (Eigen::Index k = 0; k < R; ++k) {
		e[k] = standard_normal(rng);
	}
	return mean + llt.matrixU().solve(e);
}

/// Exact conjugate draw of omega | beta, mu: inverse-gamma per dimension in
/// diagonal mode, inverse-Wishart otherwise.
[[nodiscard]] inline Eigen::MatrixXd draw_omega(const RowMatrix &beta, const Eigen::VectorXd &mu, const PriorSpec &prior, bool full_covariance,
                                                Rng &rng, std::size_t *jitter_retries = nullptr) {
	const Eigen::Index R = mu.size();
	if (R == 0) {
		return Eigen::MatrixXd(0, 0);
	}
	const auto N = static_cast<double>(beta.rows());
	Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(R, R);
	for (Eigen::Index i = 0; i < beta.rows(); ++i) {
		const Eigen::VectorXd d = beta.row(i).transpose() - mu;
		scatter.noalias() += d * d.transpose();
	}
	if (!full_covariance) {
		Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(R, R);
		for (Eigen::Index k = 0; k < R; ++k) {
			const double shape = prior.inverse_gamma_shape + 0.5 * N;
			const double rate = prior.inverse_gamma_scale + 0.5 * scatter(k, k);
			std::gamma_distribution<double> g(shape, 1.0 / rate);
			double precision = g(rng);
			while (!(precision > 0.0)) {
				precision = g(rng);
			}
			omega(k, k) = 1.0 / precision;
		}
		return omega;
	}
	const double dof = static_cast<double>(R) + prior.wishart_extra_dof + N;
	const Eigen::MatrixXd scale = prior.wishart_scale * Eigen::MatrixXd::Identity(R, R) + scatter;
	Eigen::MatrixXd omega = draw_inverse_wishart(dof, scale, rng);
	double jitter = 1e-10 * std::max(1.0, omega.diagonal().cwiseAbs().maxCoeff());
	for (int attempt = 0; !positive_definite(omega); ++attempt) {
		if (attempt >= 20) {
			throw NumericError("omega draw is not positive definite after jitter");
		}
		std::cerr << "warning: omega draw not positive definite, adding jitter " << jitter << "\n";
		omega += jitter * Eigen::MatrixXd::Identity(R, R);
		jitter *= 10.0;
		if (jitter_retries != nullptr) {
			++*jitter_retries;
		}
	}
	return omega;
}

/// Log prior kernel of omega: inverse-gamma per diagonal entry, or
/// inverse-Wishart(K + extra dof, scale I) in full mode.
[[nodiscard]] inline double log_omega_prior(const Eigen::MatrixXd &omega, const PriorSpec &prior, bool full_covariance) {
	const Eigen::Index K = omega.rows();
	if (!full_covariance) {
		double lp = 0.0;
		for (Eigen::Index k = 0; k < K; ++k) {
			lp += -(prior.inverse_gamma_shape + 1.0) * std::log(omega(k, k)) - prior.inverse_gamma_scale / omega(k, k);
		}
		return lp;
	}
	const Eigen::LLT<Eigen::MatrixXd> llt(omega);
	if (llt.info() != Eigen::Success) {
		return kNegInf;
	}
	const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
	const double dof = static_cast<double>(K) + prior.wishart_extra_dof;
	const double trace = prior.wishart_scale * llt.solve(Eigen::MatrixXd::Identity(K, K)).trace();
	return -0.5 * (dof + static_cast<double>(K) + 1.0) * log_det - 0.5 * trace;
}

/// Sum over individuals of the log choice probability with the given fixed coefficients.
[[nodiscard]] inline double choice_loglik_all(const SamplerContext &ctx, const ParameterState &state, const Eigen::VectorXd &fixed) {
	if (!ctx.likelihood) {
		return 0.0;
	}
	thread_local std::vector<double> coef;
	thread_local std::vector<double> scratch;
	const auto &model = ctx.model;
	const double *alpha = state.alpha.data();
	const auto L = static_cast<std::size_t>(state.alpha.cols());
	double total = 0.0;
	for (std::size_t i = 0; i < model.n_individuals(); ++i) {
		if (state.beta.rows() > 0) {
			model.layout().assemble(fixed, state.beta.row(static_cast<Eigen::Index>(i)).transpose(), coef);
		} else {
			model.layout().assemble(fixed, state.mu, coef);
		}
		total += log_choice_probability(model.individuals()[i], coef, alpha == nullptr ? nullptr : alpha + i * L, scratch);
	}
	return total;
}

/// theta block: per-individual random coefficients (MH with a chol(omega)-shaped
/// walk), population-fixed coefficients (scalar MH), whole-sample location and
/// scale moves (skipped when their scales are not given), then mu and omega exactly.
[[nodiscard]] inline ThetaUpdate draw_theta(const SamplerContext &ctx, const ParameterState &state, const ThetaScales &scales,
                                            std::span<Rng> individual_rngs, Rng &population_rng) {
	const auto &model = ctx.model;
	const auto &layout = model.layout();
	const auto R = static_cast<Eigen::Index>(layout.n_random());
	const auto F = static_cast<Eigen::Index>(layout.n_fixed());
	const std::size_t N = model.n_individuals();
	const auto L = static_cast<std::size_t>(state.alpha.cols());
	ThetaUpdate out;
	out.beta = state.beta;
	out.fixed = state.fixed;
	out.beta_accepted.assign(N, false);
	out.fixed_accepted.assign(static_cast<std::size_t>(F), false);

	thread_local std::vector<double> coef;
	thread_local std::vector<double> scratch;
	auto alpha_of = [&](std::size_t i) -> const double * { return L == 0 ? nullptr : state.alpha.data() + i * L; };

	if (R > 0) {
		const Eigen::LLT<Eigen::MatrixXd> omega_llt(state.omega);
		const Eigen::MatrixXd chol = omega_llt.matrixL();
		auto log_prior = [&](const Eigen::VectorXd &b) {
			const Eigen::VectorXd d = omega_llt.matrixL().solve(b - state.mu);
			return -0.5 * d.squaredNorm();
		};
		Eigen::VectorXd e(R);
		for (std::size_t i = 0; i < N; ++i) {
			Rng &rng = individual_rngs[i];
			const Eigen::VectorXd curr = out.beta.row(static_cast<Eigen::Index>(i)).transpose();
			for (Eigen::Index k = 0; k < R; ++k) {
				e[k] = standard_normal(rng);
			}
			const Eigen::VectorXd cand = curr + scales.beta[i] * (chol * e);
			double lc = log_prior(curr);
			double ln = log_prior(cand);
			if (ctx.likelihood) {
				layout.assemble(out.fixed, curr, coef);
				lc += log_choice_probability(model.individuals()[i], coef, alpha_of(i), scratch);
				layout.assemble(out.fixed, cand, coef);
				ln += log_choice_probability(model.individuals()[i], coef, alpha_of(i), scratch);
			}
			if (mh_accept(ln, lc, 0.0, rng)) {
				out.beta.row(static_cast<Eigen::Index>(i)) = cand.transpose();
				out.beta_accepted[i] = true;
			}
		}
	}

	if (F > 0) {
		ParameterState view;
		view.beta = out.beta;
		view.alpha = state.alpha;
		view.mu = state.mu;
		const double v = ctx.prior.coefficient_variance;
		double curr_ll = choice_loglik_all(ctx, view, out.fixed);
		for (Eigen::Index k = 0; k < F; ++k) {
			Eigen::VectorXd cand = out.fixed;
			cand[k] += scales.fixed[static_cast<std::size_t>(k)] * standard_normal(population_rng);
			const double cand_ll = choice_loglik_all(ctx, view, cand);
			if (mh_accept(cand_ll + log_normal_kernel(cand[k], v), curr_ll + log_normal_kernel(out.fixed[k], v), 0.0, population_rng)) {
				out.fixed = cand;
				curr_ll = cand_ll;
				out.fixed_accepted[static_cast<std::size_t>(k)] = true;
			}
		}
	}

	// Whole-sample moves along the directions that individual-level data
	// barely inform: shift mu_k and every beta_ik together, and rescale the
	// deviations beta_ik - mu_k together with row/column k of omega. Both keep
	// the Normal(mu, omega) prior of beta invariant up to the Jacobian terms.
	out.mu = state.mu;
	out.omega = state.omega;
	out.shift_accepted.assign(static_cast<std::size_t>(R), false);
	out.scale_accepted.assign(static_cast<std::size_t>(R), false);
	const bool moves = static_cast<Eigen::Index>(scales.mu_shift.size()) == R && static_cast<Eigen::Index>(scales.omega_scale.size()) == R;
	if (R > 0 && N > 0 && moves) {
		const bool full = model.spec().full_covariance;
		const double v = ctx.prior.coefficient_variance;
		ParameterState view;
		view.alpha = state.alpha;
		view.beta = out.beta;
		double curr_ll = choice_loglik_all(ctx, view, out.fixed);
		for (Eigen::Index k = 0; k < R; ++k) {
			const double delta = scales.mu_shift[static_cast<std::size_t>(k)] * standard_normal(population_rng);
			view.beta.col(k) = out.beta.col(k).array() + delta;
			const double cand_ll = choice_loglik_all(ctx, view, out.fixed);
			const double mu_cand = out.mu[k] + delta;
			if (mh_accept(cand_ll + log_normal_kernel(mu_cand, v), curr_ll + log_normal_kernel(out.mu[k], v), 0.0, population_rng)) {
				out.beta.col(k) = view.beta.col(k);
				out.mu[k] = mu_cand;
				curr_ll = cand_ll;
				out.shift_accepted[static_cast<std::size_t>(k)] = true;
			} else {
				view.beta.col(k) = out.beta.col(k);
			}
		}
		for (Eigen::Index k = 0; k < R; ++k) {
			const double delta = scales.omega_scale[static_cast<std::size_t>(k)] * standard_normal(population_rng);
			const double f = std::exp(delta);
			view.beta.col(k) = out.mu[k] + f * (out.beta.col(k).array() - out.mu[k]);
			Eigen::MatrixXd omega_cand = out.omega;
			omega_cand.row(k) *= f;
			omega_cand.col(k) *= f;
			const double cand_ll = choice_loglik_all(ctx, view, out.fixed);
			const double jacobian = (full ? static_cast<double>(R) + 1.0 : 2.0) * delta;
			if (mh_accept(cand_ll + log_omega_prior(omega_cand, ctx.prior, full) + jacobian, curr_ll + log_omega_prior(out.omega, ctx.prior, full),
			              0.0, population_rng)) {
				out.beta.col(k) = view.beta.col(k);
				out.omega = omega_cand;
				curr_ll = cand_ll;
				out.scale_accepted[static_cast<std::size_t>(k)] = true;
			} else {
				view.beta.col(k) = out.beta.col(k);
			}
		}
	}

	out.mu = draw_mu(out.beta, out.omega, ctx.prior.coefficient_variance, population_rng);
	out.omega = draw_omega(out.beta, out.mu, ctx.prior, model.spec().full_covariance, population_rng, &out.jitter_retries);
	return out;
}

// ---------------------------------------------------------------------------
// Chain driver

/// Logistic quantiles of smoothed empirical category frequencies.
[[nodiscard]] inline std::vector<double> initial_thresholds(const CompiledModel &model, std::size_t q) {
	const int K = model.n_categories(q);
	std::vector<double> counts(static_cast<std::size_t>(K), 0.5);
	double total = 0.5 * K;
	for (const auto &person : model.individuals()) {
		if (person.responses[q] >= 0) {
			counts[static_cast<std::size_t>(person.responses[q])] += 1.0;
			total += 1.0;
		}
	}
	std::vector<double> tau;
	double cum = 0.0;
	for (int k = 0; k + 1 < K; ++k) {
		cum += counts[static_cast<std::size_t>(k)] / total;
		tau.push_back(std::log(cum / (1.0 - cum)));
	}
	return tau;
}

[[nodiscard]] inline ParameterState initial_state(const CompiledModel &model) {
	const auto L = static_cast<Eigen::Index>(model.n_latent());
	const auto Z = static_cast<Eigen::Index>(model.n_covariates());
	const auto N = static_cast<Eigen::Index>(model.n_individuals());
	const auto R = static_cast<Eigen::Index>(model.layout().n_random());
	ParameterState s;
	s.gamma = Eigen::MatrixXd::Zero(L, Z);
	s.zeta.assign(model.n_indicators(), 0.0);
	for (std::size_t q = 0; q < model.n_indicators(); ++q) {
		s.tau.push_back(initial_thresholds(model, q));
	}
	s.fixed = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.layout().n_fixed()));
	s.mu = Eigen::VectorXd::Zero(R);
	s.omega = Eigen::MatrixXd::Identity(R, R);
	s.beta = RowMatrix::Zero(N, R);
	s.alpha = RowMatrix::Zero(N, L);
	return s;
}

/// Runs one chain. Chain `c` draws from streams keyed by (seed, c), so chains
/// are reproducible independently of each other.
class GibbsSampler {
public:
	GibbsSampler(const CompiledModel &model, SamplerConfig config, std::size_t chain = 0)
	    : model_(model), config_(std::move(config)), chain_(chain), ctx_{model, config_.prior, config_.likelihood_enabled},
	      population_rng_(make_stream(config_.seed, {chain, 1})) {
		config_.validate();
		const std::size_t N = model.n_individuals();
		individual_rngs_.reserve(N);
		for (std::size_t i = 0; i < N; ++i) {
			individual_rngs_.push_back(make_stream(config_.seed, {chain, 0, i}));
		}
		const auto &p = config_.proposal_scales;
		alpha_scale_.assign(N, p.alpha);
		theta_scales_.beta.assign(N, p.beta);
		theta_scales_.fixed.assign(model.layout().n_fixed(), p.fixed);
		theta_scales_.mu_shift.assign(model.layout().n_random(), p.fixed);
		theta_scales_.omega_scale.assign(model.layout().n_random(), p.fixed);
		measurement_scales_.zeta.assign(model.n_indicators(), p.zeta);
		measurement_scales_.tau.assign(model.n_indicators(), p.tau);
		state_ = initial_state(model);
		check_initial_likelihood();
	}

	[[nodiscard]] const ParameterState &state() const { return state_; }
	[[nodiscard]] const SamplerConfig &config() const { return config_; }

	/// Replaces the current state (shape-checked). Used to start from a known point.
	void set_state(ParameterState state) {
		validate_state(model_.spec(), model_.layout(), state);
		if (static_cast<std::size_t>(state.alpha.rows()) != model_.n_individuals() ||
		    static_cast<std::size_t>(state.beta.rows()) != model_.n_individuals()) {
			throw ParameterError("sampler state needs per-individual alpha and beta");
		}
		state_ = std::move(state);
	}

	/// One sweep in block order alpha -> gamma -> (zeta, tau) -> theta.
	void sweep(bool adapt) {
		const std::size_t N = model_.n_individuals();
		const std::size_t L = model_.n_latent();
		++sweep_index_;
		const double gain = std::pow(static_cast<double>(sweep_index_), -0.6);

		if (L > 0) {
			const double target = L == 1 ? 0.30 : 0.23;
			for (std::size_t i = 0; i < N; ++i) {
				const auto update = draw_alpha(ctx_, state_, i, alpha_scale_[i], individual_rngs_[i]);
				state_.alpha.row(static_cast<Eigen::Index>(i)) = update.alpha.transpose();
				record("alpha", update.accepted);
				if (adapt) {
					adapt_scale(alpha_scale_[i], update.accepted, target, gain);
				}
			}
			state_.gamma = draw_gamma(ctx_, state_, population_rng_);
		}

		if (model_.n_indicators() > 0) {
			auto m = draw_measurement(ctx_, state_, measurement_scales_, population_rng_);
			state_.zeta = std::move(m.zeta);
			state_.tau = std::move(m.tau);
			for (std::size_t q = 0; q < model_.n_indicators(); ++q) {
				record("zeta", m.zeta_accepted[q]);
				record("tau", m.tau_accepted[q]);
				if (adapt) {
					adapt_scale(measurement_scales_.zeta[q], m.zeta_accepted[q], 0.30, gain);
					adapt_scale(measurement_scales_.tau[q], m.tau_accepted[q], state_.tau[q].size() == 1 ? 0.30 : 0.23, gain);
				}
			}
			reflect_latent_signs(model_, state_);
		}

		auto t = draw_theta(ctx_, state_, theta_scales_, individual_rngs_, population_rng_);
		const double beta_target = model_.layout().n_random() == 1 ? 0.30 : 0.23;
		for (std::size_t i = 0; i < t.beta_accepted.size() && model_.layout().n_random() > 0; ++i) {
			record("beta", t.beta_accepted[i]);
			if (adapt) {
				adapt_scale(theta_scales_.beta[i], t.beta_accepted[i], beta_target, gain);
			}
		}
		for (std::size_t k = 0; k < t.fixed_accepted.size(); ++k) {
			record("fixed", t.fixed_accepted[k]);
			if (adapt) {
				adapt_scale(theta_scales_.fixed[k], t.fixed_accepted[k], 0.30, gain);
			}
		}
		for (std::size_t k = 0; k < t.shift_accepted.size(); ++k) {
			record("mu_shift", t.shift_accepted[k]);
			record("omega_scale", t.scale_accepted[k]);
			if (adapt) {
				adapt_scale(theta_scales_.mu_shift[k], t.shift_accepted[k], 0.30, gain);
				adapt_scale(theta_scales_.omega_scale[k], t.scale_accepted[k], 0.30, gain);
			}
		}
		state_.beta = std::move(t.beta);
		state_.fixed = std::move(t.fixed);
		state_.mu = std::move(t.mu);
		state_.omega = std::move(t.omega);
		jitter_retries_ += t.jitter_retries;
	}

	PosteriorDraws run() {
		PosteriorDraws out;
		out.config = config_;
		out.chain = chain_;
		for (const auto &person : model_.individuals()) {
			out.individual_ids.push_back(person.id);
		}
		out.beta_mean = RowMatrix::Zero(state_.beta.rows(), state_.beta.cols());
		out.alpha_mean = RowMatrix::Zero(state_.alpha.rows(), state_.alpha.cols());
		out.states.reserve(config_.stored_count());
		for (std::size_t s = 0; s < config_.n_sweeps; ++s) {
			const bool burning = s < config_.burn_in;
			if (!burning && s == config_.burn_in) {
				counts_.clear();
			}
			sweep(burning && config_.adapt_during_burn_in);
			if (burning || (s - config_.burn_in + 1) % config_.thin != 0) {
				continue;
			}
			if (!strictly_increasing_all(state_.tau)) {
				throw NumericError("sampler produced non-increasing thresholds");
			}
			if (!positive_definite(state_.omega)) {
				throw NumericError("sampler produced a non positive-definite omega");
			}
			ParameterState stored;
			stored.gamma = state_.gamma;
			stored.zeta = state_.zeta;
			stored.tau = state_.tau;
			stored.fixed = state_.fixed;
			stored.mu = state_.mu;
			stored.omega = state_.omega;
			if (config_.store_individual) {
				stored.beta = state_.beta;
				stored.alpha = state_.alpha;
			}
			out.beta_mean += state_.beta;
			out.alpha_mean += state_.alpha;
			out.states.push_back(std::move(stored));
		}
		if (!out.states.empty()) {
			out.beta_mean /= static_cast<double>(out.states.size());
			out.alpha_mean /= static_cast<double>(out.states.size());
		}
		for (const auto &[block, c] : counts_) {
			out.acceptance[block] = c.attempts == 0 ? 0.0 : static_cast<double>(c.accepted) / static_cast<double>(c.attempts);
		}
		out.omega_jitter_retries = jitter_retries_;
		return out;
	}

	/// Current proposal scales, for inspection after adaptation.
	[[nodiscard]] const std::vector<double> &alpha_scales() const { return alpha_scale_; }
	[[nodiscard]] const ThetaScales &theta_scales() const { return theta_scales_; }
	[[nodiscard]] const MeasurementScales &measurement_scales() const { return measurement_scales_; }

private:
	struct Count {
		std::size_t accepted = 0;
		std::size_t attempts = 0;
	};

	static bool strictly_increasing_all(const std::vector<std::vector<double>> &tau) {
		return std::all_of(tau.begin(), tau.end(), [](const auto &t) { return strictly_increasing(t); });
	}

	static void adapt_scale(double &scale, bool accepted, double target, double gain) {
		scale *= std::exp(gain * ((accepted ? 1.0 : 0.0) - target));
		scale = std::clamp(scale, 1e-6, 1e3);
	}

	void record(const std::string &block, bool accepted) {
		auto &c = counts_[block];
		c.attempts += 1;
		c.accepted += accepted ? 1 : 0;
	}

	void check_initial_likelihood() const {
		if (!config_.likelihood_enabled) {
			return;
		}
		std::vector<double> coef;
		std::vector<double> scratch;
		for (std::size_t i = 0; i < model_.n_individuals(); ++i) {
			const auto &person = model_.individuals()[i];
			individual_coefficients(model_, state_, i, coef);
			const double *alpha = model_.n_latent() == 0 ? nullptr : state_.alpha.data() + i * model_.n_latent();
			if (!std::isfinite(log_choice_probability(person, coef, alpha, scratch))) {
				throw NumericError("initialization: non-finite choice log-likelihood (theta block) for individual " + person.id);
			}
			if (!std::isfinite(log_indicator_probability(model_, person, state_.zeta, state_.tau, alpha))) {
				throw NumericError("initialization: non-finite indicator log-likelihood (zeta/tau block) for individual " + person.id);
			}
		}
	}

	const CompiledModel &model_;
	SamplerConfig config_;
	std::size_t chain_;
	SamplerContext ctx_;
	ParameterState state_;
	Rng population_rng_;
	std::vector<Rng> individual_rngs_;
	std::vector<double> alpha_scale_;
	ThetaScales theta_scales_;
	MeasurementScales measurement_scales_;
	std::map<std::string, Count> counts_;
	std::size_t sweep_index_ = 0;
	std::size_t jitter_retries_ = 0;
};

[[nodiscard]] inline PosteriorDraws run_chain(const CompiledModel &model, const SamplerConfig &config, std::size_t chain = 0) {
	GibbsSampler sampler(model, config, chain);
	return sampler.run();
}

[[nodiscard]] inline PosteriorDraws run_chain(const ModelSpec &spec, const ChoiceDataset &data, const SamplerConfig &config) {
	const CompiledModel model(spec, data);
	return run_chain(model, config, 0);
}

/// All chains of config.n_chains, sequentially.
[[nodiscard]] inline std::vector<PosteriorDraws> run_chains(const CompiledModel &model, const SamplerConfig &config) {
	config.validate();
	std::vector<PosteriorDraws> out;
	for (std::size_t c = 0; c < config.n_chains; ++c) {
		out.push_back(run_chain(model, config, c));
	}
	return out;
}

} // namespace hdcm

#endif
