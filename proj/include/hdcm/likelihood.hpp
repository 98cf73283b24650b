#ifndef HDCM_LIKELIHOOD_HPP
#define HDCM_LIKELIHOOD_HPP

// Utility, choice-probability and indicator-probability evaluation, and the
// joint likelihood integrated over the latent variables (simulated, plus a
// brute-force quadrature used as a reference).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "model.hpp"
#include "random.hpp"

namespace hdcm {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

[[nodiscard]] inline double logistic(double x) {
	if (x >= 0.0) {
		return 1.0 / (1.0 + std::exp(-x));
	}
	const double e = std::exp(x);
	return e / (1.0 + e);
}

[[nodiscard]] inline double log_logistic(double x) {
	if (x == kPosInf) {
		return 0.0;
	}
	if (x == kNegInf) {
		return kNegInf;
	}
	return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

[[nodiscard]] inline double log_sum_exp(std::span<const double> values) {
	if (values.empty()) {
		return kNegInf;
	}
	const double top = *std::max_element(values.begin(), values.end());
	if (top == kNegInf) {
		return kNegInf;
	}
	double sum = 0.0;
	for (const double v : values) {
		sum += std::exp(v - top);
	}
	return top + std::log(sum);
}

/// Mean of the latent variables given covariates: gamma * z.
[[nodiscard]] inline Eigen::VectorXd structural_mean(const Eigen::MatrixXd &gamma, std::span<const double> z) {
	if (static_cast<std::size_t>(gamma.cols()) != z.size()) {
		throw ConfigurationError("structural_mean: gamma has " + std::to_string(gamma.cols()) + " columns but z has " +
		                         std::to_string(z.size()) + " entries");
	}
	const Eigen::Map<const Eigen::VectorXd> zv(z.data(), static_cast<Eigen::Index>(z.size()));
	return gamma * zv;
}

/// Softmax with max-subtraction.
[[nodiscard]] inline std::vector<double> mnl_probabilities(std::span<const double> utilities) {
	if (utilities.empty()) {
		throw NumericError("mnl_probabilities: no utilities");
	}
	for (const double u : utilities) {
		if (!std::isfinite(u)) {
			throw NumericError("mnl_probabilities: non-finite utility");
		}
	}
	const double top = *std::max_element(utilities.begin(), utilities.end());
	std::vector<double> p(utilities.size());
	double sum = 0.0;
	for (std::size_t k = 0; k < utilities.size(); ++k) {
		p[k] = std::exp(utilities[k] - top);
		sum += p[k];
	}
	for (auto &v : p) {
		v /= sum;
	}
	return p;
}

/// Index of the highest utility; ties go to the lowest index.
[[nodiscard]] inline std::size_t predict_choice(std::span<const double> utilities) {
	if (utilities.empty()) {
		throw NumericError("predict_choice: no utilities");
	}
	std::size_t best = 0;
	for (std::size_t k = 1; k < utilities.size(); ++k) {
		if (utilities[k] > utilities[best]) {
			best = k;
		}
	}
	return best;
}

inline void require_increasing(std::span<const double> tau) {
	for (std::size_t k = 1; k < tau.size(); ++k) {
		if (!(tau[k] > tau[k - 1])) {
			throw ParameterError("ordered logit thresholds must be strictly increasing");
		}
	}
}

/// Category probabilities of the ordered logit with index zeta * alpha.
[[nodiscard]] inline std::vector<double> ordered_logit_pmf(double zeta, double alpha, std::span<const double> tau) {
	require_increasing(tau);
	const double index = zeta * alpha;
	std::vector<double> p(tau.size() + 1);
	double lower = 0.0;
	for (std::size_t c = 0; c < tau.size(); ++c) {
		const double upper = logistic(tau[c] - index);
		p[c] = upper - lower;
		lower = upper;
	}
	p[tau.size()] = 1.0 - lower;
	return p;
}

/// log P(category) for a 0-based category; no monotonicity check (hot path).
[[nodiscard]] inline double log_ordered_logit(int category, double index, std::span<const double> tau) {
	const auto c = static_cast<std::size_t>(category);
	const double lo = c == 0 ? kNegInf : tau[c - 1] - index;
	const double hi = c == tau.size() ? kPosInf : tau[c] - index;
	if (lo == kNegInf) {
		return log_logistic(hi);
	}
	if (hi == kPosInf) {
		return log_logistic(-lo);
	}
	// sigma(hi) - sigma(lo), evaluated on whichever side keeps the difference well conditioned
	if (lo >= 0.0) {
		const double a = log_logistic(-lo);
		const double b = log_logistic(-hi);
		return a + std::log1p(-std::exp(b - a));
	}
	const double a = log_logistic(hi);
	const double b = log_logistic(lo);
	return a + std::log1p(-std::exp(b - a));
}

/// Systematic utility of every available alternative (spec order) for a full coefficient vector.
[[nodiscard]] inline std::vector<double> systematic_utility(const ModelSpec &spec, const CoefficientLayout &layout,
                                                            const Individual &individual, std::span<const double> beta,
                                                            std::span<const double> alpha) {
	if (beta.size() != layout.size()) {
		throw ConfigurationError("systematic_utility: expected " + std::to_string(layout.size()) + " coefficients");
	}
	if (alpha.size() != spec.n_latent()) {
		throw ConfigurationError("systematic_utility: expected " + std::to_string(spec.n_latent()) + " latent values");
	}
	std::vector<double> out;
	for (std::size_t a = 0; a < spec.alternatives.size(); ++a) {
		const auto &alt = spec.alternatives[a].id;
		if (!individual.is_available(alt)) {
			continue;
		}
		double u = 0.0;
		for (const auto &entry : layout.entries(a)) {
			switch (entry.source) {
			case CoefficientSource::asc:
				u += beta[entry.slot];
				break;
			case CoefficientSource::attribute:
				u += beta[entry.slot] * individual.attribute(alt, entry.attribute);
				break;
			case CoefficientSource::latent:
				u += beta[entry.slot] * alpha[entry.latent];
				break;
			}
		}
		out.push_back(u);
	}
	return out;
}

[[nodiscard]] inline std::vector<double> systematic_utility(const ModelSpec &spec, const Individual &individual,
                                                            std::span<const double> beta, std::span<const double> alpha) {
	return systematic_utility(spec, CoefficientLayout(spec), individual, beta, alpha);
}

/// Dataset compiled against a spec into index-based form for the numeric kernels.
struct CompiledIndividual {
	std::string id;
	std::vector<std::size_t> alternatives; ///< available alternatives, spec order
	std::size_t chosen = 0;                ///< position within `alternatives`
	std::vector<double> z;
	std::vector<int> responses; ///< per indicator, 0-based category or -1 when missing

	struct Linear {
		std::size_t slot;
		double value;
	};
	struct Latent {
		std::size_t slot;
		std::size_t latent;
	};
	std::vector<std::vector<Linear>> linear; ///< per available alternative
	std::vector<std::vector<Latent>> latent; ///< per available alternative
};

class CompiledModel {
public:
	CompiledModel(const ModelSpec &spec, const ChoiceDataset &data) : spec_(spec), layout_(spec) {
		spec_.validate();
		const auto indicators = spec_.indicators();
		indicator_latent_ = spec_.indicator_latent();
		for (const auto &ind : indicators) {
			indicator_ids_.push_back(ind.id);
			n_categories_.push_back(ind.n_categories);
		}
		structural_mask_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(spec_.n_latent()), static_cast<Eigen::Index>(spec_.n_covariates()));
		for (std::size_t l = 0; l < spec_.n_latent(); ++l) {
			for (const auto &c : spec_.latent_variables[l].structural_covariates) {
				structural_mask_(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(*spec_.covariate_index(c))) = 1.0;
			}
		}
		individuals_.reserve(data.individuals.size());
		for (const auto &person : data.individuals) {
			individuals_.push_back(compile(person));
		}
	}

	[[nodiscard]] const ModelSpec &spec() const { return spec_; }
	[[nodiscard]] const CoefficientLayout &layout() const { return layout_; }
	[[nodiscard]] const std::vector<CompiledIndividual> &individuals() const { return individuals_; }
	[[nodiscard]] std::size_t n_individuals() const { return individuals_.size(); }
	[[nodiscard]] std::size_t n_latent() const { return spec_.n_latent(); }
	[[nodiscard]] std::size_t n_covariates() const { return spec_.n_covariates(); }
	[[nodiscard]] std::size_t n_indicators() const { return indicator_ids_.size(); }
	[[nodiscard]] const std::vector<std::string> &indicator_ids() const { return indicator_ids_; }
	[[nodiscard]] std::size_t indicator_latent(std::size_t q) const { return indicator_latent_[q]; }
	[[nodiscard]] int n_categories(std::size_t q) const { return n_categories_[q]; }
	/// 1 where gamma(l, c) is a free parameter, 0 where it is pinned at zero.
	[[nodiscard]] const Eigen::MatrixXd &structural_mask() const { return structural_mask_; }
	/// True for the first indicator of each LV (its loading fixes the sign of the LV).
	[[nodiscard]] bool is_anchor_indicator(std::size_t q) const { return q == 0 || indicator_latent_[q] != indicator_latent_[q - 1]; }

private:
	CompiledIndividual compile(const Individual &person) const {
		CompiledIndividual out;
		out.id = person.id;
		if (person.z.size() != spec_.n_covariates()) {
			throw DataError("individual " + person.id + " has " + std::to_string(person.z.size()) + " covariates, model declares " +
			                std::to_string(spec_.n_covariates()));
		}
		out.z = person.z;
		bool chosen_found = false;
		for (std::size_t a = 0; a < spec_.alternatives.size(); ++a) {
			const auto &alt = spec_.alternatives[a].id;
			if (!person.is_available(alt)) {
				continue;
			}
			if (alt == person.chosen) {
				out.chosen = out.alternatives.size();
				chosen_found = true;
			}
			out.alternatives.push_back(a);
			std::vector<CompiledIndividual::Linear> linear;
			std::vector<CompiledIndividual::Latent> latent;
			for (const auto &entry : layout_.entries(a)) {
				switch (entry.source) {
				case CoefficientSource::asc:
					linear.push_back({entry.slot, 1.0});
					break;
				case CoefficientSource::attribute:
					linear.push_back({entry.slot, person.attribute(alt, entry.attribute)});
					break;
				case CoefficientSource::latent:
					latent.push_back({entry.slot, entry.latent});
					break;
				}
			}
			out.linear.push_back(std::move(linear));
			out.latent.push_back(std::move(latent));
		}
		if (out.alternatives.empty()) {
			throw DataError("individual " + person.id + " has no available alternative");
		}
		if (!chosen_found) {
			throw DataError("chosen alternative unavailable for individual " + person.id);
		}
		out.responses.assign(indicator_ids_.size(), -1);
		for (std::size_t q = 0; q < indicator_ids_.size(); ++q) {
			const auto it = person.indicator_responses.find(indicator_ids_[q]);
			if (it == person.indicator_responses.end()) {
				continue;
			}
			if (it->second < 1 || it->second > n_categories_[q]) {
				throw DataError("response " + std::to_string(it->second) + " of individual " + person.id + " to indicator '" +
				                indicator_ids_[q] + "' outside 1.." + std::to_string(n_categories_[q]));
			}
			out.responses[q] = it->second - 1;
		}
		return out;
	}

	ModelSpec spec_;
	CoefficientLayout layout_;
	std::vector<CompiledIndividual> individuals_;
	std::vector<std::string> indicator_ids_;
	std::vector<std::size_t> indicator_latent_;
	std::vector<int> n_categories_;
	Eigen::MatrixXd structural_mask_;
};

/// Utilities of the available alternatives of a compiled individual.
inline void compiled_utilities(const CompiledIndividual &person, std::span<const double> coef, const double *alpha, std::vector<double> &out) {
	out.resize(person.alternatives.size());
	for (std::size_t k = 0; k < person.alternatives.size(); ++k) {
		double u = 0.0;
		for (const auto &term : person.linear[k]) {
			u += coef[term.slot] * term.value;
		}
		for (const auto &term : person.latent[k]) {
			u += coef[term.slot] * alpha[term.latent];
		}
		out[k] = u;
	}
}

/// log MNL probability of the observed choice.
[[nodiscard]] inline double log_choice_probability(const CompiledIndividual &person, std::span<const double> coef, const double *alpha,
                                                   std::vector<double> &scratch) {
	compiled_utilities(person, coef, alpha, scratch);
	return scratch[person.chosen] - log_sum_exp(scratch);
}

/// Sum over declared indicators of log P(observed response | alpha).
[[nodiscard]] inline double log_indicator_probability(const CompiledModel &model, const CompiledIndividual &person,
                                                      const std::vector<double> &zeta, const std::vector<std::vector<double>> &tau,
                                                      const double *alpha) {
	double total = 0.0;
	for (std::size_t q = 0; q < person.responses.size(); ++q) {
		if (person.responses[q] < 0) {
			continue;
		}
		total += log_ordered_logit(person.responses[q], zeta[q] * alpha[model.indicator_latent(q)], tau[q]);
	}
	return total;
}

/// Coefficient vector of individual i: beta row i when per-individual draws are present, mu otherwise.
inline void individual_coefficients(const CompiledModel &model, const ParameterState &state, std::size_t i, std::vector<double> &out) {
	if (state.beta.rows() > 0) {
		model.layout().assemble(state.fixed, state.beta.row(static_cast<Eigen::Index>(i)).transpose(), out);
	} else {
		model.layout().assemble(state.fixed, state.mu, out);
	}
}

struct LogLikelihood {
	double value = 0.0;
	/// Individuals whose integrated likelihood underflowed to zero.
	std::vector<std::string> zero_likelihood;
};

/// Simulated joint log-likelihood with alpha integrated out by Monte Carlo over
/// Normal(gamma z_i, I) draws. Deterministic given the seed.
[[nodiscard]] inline LogLikelihood joint_loglik_mc(const CompiledModel &model, const ParameterState &state, std::size_t n_draws,
                                                   std::uint64_t seed) {
	if (n_draws == 0) {
		throw ConfigurationError("joint_loglik_mc: n_draws must be positive");
	}
	validate_state(model.spec(), model.layout(), state);
	const std::size_t L = model.n_latent();
	Rng rng = make_stream(seed);
	LogLikelihood out;
	std::vector<double> coef;
	std::vector<double> scratch;
	std::vector<double> terms(L == 0 ? 1 : n_draws);
	std::vector<double> alpha(L);
	for (std::size_t i = 0; i < model.n_individuals(); ++i) {
		const auto &person = model.individuals()[i];
		individual_coefficients(model, state, i, coef);
		const Eigen::VectorXd mean = structural_mean(state.gamma, person.z);
		for (std::size_t r = 0; r < terms.size(); ++r) {
			for (std::size_t l = 0; l < L; ++l) {
				alpha[l] = mean[static_cast<Eigen::Index>(l)] + standard_normal(rng);
			}
			terms[r] = log_choice_probability(person, coef, alpha.data(), scratch) +
			           log_indicator_probability(model, person, state.zeta, state.tau, alpha.data());
		}
		const double li = log_sum_exp(terms) - std::log(static_cast<double>(terms.size()));
		if (li == kNegInf) {
			out.zero_likelihood.push_back(person.id);
		}
		out.value += li;
	}
	return out;
}

[[nodiscard]] inline LogLikelihood joint_loglik_mc(const ModelSpec &spec, const ChoiceDataset &data, const ParameterState &state,
                                                   std::size_t n_draws, std::uint64_t seed) {
	return joint_loglik_mc(CompiledModel(spec, data), state, n_draws, seed);
}

struct QuadratureGrid {
	double lo = -10.0;
	double hi = 10.0;
	std::size_t n_points = 10001;
};

/// Reference joint log-likelihood: trapezoidal integration over a grid of
/// offsets from gamma z_i in each LV dimension (at most two LVs).
[[nodiscard]] inline LogLikelihood joint_loglik_quadrature(const CompiledModel &model, const ParameterState &state, const QuadratureGrid &grid) {
	const std::size_t L = model.n_latent();
	if (L > 2) {
		throw UnsupportedOracleError("joint_loglik_quadrature supports at most 2 latent variables");
	}
	if (grid.n_points < 101 || !(grid.hi > grid.lo)) {
		throw ConfigurationError("joint_loglik_quadrature needs hi > lo and at least 101 grid points");
	}
	validate_state(model.spec(), model.layout(), state);
	const double h = (grid.hi - grid.lo) / static_cast<double>(grid.n_points - 1);
	std::vector<double> nodes(grid.n_points);
	std::vector<double> log_weights(grid.n_points);
	const double log_norm = -0.5 * std::log(2.0 * M_PI);
	for (std::size_t k = 0; k < grid.n_points; ++k) {
		nodes[k] = grid.lo + h * static_cast<double>(k);
		const double w = (k == 0 || k + 1 == grid.n_points) ? 0.5 * h : h;
		log_weights[k] = std::log(w) + log_norm - 0.5 * nodes[k] * nodes[k];
	}
	LogLikelihood out;
	std::vector<double> coef;
	std::vector<double> scratch;
	std::vector<double> alpha(L);
	std::vector<double> terms;
	for (std::size_t i = 0; i < model.n_individuals(); ++i) {
		const auto &person = model.individuals()[i];
		individual_coefficients(model, state, i, coef);
		const Eigen::VectorXd mean = structural_mean(state.gamma, person.z);
		auto integrand = [&]() {
			return log_choice_probability(person, coef, alpha.data(), scratch) +
			       log_indicator_probability(model, person, state.zeta, state.tau, alpha.data());
		};
		terms.clear();
		if (L == 0) {
			terms.push_back(integrand());
		} else if (L == 1) {
			for (std::size_t k = 0; k < grid.n_points; ++k) {
				alpha[0] = mean[0] + nodes[k];
				terms.push_back(log_weights[k] + integrand());
			}
		} else {
			for (std::size_t j = 0; j < grid.n_points; ++j) {
				alpha[0] = mean[0] + nodes[j];
				for (std::size_t k = 0; k < grid.n_points; ++k) {
					alpha[1] = mean[1] + nodes[k];
					terms.push_back(log_weights[j] + log_weights[k] + integrand());
				}
			}
		}
		const double li = log_sum_exp(terms);
		if (li == kNegInf) {
			out.zero_likelihood.push_back(person.id);
		}
		out.value += li;
	}
	return out;
}

[[nodiscard]] inline LogLikelihood joint_loglik_quadrature(const ModelSpec &spec, const ChoiceDataset &data, const ParameterState &state,
                                                           const QuadratureGrid &grid) {
	return joint_loglik_quadrature(CompiledModel(spec, data), state, grid);
}

/// log-likelihood of the observed choices with every coefficient at zero (equal shares over each availability set).
[[nodiscard]] inline double null_choice_loglik(const CompiledModel &model) {
	double total = 0.0;
	for (const auto &person : model.individuals()) {
		total -= std::log(static_cast<double>(person.alternatives.size()));
	}
	return total;
}

} // namespace hdcm

#endif
