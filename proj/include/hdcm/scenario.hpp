#ifndef HDCM_SCENARIO_HPP
#define HDCM_SCENARIO_HPP

// Market shares from the posterior and what-if attribute perturbations.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "likelihood.hpp"
#include "model.hpp"
#include "random.hpp"
#include "sampler.hpp"

namespace hdcm {

struct Perturbation {
	std::string attribute;
	std::vector<std::string> alternatives;
	double multiplier = 1.0;
};

struct ScenarioSpec {
	std::string name;
	std::vector<Perturbation> perturbations;
};

struct ScenarioColumn {
	std::string name;
	std::vector<double> shares; ///< percent, spec alternative order
	std::vector<double> deltas; ///< percentage points vs baseline
};

struct ShareTable {
	std::vector<std::string> alternatives;
	std::vector<double> observed;
	std::vector<double> baseline;
	std::vector<ScenarioColumn> scenarios;
};

inline void validate_scenario(const ModelSpec &spec, const ChoiceDataset &data, const ScenarioSpec &scenario) {
	for (const auto &p : scenario.perturbations) {
		if (std::find(data.attribute_names.begin(), data.attribute_names.end(), p.attribute) == data.attribute_names.end()) {
			throw ConfigurationError("scenario '" + scenario.name + "' perturbs unknown attribute '" + p.attribute + "'");
		}
		if (!(p.multiplier > 0.0) || !std::isfinite(p.multiplier)) {
			throw ConfigurationError("scenario '" + scenario.name + "' has a non-positive multiplier");
		}
		if (p.alternatives.empty()) {
			throw ConfigurationError("scenario '" + scenario.name + "' perturbation of '" + p.attribute + "' targets no alternative");
		}
		for (const auto &alt : p.alternatives) {
			if (!spec.alternative_index(alt)) {
				throw ConfigurationError("scenario '" + scenario.name + "' targets unknown alternative '" + alt + "'");
			}
		}
	}
}

/// Copy of the dataset with the targeted (attribute, alternative) cells multiplied.
[[nodiscard]] inline ChoiceDataset apply_perturbation(const ModelSpec &spec, const ChoiceDataset &data, const ScenarioSpec &scenario) {
	validate_scenario(spec, data, scenario);
	ChoiceDataset out = data;
	for (auto &person : out.individuals) {
		for (const auto &p : scenario.perturbations) {
			for (const auto &alt : p.alternatives) {
				const auto a = person.attributes.find(alt);
				if (a == person.attributes.end()) {
					continue;
				}
				const auto cell = a->second.find(p.attribute);
				if (cell != a->second.end()) {
					cell->second *= p.multiplier;
				}
			}
		}
	}
	return out;
}

/// Chosen-alternative frequencies in percent.
[[nodiscard]] inline std::vector<double> observed_shares(const ModelSpec &spec, const ChoiceDataset &data) {
	std::vector<double> shares(spec.n_alternatives(), 0.0);
	if (data.individuals.empty()) {
		return shares;
	}
	for (const auto &person : data.individuals) {
		const auto a = spec.alternative_index(person.chosen);
		if (!a) {
			throw DataError("individual " + person.id + " chose unknown alternative '" + person.chosen + "'");
		}
		shares[*a] += 1.0;
	}
	for (auto &s : shares) {
		s *= 100.0 / static_cast<double>(data.individuals.size());
	}
	return shares;
}

namespace detail {

/// Predicted shares (percent) for several datasets that differ only in
/// attribute values. Each posterior draw's individual coefficients and LVs
/// are taken from the stored state when present, otherwise simulated from
/// the population distribution; either way the same values serve every dataset.
inline std::vector<std::vector<double>> predict_shares(const std::vector<CompiledModel> &models, std::span<const PosteriorDraws> chains,
                                                       std::uint64_t seed) {
	std::size_t n_states = 0;
	for (const auto &c : chains) {
		n_states += c.states.size();
	}
	if (n_states == 0) {
		throw NumericError("market share prediction needs at least one posterior draw");
	}
	const auto &base = models.front();
	const auto &layout = base.layout();
	const std::size_t N = base.n_individuals();
	const std::size_t A = base.spec().n_alternatives();
	const auto L = static_cast<Eigen::Index>(base.n_latent());
	const auto R = static_cast<Eigen::Index>(layout.n_random());
	std::vector<std::vector<double>> totals(models.size(), std::vector<double>(A, 0.0));
	if (N == 0) {
		return totals;
	}
	Rng rng = make_stream(seed, {0x5ce7a210});
	std::vector<double> coef;
	std::vector<double> utilities;
	Eigen::VectorXd beta(R);
	Eigen::VectorXd alpha(L);
	Eigen::VectorXd e(R);
	for (const auto &chain : chains) {
		for (const auto &state : chain.states) {
			const bool stored = static_cast<std::size_t>(state.beta.rows()) == N && static_cast<std::size_t>(state.alpha.rows()) == N;
			Eigen::MatrixXd chol;
			if (!stored && R > 0) {
				chol = state.omega.llt().matrixL();
			}
			for (std::size_t i = 0; i < N; ++i) {
				const auto row = static_cast<Eigen::Index>(i);
				if (stored) {
					beta = state.beta.row(row).transpose();
					alpha = state.alpha.row(row).transpose();
				} else {
					for (Eigen::Index k = 0; k < R; ++k) {
						e[k] = standard_normal(rng);
					}
					if (R > 0) {
						beta = state.mu + chol * e;
					}
					const Eigen::VectorXd mean = structural_mean(state.gamma, base.individuals()[i].z);
					for (Eigen::Index l = 0; l < L; ++l) {
						alpha[l] = mean[l] + standard_normal(rng);
					}
				}
				layout.assemble(state.fixed, beta, coef);
				for (std::size_t m = 0; m < models.size(); ++m) {
					const auto &person = models[m].individuals()[i];
					compiled_utilities(person, coef, alpha.data(), utilities);
					const auto p = mnl_probabilities(utilities);
					for (std::size_t k = 0; k < p.size(); ++k) {
						totals[m][person.alternatives[k]] += p[k];
					}
				}
			}
		}
	}
	const double scale = 100.0 / (static_cast<double>(n_states) * static_cast<double>(N));
	for (auto &t : totals) {
		for (auto &v : t) {
			v *= scale;
		}
	}
	return totals;
}

} // namespace detail

/// Posterior-averaged predicted market share (percent) per alternative.
[[nodiscard]] inline std::vector<double> predict_market_share(const ModelSpec &spec, const ChoiceDataset &data, std::span<const PosteriorDraws> chains,
                                                              std::uint64_t seed = 1) {
	std::vector<CompiledModel> models;
	models.emplace_back(spec, data);
	return detail::predict_shares(models, chains, seed).front();
}

/// Observed, baseline and per-scenario shares with deltas vs baseline. The
/// same posterior draws (and simulated individual values) drive every column.
[[nodiscard]] inline ShareTable share_delta_table(const ModelSpec &spec, const ChoiceDataset &data, std::span<const PosteriorDraws> chains,
                                                  const std::vector<ScenarioSpec> &scenarios, std::uint64_t seed = 1) {
	for (const auto &s : scenarios) {
		validate_scenario(spec, data, s);
	}
	std::vector<CompiledModel> models;
	models.emplace_back(spec, data);
	for (const auto &s : scenarios) {
		models.emplace_back(spec, apply_perturbation(spec, data, s));
	}
	const auto shares = detail::predict_shares(models, chains, seed);
	ShareTable table;
	for (const auto &alt : spec.alternatives) {
		table.alternatives.push_back(alt.id);
	}
	table.observed = observed_shares(spec, data);
	table.baseline = shares.front();
	for (std::size_t s = 0; s < scenarios.size(); ++s) {
		ScenarioColumn col;
		col.name = scenarios[s].name;
		col.shares = shares[s + 1];
		for (std::size_t a = 0; a < col.shares.size(); ++a) {
			col.deltas.push_back(col.shares[a] - table.baseline[a]);
		}
		table.scenarios.push_back(std::move(col));
	}
	return table;
}

} // namespace hdcm

#endif
