#ifndef HDCM_SYNTHETIC_HPP
#define HDCM_SYNTHETIC_HPP

// Forward simulation of a hybrid choice dataset from known parameters:
// covariates from declared generators, latent values from the structural
// equation, random coefficients from Normal(mu, omega), utilities with
// extreme-value noise, argmax choices and ordered-logit indicator responses.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csv.hpp"
#include "dataset_io.hpp"
#include "error.hpp"
#include "likelihood.hpp"
#include "model.hpp"
#include "random.hpp"
#include "spec_file.hpp"

namespace hdcm {

struct SyntheticData {
	ChoiceDataset data;
	/// Population parameters plus the drawn per-individual beta and alpha.
	ParameterState truth;
};

[[nodiscard]] inline double draw_from(const Generator &g, Rng &rng) {
	switch (g.kind) {
	case Generator::Kind::constant:
		return g.a;
	case Generator::Kind::bernoulli:
		return uniform01(rng) < g.a ? 1.0 : 0.0;
	case Generator::Kind::normal:
		return g.a + g.b * standard_normal(rng);
	case Generator::Kind::uniform:
		return g.a + (g.b - g.a) * uniform01(rng);
	}
	return 0.0;
}

[[nodiscard]] inline int draw_category(std::span<const double> pmf, Rng &rng) {
	const double u = uniform01(rng);
	double cum = 0.0;
	for (std::size_t c = 0; c + 1 < pmf.size(); ++c) {
		cum += pmf[c];
		if (u < cum) {
			return static_cast<int>(c);
		}
	}
	return static_cast<int>(pmf.size()) - 1;
}

/// Individual ids "i000001", ... zero-padded so lexical order matches index order.
[[nodiscard]] inline std::string synthetic_id(std::size_t index, std::size_t n) {
	const std::size_t width = std::max<std::size_t>(6, std::to_string(n).size());
	std::string digits = std::to_string(index + 1);
	return "i" + std::string(width - digits.size(), '0') + digits;
}

[[nodiscard]] inline SyntheticData generate_synthetic(const ModelSpec &spec, const SimulationSpec &sim, const ParameterState &truth,
                                                      std::size_t n_individuals, std::uint64_t seed) {
	spec.validate();
	const CoefficientLayout layout(spec);
	validate_state(spec, layout, truth);
	for (const auto &c : spec.covariates) {
		if (sim.covariates.count(c) == 0) {
			throw ConfigurationError("no simulation generator for covariate '" + c + "'");
		}
	}
	const auto required = detail::required_attributes(spec);
	for (const auto &[alt, attrs] : required) {
		for (const auto &attr : attrs) {
			if (sim.attribute(attr, alt) == nullptr) {
				throw ConfigurationError("no simulation generator for attribute '" + attr + "' of alternative '" + alt + "'");
			}
		}
	}
	const auto indicators = spec.indicators();
	const auto indicator_lv = spec.indicator_latent();
	const auto L = static_cast<Eigen::Index>(spec.n_latent());
	const auto R = static_cast<Eigen::Index>(layout.n_random());

	SyntheticData out;
	out.truth = truth;
	out.truth.beta = RowMatrix::Zero(static_cast<Eigen::Index>(n_individuals), R);
	out.truth.alpha = RowMatrix::Zero(static_cast<Eigen::Index>(n_individuals), L);
	out.data.covariate_names = spec.covariates;
	out.data.attribute_names = spec.referenced_attributes();
	for (const auto &ind : indicators) {
		out.data.indicator_ids.push_back(ind.id);
	}
	const Eigen::MatrixXd chol = R > 0 ? Eigen::MatrixXd(truth.omega.llt().matrixL()) : Eigen::MatrixXd(0, 0);

	Rng rng = make_stream(seed, {0x5e7d});
	std::vector<double> coef;
	for (std::size_t i = 0; i < n_individuals; ++i) {
		Individual person;
		person.id = synthetic_id(i, n_individuals);
		for (const auto &c : spec.covariates) {
			person.z.push_back(draw_from(sim.covariates.at(c), rng));
		}
		for (const auto &alt : spec.alternatives) {
			const auto p = sim.availability.find(alt.id);
			const double prob = p == sim.availability.end() ? 1.0 : p->second;
			if (prob >= 1.0 || uniform01(rng) < prob) {
				person.availability.push_back(alt.id);
			}
		}
		if (person.availability.empty()) {
			for (const auto &alt : spec.alternatives) {
				person.availability.push_back(alt.id);
			}
		}
		for (const auto &alt : person.availability) {
			if (const auto req = required.find(alt); req != required.end()) {
				for (const auto &attr : req->second) {
					person.attributes[alt][attr] = draw_from(*sim.attribute(attr, alt), rng);
				}
			}
		}

		const auto row = static_cast<Eigen::Index>(i);
		const Eigen::VectorXd mean = structural_mean(truth.gamma, person.z);
		for (Eigen::Index l = 0; l < L; ++l) {
			out.truth.alpha(row, l) = mean[l] + standard_normal(rng);
		}
		if (R > 0) {
			Eigen::VectorXd e(R);
			for (Eigen::Index k = 0; k < R; ++k) {
				e[k] = standard_normal(rng);
			}
			out.truth.beta.row(row) = (truth.mu + chol * e).transpose();
		}
		layout.assemble(truth.fixed, out.truth.beta.row(row).transpose(), coef);
		const std::vector<double> alpha(out.truth.alpha.row(row).data(), out.truth.alpha.row(row).data() + L);
		auto utilities = systematic_utility(spec, layout, person, coef, alpha);
		for (auto &u : utilities) {
			u += gumbel(rng);
		}
		person.chosen = person.availability[predict_choice(utilities)];

		for (std::size_t q = 0; q < indicators.size(); ++q) {
			const auto pmf = ordered_logit_pmf(truth.zeta[q], alpha.empty() ? 0.0 : alpha[indicator_lv[q]], truth.tau[q]);
			person.indicator_responses[indicators[q].id] = draw_category(pmf, rng) + 1;
		}
		out.data.individuals.push_back(std::move(person));
	}
	return out;
}

/// Writes the dataset files plus truth.json (population values) and
/// truth_individuals.csv (drawn beta_i and alpha_i).
inline void write_synthetic(const std::filesystem::path &dir, const ModelSpec &spec, const SyntheticData &synthetic) {
	write_dataset(dir, spec, synthetic.data);
	const CoefficientLayout layout(spec);
	{
		std::ofstream out(dir / "truth.json", std::ios::binary | std::ios::trunc);
		out << population_to_json(spec, layout, synthetic.truth).dump(2) << '\n';
	}
	std::vector<std::string> header{"individual_id"};
	for (const auto s : layout.random_slots()) {
		header.push_back("beta:" + layout.slots()[s].name);
	}
	for (const auto &lv : spec.latent_variables) {
		header.push_back("alpha:" + lv.name);
	}
	std::vector<std::vector<std::string>> rows;
	for (std::size_t i = 0; i < synthetic.data.individuals.size(); ++i) {
		std::vector<std::string> row{synthetic.data.individuals[i].id};
		const auto r = static_cast<Eigen::Index>(i);
		for (Eigen::Index k = 0; k < synthetic.truth.beta.cols(); ++k) {
			row.push_back(format_number(synthetic.truth.beta(r, k)));
		}
		for (Eigen::Index k = 0; k < synthetic.truth.alpha.cols(); ++k) {
			row.push_back(format_number(synthetic.truth.alpha(r, k)));
		}
		rows.push_back(std::move(row));
	}
	write_csv(dir / "truth_individuals.csv", header, rows);
}

} // namespace hdcm

#endif
