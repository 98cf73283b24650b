#ifndef HDCM_SPEC_FILE_HPP
#define HDCM_SPEC_FILE_HPP

// JSON model-specification document: model structure, priors, sampler
// settings and (optionally) the synthetic-data generators, so that one file
// determines a run.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "model.hpp"
#include "sampler.hpp"
#include "scenario.hpp"

namespace hdcm {

using json = nlohmann::json;

/// Distribution of one synthetic covariate or attribute column.
struct Generator {
	enum class Kind { constant, bernoulli, normal, uniform };
	Kind kind = Kind::constant;
	double a = 0.0; ///< constant value, bernoulli p, normal mean, uniform low
	double b = 0.0; ///< normal sd, uniform high
};

struct SimulationSpec {
	std::map<std::string, Generator> covariates;
	/// Key "attribute" or "attribute@alternative" (the latter overrides).
	std::map<std::string, Generator> attributes;
	/// Probability an alternative is available (default 1).
	std::map<std::string, double> availability;

	[[nodiscard]] const Generator *attribute(const std::string &name, const std::string &alternative) const {
		if (const auto it = attributes.find(name + "@" + alternative); it != attributes.end()) {
			return &it->second;
		}
		if (const auto it = attributes.find(name); it != attributes.end()) {
			return &it->second;
		}
		return nullptr;
	}
};

struct ModelSpecFile {
	ModelSpec model;
	SamplerConfig sampler;
	SimulationSpec simulation;
};

namespace detail {

inline void check_keys(const json &obj, const std::string &where, const std::set<std::string> &allowed) {
	if (!obj.is_object()) {
		throw ConfigurationError(where + " must be an object");
	}
	for (const auto &[key, _] : obj.items()) {
		if (allowed.count(key) == 0) {
			throw ConfigurationError(where + ": unknown key '" + key + "'");
		}
	}
}

template <typename T> T get_or(const json &obj, const std::string &key, T fallback) {
	if (!obj.contains(key)) {
		return fallback;
	}
	return obj.at(key).get<T>();
}

inline Generator parse_generator(const json &j, const std::string &where) {
	if (j.is_number()) {
		return Generator{Generator::Kind::constant, j.get<double>(), 0.0};
	}
	check_keys(j, where, {"constant", "bernoulli", "normal", "uniform"});
	if (j.size() != 1) {
		throw ConfigurationError(where + " must name exactly one distribution");
	}
	if (j.contains("constant")) {
		return Generator{Generator::Kind::constant, j.at("constant").get<double>(), 0.0};
	}
	if (j.contains("bernoulli")) {
		const double p = j.at("bernoulli").get<double>();
		if (p < 0.0 || p > 1.0) {
			throw ConfigurationError(where + ": bernoulli p must be in [0, 1]");
		}
		return Generator{Generator::Kind::bernoulli, p, 0.0};
	}
	const bool normal = j.contains("normal");
	const auto params = j.at(normal ? "normal" : "uniform").get<std::vector<double>>();
	if (params.size() != 2) {
		throw ConfigurationError(where + " needs two parameters");
	}
	if (normal && params[1] < 0.0) {
		throw ConfigurationError(where + ": normal sd must be non-negative");
	}
	if (!normal && !(params[1] >= params[0])) {
		throw ConfigurationError(where + ": uniform needs low <= high");
	}
	return Generator{normal ? Generator::Kind::normal : Generator::Kind::uniform, params[0], params[1]};
}

inline json generator_to_json(const Generator &g) {
	switch (g.kind) {
	case Generator::Kind::constant:
		return json{{"constant", g.a}};
	case Generator::Kind::bernoulli:
		return json{{"bernoulli", g.a}};
	case Generator::Kind::normal:
		return json{{"normal", {g.a, g.b}}};
	case Generator::Kind::uniform:
		return json{{"uniform", {g.a, g.b}}};
	}
	return {};
}

} // namespace detail

[[nodiscard]] inline ModelSpec parse_model(const json &root) {
	using detail::check_keys;
	using detail::get_or;
	ModelSpec spec;
	for (const auto &a : root.at("alternatives")) {
		if (a.is_string()) {
			spec.alternatives.push_back({a.get<std::string>(), a.get<std::string>()});
			continue;
		}
		check_keys(a, "alternative", {"id", "name"});
		const auto id = a.at("id").get<std::string>();
		spec.alternatives.push_back({id, get_or<std::string>(a, "name", id)});
	}
	spec.covariates = get_or<std::vector<std::string>>(root, "covariates", {});
	if (root.contains("latent_variables")) {
		for (const auto &lv : root.at("latent_variables")) {
			check_keys(lv, "latent variable", {"name", "covariates", "indicators"});
			LatentVariableSpec out;
			out.name = lv.at("name").get<std::string>();
			out.structural_covariates = get_or<std::vector<std::string>>(lv, "covariates", {});
			for (const auto &ind : lv.at("indicators")) {
				if (ind.is_string()) {
					out.indicators.push_back({ind.get<std::string>(), 5});
					continue;
				}
				check_keys(ind, "indicator", {"id", "categories"});
				out.indicators.push_back({ind.at("id").get<std::string>(), get_or<int>(ind, "categories", 5)});
			}
			spec.latent_variables.push_back(std::move(out));
		}
	}
	for (const auto &t : root.at("utility_terms")) {
		check_keys(t, "utility term", {"attribute", "latent", "alternatives", "random", "shared"});
		UtilityTerm term;
		if (t.contains("attribute") == t.contains("latent")) {
			throw ConfigurationError("utility term needs exactly one of 'attribute' or 'latent'");
		}
		term.attribute_or_lv = t.contains("attribute") ? t.at("attribute").get<std::string>() : t.at("latent").get<std::string>();
		term.applies_to = t.at("alternatives").get<std::vector<std::string>>();
		term.kind = get_or<bool>(t, "random", false) ? CoefficientKind::random_normal : CoefficientKind::fixed;
		term.shared = get_or<bool>(t, "shared", false);
		if (t.contains("latent") && !spec.latent_index(term.attribute_or_lv)) {
			throw ConfigurationError("utility term refers to unknown latent variable '" + term.attribute_or_lv + "'");
		}
		if (t.contains("attribute") && spec.latent_index(term.attribute_or_lv)) {
			throw ConfigurationError("attribute '" + term.attribute_or_lv + "' shadows a latent variable name");
		}
		spec.utility_terms.push_back(std::move(term));
	}
	spec.asc_reference_alternative = root.at("asc_reference").get<std::string>();
	spec.asc_random = get_or<bool>(root, "asc_random", true);
	spec.cost_attribute = get_or<std::string>(root, "cost_attribute", "");
	spec.lv_random = get_or<bool>(root, "lv_random", true);
	spec.full_covariance = get_or<bool>(root, "full_covariance", false);
	spec.validate();
	return spec;
}

[[nodiscard]] inline SamplerConfig parse_sampler(const json &root) {
	using detail::check_keys;
	using detail::get_or;
	SamplerConfig c;
	if (root.contains("sampler")) {
		const auto &s = root.at("sampler");
		check_keys(s, "sampler", {"sweeps", "burn_in", "thin", "seed", "chains", "adapt", "store_individual", "proposal_scales"});
		c.n_sweeps = get_or<std::size_t>(s, "sweeps", c.n_sweeps);
		c.burn_in = get_or<std::size_t>(s, "burn_in", c.burn_in);
		c.thin = get_or<std::size_t>(s, "thin", c.thin);
		c.seed = get_or<std::uint64_t>(s, "seed", c.seed);
		c.n_chains = get_or<std::size_t>(s, "chains", c.n_chains);
		c.adapt_during_burn_in = get_or<bool>(s, "adapt", c.adapt_during_burn_in);
		c.store_individual = get_or<bool>(s, "store_individual", c.store_individual);
		if (s.contains("proposal_scales")) {
			const auto &p = s.at("proposal_scales");
			check_keys(p, "proposal_scales", {"alpha", "beta", "fixed", "zeta", "tau"});
			auto &ps = c.proposal_scales;
			ps.alpha = get_or<double>(p, "alpha", ps.alpha);
			ps.beta = get_or<double>(p, "beta", ps.beta);
			ps.fixed = get_or<double>(p, "fixed", ps.fixed);
			ps.zeta = get_or<double>(p, "zeta", ps.zeta);
			ps.tau = get_or<double>(p, "tau", ps.tau);
		}
	}
	if (root.contains("priors")) {
		const auto &p = root.at("priors");
		check_keys(p, "priors", {"coefficient_variance", "gamma_variance", "zeta_variance", "threshold_variance", "wishart_extra_dof",
		                         "wishart_scale", "inverse_gamma_shape", "inverse_gamma_scale"});
		auto &pr = c.prior;
		pr.coefficient_variance = get_or<double>(p, "coefficient_variance", pr.coefficient_variance);
		pr.gamma_variance = get_or<double>(p, "gamma_variance", pr.gamma_variance);
		pr.zeta_variance = get_or<double>(p, "zeta_variance", pr.zeta_variance);
		pr.threshold_variance = get_or<double>(p, "threshold_variance", pr.threshold_variance);
		pr.wishart_extra_dof = get_or<double>(p, "wishart_extra_dof", pr.wishart_extra_dof);
		pr.wishart_scale = get_or<double>(p, "wishart_scale", pr.wishart_scale);
		pr.inverse_gamma_shape = get_or<double>(p, "inverse_gamma_shape", pr.inverse_gamma_shape);
		pr.inverse_gamma_scale = get_or<double>(p, "inverse_gamma_scale", pr.inverse_gamma_scale);
	}
	c.validate();
	return c;
}

[[nodiscard]] inline SimulationSpec parse_simulation(const json &root, const ModelSpec &model) {
	SimulationSpec sim;
	if (!root.contains("simulation")) {
		return sim;
	}
	const auto &s = root.at("simulation");
	detail::check_keys(s, "simulation", {"covariates", "attributes", "availability"});
	if (s.contains("covariates")) {
		for (const auto &[name, g] : s.at("covariates").items()) {
			if (!model.covariate_index(name)) {
				throw ConfigurationError("simulation generator for unknown covariate '" + name + "'");
			}
			sim.covariates[name] = detail::parse_generator(g, "simulation.covariates." + name);
		}
	}
	if (s.contains("attributes")) {
		for (const auto &[name, g] : s.at("attributes").items()) {
			if (const auto at = name.find('@'); at != std::string::npos && !model.alternative_index(name.substr(at + 1))) {
				throw ConfigurationError("simulation generator '" + name + "' refers to unknown alternative");
			}
			sim.attributes[name] = detail::parse_generator(g, "simulation.attributes." + name);
		}
	}
	if (s.contains("availability")) {
		for (const auto &[alt, p] : s.at("availability").items()) {
			if (!model.alternative_index(alt)) {
				throw ConfigurationError("simulation availability for unknown alternative '" + alt + "'");
			}
			const double v = p.get<double>();
			if (v < 0.0 || v > 1.0) {
				throw ConfigurationError("availability probability of '" + alt + "' must be in [0, 1]");
			}
			sim.availability[alt] = v;
		}
	}
	return sim;
}

[[nodiscard]] inline ModelSpecFile parse_model_spec_file(const json &root) {
	try {
		detail::check_keys(root, "model spec",
		                   {"alternatives", "covariates", "latent_variables", "utility_terms", "asc_reference", "asc_random", "cost_attribute",
		                    "lv_random", "full_covariance", "priors", "sampler", "simulation"});
		ModelSpecFile file;
		file.model = parse_model(root);
		file.sampler = parse_sampler(root);
		file.simulation = parse_simulation(root, file.model);
		return file;
	} catch (const json::exception &e) {
		throw ConfigurationError(std::string("model spec: ") + e.what());
	}
}

[[nodiscard]] inline ModelSpecFile load_model_spec(const std::filesystem::path &path) {
	std::ifstream in(path);
	if (!in) {
		throw ConfigurationError("cannot open model spec " + path.string());
	}
	json root;
	try {
		root = json::parse(in);
	} catch (const json::exception &e) {
		throw ConfigurationError(path.string() + ": " + e.what());
	}
	return parse_model_spec_file(root);
}

[[nodiscard]] inline json sampler_to_json(const SamplerConfig &c) {
	const auto &p = c.proposal_scales;
	const auto &pr = c.prior;
	return json{{"sweeps", c.n_sweeps},
	            {"burn_in", c.burn_in},
	            {"thin", c.thin},
	            {"seed", c.seed},
	            {"chains", c.n_chains},
	            {"adapt", c.adapt_during_burn_in},
	            {"store_individual", c.store_individual},
	            {"likelihood_enabled", c.likelihood_enabled},
	            {"proposal_scales", {{"alpha", p.alpha}, {"beta", p.beta}, {"fixed", p.fixed}, {"zeta", p.zeta}, {"tau", p.tau}}},
	            {"priors",
	             {{"coefficient_variance", pr.coefficient_variance},
	              {"gamma_variance", pr.gamma_variance},
	              {"zeta_variance", pr.zeta_variance},
	              {"threshold_variance", pr.threshold_variance},
	              {"wishart_extra_dof", pr.wishart_extra_dof},
	              {"wishart_scale", pr.wishart_scale},
	              {"inverse_gamma_shape", pr.inverse_gamma_shape},
	              {"inverse_gamma_scale", pr.inverse_gamma_scale}}}};
}

// ---------------------------------------------------------------------------
// Truth / parameter files: population-level values keyed by parameter name.

[[nodiscard]] inline json population_to_json(const ModelSpec &spec, const CoefficientLayout &layout, const ParameterState &state) {
	const auto names = population_names(spec, layout);
	const auto values = flatten_population(spec, layout, state);
	json out = json::object();
	for (std::size_t k = 0; k < names.size(); ++k) {
		out[names[k]] = values[static_cast<Eigen::Index>(k)];
	}
	return json{{"parameters", out}};
}

[[nodiscard]] inline ParameterState population_from_json(const ModelSpec &spec, const CoefficientLayout &layout, const json &root) {
	try {
		detail::check_keys(root, "parameter file", {"parameters"});
		const auto &params = root.at("parameters");
		const auto names = population_names(spec, layout);
		std::set<std::string> known(names.begin(), names.end());
		for (const auto &[key, _] : params.items()) {
			if (known.count(key) == 0) {
				throw ParameterError("parameter file: unknown parameter '" + key + "'");
			}
		}
		Eigen::VectorXd values(static_cast<Eigen::Index>(names.size()));
		for (std::size_t k = 0; k < names.size(); ++k) {
			if (!params.contains(names[k])) {
				throw ParameterError("parameter file: missing parameter '" + names[k] + "'");
			}
			values[static_cast<Eigen::Index>(k)] = params.at(names[k]).get<double>();
		}
		auto state = unflatten_population(spec, layout, values);
		validate_state(spec, layout, state);
		return state;
	} catch (const json::exception &e) {
		throw ParameterError(std::string("parameter file: ") + e.what());
	}
}

[[nodiscard]] inline ParameterState load_population(const ModelSpec &spec, const std::filesystem::path &path) {
	std::ifstream in(path);
	if (!in) {
		throw ParameterError("cannot open parameter file " + path.string());
	}
	try {
		return population_from_json(spec, CoefficientLayout(spec), json::parse(in));
	} catch (const json::parse_error &e) {
		throw ParameterError(path.string() + ": " + e.what());
	}
}

// ---------------------------------------------------------------------------
// Scenario files: {"scenarios": [{"name", "perturbations": [{"attribute",
// "alternatives", "multiplier"}]}]}

[[nodiscard]] inline std::vector<ScenarioSpec> parse_scenarios(const json &root) {
	try {
		detail::check_keys(root, "scenario file", {"scenarios"});
		std::vector<ScenarioSpec> out;
		std::set<std::string> names;
		for (const auto &s : root.at("scenarios")) {
			detail::check_keys(s, "scenario", {"name", "perturbations"});
			ScenarioSpec spec;
			spec.name = s.at("name").get<std::string>();
			if (spec.name.empty() || !names.insert(spec.name).second) {
				throw ConfigurationError("scenario names must be non-empty and unique");
			}
			for (const auto &p : s.value("perturbations", json::array())) {
				detail::check_keys(p, "perturbation", {"attribute", "alternatives", "multiplier"});
				Perturbation pert;
				pert.attribute = p.at("attribute").get<std::string>();
				pert.alternatives = p.at("alternatives").get<std::vector<std::string>>();
				pert.multiplier = p.at("multiplier").get<double>();
				spec.perturbations.push_back(std::move(pert));
			}
			out.push_back(std::move(spec));
		}
		return out;
	} catch (const json::exception &e) {
		throw ConfigurationError(std::string("scenario file: ") + e.what());
	}
}

[[nodiscard]] inline std::vector<ScenarioSpec> load_scenarios(const std::filesystem::path &path) {
	std::ifstream in(path);
	if (!in) {
		throw ConfigurationError("cannot open scenario file " + path.string());
	}
	try {
		return parse_scenarios(json::parse(in));
	} catch (const json::parse_error &e) {
		throw ConfigurationError(path.string() + ": " + e.what());
	}
}

} // namespace hdcm

#endif
