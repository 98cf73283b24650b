#ifndef HDCM_MODEL_HPP
#define HDCM_MODEL_HPP

// Domain types for hybrid choice models: alternatives, individuals, the
// declarative model specification and one point in parameter space.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace hdcm {

struct Alternative {
	std::string id;
	std::string display_name;
};

struct Individual {
	std::string id;
	/// Structural covariates, ordered as ModelSpec::covariates.
	std::vector<double> z;
	/// Available alternative ids.
	std::vector<std::string> availability;
	std::string chosen;
	/// Indicator id -> ordinal category, 1-based after collapsing.
	std::map<std::string, int> indicator_responses;
	/// Alternative id -> attribute name -> value.
	std::map<std::string, std::map<std::string, double>> attributes;

	[[nodiscard]] bool is_available(const std::string &alternative) const {
		return std::find(availability.begin(), availability.end(), alternative) != availability.end();
	}

	[[nodiscard]] double attribute(const std::string &alternative, const std::string &name) const {
		const auto alt = attributes.find(alternative);
		if (alt != attributes.end()) {
			const auto value = alt->second.find(name);
			if (value != alt->second.end()) {
				return value->second;
			}
		}
		throw DataError("missing attribute '" + name + "' for alternative '" + alternative + "' of individual " + id);
	}
};

struct ChoiceDataset {
	std::vector<Individual> individuals;
	std::vector<std::string> attribute_names;
	std::vector<std::string> indicator_ids;
	std::vector<std::string> covariate_names;
};

struct IndicatorSpec {
	std::string id;
	int n_categories = 5;
};

struct LatentVariableSpec {
	std::string name;
	/// Subset of ModelSpec::covariates entering this LV's structural equation.
	std::vector<std::string> structural_covariates;
	std::vector<IndicatorSpec> indicators;
};

enum class CoefficientKind { fixed, random_normal };

struct UtilityTerm {
	/// Attribute column name or latent variable name.
	std::string attribute_or_lv;
	std::vector<std::string> applies_to;
	CoefficientKind kind = CoefficientKind::fixed;
	/// One coefficient across applies_to (generic) instead of one per alternative.
	bool shared = false;
};

struct ModelSpec {
	std::vector<Alternative> alternatives;
	/// Names of the structural covariates z, in column order.
	std::vector<std::string> covariates;
	std::vector<LatentVariableSpec> latent_variables;
	std::vector<UtilityTerm> utility_terms;
	std::string asc_reference_alternative;
	bool asc_random = true;
	std::string cost_attribute;
	/// LV loadings in utilities are random coefficients (overrides the term's kind).
	bool lv_random = true;
	/// Full covariance for random coefficients instead of the diagonal default.
	bool full_covariance = false;

	[[nodiscard]] std::size_t n_alternatives() const { return alternatives.size(); }
	[[nodiscard]] std::size_t n_latent() const { return latent_variables.size(); }
	[[nodiscard]] std::size_t n_covariates() const { return covariates.size(); }

	[[nodiscard]] std::optional<std::size_t> alternative_index(const std::string &id) const {
		for (std::size_t a = 0; a < alternatives.size(); ++a) {
			if (alternatives[a].id == id) {
				return a;
			}
		}
		return std::nullopt;
	}

	[[nodiscard]] std::optional<std::size_t> latent_index(const std::string &name) const {
		for (std::size_t l = 0; l < latent_variables.size(); ++l) {
			if (latent_variables[l].name == name) {
				return l;
			}
		}
		return std::nullopt;
	}

	[[nodiscard]] std::optional<std::size_t> covariate_index(const std::string &name) const {
		for (std::size_t c = 0; c < covariates.size(); ++c) {
			if (covariates[c] == name) {
				return c;
			}
		}
		return std::nullopt;
	}

	/// Indicators across all LVs, in declaration order.
	[[nodiscard]] std::vector<IndicatorSpec> indicators() const {
		std::vector<IndicatorSpec> out;
		for (const auto &lv : latent_variables) {
			out.insert(out.end(), lv.indicators.begin(), lv.indicators.end());
		}
		return out;
	}

	/// LV index of every indicator, parallel to indicators().
	[[nodiscard]] std::vector<std::size_t> indicator_latent() const {
		std::vector<std::size_t> out;
		for (std::size_t l = 0; l < latent_variables.size(); ++l) {
			out.insert(out.end(), latent_variables[l].indicators.size(), l);
		}
		return out;
	}

	/// Attribute names referenced by utility terms (excluding LV terms).
	[[nodiscard]] std::vector<std::string> referenced_attributes() const {
		std::vector<std::string> out;
		for (const auto &term : utility_terms) {
			if (!latent_index(term.attribute_or_lv) && std::find(out.begin(), out.end(), term.attribute_or_lv) == out.end()) {
				out.push_back(term.attribute_or_lv);
			}
		}
		return out;
	}

	void validate() const {
		auto check_token = [](const std::string &kind, const std::string &token) {
			if (token.empty() || token.find_first_of(",\"\n\r:~") != std::string::npos) {
				throw ConfigurationError(kind + " '" + token + "' must be non-empty and free of , \" : ~ and line breaks");
			}
		};
		for (const auto &alt : alternatives) {
			check_token("alternative id", alt.id);
		}
		for (const auto &c : covariates) {
			check_token("covariate", c);
		}
		for (const auto &lv : latent_variables) {
			check_token("latent variable", lv.name);
			for (const auto &ind : lv.indicators) {
				check_token("indicator", ind.id);
			}
		}
		for (const auto &term : utility_terms) {
			check_token("utility term", term.attribute_or_lv);
		}
		if (alternatives.size() < 2) {
			throw ConfigurationError("model needs at least 2 alternatives");
		}
		std::set<std::string> ids;
		for (const auto &alt : alternatives) {
			if (alt.id.empty()) {
				throw ConfigurationError("alternative with empty id");
			}
			if (!ids.insert(alt.id).second) {
				throw ConfigurationError("duplicate alternative id '" + alt.id + "'");
			}
		}
		if (!alternative_index(asc_reference_alternative)) {
			throw ConfigurationError("ASC reference alternative '" + asc_reference_alternative + "' is not an alternative");
		}
		std::set<std::string> covs;
		for (const auto &c : covariates) {
			if (!covs.insert(c).second) {
				throw ConfigurationError("duplicate covariate '" + c + "'");
			}
		}
		std::set<std::string> lv_names;
		std::set<std::string> indicator_ids;
		for (const auto &lv : latent_variables) {
			if (!lv_names.insert(lv.name).second) {
				throw ConfigurationError("duplicate latent variable '" + lv.name + "'");
			}
			if (lv.indicators.empty()) {
				throw ConfigurationError("latent variable '" + lv.name + "' has no indicators");
			}
			for (const auto &c : lv.structural_covariates) {
				if (!covariate_index(c)) {
					throw ConfigurationError("latent variable '" + lv.name + "' uses unknown covariate '" + c + "'");
				}
			}
			for (const auto &ind : lv.indicators) {
				if (ind.n_categories < 2 || ind.n_categories > 5) {
					throw ConfigurationError("indicator '" + ind.id + "' must have 2..5 categories");
				}
				if (!indicator_ids.insert(ind.id).second) {
					throw ConfigurationError("indicator '" + ind.id + "' belongs to more than one latent variable");
				}
			}
		}
		std::set<std::pair<std::string, std::string>> covered;
		bool cost_found = cost_attribute.empty();
		for (const auto &term : utility_terms) {
			if (term.attribute_or_lv.empty()) {
				throw ConfigurationError("utility term without attribute");
			}
			if (term.applies_to.empty()) {
				throw ConfigurationError("utility term '" + term.attribute_or_lv + "' applies to no alternative");
			}
			if (lv_names.count(term.attribute_or_lv) == 0 && term.attribute_or_lv == cost_attribute) {
				cost_found = true;
			}
			for (const auto &alt : term.applies_to) {
				if (!alternative_index(alt)) {
					throw ConfigurationError("utility term '" + term.attribute_or_lv + "' refers to unknown alternative '" + alt + "'");
				}
				if (!covered.emplace(term.attribute_or_lv, alt).second) {
					throw ConfigurationError("(" + term.attribute_or_lv + ", " + alt + ") covered by more than one utility term");
				}
			}
		}
		if (!cost_found) {
			throw ConfigurationError("cost attribute '" + cost_attribute + "' does not appear in any utility term");
		}
	}
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class CoefficientSource { asc, attribute, latent };

/// One coefficient of the utility function. Fixed slots index ParameterState::fixed,
/// random slots index columns of ParameterState::beta and entries of mu/omega.
struct CoefficientSlot {
	std::string name;
	CoefficientSource source = CoefficientSource::asc;
	CoefficientKind kind = CoefficientKind::fixed;
	std::size_t index = 0;
	std::string attribute_or_lv;
	std::vector<std::string> alternatives;
};

/// Maps a ModelSpec onto a flat coefficient vector.
///
/// Slot order: non-reference ASCs, then utility terms in declaration order
/// (one slot for a shared term, one per alternative otherwise). The full
/// coefficient vector of an individual is indexed by slot.
class CoefficientLayout {
public:
	struct Entry {
		std::size_t slot;
		CoefficientSource source;
		std::string attribute;  // attribute terms
		std::size_t latent = 0; // latent terms
	};

	CoefficientLayout() = default;

	explicit CoefficientLayout(const ModelSpec &spec) : per_alternative_(spec.alternatives.size()) {
		for (std::size_t a = 0; a < spec.alternatives.size(); ++a) {
			const auto &alt = spec.alternatives[a];
			if (alt.id == spec.asc_reference_alternative) {
				continue;
			}
			add_slot(CoefficientSlot{"asc[" + alt.id + "]", CoefficientSource::asc,
			                         spec.asc_random ? CoefficientKind::random_normal : CoefficientKind::fixed, 0, "", {alt.id}});
			per_alternative_[a].push_back(Entry{slots_.size() - 1, CoefficientSource::asc, "", 0});
		}
		for (const auto &term : spec.utility_terms) {
			const auto lv = spec.latent_index(term.attribute_or_lv);
			const CoefficientSource source = lv ? CoefficientSource::latent : CoefficientSource::attribute;
			CoefficientKind kind = term.kind;
			if (lv) {
				kind = spec.lv_random ? CoefficientKind::random_normal : CoefficientKind::fixed;
			}
			auto attach = [&](const std::string &alt_id) {
				const auto a = spec.alternative_index(alt_id);
				if (!a) {
					throw ConfigurationError("unknown alternative '" + alt_id + "'");
				}
				per_alternative_[*a].push_back(Entry{slots_.size() - 1, source, lv ? std::string{} : term.attribute_or_lv, lv.value_or(0)});
			};
			if (term.shared) {
				std::string label;
				for (const auto &alt : term.applies_to) {
					label += (label.empty() ? "" : "|") + alt;
				}
				add_slot(CoefficientSlot{term.attribute_or_lv + "[" + label + "]", source, kind, 0, term.attribute_or_lv, term.applies_to});
				for (const auto &alt : term.applies_to) {
					attach(alt);
				}
			} else {
				for (const auto &alt : term.applies_to) {
					add_slot(CoefficientSlot{term.attribute_or_lv + "[" + alt + "]", source, kind, 0, term.attribute_or_lv, {alt}});
					attach(alt);
				}
			}
		}
	}

	[[nodiscard]] const std::vector<CoefficientSlot> &slots() const { return slots_; }
	[[nodiscard]] std::size_t size() const { return slots_.size(); }
	[[nodiscard]] std::size_t n_fixed() const { return fixed_.size(); }
	[[nodiscard]] std::size_t n_random() const { return random_.size(); }
	/// Slot ids of fixed coefficients, in ParameterState::fixed order.
	[[nodiscard]] const std::vector<std::size_t> &fixed_slots() const { return fixed_; }
	/// Slot ids of random coefficients, in mu / beta column order.
	[[nodiscard]] const std::vector<std::size_t> &random_slots() const { return random_; }
	[[nodiscard]] const std::vector<Entry> &entries(std::size_t alternative) const { return per_alternative_.at(alternative); }

	/// Slot of the coefficient multiplying `attribute_or_lv` in `alternative`'s utility.
	[[nodiscard]] std::optional<std::size_t> find(const std::string &attribute_or_lv, const std::string &alternative) const {
		for (std::size_t s = 0; s < slots_.size(); ++s) {
			const auto &slot = slots_[s];
			if (slot.source != CoefficientSource::asc && slot.attribute_or_lv == attribute_or_lv &&
			    std::find(slot.alternatives.begin(), slot.alternatives.end(), alternative) != slot.alternatives.end()) {
				return s;
			}
		}
		return std::nullopt;
	}

	[[nodiscard]] std::optional<std::size_t> find_by_name(const std::string &name) const {
		for (std::size_t s = 0; s < slots_.size(); ++s) {
			if (slots_[s].name == name) {
				return s;
			}
		}
		return std::nullopt;
	}

	/// Full coefficient vector of one individual: fixed values plus that individual's random draws.
	void assemble(const Eigen::VectorXd &fixed, const Eigen::Ref<const Eigen::VectorXd> &random, std::vector<double> &out) const {
		out.resize(slots_.size());
		for (std::size_t k = 0; k < fixed_.size(); ++k) {
			out[fixed_[k]] = fixed[static_cast<Eigen::Index>(k)];
		}
		for (std::size_t k = 0; k < random_.size(); ++k) {
			out[random_[k]] = random[static_cast<Eigen::Index>(k)];
		}
	}

private:
	void add_slot(CoefficientSlot slot) {
		auto &bucket = slot.kind == CoefficientKind::fixed ? fixed_ : random_;
		slot.index = bucket.size();
		bucket.push_back(slots_.size());
		slots_.push_back(std::move(slot));
	}

	std::vector<CoefficientSlot> slots_;
	std::vector<std::size_t> fixed_;
	std::vector<std::size_t> random_;
	std::vector<std::vector<Entry>> per_alternative_;
};

/// One point in parameter space.
struct ParameterState {
	Eigen::MatrixXd gamma;                  ///< LV x covariates
	std::vector<double> zeta;               ///< per indicator
	std::vector<std::vector<double>> tau;   ///< per indicator, strictly increasing, length n_categories - 1
	Eigen::VectorXd fixed;                  ///< population-fixed coefficients
	Eigen::VectorXd mu;                     ///< mean of random coefficients
	Eigen::MatrixXd omega;                  ///< covariance of random coefficients
	RowMatrix beta;                         ///< individuals x random coefficients (may be empty)
	RowMatrix alpha;                        ///< individuals x LVs (may be empty)

	[[nodiscard]] bool has_individuals() const { return beta.rows() > 0 || alpha.rows() > 0; }
};

[[nodiscard]] inline bool strictly_increasing(const std::vector<double> &values) {
	for (std::size_t k = 1; k < values.size(); ++k) {
		if (!(values[k] > values[k - 1])) {
			return false;
		}
	}
	return true;
}

[[nodiscard]] inline bool positive_definite(const Eigen::MatrixXd &m) {
	if (m.rows() != m.cols()) {
		return false;
	}
	if (m.rows() == 0) {
		return true;
	}
	if (!m.isApprox(m.transpose(), 1e-10)) {
		return false;
	}
	Eigen::LLT<Eigen::MatrixXd> llt(m);
	return llt.info() == Eigen::Success;
}

/// Shape and invariant check of a population-level state against a spec.
inline void validate_state(const ModelSpec &spec, const CoefficientLayout &layout, const ParameterState &state) {
	const auto indicators = spec.indicators();
	const auto L = static_cast<Eigen::Index>(spec.n_latent());
	const auto Z = static_cast<Eigen::Index>(spec.n_covariates());
	if (state.gamma.rows() != L || state.gamma.cols() != Z) {
		throw ParameterError("gamma must be " + std::to_string(L) + " x " + std::to_string(Z));
	}
	if (state.zeta.size() != indicators.size() || state.tau.size() != indicators.size()) {
		throw ParameterError("zeta/tau must have one entry per indicator");
	}
	for (std::size_t q = 0; q < indicators.size(); ++q) {
		if (state.tau[q].size() != static_cast<std::size_t>(indicators[q].n_categories - 1)) {
			throw ParameterError("indicator '" + indicators[q].id + "' needs " + std::to_string(indicators[q].n_categories - 1) + " thresholds");
		}
		if (!strictly_increasing(state.tau[q])) {
			throw ParameterError("thresholds of indicator '" + indicators[q].id + "' are not strictly increasing");
		}
	}
	const auto F = static_cast<Eigen::Index>(layout.n_fixed());
	const auto R = static_cast<Eigen::Index>(layout.n_random());
	if (state.fixed.size() != F) {
		throw ParameterError("expected " + std::to_string(F) + " fixed coefficients");
	}
	if (state.mu.size() != R || state.omega.rows() != R || state.omega.cols() != R) {
		throw ParameterError("mu/omega must match the " + std::to_string(R) + " random coefficients");
	}
	if (!positive_definite(state.omega)) {
		throw ParameterError("omega is not positive definite");
	}
	if (!spec.full_covariance && R > 0) {
		const Eigen::MatrixXd off = state.omega - Eigen::MatrixXd(state.omega.diagonal().asDiagonal());
		if (off.cwiseAbs().maxCoeff() > 0.0) {
			throw ParameterError("omega must be diagonal unless full_covariance is set");
		}
	}
	if (state.beta.rows() > 0 && state.beta.cols() != R) {
		throw ParameterError("beta must have one column per random coefficient");
	}
	if (state.alpha.rows() > 0 && state.alpha.cols() != L) {
		throw ParameterError("alpha must have one column per latent variable");
	}
}

// Flat, named view of the population-level parameters. Names are
// "<block>:<detail>" with block one of gamma, zeta, tau, fixed, mu, omega;
// the order below is the canonical column order of posterior files.

[[nodiscard]] inline std::string parameter_block(const std::string &name) { return name.substr(0, name.find(':')); }

[[nodiscard]] inline std::vector<std::string> population_names(const ModelSpec &spec, const CoefficientLayout &layout) {
	std::vector<std::string> names;
	for (const auto &lv : spec.latent_variables) {
		for (const auto &c : lv.structural_covariates) {
			names.push_back("gamma:" + lv.name + "~" + c);
		}
	}
	const auto indicators = spec.indicators();
	for (const auto &ind : indicators) {
		names.push_back("zeta:" + ind.id);
	}
	for (const auto &ind : indicators) {
		for (int k = 1; k < ind.n_categories; ++k) {
			names.push_back("tau:" + ind.id + "~" + std::to_string(k));
		}
	}
	for (const auto s : layout.fixed_slots()) {
		names.push_back("fixed:" + layout.slots()[s].name);
	}
	for (const auto s : layout.random_slots()) {
		names.push_back("mu:" + layout.slots()[s].name);
	}
	const auto &random = layout.random_slots();
	for (std::size_t a = 0; a < random.size(); ++a) {
		if (!spec.full_covariance) {
			names.push_back("omega:" + layout.slots()[random[a]].name);
			continue;
		}
		for (std::size_t b = 0; b <= a; ++b) {
			names.push_back(a == b ? "omega:" + layout.slots()[random[a]].name
			                       : "omega:" + layout.slots()[random[a]].name + "~" + layout.slots()[random[b]].name);
		}
	}
	return names;
}

[[nodiscard]] inline Eigen::VectorXd flatten_population(const ModelSpec &spec, const CoefficientLayout &layout, const ParameterState &state) {
	std::vector<double> values;
	for (std::size_t l = 0; l < spec.latent_variables.size(); ++l) {
		for (const auto &c : spec.latent_variables[l].structural_covariates) {
			values.push_back(state.gamma(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(*spec.covariate_index(c))));
		}
	}
	values.insert(values.end(), state.zeta.begin(), state.zeta.end());
	for (const auto &t : state.tau) {
		values.insert(values.end(), t.begin(), t.end());
	}
	for (Eigen::Index k = 0; k < state.fixed.size(); ++k) {
		values.push_back(state.fixed[k]);
	}
	for (Eigen::Index k = 0; k < state.mu.size(); ++k) {
		values.push_back(state.mu[k]);
	}
	const auto R = static_cast<Eigen::Index>(layout.n_random());
	for (Eigen::Index a = 0; a < R; ++a) {
		if (!spec.full_covariance) {
			values.push_back(state.omega(a, a));
			continue;
		}
		for (Eigen::Index b = 0; b <= a; ++b) {
			values.push_back(state.omega(a, b));
		}
	}
	return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

[[nodiscard]] inline ParameterState unflatten_population(const ModelSpec &spec, const CoefficientLayout &layout, const Eigen::VectorXd &values) {
	const auto expected = population_names(spec, layout).size();
	if (static_cast<std::size_t>(values.size()) != expected) {
		throw ParameterError("expected " + std::to_string(expected) + " population parameters, got " + std::to_string(values.size()));
	}
	ParameterState state;
	Eigen::Index pos = 0;
	state.gamma = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(spec.n_latent()), static_cast<Eigen::Index>(spec.n_covariates()));
	for (std::size_t l = 0; l < spec.latent_variables.size(); ++l) {
		for (const auto &c : spec.latent_variables[l].structural_covariates) {
			state.gamma(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(*spec.covariate_index(c))) = values[pos++];
		}
	}
	const auto indicators = spec.indicators();
	for (std::size_t q = 0; q < indicators.size(); ++q) {
		state.zeta.push_back(values[pos++]);
	}
	for (const auto &ind : indicators) {
		std::vector<double> t;
		for (int k = 1; k < ind.n_categories; ++k) {
			t.push_back(values[pos++]);
		}
		state.tau.push_back(std::move(t));
	}
	const auto F = static_cast<Eigen::Index>(layout.n_fixed());
	const auto R = static_cast<Eigen::Index>(layout.n_random());
	state.fixed = values.segment(pos, F);
	pos += F;
	state.mu = values.segment(pos, R);
	pos += R;
	state.omega = Eigen::MatrixXd::Zero(R, R);
	for (Eigen::Index a = 0; a < R; ++a) {
		if (!spec.full_covariance) {
			state.omega(a, a) = values[pos++];
			continue;
		}
		for (Eigen::Index b = 0; b <= a; ++b) {
			state.omega(a, b) = values[pos];
			state.omega(b, a) = values[pos];
			++pos;
		}
	}
	return state;
}

} // namespace hdcm

#endif
