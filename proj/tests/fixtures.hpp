// Small models and datasets shared by the test suites.

#ifndef HDCM_TESTS_FIXTURES_HPP
#define HDCM_TESTS_FIXTURES_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hdcm/hdcm.hpp"

#ifndef HDCM_SAMPLES_DIR
#define HDCM_SAMPLES_DIR "samples"
#endif

namespace fixture {

inline std::filesystem::path samples_dir() { return HDCM_SAMPLES_DIR; }

/// Fresh scratch directory under the system temp dir, emptied on creation.
inline std::filesystem::path scratch_dir(const std::string &name) {
	const auto dir = std::filesystem::temp_directory_path() / ("hdcm_test_" + name);
	std::filesystem::remove_all(dir);
	std::filesystem::create_directories(dir);
	return dir;
}

/// Two alternatives, one covariate, one LV with a single 4-category indicator.
/// Utility: asc[B] + time coefficient (random, shared) + LV loading on B (fixed).
inline hdcm::ModelSpec one_lv_spec() {
	hdcm::ModelSpec spec;
	spec.alternatives = {{"A", "A"}, {"B", "B"}};
	spec.covariates = {"x"};
	spec.latent_variables = {{"att", {"x"}, {{"q1", 4}}}};
	spec.utility_terms = {{"time", {"A", "B"}, hdcm::CoefficientKind::random_normal, true},
	                      {"att", {"B"}, hdcm::CoefficientKind::fixed, false}};
	spec.asc_reference_alternative = "A";
	spec.asc_random = false;
	spec.lv_random = false;
	spec.cost_attribute = "time";
	spec.validate();
	return spec;
}

inline hdcm::ParameterState one_lv_truth() {
	hdcm::ParameterState s;
	s.gamma = Eigen::MatrixXd::Constant(1, 1, 0.5);
	s.zeta = {1.2};
	s.tau = {{-1.0, 0.3, 1.5}};
	s.fixed = Eigen::Vector2d(0.4, 0.8); // asc[B], att[B]
	s.mu = Eigen::VectorXd::Constant(1, -0.7);
	s.omega = Eigen::MatrixXd::Constant(1, 1, 0.3);
	return s;
}

inline hdcm::SimulationSpec one_lv_simulation() {
	hdcm::SimulationSpec sim;
	sim.covariates["x"] = {hdcm::Generator::Kind::normal, 0.0, 1.0};
	sim.attributes["time"] = {hdcm::Generator::Kind::uniform, 0.0, 2.0};
	return sim;
}

inline hdcm::ChoiceDataset one_lv_data(std::size_t n, std::uint64_t seed) {
	return hdcm::generate_synthetic(one_lv_spec(), one_lv_simulation(), one_lv_truth(), n, seed).data;
}

/// Three alternatives, two random shared attribute coefficients, fixed ASCs, no LVs.
inline hdcm::ModelSpec mnl_spec() {
	hdcm::ModelSpec spec;
	spec.alternatives = {{"A", "A"}, {"B", "B"}, {"C", "C"}};
	spec.utility_terms = {{"x1", {"A", "B", "C"}, hdcm::CoefficientKind::random_normal, true},
	                      {"x2", {"A", "B", "C"}, hdcm::CoefficientKind::random_normal, true}};
	spec.asc_reference_alternative = "A";
	spec.asc_random = false;
	spec.cost_attribute = "x1";
	spec.validate();
	return spec;
}

inline hdcm::ParameterState mnl_truth() {
	hdcm::ParameterState s;
	s.gamma = Eigen::MatrixXd(0, 0);
	s.fixed = Eigen::Vector2d(0.2, -0.3);
	s.mu = Eigen::Vector2d(-1.0, 0.5);
	s.omega = Eigen::Vector2d(0.25, 0.25).asDiagonal();
	return s;
}

inline hdcm::SimulationSpec mnl_simulation() {
	hdcm::SimulationSpec sim;
	sim.attributes["x1"] = {hdcm::Generator::Kind::normal, 0.0, 2.0};
	sim.attributes["x2"] = {hdcm::Generator::Kind::normal, 0.0, 2.0};
	return sim;
}

inline hdcm::ChoiceDataset generate_synthetic_mnl(std::size_t n, std::uint64_t seed) {
	return hdcm::generate_synthetic(mnl_spec(), mnl_simulation(), mnl_truth(), n, seed).data;
}

struct SampleFile {
	hdcm::ModelSpecFile file;
	hdcm::ParameterState truth;
};

/// The bundled commute/parking model and its ground truth.
inline SampleFile commute_parking() {
	SampleFile out;
	out.file = hdcm::load_model_spec(samples_dir() / "commute_parking.json");
	out.truth = hdcm::load_population(out.file.model, samples_dir() / "truth.json");
	return out;
}

/// Slot name -> value for one individual's coefficient vector.
inline std::map<std::string, double> coefficient_map(const hdcm::CoefficientLayout &layout, const Eigen::VectorXd &fixed, const Eigen::VectorXd &random) {
	std::map<std::string, double> out;
	std::vector<double> full;
	layout.assemble(fixed, random, full);
	for (std::size_t s = 0; s < layout.size(); ++s) {
		out[layout.slots()[s].name] = full[s];
	}
	return out;
}

/// Indicator id -> thresholds of a state, in spec order.
inline std::map<std::string, std::vector<double>> threshold_map(const hdcm::ModelSpec &spec, const hdcm::ParameterState &s) {
	std::map<std::string, std::vector<double>> out;
	const auto indicators = spec.indicators();
	for (std::size_t q = 0; q < indicators.size(); ++q) {
		out[indicators[q].id] = s.tau[q];
	}
	return out;
}

inline std::map<std::string, double> loading_map(const hdcm::ModelSpec &spec, const hdcm::ParameterState &s) {
	std::map<std::string, double> out;
	const auto indicators = spec.indicators();
	for (std::size_t q = 0; q < indicators.size(); ++q) {
		out[indicators[q].id] = s.zeta[q];
	}
	return out;
}

/// Full per-individual state (beta at mu, alpha at the structural mean) so
/// a sampler can start from it.
inline hdcm::ParameterState with_individuals(const hdcm::CompiledModel &model, hdcm::ParameterState s) {
	const auto N = static_cast<Eigen::Index>(model.n_individuals());
	s.beta = hdcm::RowMatrix(N, s.mu.size());
	s.alpha = hdcm::RowMatrix(N, static_cast<Eigen::Index>(model.n_latent()));
	for (Eigen::Index i = 0; i < N; ++i) {
		s.beta.row(i) = s.mu.transpose();
		if (model.n_latent() > 0) {
			s.alpha.row(i) = hdcm::structural_mean(s.gamma, model.individuals()[static_cast<std::size_t>(i)].z).transpose();
		}
	}
	return s;
}

} // namespace fixture

#endif
