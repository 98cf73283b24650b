#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace hdcm;

namespace {

Individual person_with(const std::vector<std::string> &available, const std::string &chosen, std::map<std::string, std::map<std::string, double>> attrs) {
	Individual p;
	p.id = "p1";
	p.availability = available;
	p.chosen = chosen;
	p.attributes = std::move(attrs);
	return p;
}

} // namespace

TEST(StructuralMean, ZeroGammaGivesZero) {
	const std::vector<double> z{1.3, -2.0, 4.0};
	EXPECT_TRUE(structural_mean(Eigen::MatrixXd::Zero(2, 3), z).isZero());
}

TEST(StructuralMean, SingleCovariateRow) {
	const std::vector<double> z{1.0};
	EXPECT_DOUBLE_EQ(structural_mean(Eigen::MatrixXd::Constant(1, 1, 0.641), z)[0], 0.641);
}

TEST(StructuralMean, DotProduct) {
	Eigen::MatrixXd g(1, 2);
	g << 0.5, -0.2;
	const std::vector<double> z{1.0, 2.0};
	EXPECT_NEAR(structural_mean(g, z)[0], 0.1, 1e-15);
}

TEST(StructuralMean, DimensionMismatchIsConfigurationError) {
	const std::vector<double> z{1.0, 2.0};
	EXPECT_THROW((void)structural_mean(Eigen::MatrixXd::Zero(1, 3), z), ConfigurationError);
}

TEST(SystematicUtility, ZeroCoefficientsGiveZeroUtilities) {
	const auto spec = fixture::one_lv_spec();
	const auto p = person_with({"A", "B"}, "A", {{"A", {{"time", 1.5}}}, {"B", {{"time", 0.5}}}});
	const std::vector<double> beta(CoefficientLayout(spec).size(), 0.0);
	const std::vector<double> alpha{0.7};
	for (const double u : systematic_utility(spec, p, beta, alpha)) {
		EXPECT_EQ(u, 0.0);
	}
}

TEST(SystematicUtility, ReferenceAlternativeWithoutAttributesIsZero) {
	ModelSpec spec;
	spec.alternatives = {{"bus", "bus"}, {"car", "car"}};
	spec.utility_terms = {{"cost", {"car"}, CoefficientKind::fixed, false}};
	spec.asc_reference_alternative = "bus";
	spec.asc_random = false;
	const auto p = person_with({"bus", "car"}, "bus", {{"car", {{"cost", 3.0}}}});
	const std::vector<double> beta{0.9, -0.4}; // asc[car], cost[car]
	const auto u = systematic_utility(spec, p, beta, {});
	EXPECT_EQ(u[0], 0.0);
	EXPECT_NEAR(u[1], 0.9 - 1.2, 1e-15);
}

TEST(SystematicUtility, AscPlusAttribute) {
	ModelSpec spec;
	spec.alternatives = {{"A", "A"}, {"B", "B"}};
	spec.utility_terms = {{"x", {"B"}, CoefficientKind::fixed, false}};
	spec.asc_reference_alternative = "A";
	const auto p = person_with({"A", "B"}, "B", {{"B", {{"x", 2.0}}}});
	const std::vector<double> beta{1.0, -1.5};
	EXPECT_DOUBLE_EQ(systematic_utility(spec, p, beta, {})[1], -2.0);
}

TEST(SystematicUtility, MissingAttributeIsDataError) {
	const auto spec = fixture::one_lv_spec();
	const auto p = person_with({"A", "B"}, "A", {{"A", {{"time", 1.0}}}});
	const std::vector<double> beta(CoefficientLayout(spec).size(), 0.1);
	const std::vector<double> alpha{0.0};
	EXPECT_THROW((void)systematic_utility(spec, p, beta, alpha), DataError);
}

TEST(SystematicUtility, MatchesTermByTermOracle) {
	const auto spec = fixture::one_lv_spec();
	const CoefficientLayout layout(spec);
	const auto data = fixture::one_lv_data(50, 3);
	const Eigen::VectorXd fixed = Eigen::Vector2d(0.3, -1.1);
	const Eigen::VectorXd random = Eigen::VectorXd::Constant(1, 0.6);
	std::vector<double> coef;
	layout.assemble(fixed, random, coef);
	const auto names = fixture::coefficient_map(layout, fixed, random);
	for (const auto &p : data.individuals) {
		const std::vector<double> alpha{0.37};
		const auto got = systematic_utility(spec, layout, p, coef, alpha);
		const auto want = oracle::utilities(spec, p, names, {{"att", 0.37}});
		ASSERT_EQ(got.size(), want.size());
		for (std::size_t k = 0; k < got.size(); ++k) {
			EXPECT_NEAR(got[k], want[k], 1e-14);
		}
	}
}

TEST(Mnl, SymmetricPair) {
	const auto p = mnl_probabilities(std::vector<double>{0.0, 0.0});
	EXPECT_DOUBLE_EQ(p[0], 0.5);
	EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(Mnl, LogThree) {
	const auto p = mnl_probabilities(std::vector<double>{0.0, std::log(3.0)});
	EXPECT_NEAR(p[0], 0.25, 1e-15);
	EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(Mnl, ThreeAlternatives) {
	const auto p = mnl_probabilities(std::vector<double>{1.0, 2.0, 3.0});
	EXPECT_NEAR(p[0], 0.0900, 1e-4);
	EXPECT_NEAR(p[1], 0.2447, 1e-4);
	EXPECT_NEAR(p[2], 0.6652, 1e-4);
	const auto want = oracle::softmax({1.0, 2.0, 3.0});
	for (std::size_t k = 0; k < 3; ++k) {
		EXPECT_NEAR(p[k], want[k], 1e-15);
	}
}

TEST(Mnl, HugeUtilitiesDoNotOverflow) {
	const auto p = mnl_probabilities(std::vector<double>{1000.0, 1000.0 + std::log(3.0)});
	EXPECT_NEAR(p[1], 0.75, 1e-12);
}

TEST(Mnl, NonFiniteUtilityIsNumericError) {
	EXPECT_THROW((void)mnl_probabilities(std::vector<double>{0.0, std::nan("")}), NumericError);
	EXPECT_THROW((void)mnl_probabilities(std::vector<double>{0.0, INFINITY}), NumericError);
}

TEST(PredictChoice, Examples) {
	EXPECT_EQ(predict_choice(std::vector<double>{1, 3, 2}), 1U);
	EXPECT_EQ(predict_choice(std::vector<double>{2, 2}), 0U);
	EXPECT_EQ(predict_choice(std::vector<double>{-4}), 0U);
}

TEST(OrderedLogit, TwoCategoriesAtZero) {
	const std::vector<double> tau{0.0};
	const auto p = ordered_logit_pmf(1.0, 0.0, tau);
	EXPECT_DOUBLE_EQ(p[0], 0.5);
	EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(OrderedLogit, ThreeCategoriesIndexOne) {
	const std::vector<double> tau{-1.0, 1.0};
	const auto p = ordered_logit_pmf(1.0, 1.0, tau);
	EXPECT_NEAR(p[0], 0.1192, 1e-4);
	EXPECT_NEAR(p[1], 0.3808, 1e-4);
	EXPECT_NEAR(p[2], 0.5000, 1e-4);
}

TEST(OrderedLogit, LowestCategoryOfFourLevelItem) {
	const std::vector<double> tau{-4.817, 1.304, 4.750};
	const auto p = ordered_logit_pmf(1.917, 0.0, tau);
	EXPECT_NEAR(p[0], 0.0081, 1e-4);
	EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(4.817)), 1e-15);
}

TEST(OrderedLogit, NonIncreasingThresholdsAreParameterError) {
	EXPECT_THROW((void)ordered_logit_pmf(1.0, 0.0, std::vector<double>{0.5, 0.5}), ParameterError);
	EXPECT_THROW((void)ordered_logit_pmf(1.0, 0.0, std::vector<double>{1.0, -1.0}), ParameterError);
}

TEST(OrderedLogit, LogKernelMatchesPmf) {
	std::mt19937_64 rng(11);
	std::normal_distribution<double> n01;
	for (int trial = 0; trial < 1000; ++trial) {
		std::vector<double> tau{n01(rng) * 2.0};
		for (int k = 0; k < 3; ++k) {
			tau.push_back(tau.back() + std::exp(n01(rng)));
		}
		const double index = 3.0 * n01(rng);
		const auto want = oracle::ordered_logit(index, tau);
		for (int c = 0; c <= 3; ++c) {
			EXPECT_NEAR(std::exp(log_ordered_logit(c, index, tau)), want[static_cast<std::size_t>(c)], 1e-13);
		}
	}
}

TEST(Invariants, MnlSumsToOneAndIsTranslationInvariant) {
	std::mt19937_64 rng(20240601);
	std::normal_distribution<double> n01;
	std::uniform_int_distribution<int> size(1, 8);
	for (int trial = 0; trial < 10000; ++trial) {
		std::vector<double> u(static_cast<std::size_t>(size(rng)));
		for (auto &v : u) {
			v = 5.0 * n01(rng);
		}
		const auto p = mnl_probabilities(u);
		double sum = 0.0;
		for (const double v : p) {
			sum += v;
		}
		ASSERT_NEAR(sum, 1.0, 1e-12);
		const double shift = 50.0 * n01(rng);
		auto shifted = u;
		for (auto &v : shifted) {
			v += shift;
		}
		const auto q = mnl_probabilities(shifted);
		for (std::size_t k = 0; k < p.size(); ++k) {
			ASSERT_NEAR(p[k], q[k], 1e-12);
		}
	}
}

TEST(Invariants, PredictChoiceAffineInvariant) {
	std::mt19937_64 rng(5);
	std::normal_distribution<double> n01;
	for (int trial = 0; trial < 10000; ++trial) {
		std::vector<double> u(5);
		for (auto &v : u) {
			v = n01(rng);
		}
		const double a = std::exp(n01(rng));
		const double b = 10.0 * n01(rng);
		auto t = u;
		for (auto &v : t) {
			v = a * v + b;
		}
		ASSERT_EQ(predict_choice(u), predict_choice(t));
	}
}

TEST(Invariants, OrderedLogitSumsToOneAndShiftsMassUpward) {
	std::mt19937_64 rng(77);
	std::normal_distribution<double> n01;
	std::uniform_int_distribution<int> cats(2, 5);
	for (int trial = 0; trial < 1000; ++trial) {
		const int K = cats(rng);
		std::vector<double> tau{2.0 * n01(rng)};
		for (int k = 1; k + 1 < K; ++k) {
			tau.push_back(tau.back() + 0.05 + std::exp(n01(rng)));
		}
		const double zeta = 2.0 * n01(rng);
		const double alpha = n01(rng);
		const double bump = std::fabs(n01(rng)) + 1e-3;
		const auto lo = ordered_logit_pmf(zeta, alpha, tau);
		const auto hi = ordered_logit_pmf(1.0, zeta * alpha + bump, tau);
		double sum_lo = 0.0;
		double sum_hi = 0.0;
		double cdf_lo = 0.0;
		double cdf_hi = 0.0;
		for (std::size_t c = 0; c < lo.size(); ++c) {
			sum_lo += lo[c];
			sum_hi += hi[c];
			cdf_lo += lo[c];
			cdf_hi += hi[c];
			if (c + 1 < lo.size()) {
				ASSERT_LE(cdf_hi, cdf_lo + 1e-15) << "category " << c;
			}
		}
		ASSERT_NEAR(sum_lo, 1.0, 1e-12);
		ASSERT_NEAR(sum_hi, 1.0, 1e-12);
	}
}

namespace {

// One-LV toy with every LV path switched off.
ParameterState factorized_state() {
	auto s = fixture::one_lv_truth();
	s.zeta = {0.0};
	s.fixed[1] = 0.0; // att[B]
	return s;
}

} // namespace

TEST(JointLoglik, FactorizesWhenLatentPathsAreOff) {
	const auto spec = fixture::one_lv_spec();
	const auto data = fixture::one_lv_data(40, 8);
	const CompiledModel model(spec, data);
	const auto s = factorized_state();
	const double want = oracle::factorized_loglik(spec, data, fixture::coefficient_map(model.layout(), s.fixed, s.mu), fixture::threshold_map(spec, s));
	for (const std::uint64_t seed : {1ULL, 99ULL, 123456789ULL}) {
		for (const std::size_t draws : {1UL, 7UL, 500UL}) {
			EXPECT_NEAR(joint_loglik_mc(model, s, draws, seed).value, want, 1e-10) << "seed " << seed << " draws " << draws;
		}
	}
}

TEST(JointLoglik, NoIndicatorsReducesToChoiceLoglik) {
	const auto spec = fixture::mnl_spec();
	const auto truth = fixture::mnl_truth();
	const auto data = generate_synthetic(spec, fixture::mnl_simulation(), truth, 30, 4).data;
	const CompiledModel model(spec, data);
	const double want = oracle::factorized_loglik(spec, data, fixture::coefficient_map(model.layout(), truth.fixed, truth.mu), {});
	EXPECT_NEAR(joint_loglik_mc(model, truth, 10, 1).value, want, 1e-10);
	EXPECT_NEAR(joint_loglik_quadrature(model, truth, {}).value, want, 1e-10);
}

TEST(JointLoglik, MonteCarloAgreesWithQuadrature) {
	const auto spec = fixture::one_lv_spec();
	const auto data = fixture::one_lv_data(10, 21);
	const CompiledModel model(spec, data);
	const auto s = fixture::one_lv_truth();
	const double quad = joint_loglik_quadrature(model, s, {-10.0, 10.0, 10001}).value;
	const double mc = joint_loglik_mc(model, s, 100000, 5).value;
	EXPECT_LE(std::fabs(mc - quad) / std::fabs(quad), 0.005);
}

TEST(JointLoglik, QuadratureMatchesIndependentSimpsonIntegration) {
	const auto spec = fixture::one_lv_spec();
	const auto data = fixture::one_lv_data(10, 21);
	const CompiledModel model(spec, data);
	const auto s = fixture::one_lv_truth();
	const double quad = joint_loglik_quadrature(model, s, {-10.0, 10.0, 10001}).value;
	const double want = oracle::joint_loglik_one_lv(spec, data, fixture::coefficient_map(model.layout(), s.fixed, s.mu), {0.5},
	                                                fixture::loading_map(spec, s), fixture::threshold_map(spec, s));
	EXPECT_NEAR(quad, want, 1e-8);
}

TEST(JointLoglik, QuadratureMatchesClosedFormWhenFactorized) {
	const auto spec = fixture::one_lv_spec();
	const auto data = fixture::one_lv_data(40, 8);
	const CompiledModel model(spec, data);
	const auto s = factorized_state();
	const double want = oracle::factorized_loglik(spec, data, fixture::coefficient_map(model.layout(), s.fixed, s.mu), fixture::threshold_map(spec, s));
	EXPECT_NEAR(joint_loglik_quadrature(model, s, {-10.0, 10.0, 10001}).value, want, 1e-6);
}

TEST(JointLoglik, QuadratureInsensitiveToGridWidth) {
	const auto spec = fixture::one_lv_spec();
	const auto data = fixture::one_lv_data(10, 21);
	const CompiledModel model(spec, data);
	const auto s = fixture::one_lv_truth();
	const double narrow = joint_loglik_quadrature(model, s, {-8.0, 8.0, 10001}).value;
	const double wide = joint_loglik_quadrature(model, s, {-12.0, 12.0, 10001}).value;
	EXPECT_LT(std::fabs(narrow - wide), 1e-8);
}

TEST(JointLoglik, QuadratureRejectsThreeLatentVariables) {
	auto spec = fixture::one_lv_spec();
	spec.latent_variables.push_back({"b", {"x"}, {{"q2", 3}}});
	spec.latent_variables.push_back({"c", {"x"}, {{"q3", 3}}});
	const auto data = [&] {
		auto d = fixture::one_lv_data(3, 1);
		for (auto &p : d.individuals) {
			p.indicator_responses["q2"] = 1;
			p.indicator_responses["q3"] = 2;
		}
		return d;
	}();
	const CompiledModel model(spec, data);
	auto s = fixture::one_lv_truth();
	s.gamma = Eigen::MatrixXd::Zero(3, 1);
	s.zeta = {1.0, 1.0, 1.0};
	s.tau = {{-1.0, 0.3, 1.5}, {0.0, 1.0}, {0.0, 1.0}};
	EXPECT_THROW((void)joint_loglik_quadrature(model, s, {}), UnsupportedOracleError);
}

TEST(JointLoglik, QuadratureRejectsCoarseGrid) {
	const auto spec = fixture::one_lv_spec();
	const CompiledModel model(spec, fixture::one_lv_data(3, 1));
	EXPECT_THROW((void)joint_loglik_quadrature(model, fixture::one_lv_truth(), {-5.0, 5.0, 100}), ConfigurationError);
}

TEST(JointLoglik, TwoLatentQuadratureAgreesWithMonteCarlo) {
	auto spec = fixture::one_lv_spec();
	spec.latent_variables.push_back({"b", {"x"}, {{"q2", 3}}});
	auto data = fixture::one_lv_data(6, 2);
	for (std::size_t i = 0; i < data.individuals.size(); ++i) {
		data.individuals[i].indicator_responses["q2"] = static_cast<int>(i % 3) + 1;
	}
	const CompiledModel model(spec, data);
	auto s = fixture::one_lv_truth();
	s.gamma = Eigen::Vector2d(0.5, -0.3);
	s.zeta = {1.2, 0.8};
	s.tau = {{-1.0, 0.3, 1.5}, {-0.5, 0.7}};
	const double quad = joint_loglik_quadrature(model, s, {-8.0, 8.0, 801}).value;
	const double mc = joint_loglik_mc(model, s, 100000, 9).value;
	EXPECT_LE(std::fabs(mc - quad) / std::fabs(quad), 0.005);
}

TEST(JointLoglik, BitIdenticalForEqualSeeds) {
	const auto spec = fixture::one_lv_spec();
	const CompiledModel model(spec, fixture::one_lv_data(25, 13));
	const auto s = fixture::one_lv_truth();
	const double a = joint_loglik_mc(model, s, 2000, 42).value;
	const double b = joint_loglik_mc(model, s, 2000, 42).value;
	EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
	EXPECT_NE(a, joint_loglik_mc(model, s, 2000, 43).value);
}

TEST(JointLoglik, ExtremeUtilitiesStayFiniteInLogSpace) {
	const auto spec = fixture::one_lv_spec();
	auto data = fixture::one_lv_data(5, 13);
	auto s = fixture::one_lv_truth();
	s.fixed[0] = 2000.0; // asc[B]; choosing A then has probability near exp(-2000)
	data.individuals[2].chosen = "A";
	const auto ll = joint_loglik_mc(CompiledModel(spec, data), s, 10, 1);
	EXPECT_TRUE(std::isfinite(ll.value));
	EXPECT_LT(ll.value, -1900.0);
	EXPECT_TRUE(ll.zero_likelihood.empty());
}

TEST(JointLoglik, RejectsZeroDraws) {
	const auto spec = fixture::one_lv_spec();
	const CompiledModel model(spec, fixture::one_lv_data(3, 1));
	EXPECT_THROW((void)joint_loglik_mc(model, fixture::one_lv_truth(), 0, 1), ConfigurationError);
}

TEST(ParameterState, ValidationCatchesBadThresholdsAndOmega) {
	const auto spec = fixture::one_lv_spec();
	const CoefficientLayout layout(spec);
	auto s = fixture::one_lv_truth();
	EXPECT_NO_THROW(validate_state(spec, layout, s));
	s.tau[0] = {0.0, 0.0, 1.0};
	EXPECT_THROW(validate_state(spec, layout, s), ParameterError);
	s = fixture::one_lv_truth();
	s.omega(0, 0) = -0.1;
	EXPECT_THROW(validate_state(spec, layout, s), ParameterError);
}

TEST(ParameterState, FlattenRoundTrip) {
	const auto f = fixture::commute_parking();
	const CoefficientLayout layout(f.file.model);
	const auto v = flatten_population(f.file.model, layout, f.truth);
	EXPECT_EQ(static_cast<std::size_t>(v.size()), population_names(f.file.model, layout).size());
	const auto back = unflatten_population(f.file.model, layout, v);
	EXPECT_EQ(flatten_population(f.file.model, layout, back), v);
}

TEST(ModelSpec, ValidationErrors) {
	auto spec = fixture::one_lv_spec();
	spec.asc_reference_alternative = "Z";
	EXPECT_THROW(spec.validate(), ConfigurationError);
	spec = fixture::one_lv_spec();
	spec.alternatives.pop_back();
	EXPECT_THROW(spec.validate(), ConfigurationError);
	spec = fixture::one_lv_spec();
	spec.utility_terms.push_back({"time", {"B"}, CoefficientKind::fixed, false});
	EXPECT_THROW(spec.validate(), ConfigurationError);
	spec = fixture::one_lv_spec();
	spec.cost_attribute = "price";
	EXPECT_THROW(spec.validate(), ConfigurationError);
	spec = fixture::one_lv_spec();
	spec.latent_variables[0].indicators[0].n_categories = 6;
	EXPECT_THROW(spec.validate(), ConfigurationError);
}
