#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace hdcm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path &p) {
	std::ifstream in(p, std::ios::binary);
	std::stringstream ss;
	ss << in.rdbuf();
	return ss.str();
}

void put(const fs::path &p, const std::string &text) {
	std::ofstream out(p, std::ios::binary | std::ios::trunc);
	out << text;
}

const std::string kChoices = "individual_id,alternative_id,available,chosen,time\n"
                             "p1,A,1,1,0.5\n"
                             "p1,B,1,0,1.0\n"
                             "p2,A,1,0,0.2\n"
                             "p2,B,1,1,0.3\n";
const std::string kCovariates = "individual_id,x\np1,0.1\np2,-0.2\n";
const std::string kIndicators = "individual_id,indicator_id,response\np1,q1,2\np2,q1,4\n";

fs::path write_case(const std::string &name, const std::string &choices, const std::string &covariates = kCovariates,
                    const std::string &indicators = kIndicators) {
	const auto dir = fixture::scratch_dir(name);
	put(dir / "choices.csv", choices);
	put(dir / "covariates.csv", covariates);
	put(dir / "indicators.csv", indicators);
	return dir;
}

std::string replace(std::string s, const std::string &from, const std::string &to) {
	const auto at = s.find(from);
	EXPECT_NE(at, std::string::npos) << from;
	return s.replace(at, from.size(), to);
}

/// Two alternatives, utilities (0, ln 3) for everyone, one 2-category indicator.
struct FixedUtilityModel {
	ModelSpec spec;
	SimulationSpec sim;
	ParameterState truth;
};

FixedUtilityModel fixed_utility_model() {
	FixedUtilityModel m;
	m.spec.alternatives = {{"A", "A"}, {"B", "B"}};
	m.spec.latent_variables = {{"l", {}, {{"q", 2}}}};
	m.spec.utility_terms = {{"x", {"A", "B"}, CoefficientKind::random_normal, true}};
	m.spec.asc_reference_alternative = "A";
	m.spec.asc_random = false;
	m.spec.lv_random = false;
	m.spec.validate();
	m.sim.attributes["x"] = {Generator::Kind::constant, 0.0, 0.0};
	m.truth.gamma = Eigen::MatrixXd(1, 0);
	m.truth.zeta = {0.0};
	m.truth.tau = {{0.0}};
	m.truth.fixed = Eigen::VectorXd::Constant(1, std::log(3.0));
	m.truth.mu = Eigen::VectorXd::Zero(1);
	m.truth.omega = Eigen::MatrixXd::Identity(1, 1);
	return m;
}

bool same_individuals(const ChoiceDataset &a, const ChoiceDataset &b) {
	if (a.individuals.size() != b.individuals.size()) {
		return false;
	}
	for (std::size_t i = 0; i < a.individuals.size(); ++i) {
		const auto &p = a.individuals[i];
		const auto &q = b.individuals[i];
		if (p.id != q.id || p.z != q.z || p.availability != q.availability || p.chosen != q.chosen ||
		    p.indicator_responses != q.indicator_responses || p.attributes != q.attributes) {
			return false;
		}
	}
	return true;
}

} // namespace

// ---------------------------------------------------------------------------
// CSV

TEST(Csv, QuotedFieldsCrlfBomAndBlankLines) {
	std::istringstream in("\xEF\xBB\xBF" "a,b\r\n\r\n\"x, y\",\"say \\\"hi\\\"\"\r\n1,2\n");
	const auto t = parse_csv(in);
	EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
	ASSERT_EQ(t.rows.size(), 2U);
	EXPECT_EQ(t.rows[0][0], "x, y");
	EXPECT_EQ(t.rows[0][1], "say \"hi\"");
	EXPECT_EQ(t.lines[0], 3U);
	EXPECT_EQ(t.lines[1], 4U);
}

TEST(Csv, QuoteFieldRoundTrips) {
	for (const std::string field : {"plain", "a,b", "he said \"no\"", "back\\slash, too", ""}) {
		const auto fields = split_csv_line(quote_field(field) + "," + quote_field(field));
		ASSERT_EQ(fields.size(), 2U);
		EXPECT_EQ(fields[0], field);
		EXPECT_EQ(fields[1], field);
	}
}

TEST(Csv, Errors) {
	std::istringstream ragged("a,b\n1,2,3\n");
	EXPECT_THROW((void)parse_csv(ragged), DataError);
	std::istringstream empty("");
	EXPECT_THROW((void)parse_csv(empty), DataError);
	std::istringstream quote("a\n\"open\n");
	EXPECT_THROW((void)parse_csv(quote), DataError);
	EXPECT_THROW((void)read_csv("/nonexistent/file.csv"), DataError);
	std::istringstream ok("a\n1\n");
	EXPECT_THROW((void)parse_csv(ok).column("b"), DataError);
}

TEST(Csv, NumbersRoundTripExactly) {
	std::mt19937_64 rng(1);
	for (int k = 0; k < 100000; ++k) {
		double v = 0.0;
		do {
			const auto bits = rng();
			std::memcpy(&v, &bits, sizeof v);
		} while (!std::isfinite(v));
		ASSERT_EQ(parse_number(format_number(v), "t"), v);
	}
	EXPECT_EQ(format_number(0.1), "0.1");
	EXPECT_EQ(format_number(-2.0), "-2");
	EXPECT_TRUE(std::isnan(parse_number(format_number(std::nan("")), "t")));
	EXPECT_EQ(parse_number(format_number(-HUGE_VAL), "t"), -HUGE_VAL);
	EXPECT_EQ(parse_number("+1.5", "t"), 1.5);
	for (const std::string bad : {"", "1.2x", "abc", " 1", "1,5"}) {
		EXPECT_THROW((void)parse_number(bad, "t"), DataError) << bad;
	}
	EXPECT_EQ(parse_integer("-7", "t"), -7);
	EXPECT_THROW((void)parse_integer("2.0", "t"), DataError);
}

// ---------------------------------------------------------------------------
// Dataset loading

TEST(Load, TwoIndividualsThreeAlternatives) {
	auto spec = fixture::mnl_spec();
	const auto dir = write_case("load_ok",
	                            "individual_id,alternative_id,available,chosen,x1,x2\n"
	                            "b,A,1,0,1,2\nb,B,1,1,3,4\nb,C,1,0,5,6\n"
	                            "a,A,1,1,1,2\na,B,1,0,3,4\na,C,1,0,5,6\n",
	                            "", "");
	const auto data = load_and_validate(dir, spec);
	ASSERT_EQ(data.individuals.size(), 2U);
	std::size_t rows = 0;
	for (const auto &p : data.individuals) {
		rows += p.attributes.size();
	}
	EXPECT_EQ(rows, 6U);
	EXPECT_EQ(data.individuals[0].id, "a");
	EXPECT_EQ(data.individuals[1].chosen, "B");
	EXPECT_EQ(data.individuals[1].attribute("C", "x2"), 6.0);
}

TEST(Load, ChosenUnavailableNamesIndividual) {
	const auto dir = write_case("load_unavail", replace(kChoices, "p2,B,1,1", "p2,B,0,1"));
	try {
		(void)load_and_validate(dir, fixture::one_lv_spec());
		FAIL() << "no error";
	} catch (const DataError &e) {
		EXPECT_NE(std::string(e.what()).find("chosen alternative unavailable for individual p2"), std::string::npos) << e.what();
	}
}

TEST(Load, ResponseOutOfLikertRange) {
	const auto dir = write_case("load_range", kChoices, kCovariates, replace(kIndicators, "p2,q1,4", "p2,q1,7"));
	try {
		(void)load_and_validate(dir, fixture::one_lv_spec());
		FAIL() << "no error";
	} catch (const DataError &e) {
		EXPECT_NE(std::string(e.what()).find("outside 1..5"), std::string::npos) << e.what();
	}
}

TEST(Load, ExtraLevelsAreCollapsedInRankOrder) {
	auto spec = fixture::one_lv_spec();
	const auto dir = write_case("load_collapse", kChoices, kCovariates, replace(kIndicators, "p2,q1,4", "p2,q1,5"));
	const auto data = load_and_validate(dir, spec);
	EXPECT_EQ(data.individuals[0].indicator_responses.at("q1"), 1);
	EXPECT_EQ(data.individuals[1].indicator_responses.at("q1"), 2);

	const auto many = write_case("load_collapse_many",
	                             kChoices + "p3,A,1,1,1\np4,A,1,1,1\np5,A,1,1,1\n",
	                             kCovariates + "p3,0\np4,0\np5,0\n",
	                             "individual_id,indicator_id,response\np1,q1,1\np2,q1,2\np3,q1,3\np4,q1,4\np5,q1,5\n");
	EXPECT_THROW((void)load_and_validate(many, spec), DataError);
}

TEST(Load, ErrorCorpusYieldsStructuredErrors) {
	const auto spec = fixture::one_lv_spec();
	struct Case {
		std::string name;
		std::string choices = kChoices;
		std::string covariates = kCovariates;
		std::string indicators = kIndicators;
	};
	const std::string header = "individual_id,alternative_id,available,chosen,time\n";
	std::vector<Case> corpus{
	    {"duplicate_row", kChoices + "p1,A,1,0,0.5\n"},
	    {"two_chosen", replace(kChoices, "p1,B,1,0", "p1,B,1,1")},
	    {"none_chosen", replace(kChoices, "p2,B,1,1", "p2,B,1,0")},
	    {"unknown_alternative", kChoices + "p1,C,1,0,0.5\n"},
	    {"flag_not_binary", replace(kChoices, "p1,B,1,0", "p1,B,2,0")},
	    {"attribute_not_number", replace(kChoices, "1.0", "abc")},
	    {"attribute_infinite", replace(kChoices, "1.0", "Inf")},
	    {"attribute_missing_cell", replace(kChoices, "p1,B,1,0,1.0", "p1,B,1,0,")},
	    {"attribute_column_missing", "individual_id,alternative_id,available,chosen\np1,A,1,1\np1,B,1,0\n"},
	    {"chosen_column_missing", "individual_id,alternative_id,available,time\np1,A,1,0.5\n"},
	    {"duplicate_column", "individual_id,alternative_id,available,chosen,time,time\np1,A,1,1,1,1\n"},
	    {"ragged", kChoices + "p3,A,1\n"},
	    {"unterminated_quote", kChoices + "\"p3,A,1,1,1\n"},
	    {"empty_id", kChoices + ",A,1,1,1\n"},
	    {"header_only", header},
	    {"empty_file", ""},
	    {"nothing_available", replace(replace(kChoices, "p1,A,1,1", "p1,A,0,0"), "p1,B,1,0", "p1,B,0,0")},
	    {"covariate_row_missing", kChoices, "individual_id,x\np1,0.1\n"},
	    {"covariate_duplicate", kChoices, kCovariates + "p1,0.3\n"},
	    {"covariate_unknown_individual", kChoices, kCovariates + "p9,0.3\n"},
	    {"covariate_not_number", kChoices, replace(kCovariates, "0.1", "one")},
	    {"covariate_nan", kChoices, replace(kCovariates, "0.1", "NaN")},
	    {"covariate_column_missing", kChoices, "individual_id,y\np1,0.1\np2,0.2\n"},
	    {"indicator_unknown", kChoices, kCovariates, kIndicators + "p1,q9,3\n"},
	    {"indicator_unknown_individual", kChoices, kCovariates, kIndicators + "p9,q1,3\n"},
	    {"indicator_duplicate", kChoices, kCovariates, kIndicators + "p1,q1,3\n"},
	    {"indicator_zero", kChoices, kCovariates, replace(kIndicators, "p1,q1,2", "p1,q1,0")},
	    {"indicator_fraction", kChoices, kCovariates, replace(kIndicators, "p1,q1,2", "p1,q1,2.5")},
	    {"indicator_column_missing", kChoices, kCovariates, "individual_id,indicator_id\np1,q1\n"},
	};
	for (const auto &c : corpus) {
		const auto dir = write_case("corpus_" + c.name, c.choices, c.covariates, c.indicators);
		try {
			(void)load_and_validate(dir, spec);
			ADD_FAILURE() << c.name << ": accepted";
		} catch (const DataError &e) {
			EXPECT_GT(std::string(e.what()).size(), 0U);
		} catch (const std::exception &e) {
			ADD_FAILURE() << c.name << ": unstructured error " << e.what();
		}
	}
	const auto dir = fixture::scratch_dir("corpus_missing_files");
	EXPECT_THROW((void)load_and_validate(dir, spec), DataError);
}

TEST(Load, MissingAttributeOfUnavailableAlternativeIsFine) {
	const auto dir = write_case("load_unavail_blank", replace(kChoices, "p1,B,1,0,1.0", "p1,B,0,0,"));
	const auto data = load_and_validate(dir, fixture::one_lv_spec());
	EXPECT_EQ(data.individuals[0].availability, (std::vector<std::string>{"A"}));
}

TEST(Load, RoundTripIsByteIdentical) {
	const auto sample = fixture::commute_parking();
	const auto &spec = sample.file.model;
	const auto synthetic = generate_synthetic(spec, sample.file.simulation, sample.truth, 200, 3);
	const auto first = fixture::scratch_dir("roundtrip_1");
	const auto second = fixture::scratch_dir("roundtrip_2");
	write_dataset(first, spec, synthetic.data);
	const auto loaded = load_and_validate(first, spec);
	write_dataset(second, spec, loaded);
	for (const char *f : {"choices.csv", "covariates.csv", "indicators.csv"}) {
		EXPECT_EQ(slurp(first / f), slurp(second / f)) << f;
	}
	EXPECT_TRUE(same_individuals(loaded, synthetic.data));
}

// ---------------------------------------------------------------------------
// Synthetic data

TEST(Synthetic, EqualSeedsGiveIdenticalFiles) {
	const auto sample = fixture::commute_parking();
	const auto &spec = sample.file.model;
	const auto a = fixture::scratch_dir("synth_a");
	const auto b = fixture::scratch_dir("synth_b");
	const auto c = fixture::scratch_dir("synth_c");
	write_synthetic(a, spec, generate_synthetic(spec, sample.file.simulation, sample.truth, 300, 42));
	write_synthetic(b, spec, generate_synthetic(spec, sample.file.simulation, sample.truth, 300, 42));
	write_synthetic(c, spec, generate_synthetic(spec, sample.file.simulation, sample.truth, 300, 43));
	for (const char *f : {"choices.csv", "covariates.csv", "indicators.csv", "truth.json", "truth_individuals.csv"}) {
		EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
	}
	EXPECT_NE(slurp(a / "choices.csv"), slurp(c / "choices.csv"));
}

TEST(Synthetic, ChoiceSharesMatchClosedForm) {
	const auto m = fixed_utility_model();
	const auto data = generate_synthetic(m.spec, m.sim, m.truth, 100000, 7).data;
	std::size_t b = 0;
	for (const auto &p : data.individuals) {
		b += p.chosen == "B" ? 1 : 0;
	}
	const auto pr = oracle::softmax({0.0L, std::log(3.0L)});
	EXPECT_NEAR(static_cast<double>(pr[1]), 0.75, 1e-15);
	EXPECT_NEAR(static_cast<double>(b) / 1e5, static_cast<double>(pr[1]), 0.01);
}

TEST(Synthetic, ZeroLoadingIndicatorSplitsEvenly) {
	const auto m = fixed_utility_model();
	const auto data = generate_synthetic(m.spec, m.sim, m.truth, 100000, 8).data;
	std::size_t low = 0;
	for (const auto &p : data.individuals) {
		low += p.indicator_responses.at("q") == 1 ? 1 : 0;
	}
	EXPECT_NEAR(static_cast<double>(low) / 1e5, 0.5, 0.01);
}

TEST(Synthetic, WrittenDataAlwaysLoads) {
	const auto sample = fixture::commute_parking();
	struct Model {
		ModelSpec spec;
		SimulationSpec sim;
		ParameterState truth;
	};
	const auto f = fixed_utility_model();
	const std::vector<Model> models{{sample.file.model, sample.file.simulation, sample.truth},
	                                {fixture::one_lv_spec(), fixture::one_lv_simulation(), fixture::one_lv_truth()},
	                                {fixture::mnl_spec(), fixture::mnl_simulation(), fixture::mnl_truth()},
	                                {f.spec, f.sim, f.truth}};
	for (std::size_t m = 0; m < models.size(); ++m) {
		for (const std::uint64_t seed : {1, 2, 3}) {
			const auto dir = fixture::scratch_dir("synth_load");
			const auto synthetic = generate_synthetic(models[m].spec, models[m].sim, models[m].truth, 150, seed);
			write_synthetic(dir, models[m].spec, synthetic);
			ChoiceDataset loaded;
			ASSERT_NO_THROW(loaded = load_and_validate(dir, models[m].spec)) << "model " << m << " seed " << seed;
			EXPECT_TRUE(same_individuals(loaded, synthetic.data));
			const auto truth = load_population(models[m].spec, dir / "truth.json");
			const CoefficientLayout layout(models[m].spec);
			EXPECT_EQ(flatten_population(models[m].spec, layout, truth), flatten_population(models[m].spec, layout, models[m].truth));
		}
	}
}

TEST(Synthetic, MissingGeneratorRejected) {
	auto sim = fixture::one_lv_simulation();
	sim.attributes.clear();
	EXPECT_THROW((void)generate_synthetic(fixture::one_lv_spec(), sim, fixture::one_lv_truth(), 10, 1), ConfigurationError);
	auto truth = fixture::one_lv_truth();
	truth.tau = {{1.0, 0.0, 2.0}};
	EXPECT_THROW((void)generate_synthetic(fixture::one_lv_spec(), fixture::one_lv_simulation(), truth, 10, 1), ParameterError);
}

// ---------------------------------------------------------------------------
// Reliability

namespace {

/// Two centered items with unit sample variance and correlation r.
Eigen::MatrixXd correlated_items(double r, std::size_t n, std::uint64_t seed) {
	std::mt19937_64 rng(seed);
	std::normal_distribution<double> n01;
	Eigen::VectorXd u(static_cast<Eigen::Index>(n));
	Eigen::VectorXd v(static_cast<Eigen::Index>(n));
	for (Eigen::Index i = 0; i < u.size(); ++i) {
		u[i] = n01(rng);
		v[i] = n01(rng);
	}
	u.array() -= u.mean();
	v.array() -= v.mean();
	u /= u.norm();
	v -= v.dot(u) * u;
	v /= v.norm();
	const double s = std::sqrt(static_cast<double>(n) - 1.0);
	Eigen::MatrixXd m(u.size(), 2);
	m.col(0) = s * u;
	m.col(1) = s * (r * u + std::sqrt(1.0 - r * r) * v);
	return m;
}

std::vector<std::vector<double>> to_items(const Eigen::MatrixXd &m) {
	std::vector<std::vector<double>> out(static_cast<std::size_t>(m.cols()));
	for (Eigen::Index j = 0; j < m.cols(); ++j) {
		for (Eigen::Index i = 0; i < m.rows(); ++i) {
			out[static_cast<std::size_t>(j)].push_back(m(i, j));
		}
	}
	return out;
}

} // namespace

TEST(Cronbach, IdenticalItemsGiveOne) {
	Eigen::MatrixXd m(5, 3);
	for (Eigen::Index i = 0; i < 5; ++i) {
		m.row(i).setConstant(static_cast<double>(i % 3) + 1.0);
	}
	const auto r = cronbach_alpha(m);
	EXPECT_NEAR(r.alpha, 1.0, 1e-12);
	EXPECT_TRUE(r.pass);
}

TEST(Cronbach, TwoItemsCorrelationHalf) {
	const auto m = correlated_items(0.5, 200, 1);
	const auto r = cronbach_alpha(m);
	EXPECT_NEAR(r.alpha, 0.6667, 1e-4);
	EXPECT_NEAR(r.alpha, oracle::cronbach(to_items(m)), 1e-12);
	EXPECT_FALSE(r.pass);
}

TEST(Cronbach, ThresholdIsStrict) {
	// two items: alpha = 2r / (1 + r)
	for (const double target : {0.65, 0.7, 0.71}) {
		const auto m = correlated_items(target / (2.0 - target), 100, 2);
		const auto r = cronbach_alpha(m);
		EXPECT_NEAR(r.alpha, target, 1e-12);
		EXPECT_EQ(r.pass, r.alpha > 0.7);
	}
	EXPECT_FALSE(cronbach_alpha(correlated_items(0.65 / 1.35, 100, 3)).pass);
}

TEST(Cronbach, MatchesOracleOnRandomLikertData) {
	std::mt19937_64 rng(4);
	std::uniform_int_distribution<int> likert(1, 5);
	for (int rep = 0; rep < 50; ++rep) {
		Eigen::MatrixXd m(40, 4);
		for (Eigen::Index i = 0; i < m.rows(); ++i) {
			const int base = likert(rng);
			for (Eigen::Index j = 0; j < m.cols(); ++j) {
				m(i, j) = rng() % 3 == 0 ? likert(rng) : base;
			}
		}
		EXPECT_NEAR(cronbach_alpha(m).alpha, oracle::cronbach(to_items(m)), 1e-12);
	}
}

TEST(Cronbach, DegenerateInputs) {
	const auto r = cronbach_alpha(Eigen::MatrixXd::Constant(5, 3, 2.0));
	EXPECT_FALSE(r.defined);
	EXPECT_FALSE(r.pass);
	EXPECT_TRUE(std::isnan(r.alpha));
	EXPECT_THROW((void)cronbach_alpha(Eigen::MatrixXd::Ones(5, 1)), DataError);
	EXPECT_THROW((void)cronbach_alpha(Eigen::MatrixXd::Ones(1, 3)), DataError);
	Eigen::MatrixXd gap = Eigen::MatrixXd::Ones(3, 2);
	gap(1, 1) = std::nan("");
	EXPECT_THROW((void)cronbach_alpha(gap), DataError);
}

TEST(Cronbach, PerLatentFromIndicatorFile) {
	const auto sample = fixture::commute_parking();
	const auto dir = fixture::scratch_dir("reliability");
	write_synthetic(dir, sample.file.model, generate_synthetic(sample.file.model, sample.file.simulation, sample.truth, 500, 5));
	const auto results = check_reliability(read_csv(dir / "indicators.csv"), sample.file.model);
	ASSERT_EQ(results.size(), 2U);
	for (const auto &r : results) {
		EXPECT_EQ(r.n_items, 3U);
		EXPECT_EQ(r.n_complete, 500U);
		EXPECT_TRUE(r.result.defined);
		EXPECT_GT(r.result.alpha, 0.0);
	}
}

// ---------------------------------------------------------------------------
// Spec, parameter and scenario files

namespace {

nlohmann::json minimal_spec() {
	return nlohmann::json::parse(R"({
	  "alternatives": ["A", "B"],
	  "utility_terms": [{"attribute": "t", "alternatives": ["A", "B"], "random": true, "shared": true}],
	  "asc_reference": "A",
	  "simulation": {"attributes": {"t": {"uniform": [0, 1]}}}
	})");
}

} // namespace

TEST(SpecFile, SampleLoads) {
	const auto sample = fixture::commute_parking();
	EXPECT_EQ(sample.file.model.n_alternatives(), 4U);
	EXPECT_EQ(sample.file.model.n_latent(), 2U);
	EXPECT_EQ(sample.file.sampler.n_chains, 2U);
	EXPECT_EQ(sample.file.simulation.availability.at("two_wheeler"), 0.8);
	EXPECT_NO_THROW((void)parse_model_spec_file(minimal_spec()));
}

TEST(SpecFile, Errors) {
	std::vector<std::pair<std::string, nlohmann::json>> cases;
	auto add = [&](const std::string &name, const std::function<void(nlohmann::json &)> &mutate) {
		auto j = minimal_spec();
		mutate(j);
		cases.emplace_back(name, j);
	};
	add("unknown_key", [](auto &j) { j["colour"] = "red"; });
	add("missing_reference", [](auto &j) { j.erase("asc_reference"); });
	add("bad_reference", [](auto &j) { j["asc_reference"] = "Z"; });
	add("one_alternative", [](auto &j) { j["alternatives"] = {"A"}; });
	add("duplicate_alternative", [](auto &j) { j["alternatives"] = {"A", "A"}; });
	add("term_both_kinds", [](auto &j) { j["utility_terms"][0]["latent"] = "l"; });
	add("term_unknown_latent", [](auto &j) { j["utility_terms"].push_back({{"latent", "l"}, {"alternatives", {"A"}}}); });
	add("term_unknown_alternative", [](auto &j) { j["utility_terms"][0]["alternatives"] = {"A", "Q"}; });
	add("term_wrong_type", [](auto &j) { j["utility_terms"][0]["random"] = "yes"; });
	add("indicator_categories", [](auto &j) {
		j["latent_variables"] = nlohmann::json::array({{{"name", "l"}, {"indicators", {{{"id", "q"}, {"categories", 7}}}}}});
	});
	add("latent_unknown_covariate", [](auto &j) {
		j["latent_variables"] = nlohmann::json::array({{{"name", "l"}, {"covariates", {"age"}}, {"indicators", {"q"}}}});
	});
	add("burn_in_too_long", [](auto &j) { j["sampler"] = {{"sweeps", 10}, {"burn_in", 10}}; });
	add("sampler_unknown_key", [](auto &j) { j["sampler"] = {{"speed", 1}}; });
	add("negative_scale", [](auto &j) { j["sampler"] = {{"proposal_scales", {{"beta", -1.0}}}}; });
	add("prior_unknown_key", [](auto &j) { j["priors"] = {{"tightness", 1}}; });
	add("generator_two_kinds", [](auto &j) { j["simulation"]["attributes"]["t"] = {{"uniform", {0, 1}}, {"normal", {0, 1}}}; });
	add("generator_bad_uniform", [](auto &j) { j["simulation"]["attributes"]["t"] = {{"uniform", {1, 0}}}; });
	add("generator_bad_bernoulli", [](auto &j) { j["simulation"]["attributes"]["t"] = {{"bernoulli", 2}}; });
	add("generator_unknown_covariate", [](auto &j) { j["simulation"]["covariates"] = {{"age", 1}}; });
	add("availability_range", [](auto &j) { j["simulation"]["availability"] = {{"A", 1.5}}; });
	add("bad_identifier", [](auto &j) { j["alternatives"] = {"A", "B~2"}; });
	for (const auto &[name, j] : cases) {
		try {
			(void)parse_model_spec_file(j);
			ADD_FAILURE() << name << ": accepted";
		} catch (const ConfigurationError &) {
		} catch (const std::exception &e) {
			ADD_FAILURE() << name << ": unstructured error " << e.what();
		}
	}
	const auto dir = fixture::scratch_dir("specfile");
	put(dir / "broken.json", "{\"alternatives\": [");
	EXPECT_THROW((void)load_model_spec(dir / "broken.json"), ConfigurationError);
	EXPECT_THROW((void)load_model_spec(dir / "absent.json"), ConfigurationError);
}

TEST(ParameterFile, RoundTripAndErrors) {
	const auto sample = fixture::commute_parking();
	const auto &spec = sample.file.model;
	const CoefficientLayout layout(spec);
	const auto j = population_to_json(spec, layout, sample.truth);
	const auto back = population_from_json(spec, layout, j);
	EXPECT_EQ(flatten_population(spec, layout, back), flatten_population(spec, layout, sample.truth));

	auto missing = j;
	missing["parameters"].erase("zeta:ind1");
	EXPECT_THROW((void)population_from_json(spec, layout, missing), ParameterError);
	auto unknown = j;
	unknown["parameters"]["zeta:nothing"] = 1.0;
	EXPECT_THROW((void)population_from_json(spec, layout, unknown), ParameterError);
	auto unordered = j;
	unordered["parameters"]["tau:ind1~2"] = -3.0;
	EXPECT_THROW((void)population_from_json(spec, layout, unordered), ParameterError);
	auto not_pd = j;
	not_pd["parameters"]["omega:cost[bus|car_off|car_on|two_wheeler]"] = -0.1;
	EXPECT_THROW((void)population_from_json(spec, layout, not_pd), ParameterError);
	EXPECT_THROW((void)load_population(spec, "/nonexistent/truth.json"), ParameterError);
}

TEST(ScenarioFile, ParsesSampleAndRejectsMalformed) {
	const auto scenarios = load_scenarios(fixture::samples_dir() / "scenarios.json");
	ASSERT_EQ(scenarios.size(), 3U);
	EXPECT_EQ(scenarios[0].perturbations[0].attribute, "search_time");
	EXPECT_EQ(scenarios[0].perturbations[0].alternatives, (std::vector<std::string>{"car_off"}));
	EXPECT_EQ(scenarios[0].perturbations[0].multiplier, 1.5);
	EXPECT_TRUE(scenarios[2].perturbations.empty());

	for (const char *text : {R"({"scenarios": [{"name": "a"}, {"name": "a"}]})", R"({"scenarios": [{"name": ""}]})",
	                         R"({"scenarios": [{"name": "a", "colour": 1}]})", R"({"list": []})",
	                         R"({"scenarios": [{"name": "a", "perturbations": [{"attribute": "t", "alternatives": ["A"]}]}]})",
	                         R"({"scenarios": [{"name": "a", "perturbations": [{"attribute": "t", "alternatives": "A", "multiplier": 2}]}]})"}) {
		EXPECT_THROW((void)parse_scenarios(nlohmann::json::parse(text)), ConfigurationError) << text;
	}
	const auto dir = fixture::scratch_dir("scenario_file");
	put(dir / "bad.json", "{");
	EXPECT_THROW((void)load_scenarios(dir / "bad.json"), ConfigurationError);
}

// ---------------------------------------------------------------------------
// Posterior directories

TEST(PosteriorIo, RoundTripIsExact) {
	const auto spec = fixture::one_lv_spec();
	const auto data = fixture::one_lv_data(30, 11);
	SamplerConfig config;
	config.n_sweeps = 60;
	config.burn_in = 20;
	config.thin = 4;
	config.seed = 5;
	config.store_individual = true;
	const auto draws = run_chain(spec, data, config);
	const auto dir = fixture::scratch_dir("posterior_io") / "chain_1";
	write_posterior(dir, spec, draws);
	const auto back = read_posterior(dir, spec);
	ASSERT_EQ(back.states.size(), draws.states.size());
	const CoefficientLayout layout(spec);
	for (std::size_t d = 0; d < draws.states.size(); ++d) {
		EXPECT_EQ(flatten_population(spec, layout, back.states[d]), flatten_population(spec, layout, draws.states[d]));
		EXPECT_EQ(back.states[d].beta, draws.states[d].beta);
		EXPECT_EQ(back.states[d].alpha, draws.states[d].alpha);
	}
	EXPECT_EQ(back.acceptance, draws.acceptance);
	EXPECT_EQ(back.individual_ids, draws.individual_ids);
	EXPECT_EQ(back.beta_mean, draws.beta_mean);
	EXPECT_EQ(back.alpha_mean, draws.alpha_mean);
	EXPECT_EQ(back.config.seed, 5U);
	EXPECT_EQ(back.config.n_sweeps, 60U);
	EXPECT_EQ(back.config.thin, 4U);

	const auto chains = read_posteriors({dir.parent_path()}, spec);
	EXPECT_EQ(chains.size(), 1U);
	const auto [matrix, names] = read_population_matrix(dir);
	EXPECT_EQ(static_cast<std::size_t>(matrix.rows()), draws.states.size());
	EXPECT_EQ(names, population_names(spec, layout));
}

TEST(PosteriorIo, Errors) {
	const auto spec = fixture::one_lv_spec();
	EXPECT_THROW((void)chain_directories(fixture::scratch_dir("posterior_empty")), DataError);

	const auto data = fixture::one_lv_data(10, 12);
	SamplerConfig config;
	config.n_sweeps = 10;
	config.burn_in = 5;
	const auto dir = fixture::scratch_dir("posterior_bad");
	write_posterior(dir, spec, run_chain(spec, data, config));
	EXPECT_THROW((void)read_posterior(dir, fixture::mnl_spec()), DataError);
	put(dir / "mu.csv", "draw,mu:time[A|B]\n1,0.5\n");
	EXPECT_THROW((void)read_posterior(dir, spec), DataError);
	put(dir / "manifest.json", "{\"format\": \"other\"}");
	EXPECT_THROW((void)read_posterior(dir, spec), DataError);
}
