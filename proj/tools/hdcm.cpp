// hdcm command-line front end.
//
// Exit status: 0 success, 1 validation error (configuration, data,
// parameters, bad arguments), 2 numeric failure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hdcm/hdcm.hpp"

namespace fs = std::filesystem;
using namespace hdcm;

namespace {

std::ofstream open_output(const fs::path &path) {
	if (path.has_parent_path()) {
		fs::create_directories(path.parent_path());
	}
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out) {
		throw Error("cannot write " + path.string());
	}
	return out;
}

struct EstimateArgs {
	std::string spec;
	std::string data;
	std::string out;
	std::optional<std::size_t> chains;
	std::optional<std::uint64_t> seed;
	std::optional<std::size_t> sweeps;
	std::optional<std::size_t> burn_in;
	std::optional<std::size_t> thin;
	bool store_individual = false;
};

int run_estimate(const EstimateArgs &a) {
	const auto file = load_model_spec(a.spec);
	SamplerConfig config = file.sampler;
	if (a.chains) {
		config.n_chains = *a.chains;
	}
	if (a.seed) {
		config.seed = *a.seed;
	}
	if (a.sweeps) {
		config.n_sweeps = *a.sweeps;
	}
	if (a.burn_in) {
		config.burn_in = *a.burn_in;
	}
	if (a.thin) {
		config.thin = *a.thin;
	}
	config.store_individual = config.store_individual || a.store_individual;
	config.validate();

	const auto data = load_and_validate(fs::path(a.data), file.model);
	const CompiledModel model(file.model, data);
	std::vector<PosteriorDraws> chains;
	for (std::size_t c = 0; c < config.n_chains; ++c) {
		std::cerr << "chain " << c + 1 << "/" << config.n_chains << ": " << config.n_sweeps << " sweeps\n";
		chains.push_back(run_chain(model, config, c));
		const fs::path dir = config.n_chains > 1 ? fs::path(a.out) / ("chain_" + std::to_string(c + 1)) : fs::path(a.out);
		write_posterior(dir, file.model, chains.back());
	}

	if (config.stored_count() >= 2) {
		const double ll0 = null_choice_loglik(model);
		const double ll = choice_loglik_at_means(model, chains);
		const auto summary = summarize(file.model, model.layout(), chains, ll0, ll, choice_parameter_count(file.model, model.layout()));
		write_summary(fs::path(a.out) / "summary.csv", summary);
		write_fit(fs::path(a.out) / "fit.csv", summary);
		std::cerr << "rho^2 = " << summary.rho_squared << ", adjusted rho^2 = " << summary.adjusted_rho_squared << "\n";
	}
	if (config.stored_count() >= 4) {
		const auto diagnostics = convergence_diagnostics(model, chains);
		auto out = open_output(fs::path(a.out) / "diagnostics.csv");
		write_diagnostics(out, diagnostics);
		std::size_t flagged = 0;
		for (const auto &d : diagnostics) {
			flagged += d.flagged ? 1 : 0;
		}
		if (flagged > 0) {
			std::cerr << flagged << " parameter(s) with R-hat above " << kRhatThreshold << "\n";
		}
	}
	return 0;
}

int run_simulate(const std::string &spec_path, const std::string &truth_path, std::size_t n, std::uint64_t seed, const std::string &out) {
	const auto file = load_model_spec(spec_path);
	const auto truth = load_population(file.model, truth_path);
	const auto synthetic = generate_synthetic(file.model, file.simulation, truth, n, seed);
	write_synthetic(out, file.model, synthetic);
	return 0;
}

int run_predict(const std::string &spec_path, const std::string &data_dir, const std::string &posterior_dir, const std::string &scenario_path,
                const std::string &out, std::uint64_t seed) {
	const auto file = load_model_spec(spec_path);
	const auto data = load_and_validate(fs::path(data_dir), file.model);
	const auto scenarios = scenario_path.empty() ? std::vector<ScenarioSpec>{} : load_scenarios(scenario_path);
	const auto chains = read_posteriors({posterior_dir}, file.model);
	for (const auto &c : chains) {
		if (!c.states.empty() && c.states.front().beta.rows() > 0 && c.individual_ids.size() != data.individuals.size()) {
			throw DataError("posterior individual draws do not match the dataset");
		}
	}
	const auto table = share_delta_table(file.model, data, chains, scenarios, seed);
	if (out.empty() || out == "-") {
		write_share_table(std::cout, table);
	} else {
		auto stream = open_output(out);
		write_share_table(stream, table);
	}
	return 0;
}

struct MwtpArgs {
	std::string spec;
	std::string posterior;
	std::string attribute;
	std::string alternative;
	std::string regress;
	std::vector<std::string> columns;
	double unit_factor = 1.0;
	std::string out;
	std::string regression_out;
};

int run_mwtp(const MwtpArgs &a) {
	const auto file = load_model_spec(a.spec);
	const auto &spec = file.model;
	const CoefficientLayout layout(spec);
	if (a.attribute == spec.cost_attribute) {
		throw ConfigurationError("MWTP attribute must differ from the cost attribute");
	}
	std::string alternative = a.alternative;
	if (alternative.empty()) {
		for (const auto &slot : layout.slots()) {
			if (slot.attribute_or_lv == a.attribute) {
				alternative = slot.alternatives.front();
				break;
			}
		}
	}
	const auto slot_a = layout.find(a.attribute, alternative);
	if (!slot_a) {
		throw ConfigurationError("no coefficient for attribute '" + a.attribute + "' on alternative '" + alternative + "'");
	}
	const auto slot_c = layout.find(spec.cost_attribute, alternative);
	if (!slot_c) {
		throw ConfigurationError("no cost coefficient on alternative '" + alternative + "'");
	}
	const auto chains = read_posteriors({a.posterior}, spec);
	if (chains.empty() || chains.front().individual_ids.empty()) {
		throw DataError("posterior holds no individuals");
	}
	const auto &ids = chains.front().individual_ids;
	for (const auto &c : chains) {
		if (c.individual_ids != ids) {
			throw DataError("chains disagree on the individuals");
		}
	}
	const std::size_t N = ids.size();
	const bool stored = chains.front().states.front().beta.rows() == static_cast<Eigen::Index>(N);

	std::vector<MwtpRecord> records;
	if (stored) {
		const auto da = coefficient_draws(layout, chains, *slot_a, N);
		const auto dc = coefficient_draws(layout, chains, *slot_c, N);
		for (std::size_t i = 0; i < N; ++i) {
			records.push_back(mwtp_individual(da[i], dc[i], ids[i], a.attribute));
		}
	} else {
		// Posterior means only: one point per individual, ratio SD unknown.
		std::size_t n_states = 0;
		for (const auto &c : chains) {
			n_states += c.states.size();
		}
		const auto mean_of = [&](std::size_t slot, std::size_t i) {
			const auto &s = layout.slots()[slot];
			double total = 0.0;
			for (const auto &c : chains) {
				for (const auto &st : c.states) {
					total += s.kind == CoefficientKind::fixed ? st.fixed[static_cast<Eigen::Index>(s.index)]
					                                          : c.beta_mean(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s.index));
				}
			}
			return total / static_cast<double>(n_states);
		};
		for (std::size_t i = 0; i < N; ++i) {
			const double ba = mean_of(*slot_a, i);
			const double bc = mean_of(*slot_c, i);
			records.push_back(mwtp_individual(std::span<const double>(&ba, 1), std::span<const double>(&bc, 1), ids[i], a.attribute));
			records.back().ratio_sd = std::nan("");
		}
	}

	if (a.out.empty() || a.out == "-") {
		write_mwtp_records(std::cout, records, a.unit_factor);
	} else {
		auto out = open_output(a.out);
		write_mwtp_records(out, records, a.unit_factor);
	}
	write_mwtp_distribution(std::cerr, a.attribute, mwtp_distribution(records, a.unit_factor));

	if (!a.regress.empty()) {
		const auto table = read_csv(a.regress);
		const auto c_id = table.column("individual_id");
		std::vector<std::string> columns = a.columns;
		if (columns.empty()) {
			for (std::size_t c = 0; c < table.header.size(); ++c) {
				if (c != c_id) {
					columns.push_back(table.header[c]);
				}
			}
		}
		std::map<std::string, std::size_t> row_of;
		for (std::size_t r = 0; r < table.rows.size(); ++r) {
			row_of[table.rows[r][c_id]] = r;
		}
		Eigen::MatrixXd q(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(columns.size()));
		for (std::size_t c = 0; c < columns.size(); ++c) {
			const auto col = table.column(columns[c]);
			for (std::size_t i = 0; i < N; ++i) {
				const auto it = row_of.find(ids[i]);
				if (it == row_of.end()) {
					throw DataError(a.regress + ": no row for individual " + ids[i]);
				}
				q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = parse_number(table.rows[it->second][col], table.where(it->second));
			}
		}
		scale_to_unit_variance(q);
		auto scaled = records;
		for (auto &r : scaled) {
			if (r.value) {
				*r.value *= a.unit_factor;
			}
		}
		const auto result = mwtp_regression(scaled, q, columns);
		if (a.regression_out.empty()) {
			write_regression(std::cout, result);
		} else {
			auto out = open_output(a.regression_out);
			write_regression(out, result);
		}
	}
	return 0;
}

int run_diagnose(const std::vector<std::string> &dirs, const std::string &out) {
	std::vector<Eigen::MatrixXd> mats;
	std::vector<std::string> names;
	for (const auto &d : dirs) {
		for (const auto &c : chain_directories(d)) {
			auto [m, n] = read_population_matrix(c);
			if (!names.empty() && n != names) {
				throw DataError(c.string() + ": parameters differ from other chains");
			}
			names = std::move(n);
			mats.push_back(std::move(m));
		}
	}
	const auto diagnostics = convergence_diagnostics(mats, names);
	if (out.empty() || out == "-") {
		write_diagnostics(std::cout, diagnostics);
	} else {
		auto stream = open_output(out);
		write_diagnostics(stream, diagnostics);
	}
	return 0;
}

int run_reliability(const std::string &indicators, const std::string &spec_path) {
	const auto file = load_model_spec(spec_path);
	const auto results = check_reliability(read_csv(indicators), file.model);
	write_csv_row(std::cout, {"latent", "items", "complete_cases", "cronbach_alpha", "pass"});
	for (const auto &r : results) {
		write_csv_row(std::cout, {r.latent, std::to_string(r.n_items), std::to_string(r.n_complete), format_number(r.result.alpha),
		                          r.result.defined ? (r.result.pass ? "1" : "0") : "undefined"});
	}
	return 0;
}

} // namespace

int main(int argc, char **argv) {
	CLI::App app{"Hybrid discrete choice models estimated by hierarchical-Bayes MCMC"};
	app.require_subcommand(1);

	EstimateArgs est;
	auto *estimate = app.add_subcommand("estimate", "Run the MCMC sampler and write posterior draws");
	estimate->add_option("spec", est.spec, "Model spec (JSON)")->required()->check(CLI::ExistingFile);
	estimate->add_option("data", est.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
	estimate->add_option("-o,--out", est.out, "Output directory")->required();
	estimate->add_option("--chains", est.chains, "Number of chains");
	estimate->add_option("--seed", est.seed, "Random seed");
	estimate->add_option("--sweeps", est.sweeps, "Total sweeps per chain");
	estimate->add_option("--burn-in", est.burn_in, "Burn-in sweeps");
	estimate->add_option("--thin", est.thin, "Keep every n-th post-burn-in sweep");
	estimate->add_flag("--store-individual", est.store_individual, "Store per-individual draws");

	std::string sim_spec, sim_truth, sim_out;
	std::size_t sim_n = 0;
	std::uint64_t sim_seed = 1;
	auto *simulate = app.add_subcommand("simulate", "Generate a synthetic dataset from known parameters");
	simulate->add_option("spec", sim_spec, "Model spec (JSON)")->required()->check(CLI::ExistingFile);
	simulate->add_option("truth", sim_truth, "Parameter file (JSON)")->required()->check(CLI::ExistingFile);
	simulate->add_option("-n", sim_n, "Number of individuals")->required()->check(CLI::PositiveNumber);
	simulate->add_option("--seed", sim_seed, "Random seed");
	simulate->add_option("-o,--out", sim_out, "Output directory")->required();

	std::string pr_spec, pr_data, pr_post, pr_scen, pr_out;
	std::uint64_t pr_seed = 1;
	auto *predict = app.add_subcommand("predict", "Predicted market shares and scenario deltas");
	predict->add_option("spec", pr_spec, "Model spec (JSON)")->required()->check(CLI::ExistingFile);
	predict->add_option("data", pr_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
	predict->add_option("posterior", pr_post, "Posterior directory")->required()->check(CLI::ExistingDirectory);
	predict->add_option("--scenarios", pr_scen, "Scenario file (JSON)")->check(CLI::ExistingFile);
	predict->add_option("-o,--out", pr_out, "Share table CSV (default stdout)");
	predict->add_option("--seed", pr_seed, "Seed for simulated individual values");

	MwtpArgs mw;
	auto *mwtp = app.add_subcommand("mwtp", "Individual marginal willingness to pay");
	mwtp->add_option("spec", mw.spec, "Model spec (JSON)")->required()->check(CLI::ExistingFile);
	mwtp->add_option("posterior", mw.posterior, "Posterior directory")->required()->check(CLI::ExistingDirectory);
	mwtp->add_option("--attribute", mw.attribute, "Attribute in the numerator")->required();
	mwtp->add_option("--alternative", mw.alternative, "Alternative whose coefficients are used");
	mwtp->add_option("--regress", mw.regress, "Covariates CSV to regress MWTP on")->check(CLI::ExistingFile);
	mwtp->add_option("--columns", mw.columns, "Regressor columns (default: all)")->delimiter(',');
	mwtp->add_option("--unit-factor", mw.unit_factor, "Multiplier converting MWTP to reporting units");
	mwtp->add_option("-o,--out", mw.out, "Per-individual MWTP CSV (default stdout)");
	mwtp->add_option("--regression-out", mw.regression_out, "Regression table CSV (default stdout)");

	std::vector<std::string> dg_dirs;
	std::string dg_out;
	auto *diagnose = app.add_subcommand("diagnose", "Split R-hat and ESS across chains");
	diagnose->add_option("posteriors", dg_dirs, "Posterior directories")->required()->check(CLI::ExistingDirectory);
	diagnose->add_option("-o,--out", dg_out, "Diagnostics CSV (default stdout)");

	std::string rl_ind, rl_spec;
	auto *reliability = app.add_subcommand("check-reliability", "Cronbach's alpha per latent variable");
	reliability->add_option("indicators", rl_ind, "indicators.csv")->required()->check(CLI::ExistingFile);
	reliability->add_option("spec", rl_spec, "Model spec (JSON)")->required()->check(CLI::ExistingFile);

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError &e) {
		const int rc = app.exit(e);
		return rc == 0 ? 0 : 1;
	}

	try {
		if (*estimate) {
			return run_estimate(est);
		}
		if (*simulate) {
			return run_simulate(sim_spec, sim_truth, sim_n, sim_seed, sim_out);
		}
		if (*predict) {
			return run_predict(pr_spec, pr_data, pr_post, pr_scen, pr_out, pr_seed);
		}
		if (*mwtp) {
			return run_mwtp(mw);
		}
		if (*diagnose) {
			return run_diagnose(dg_dirs, dg_out);
		}
		if (*reliability) {
			return run_reliability(rl_ind, rl_spec);
		}
	} catch (const ValidationError &e) {
		std::cerr << "error: " << e.what() << "\n";
		return 1;
	} catch (const NumericError &e) {
		std::cerr << "numeric error: " << e.what() << "\n";
		return 2;
	} catch (const std::exception &e) {
		std::cerr << "error: " << e.what() << "\n";
		return 1;
	}
	return 0;
}
