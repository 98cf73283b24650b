#ifndef HDCM_POSTERIOR_IO_HPP
#define HDCM_POSTERIOR_IO_HPP

// On-disk posterior layout (one directory per chain):
//
//   manifest.json          format tag, chain, seed, sampler config, counts, build id
//   gamma.csv              draw, gamma:LV~cov ...
//   measurement.csv        draw, zeta:ind ..., tau:ind~k ...
//   fixed.csv              draw, fixed:<slot> ...
//   mu.csv, omega.csv      draw, mu:<slot> ... / omega:<slot> or omega:a~b ...
//   acceptance.csv         block, rate
//   individual_means.csv   individual_id, beta:<slot> ..., alpha:<lv> ...
//   individual_draws.csv   draw, individual_id, beta:<slot> ..., alpha:<lv> ... (optional)
//
// A multi-chain run holds chain_1, chain_2, ... subdirectories.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csv.hpp"
#include "error.hpp"
#include "model.hpp"
#include "sampler.hpp"
#include "spec_file.hpp"

#ifndef HDCM_GIT_DESCRIBE
#define HDCM_GIT_DESCRIBE "unknown"
#endif

namespace hdcm {

inline constexpr const char *kPosteriorFormat = "hdcm-posterior-1";

namespace detail {

struct BlockFile {
	const char *file;
	std::vector<const char *> prefixes;
};

inline const std::vector<BlockFile> &block_files() {
	static const std::vector<BlockFile> files{
	    {"gamma.csv", {"gamma"}}, {"measurement.csv", {"zeta", "tau"}}, {"fixed.csv", {"fixed"}}, {"mu.csv", {"mu"}}, {"omega.csv", {"omega"}}};
	return files;
}

inline std::vector<std::string> individual_columns(const ModelSpec &spec, const CoefficientLayout &layout) {
	std::vector<std::string> cols;
	for (const auto s : layout.random_slots()) {
		cols.push_back("beta:" + layout.slots()[s].name);
	}
	for (const auto &lv : spec.latent_variables) {
		cols.push_back("alpha:" + lv.name);
	}
	return cols;
}

inline void append_individual(std::vector<std::string> &row, const RowMatrix &beta, const RowMatrix &alpha, Eigen::Index i) {
	for (Eigen::Index k = 0; k < beta.cols(); ++k) {
		row.push_back(format_number(beta(i, k)));
	}
	for (Eigen::Index k = 0; k < alpha.cols(); ++k) {
		row.push_back(format_number(alpha(i, k)));
	}
}

inline json read_json_file(const std::filesystem::path &path) {
	std::ifstream in(path);
	if (!in) {
		throw DataError("cannot open " + path.string());
	}
	try {
		return json::parse(in);
	} catch (const json::exception &e) {
		throw DataError(path.string() + ": " + e.what());
	}
}

} // namespace detail

inline void write_posterior(const std::filesystem::path &dir, const ModelSpec &spec, const PosteriorDraws &draws) {
	std::filesystem::create_directories(dir);
	const CoefficientLayout layout(spec);
	const auto names = population_names(spec, layout);
	std::vector<Eigen::VectorXd> flat;
	flat.reserve(draws.states.size());
	for (const auto &s : draws.states) {
		flat.push_back(flatten_population(spec, layout, s));
	}
	for (const auto &block : detail::block_files()) {
		std::vector<std::size_t> cols;
		for (const char *prefix : block.prefixes) {
			for (std::size_t k = 0; k < names.size(); ++k) {
				if (parameter_block(names[k]) == prefix) {
					cols.push_back(k);
				}
			}
		}
		std::vector<std::string> header{"draw"};
		for (const auto k : cols) {
			header.push_back(names[k]);
		}
		std::vector<std::vector<std::string>> rows;
		for (std::size_t d = 0; d < flat.size(); ++d) {
			std::vector<std::string> row{std::to_string(d + 1)};
			for (const auto k : cols) {
				row.push_back(format_number(flat[d][static_cast<Eigen::Index>(k)]));
			}
			rows.push_back(std::move(row));
		}
		write_csv(dir / block.file, header, rows);
	}

	std::vector<std::vector<std::string>> acc;
	for (const auto &[block, rate] : draws.acceptance) {
		acc.push_back({block, format_number(rate)});
	}
	write_csv(dir / "acceptance.csv", {"block", "rate"}, acc);

	const auto ind_cols = detail::individual_columns(spec, layout);
	{
		std::vector<std::string> header{"individual_id"};
		header.insert(header.end(), ind_cols.begin(), ind_cols.end());
		std::vector<std::vector<std::string>> rows;
		for (std::size_t i = 0; i < draws.individual_ids.size(); ++i) {
			std::vector<std::string> row{draws.individual_ids[i]};
			detail::append_individual(row, draws.beta_mean, draws.alpha_mean, static_cast<Eigen::Index>(i));
			rows.push_back(std::move(row));
		}
		write_csv(dir / "individual_means.csv", header, rows);
	}
	const bool stored = !draws.states.empty() && static_cast<std::size_t>(draws.states.front().alpha.rows()) == draws.individual_ids.size() &&
	                    static_cast<std::size_t>(draws.states.front().beta.rows()) == draws.individual_ids.size() && !draws.individual_ids.empty();
	std::filesystem::remove(dir / "individual_draws.csv");
	if (stored) {
		std::ofstream out(dir / "individual_draws.csv", std::ios::binary | std::ios::trunc);
		std::vector<std::string> header{"draw", "individual_id"};
		header.insert(header.end(), ind_cols.begin(), ind_cols.end());
		write_csv_row(out, header);
		std::vector<std::string> row;
		for (std::size_t d = 0; d < draws.states.size(); ++d) {
			const auto &s = draws.states[d];
			for (std::size_t i = 0; i < draws.individual_ids.size(); ++i) {
				row.assign({std::to_string(d + 1), draws.individual_ids[i]});
				detail::append_individual(row, s.beta, s.alpha, static_cast<Eigen::Index>(i));
				write_csv_row(out, row);
			}
		}
		if (!out) {
			throw Error("write failed for " + (dir / "individual_draws.csv").string());
		}
	}

	const json manifest{{"format", kPosteriorFormat},
	                    {"chain", draws.chain},
	                    {"seed", draws.config.seed},
	                    {"config", sampler_to_json(draws.config)},
	                    {"n_stored", draws.states.size()},
	                    {"n_individuals", draws.individual_ids.size()},
	                    {"individual_draws", stored},
	                    {"omega_jitter_retries", draws.omega_jitter_retries},
	                    {"git_describe", HDCM_GIT_DESCRIBE}};
	std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
	out << manifest.dump(2) << '\n';
}

[[nodiscard]] inline SamplerConfig sampler_from_manifest(const json &config) {
	json root;
	json sampler = config;
	sampler.erase("priors");
	sampler.erase("likelihood_enabled");
	root["sampler"] = sampler;
	if (config.contains("priors")) {
		root["priors"] = config.at("priors");
	}
	auto c = parse_sampler(root);
	c.likelihood_enabled = config.value("likelihood_enabled", true);
	return c;
}

/// Chain directories under a posterior path: chain_* subdirectories in
/// numeric order, or the path itself when it holds a manifest.
[[nodiscard]] inline std::vector<std::filesystem::path> chain_directories(const std::filesystem::path &dir) {
	if (std::filesystem::exists(dir / "manifest.json")) {
		return {dir};
	}
	std::vector<std::pair<long, std::filesystem::path>> found;
	if (std::filesystem::is_directory(dir)) {
		for (const auto &entry : std::filesystem::directory_iterator(dir)) {
			const auto name = entry.path().filename().string();
			if (entry.is_directory() && name.rfind("chain_", 0) == 0 && std::filesystem::exists(entry.path() / "manifest.json")) {
				found.emplace_back(parse_integer(name.substr(6), entry.path().string()), entry.path());
			}
		}
	}
	if (found.empty()) {
		throw DataError("no posterior found in " + dir.string());
	}
	std::sort(found.begin(), found.end());
	std::vector<std::filesystem::path> out;
	for (auto &f : found) {
		out.push_back(std::move(f.second));
	}
	return out;
}

/// Population draws of one chain directory as a draws x parameters matrix,
/// without needing the model spec.
[[nodiscard]] inline std::pair<Eigen::MatrixXd, std::vector<std::string>> read_population_matrix(const std::filesystem::path &dir) {
	std::vector<std::string> names;
	std::vector<CsvTable> tables;
	std::size_t n = 0;
	for (const auto &block : detail::block_files()) {
		auto t = read_csv(dir / block.file);
		if (t.header.empty() || t.header.front() != "draw") {
			throw DataError((dir / block.file).string() + ": first column must be 'draw'");
		}
		if (!tables.empty() && t.rows.size() != n) {
			throw DataError((dir / block.file).string() + ": draw count differs from other blocks");
		}
		n = t.rows.size();
		names.insert(names.end(), t.header.begin() + 1, t.header.end());
		tables.push_back(std::move(t));
	}
	Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(names.size()));
	Eigen::Index col = 0;
	for (const auto &t : tables) {
		for (std::size_t c = 1; c < t.header.size(); ++c, ++col) {
			for (std::size_t r = 0; r < n; ++r) {
				m(static_cast<Eigen::Index>(r), col) = parse_number(t.rows[r][c], t.where(r));
			}
		}
	}
	return {m, names};
}

[[nodiscard]] inline PosteriorDraws read_posterior(const std::filesystem::path &dir, const ModelSpec &spec) {
	const auto manifest = detail::read_json_file(dir / "manifest.json");
	if (manifest.value("format", std::string()) != kPosteriorFormat) {
		throw DataError((dir / "manifest.json").string() + ": unrecognized posterior format");
	}
	const CoefficientLayout layout(spec);
	PosteriorDraws draws;
	try {
		draws.chain = manifest.at("chain").get<std::size_t>();
		draws.config = sampler_from_manifest(manifest.at("config"));
		draws.omega_jitter_retries = manifest.value("omega_jitter_retries", std::size_t{0});
	} catch (const json::exception &e) {
		throw DataError((dir / "manifest.json").string() + ": " + e.what());
	}

	const auto [matrix, names] = read_population_matrix(dir);
	const auto expected = population_names(spec, layout);
	std::map<std::string, Eigen::Index> column;
	for (std::size_t k = 0; k < names.size(); ++k) {
		column[names[k]] = static_cast<Eigen::Index>(k);
	}
	if (column.size() != expected.size()) {
		throw DataError(dir.string() + ": posterior parameters do not match the model spec");
	}
	Eigen::VectorXd values(static_cast<Eigen::Index>(expected.size()));
	for (Eigen::Index d = 0; d < matrix.rows(); ++d) {
		for (std::size_t k = 0; k < expected.size(); ++k) {
			const auto it = column.find(expected[k]);
			if (it == column.end()) {
				throw DataError(dir.string() + ": posterior lacks parameter '" + expected[k] + "'");
			}
			values[static_cast<Eigen::Index>(k)] = matrix(d, it->second);
		}
		draws.states.push_back(unflatten_population(spec, layout, values));
	}

	for (const auto &row : read_csv(dir / "acceptance.csv").rows) {
		draws.acceptance[row.at(0)] = parse_number(row.at(1), (dir / "acceptance.csv").string());
	}

	const auto cols = detail::individual_columns(spec, layout);
	const auto R = static_cast<Eigen::Index>(layout.n_random());
	const auto L = static_cast<Eigen::Index>(spec.n_latent());
	const auto parse_block = [&](const CsvTable &t, std::size_t r, std::size_t first, RowMatrix &beta, RowMatrix &alpha, Eigen::Index i) {
		for (Eigen::Index k = 0; k < R; ++k) {
			beta(i, k) = parse_number(t.rows[r][first + static_cast<std::size_t>(k)], t.where(r));
		}
		for (Eigen::Index k = 0; k < L; ++k) {
			alpha(i, k) = parse_number(t.rows[r][first + static_cast<std::size_t>(R + k)], t.where(r));
		}
	};
	{
		const auto t = read_csv(dir / "individual_means.csv");
		std::vector<std::string> header{"individual_id"};
		header.insert(header.end(), cols.begin(), cols.end());
		if (t.header != header) {
			throw DataError(t.source.string() + ": columns do not match the model spec");
		}
		const auto N = static_cast<Eigen::Index>(t.rows.size());
		draws.beta_mean = RowMatrix::Zero(N, R);
		draws.alpha_mean = RowMatrix::Zero(N, L);
		for (std::size_t r = 0; r < t.rows.size(); ++r) {
			draws.individual_ids.push_back(t.rows[r][0]);
			parse_block(t, r, 1, draws.beta_mean, draws.alpha_mean, static_cast<Eigen::Index>(r));
		}
	}
	if (std::filesystem::exists(dir / "individual_draws.csv")) {
		const auto t = read_csv(dir / "individual_draws.csv");
		const std::size_t N = draws.individual_ids.size();
		if (t.rows.size() != N * draws.states.size()) {
			throw DataError(t.source.string() + ": expected one row per (draw, individual)");
		}
		for (auto &s : draws.states) {
			s.beta = RowMatrix::Zero(static_cast<Eigen::Index>(N), R);
			s.alpha = RowMatrix::Zero(static_cast<Eigen::Index>(N), L);
		}
		for (std::size_t r = 0; r < t.rows.size(); ++r) {
			const std::size_t d = r / N;
			const std::size_t i = r % N;
			if (t.rows[r][1] != draws.individual_ids[i]) {
				throw DataError(t.where(r) + ": individual order differs from individual_means.csv");
			}
			parse_block(t, r, 2, draws.states[d].beta, draws.states[d].alpha, static_cast<Eigen::Index>(i));
		}
	}
	return draws;
}

/// Every chain found under the given directories, in argument then chain order.
[[nodiscard]] inline std::vector<PosteriorDraws> read_posteriors(const std::vector<std::filesystem::path> &dirs, const ModelSpec &spec) {
	std::vector<PosteriorDraws> out;
	for (const auto &d : dirs) {
		for (const auto &c : chain_directories(d)) {
			out.push_back(read_posterior(c, spec));
		}
	}
	return out;
}

} // namespace hdcm

#endif
