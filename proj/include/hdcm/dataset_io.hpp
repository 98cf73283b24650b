#ifndef HDCM_DATASET_IO_HPP
#define HDCM_DATASET_IO_HPP

// Loading and writing choice datasets.
//
//   choices.csv     individual_id, alternative_id, available, chosen, <attribute>...
//   covariates.csv  individual_id, <covariate>...
//   indicators.csv  individual_id, indicator_id, response
//
// Likert responses are stored 1-based as surveyed (1..5). When an indicator's
// responses exceed its declared category count, the observed levels are
// collapsed onto 1..n in rank order.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "model.hpp"

namespace hdcm {

inline constexpr int kLikertLevels = 5;

struct DatasetPaths {
	std::filesystem::path choices;
	std::filesystem::path covariates;
	std::filesystem::path indicators;

	[[nodiscard]] static DatasetPaths in_directory(const std::filesystem::path &dir) {
		return {dir / "choices.csv", dir / "covariates.csv", dir / "indicators.csv"};
	}
};

namespace detail {

inline int parse_flag(const CsvTable &t, std::size_t row, std::size_t col) {
	const auto &text = t.rows[row][col];
	if (text == "0") {
		return 0;
	}
	if (text == "1") {
		return 1;
	}
	throw DataError(t.where(row) + ": column '" + t.header[col] + "' must be 0 or 1, found '" + text + "'");
}

/// Which attributes each alternative's utility reads.
inline std::map<std::string, std::set<std::string>> required_attributes(const ModelSpec &spec) {
	std::map<std::string, std::set<std::string>> out;
	for (const auto &term : spec.utility_terms) {
		if (spec.latent_index(term.attribute_or_lv)) {
			continue;
		}
		for (const auto &alt : term.applies_to) {
			out[alt].insert(term.attribute_or_lv);
		}
	}
	return out;
}

} // namespace detail

/// Maps raw Likert responses of each indicator onto contiguous categories.
/// Modifies responses in place; returns per-indicator level maps (raw -> collapsed).
inline std::map<std::string, std::map<int, int>> collapse_categories(const ModelSpec &spec, std::vector<Individual> &people) {
	std::map<std::string, std::map<int, int>> maps;
	for (const auto &ind : spec.indicators()) {
		std::set<int> levels;
		for (const auto &p : people) {
			if (const auto it = p.indicator_responses.find(ind.id); it != p.indicator_responses.end()) {
				levels.insert(it->second);
			}
		}
		std::map<int, int> mapping;
		if (levels.empty() || *levels.rbegin() <= ind.n_categories) {
			for (const int l : levels) {
				mapping[l] = l;
			}
		} else {
			if (static_cast<int>(levels.size()) > ind.n_categories) {
				throw DataError("indicator '" + ind.id + "' declares " + std::to_string(ind.n_categories) + " categories but responses use " +
				                std::to_string(levels.size()) + " distinct levels");
			}
			int next = 1;
			for (const int l : levels) {
				mapping[l] = next++;
			}
		}
		for (auto &p : people) {
			if (auto it = p.indicator_responses.find(ind.id); it != p.indicator_responses.end()) {
				it->second = mapping.at(it->second);
			}
		}
		maps[ind.id] = std::move(mapping);
	}
	return maps;
}

/// Reads, cross-validates and orders (by individual id) a dataset for `spec`.
[[nodiscard]] inline ChoiceDataset load_and_validate(const DatasetPaths &paths, const ModelSpec &spec) {
	spec.validate();
	const auto choices = read_csv(paths.choices);
	const auto c_id = choices.column("individual_id");
	const auto c_alt = choices.column("alternative_id");
	const auto c_avail = choices.column("available");
	const auto c_chosen = choices.column("chosen");

	ChoiceDataset data;
	std::set<std::string> fixed_columns{"individual_id", "alternative_id", "available", "chosen"};
	std::vector<std::size_t> attr_cols;
	for (std::size_t c = 0; c < choices.header.size(); ++c) {
		if (fixed_columns.count(choices.header[c]) == 0) {
			if (std::find(data.attribute_names.begin(), data.attribute_names.end(), choices.header[c]) != data.attribute_names.end()) {
				throw DataError(paths.choices.string() + ": duplicate column '" + choices.header[c] + "'");
			}
			data.attribute_names.push_back(choices.header[c]);
			attr_cols.push_back(c);
		}
	}
	for (const auto &attr : spec.referenced_attributes()) {
		if (std::find(data.attribute_names.begin(), data.attribute_names.end(), attr) == data.attribute_names.end()) {
			throw DataError(paths.choices.string() + ": missing attribute column '" + attr + "'");
		}
	}
	const auto required = detail::required_attributes(spec);

	std::map<std::string, Individual> people;
	std::set<std::pair<std::string, std::string>> seen;
	for (std::size_t r = 0; r < choices.rows.size(); ++r) {
		const auto &row = choices.rows[r];
		const auto &id = row[c_id];
		const auto &alt = row[c_alt];
		if (id.empty()) {
			throw DataError(choices.where(r) + ": empty individual_id");
		}
		if (!spec.alternative_index(alt)) {
			throw DataError(choices.where(r) + ": unknown alternative '" + alt + "'");
		}
		if (!seen.emplace(id, alt).second) {
			throw DataError(choices.where(r) + ": duplicate row for individual " + id + " and alternative " + alt);
		}
		const int available = detail::parse_flag(choices, r, c_avail);
		const int chosen = detail::parse_flag(choices, r, c_chosen);
		auto &person = people[id];
		person.id = id;
		if (chosen == 1 && available == 0) {
			throw DataError("chosen alternative unavailable for individual " + id + " (" + choices.where(r) + ")");
		}
		if (chosen == 1) {
			if (!person.chosen.empty()) {
				throw DataError("more than one chosen alternative for individual " + id + " (" + choices.where(r) + ")");
			}
			person.chosen = alt;
		}
		if (available == 1) {
			person.availability.push_back(alt);
		}
		for (std::size_t k = 0; k < attr_cols.size(); ++k) {
			const auto &text = row[attr_cols[k]];
			const auto &name = data.attribute_names[k];
			if (text.empty()) {
				const auto req = required.find(alt);
				if (available == 1 && req != required.end() && req->second.count(name) > 0) {
					throw DataError(choices.where(r) + ": missing attribute '" + name + "' for available alternative " + alt);
				}
				continue;
			}
			const double v = parse_number(text, choices.where(r) + " column '" + name + "'");
			if (!std::isfinite(v)) {
				throw DataError(choices.where(r) + ": attribute '" + name + "' is not finite");
			}
			person.attributes[alt][name] = v;
		}
	}
	if (people.empty()) {
		throw DataError(paths.choices.string() + ": no individuals");
	}
	for (auto &[id, person] : people) {
		if (person.availability.empty()) {
			throw DataError("individual " + id + " has no available alternative");
		}
		if (person.chosen.empty()) {
			throw DataError("no chosen alternative for individual " + id);
		}
		// availability in spec order
		std::vector<std::string> ordered;
		for (const auto &a : spec.alternatives) {
			if (person.is_available(a.id)) {
				ordered.push_back(a.id);
			}
		}
		person.availability = std::move(ordered);
	}

	data.covariate_names = spec.covariates;
	if (!spec.covariates.empty()) {
		const auto cov = read_csv(paths.covariates);
		const auto cid = cov.column("individual_id");
		std::vector<std::size_t> cols;
		for (const auto &name : spec.covariates) {
			cols.push_back(cov.column(name));
		}
		std::set<std::string> done;
		for (std::size_t r = 0; r < cov.rows.size(); ++r) {
			const auto &id = cov.rows[r][cid];
			const auto it = people.find(id);
			if (it == people.end()) {
				throw DataError(cov.where(r) + ": individual " + id + " has no choice rows");
			}
			if (!done.insert(id).second) {
				throw DataError(cov.where(r) + ": duplicate covariate row for individual " + id);
			}
			for (std::size_t k = 0; k < cols.size(); ++k) {
				const double v = parse_number(cov.rows[r][cols[k]], cov.where(r) + " column '" + spec.covariates[k] + "'");
				if (!std::isfinite(v)) {
					throw DataError(cov.where(r) + ": covariate '" + spec.covariates[k] + "' is not finite");
				}
				it->second.z.push_back(v);
			}
		}
		for (const auto &[id, person] : people) {
			if (done.count(id) == 0) {
				throw DataError("individual " + id + " has no covariate row");
			}
		}
	}

	const auto indicators = spec.indicators();
	for (const auto &ind : indicators) {
		data.indicator_ids.push_back(ind.id);
	}
	if (!indicators.empty()) {
		const auto ind = read_csv(paths.indicators);
		const auto iid = ind.column("individual_id");
		const auto iind = ind.column("indicator_id");
		const auto iresp = ind.column("response");
		std::set<std::string> known(data.indicator_ids.begin(), data.indicator_ids.end());
		for (std::size_t r = 0; r < ind.rows.size(); ++r) {
			const auto &row = ind.rows[r];
			const auto it = people.find(row[iid]);
			if (it == people.end()) {
				throw DataError(ind.where(r) + ": individual " + row[iid] + " has no choice rows");
			}
			if (known.count(row[iind]) == 0) {
				throw DataError(ind.where(r) + ": unknown indicator '" + row[iind] + "'");
			}
			const long response = parse_integer(row[iresp], ind.where(r) + " column 'response'");
			if (response < 1 || response > kLikertLevels) {
				throw DataError(ind.where(r) + ": response " + std::to_string(response) + " to indicator '" + row[iind] + "' outside 1.." +
				                std::to_string(kLikertLevels));
			}
			if (!it->second.indicator_responses.emplace(row[iind], static_cast<int>(response)).second) {
				throw DataError(ind.where(r) + ": duplicate response of individual " + row[iid] + " to indicator '" + row[iind] + "'");
			}
		}
	}

	for (auto &[id, person] : people) {
		data.individuals.push_back(std::move(person));
	}
	collapse_categories(spec, data.individuals);
	for (const auto &person : data.individuals) {
		for (const auto &ind : indicators) {
			const auto it = person.indicator_responses.find(ind.id);
			if (it != person.indicator_responses.end() && (it->second < 1 || it->second > ind.n_categories)) {
				throw DataError("response of individual " + person.id + " to indicator '" + ind.id + "' outside 1.." +
				                std::to_string(ind.n_categories));
			}
		}
	}
	return data;
}

[[nodiscard]] inline ChoiceDataset load_and_validate(const std::filesystem::path &dir, const ModelSpec &spec) {
	return load_and_validate(DatasetPaths::in_directory(dir), spec);
}

/// Canonical CSV form: individuals in stored order, one choice row per spec
/// alternative, attribute columns in dataset order, shortest round-trip numbers.
inline void write_dataset(const std::filesystem::path &dir, const ModelSpec &spec, const ChoiceDataset &data) {
	std::filesystem::create_directories(dir);
	std::vector<std::string> header{"individual_id", "alternative_id", "available", "chosen"};
	header.insert(header.end(), data.attribute_names.begin(), data.attribute_names.end());
	std::vector<std::vector<std::string>> rows;
	for (const auto &person : data.individuals) {
		for (const auto &alt : spec.alternatives) {
			const bool available = person.is_available(alt.id);
			const auto attrs = person.attributes.find(alt.id);
			if (!available && attrs == person.attributes.end()) {
				continue;
			}
			std::vector<std::string> row{person.id, alt.id, available ? "1" : "0", person.chosen == alt.id ? "1" : "0"};
			for (const auto &name : data.attribute_names) {
				std::string cell;
				if (attrs != person.attributes.end()) {
					if (const auto v = attrs->second.find(name); v != attrs->second.end()) {
						cell = format_number(v->second);
					}
				}
				row.push_back(std::move(cell));
			}
			rows.push_back(std::move(row));
		}
	}
	write_csv(dir / "choices.csv", header, rows);

	std::vector<std::string> cov_header{"individual_id"};
	cov_header.insert(cov_header.end(), spec.covariates.begin(), spec.covariates.end());
	rows.clear();
	for (const auto &person : data.individuals) {
		std::vector<std::string> row{person.id};
		for (const double v : person.z) {
			row.push_back(format_number(v));
		}
		rows.push_back(std::move(row));
	}
	write_csv(dir / "covariates.csv", cov_header, rows);

	rows.clear();
	const auto indicators = spec.indicators();
	for (const auto &person : data.individuals) {
		for (const auto &ind : indicators) {
			if (const auto it = person.indicator_responses.find(ind.id); it != person.indicator_responses.end()) {
				rows.push_back({person.id, ind.id, std::to_string(it->second)});
			}
		}
	}
	write_csv(dir / "indicators.csv", {"individual_id", "indicator_id", "response"}, rows);
}

} // namespace hdcm

#endif
