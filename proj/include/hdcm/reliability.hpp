#ifndef HDCM_RELIABILITY_HPP
#define HDCM_RELIABILITY_HPP

// Internal-consistency check of each latent variable's indicator group.

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csv.hpp"
#include "error.hpp"
#include "model.hpp"

namespace hdcm {

inline constexpr double kReliabilityThreshold = 0.7;

struct ReliabilityResult {
	double alpha = 0.0;
	bool pass = false;
	/// False when the item sums have zero variance; alpha is NaN then.
	bool defined = true;
};

/// Cronbach's alpha of an individuals x items response matrix.
[[nodiscard]] inline ReliabilityResult cronbach_alpha(const Eigen::MatrixXd &responses) {
	const auto n = responses.rows();
	const auto k = responses.cols();
	if (k < 2) {
		throw DataError("Cronbach's alpha needs at least 2 items");
	}
	if (n < 2) {
		throw DataError("Cronbach's alpha needs at least 2 individuals");
	}
	if (!responses.allFinite()) {
		throw DataError("Cronbach's alpha needs complete responses");
	}
	const auto variance = [n](const Eigen::VectorXd &x) { return (x.array() - x.mean()).square().sum() / static_cast<double>(n - 1); };
	double item_var = 0.0;
	for (Eigen::Index j = 0; j < k; ++j) {
		item_var += variance(responses.col(j));
	}
	const double total_var = variance(responses.rowwise().sum());
	ReliabilityResult r;
	if (!(total_var > 0.0)) {
		r.alpha = std::nan("");
		r.defined = false;
		return r;
	}
	const double kd = static_cast<double>(k);
	r.alpha = kd / (kd - 1.0) * (1.0 - item_var / total_var);
	r.pass = r.alpha > kReliabilityThreshold;
	return r;
}

struct LatentReliability {
	std::string latent;
	std::size_t n_items = 0;
	std::size_t n_complete = 0;
	ReliabilityResult result;
};

/// Alpha per latent variable from a long-format indicators file (raw 1..5
/// responses), over individuals answering every item of that group.
[[nodiscard]] inline std::vector<LatentReliability> check_reliability(const CsvTable &indicators, const ModelSpec &spec) {
	const auto c_id = indicators.column("individual_id");
	const auto c_ind = indicators.column("indicator_id");
	const auto c_resp = indicators.column("response");
	std::map<std::string, std::map<std::string, double>> by_person;
	for (std::size_t r = 0; r < indicators.rows.size(); ++r) {
		const auto &row = indicators.rows[r];
		by_person[row[c_id]][row[c_ind]] = static_cast<double>(parse_integer(row[c_resp], indicators.where(r)));
	}
	std::vector<LatentReliability> out;
	for (const auto &lv : spec.latent_variables) {
		LatentReliability lr;
		lr.latent = lv.name;
		lr.n_items = lv.indicators.size();
		std::vector<std::vector<double>> rows;
		for (const auto &[id, answers] : by_person) {
			std::vector<double> row;
			for (const auto &ind : lv.indicators) {
				const auto it = answers.find(ind.id);
				if (it == answers.end()) {
					break;
				}
				row.push_back(it->second);
			}
			if (row.size() == lv.indicators.size()) {
				rows.push_back(std::move(row));
			}
		}
		lr.n_complete = rows.size();
		if (lr.n_items < 2 || rows.size() < 2) {
			lr.result = {std::nan(""), false, false};
		} else {
			Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(lr.n_items));
			for (std::size_t i = 0; i < rows.size(); ++i) {
				for (std::size_t j = 0; j < lr.n_items; ++j) {
					m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
				}
			}
			lr.result = cronbach_alpha(m);
		}
		out.push_back(std::move(lr));
	}
	return out;
}

} // namespace hdcm

#endif
