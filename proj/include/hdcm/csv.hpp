#ifndef HDCM_CSV_HPP
#define HDCM_CSV_HPP

// Minimal CSV reading/writing: header row, comma separated, "." decimals,
// double quotes for fields containing separators.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <boost/tokenizer.hpp>

#include "error.hpp"

namespace hdcm {

struct CsvTable {
	std::filesystem::path source;
	std::vector<std::string> header;
	std::vector<std::vector<std::string>> rows;
	/// 1-based file line of each row, for error messages.
	std::vector<std::size_t> lines;

	[[nodiscard]] std::optional<std::size_t> find_column(const std::string &name) const {
		for (std::size_t c = 0; c < header.size(); ++c) {
			if (header[c] == name) {
				return c;
			}
		}
		return std::nullopt;
	}

	[[nodiscard]] std::size_t column(const std::string &name) const {
		if (const auto c = find_column(name)) {
			return *c;
		}
		throw DataError(source.string() + ": missing column '" + name + "'");
	}

	[[nodiscard]] std::string where(std::size_t row) const { return source.string() + ":" + std::to_string(lines.at(row)); }
};

[[nodiscard]] inline std::vector<std::string> split_csv_line(const std::string &line) {
	using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
	const boost::escaped_list_separator<char> sep('\\', ',', '"');
	bool quoted = false;
	for (std::size_t k = 0; k < line.size(); ++k) {
		if (line[k] == '\\') {
			++k;
		} else if (line[k] == '"') {
			quoted = !quoted;
		}
	}
	if (quoted) {
		throw DataError("malformed CSV field: unterminated quote");
	}
	std::vector<std::string> out;
	try {
		const Tokenizer tok(line, sep);
		for (const auto &field : tok) {
			out.push_back(field);
		}
	} catch (const boost::escaped_list_error &e) {
		throw DataError(std::string("malformed CSV field: ") + e.what());
	}
	return out;
}

[[nodiscard]] inline CsvTable parse_csv(std::istream &in, const std::filesystem::path &source = "<memory>") {
	CsvTable table;
	table.source = source;
	std::string line;
	std::size_t line_no = 0;
	bool have_header = false;
	while (std::getline(in, line)) {
		++line_no;
		if (!line.empty() && line.back() == '\r') {
			line.pop_back();
		}
		if (line.empty()) {
			continue;
		}
		std::vector<std::string> fields;
		try {
			fields = split_csv_line(line);
		} catch (const DataError &e) {
			throw DataError(source.string() + ":" + std::to_string(line_no) + ": " + e.what());
		}
		if (!have_header) {
			if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) {
				fields.front().erase(0, 3);
			}
			table.header = std::move(fields);
			have_header = true;
			continue;
		}
		if (fields.size() != table.header.size()) {
			throw DataError(source.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
			                " fields, found " + std::to_string(fields.size()));
		}
		table.rows.push_back(std::move(fields));
		table.lines.push_back(line_no);
	}
	if (!have_header) {
		throw DataError(source.string() + ": empty CSV file");
	}
	return table;
}

[[nodiscard]] inline CsvTable read_csv(const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw DataError("cannot open " + path.string());
	}
	return parse_csv(in, path);
}

/// Shortest decimal text that round-trips to the same double.
[[nodiscard]] inline std::string format_number(double value) {
	if (std::isnan(value)) {
		return "NaN";
	}
	if (std::isinf(value)) {
		return value > 0 ? "Inf" : "-Inf";
	}
	char buf[64];
	const auto res = std::to_chars(buf, buf + sizeof buf, value);
	return std::string(buf, res.ptr);
}

[[nodiscard]] inline double parse_number(const std::string &text, const std::string &context) {
	if (text == "NaN") {
		return std::nan("");
	}
	if (text == "Inf" || text == "-Inf") {
		return text[0] == '-' ? -HUGE_VAL : HUGE_VAL;
	}
	double value = 0.0;
	const char *begin = text.data();
	const char *end = text.data() + text.size();
	if (begin != end && *begin == '+') {
		++begin;
	}
	const auto res = std::from_chars(begin, end, value);
	if (text.empty() || res.ec != std::errc() || res.ptr != end) {
		throw DataError(context + ": '" + text + "' is not a number");
	}
	return value;
}

[[nodiscard]] inline long parse_integer(const std::string &text, const std::string &context) {
	long value = 0;
	const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
	if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
		throw DataError(context + ": '" + text + "' is not an integer");
	}
	return value;
}

[[nodiscard]] inline std::string quote_field(const std::string &field) {
	if (field.find_first_of(",\"\n") == std::string::npos) {
		return field;
	}
	std::string out = "\"";
	for (const char c : field) {
		if (c == '"' || c == '\\') {
			out += '\\';
		}
		out += c;
	}
	return out + "\"";
}

inline void write_csv_row(std::ostream &out, const std::vector<std::string> &fields) {
	for (std::size_t k = 0; k < fields.size(); ++k) {
		if (k > 0) {
			out << ',';
		}
		out << quote_field(fields[k]);
	}
	out << '\n';
}

inline void write_csv(const std::filesystem::path &path, const std::vector<std::string> &header, const std::vector<std::vector<std::string>> &rows) {
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out) {
		throw Error("cannot write " + path.string());
	}
	write_csv_row(out, header);
	for (const auto &row : rows) {
		write_csv_row(out, row);
	}
	if (!out) {
		throw Error("write failed for " + path.string());
	}
}

} // namespace hdcm

#endif
