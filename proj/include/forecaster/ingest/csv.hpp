#pragma once

#include "forecaster/common/error.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace forecaster::ingest {

// Parsed CSV: a header row plus data rows of identical width.
struct CsvTable {
	std::vector<std::string> header;
	std::vector<std::vector<std::string>> rows;

	std::size_t column_index(std::string_view name) const {
		for (std::size_t i = 0; i < header.size(); ++i) {
			if (header[i] == name) {
				return i;
			}
		}
		throw Error(ErrorCode::UnknownColumn, "no column named '" + std::string(name) + "'", std::string(name));
	}

	bool has_column(std::string_view name) const {
		for (const auto &h : header) {
			if (h == name) {
				return true;
			}
		}
		return false;
	}
};

// RFC-4180 reader: comma delimiter, double-quote quoting with "" escapes, CRLF
// or LF line endings. A trailing newline does not produce an empty record.
inline std::vector<std::vector<std::string>> parse_csv_records(std::string_view text) {
	std::vector<std::vector<std::string>> records;
	std::vector<std::string> record;
	std::string field;
	bool in_quotes = false;
	bool field_started = false;
	std::size_t i = 0;

	// Strip a UTF-8 byte order mark.
	if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
	    static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
		i = 3;
	}

	auto end_record = [&] {
		record.push_back(std::move(field));
		field.clear();
		records.push_back(std::move(record));
		record.clear();
		field_started = false;
	};

	for (; i < text.size(); ++i) {
		const char c = text[i];
		if (in_quotes) {
			if (c == '"') {
				if (i + 1 < text.size() && text[i + 1] == '"') {
					field.push_back('"');
					++i;
				} else {
					in_quotes = false;
				}
			} else {
				field.push_back(c);
			}
			continue;
		}
		switch (c) {
		case '"':
			if (!field.empty()) {
				throw Error(ErrorCode::Unparseable, "quote inside unquoted field on record " +
				                                        std::to_string(records.size() + 1));
			}
			in_quotes = true;
			field_started = true;
			break;
		case ',':
			record.push_back(std::move(field));
			field.clear();
			field_started = true;
			break;
		case '\r':
			if (i + 1 < text.size() && text[i + 1] == '\n') {
				++i;
			}
			end_record();
			break;
		case '\n':
			end_record();
			break;
		default:
			field.push_back(c);
			field_started = true;
		}
	}
	if (in_quotes) {
		throw Error(ErrorCode::Unparseable, "unterminated quoted field");
	}
	if (field_started || !field.empty() || !record.empty()) {
		end_record();
	}
	return records;
}

// Header + rectangular body. Blank lines are skipped; anything else that is not
// exactly header-width is a ragged row.
inline CsvTable parse_csv(std::string_view text) {
	auto records = parse_csv_records(text);
	CsvTable table;
	std::size_t r = 0;
	while (r < records.size() && records[r].size() == 1 && records[r][0].empty()) {
		++r;
	}
	if (r == records.size()) {
		throw Error(ErrorCode::Unparseable, "missing header row");
	}
	table.header = std::move(records[r++]);
	for (auto &h : table.header) {
		if (h.empty()) {
			throw Error(ErrorCode::Unparseable, "empty column name in header");
		}
	}
	for (; r < records.size(); ++r) {
		auto &rec = records[r];
		if (rec.size() == 1 && rec[0].empty() && table.header.size() != 1) {
			continue;
		}
		if (rec.size() != table.header.size()) {
			throw Error(ErrorCode::Unparseable, "ragged row " + std::to_string(r + 1) + ": expected " +
			                                        std::to_string(table.header.size()) + " fields, got " +
			                                        std::to_string(rec.size()));
		}
		table.rows.push_back(std::move(rec));
	}
	if (table.rows.empty()) {
		throw Error(ErrorCode::Unparseable, "no data rows");
	}
	return table;
}

inline std::string csv_escape(std::string_view field) {
	if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
		return std::string(field);
	}
	std::string out = "\"";
	for (char c : field) {
		if (c == '"') {
			out += "\"\"";
		} else {
			out.push_back(c);
		}
	}
	out.push_back('"');
	return out;
}

inline std::string write_csv(const CsvTable &table) {
	std::string out;
	auto write_row = [&](const std::vector<std::string> &row) {
		for (std::size_t i = 0; i < row.size(); ++i) {
			if (i) {
				out.push_back(',');
			}
			out += csv_escape(row[i]);
		}
		out.push_back('\n');
	};
	write_row(table.header);
	for (const auto &row : table.rows) {
		write_row(row);
	}
	return out;
}

} // namespace forecaster::ingest
