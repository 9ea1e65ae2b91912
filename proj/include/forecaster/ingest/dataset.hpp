#pragma once

#include "forecaster/common/error.hpp"
#include "forecaster/ingest/cells.hpp"
#include "forecaster/ingest/csv.hpp"
#include "forecaster/ingest/frequency.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace forecaster::ingest {

using nlohmann::json;

constexpr std::size_t kDefaultMaxUploadBytes = 100ull * 1024 * 1024;
constexpr std::size_t kMaxFilenameLength = 128;
constexpr double kKindThreshold = 0.95;

enum class ColumnKind { Numeric, Categorical, Datetime };

inline std::string_view to_string(ColumnKind kind) {
	switch (kind) {
	case ColumnKind::Numeric: return "numeric";
	case ColumnKind::Categorical: return "categorical";
	case ColumnKind::Datetime: return "datetime";
	}
	return "categorical";
}

inline ColumnKind column_kind_from_string(std::string_view s) {
	if (s == "numeric") {
		return ColumnKind::Numeric;
	}
	if (s == "datetime") {
		return ColumnKind::Datetime;
	}
	if (s == "categorical") {
		return ColumnKind::Categorical;
	}
	throw Error(ErrorCode::Unparseable, "unknown column kind '" + std::string(s) + "'");
}

struct ColumnInfo {
	std::string name;
	ColumnKind inferred_kind = ColumnKind::Categorical;

	bool operator==(const ColumnInfo &) const = default;
};

enum class Role { NotIncluded, TimeComponent, Grouping, Target, PastCovariate, FutureCovariate, StaticCovariate };

inline std::string_view to_string(Role role) {
	switch (role) {
	case Role::NotIncluded: return "not_included";
	case Role::TimeComponent: return "time";
	case Role::Grouping: return "grouping";
	case Role::Target: return "target";
	case Role::PastCovariate: return "past_covariate";
	case Role::FutureCovariate: return "future_covariate";
	case Role::StaticCovariate: return "static_covariate";
	}
	return "not_included";
}

inline std::optional<Role> role_from_string(std::string_view s) {
	for (auto r : {Role::NotIncluded, Role::TimeComponent, Role::Grouping, Role::Target, Role::PastCovariate,
	               Role::FutureCovariate, Role::StaticCovariate}) {
		if (to_string(r) == s) {
			return r;
		}
	}
	return std::nullopt;
}

// Column name -> role. Validated assignments cover every dataset column.
struct RoleAssignment {
	std::map<std::string, Role> roles;

	std::vector<std::string> columns_with(Role role, const std::vector<ColumnInfo> &order) const {
		std::vector<std::string> out;
		for (const auto &c : order) {
			auto it = roles.find(c.name);
			if (it != roles.end() && it->second == role) {
				out.push_back(c.name);
			}
		}
		return out;
	}

	std::optional<std::string> single(Role role) const {
		for (const auto &[name, r] : roles) {
			if (r == role) {
				return name;
			}
		}
		return std::nullopt;
	}

	json to_json() const {
		json j = json::object();
		for (const auto &[name, r] : roles) {
			j[name] = std::string(to_string(r));
		}
		return j;
	}

	static RoleAssignment from_json(const json &j) {
		if (!j.is_object()) {
			throw Error(ErrorCode::ValidationFailed, "role assignment must be a JSON object");
		}
		RoleAssignment a;
		for (auto it = j.begin(); it != j.end(); ++it) {
			if (!it.value().is_string()) {
				throw Error(ErrorCode::ValidationFailed, "role for '" + it.key() + "' must be a string", it.key());
			}
			auto role = role_from_string(it.value().get<std::string>());
			if (!role) {
				throw Error(ErrorCode::ValidationFailed,
				            "unknown role '" + it.value().get<std::string>() + "' for column '" + it.key() + "'",
				            it.key());
			}
			a.roles[it.key()] = *role;
		}
		return a;
	}

	bool operator==(const RoleAssignment &) const = default;
};

// Datetime if >=95% of non-empty cells are ISO-8601, else numeric if >=95% are
// decimal numbers, else categorical. Columns without any non-empty cell are
// categorical.
inline ColumnKind infer_column_kind(const CsvTable &table, std::size_t column) {
	std::size_t non_empty = 0, dates = 0, numbers = 0;
	for (const auto &row : table.rows) {
		const std::string_view cell = row[column];
		if (is_empty_cell(cell)) {
			continue;
		}
		++non_empty;
		if (parse_iso8601(cell)) {
			++dates;
		}
		if (parse_number(cell)) {
			++numbers;
		}
	}
	if (non_empty == 0) {
		return ColumnKind::Categorical;
	}
	const double n = static_cast<double>(non_empty);
	if (static_cast<double>(dates) / n >= kKindThreshold) {
		return ColumnKind::Datetime;
	}
	if (static_cast<double>(numbers) / n >= kKindThreshold) {
		return ColumnKind::Numeric;
	}
	return ColumnKind::Categorical;
}

inline std::vector<ColumnInfo> extract_schema(const CsvTable &table) {
	std::set<std::string> seen;
	std::vector<ColumnInfo> columns;
	for (std::size_t c = 0; c < table.header.size(); ++c) {
		if (!seen.insert(table.header[c]).second) {
			throw Error(ErrorCode::Unparseable, "duplicate column name '" + table.header[c] + "'", table.header[c]);
		}
		columns.push_back({table.header[c], infer_column_kind(table, c)});
	}
	return columns;
}

inline void validate_filename(std::string_view filename) {
	if (filename.empty()) {
		throw Error(ErrorCode::BadName, "filename is empty", "filename");
	}
	if (filename.size() > kMaxFilenameLength) {
		throw Error(ErrorCode::BadName, "filename longer than 128 characters", "filename");
	}
	if (filename == "." || filename == "..") {
		throw Error(ErrorCode::BadName, "filename may not be a relative path component", "filename");
	}
	for (char c : filename) {
		const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '.' ||
		                c == '_' || c == ' ' || c == '-';
		if (!ok) {
			throw Error(ErrorCode::BadName, "filename may only contain letters, digits, '.', '_', '-' and spaces",
			            "filename");
		}
	}
}

inline const ColumnInfo &find_column(const std::vector<ColumnInfo> &columns, std::string_view name) {
	for (const auto &c : columns) {
		if (c.name == name) {
			return c;
		}
	}
	throw Error(ErrorCode::UnknownColumn, "no column named '" + std::string(name) + "'", std::string(name));
}

// Time column values as integers: epoch seconds for datetime columns, the
// value itself for integer columns. Empty cells yield nullopt.
inline std::vector<std::optional<std::int64_t>> parse_time_column(const CsvTable &table, std::size_t column,
                                                                   ColumnKind kind) {
	std::vector<std::optional<std::int64_t>> out;
	out.reserve(table.rows.size());
	for (const auto &row : table.rows) {
		const std::string_view cell = row[column];
		if (is_empty_cell(cell)) {
			out.emplace_back();
			continue;
		}
		if (kind == ColumnKind::Datetime) {
			out.push_back(parse_iso8601(cell));
		} else {
			auto v = parse_number(cell);
			if (v && std::nearbyint(*v) == *v && std::abs(*v) < 9.0e15) {
				out.push_back(static_cast<std::int64_t>(*v));
			} else {
				out.emplace_back();
			}
		}
	}
	return out;
}

// Validates a proposed assignment against the dataset's columns. Checks run in
// this order: coverage, NoTime, MultipleTime, NoTarget, MultipleGrouping,
// TypeMismatch.
inline RoleAssignment validate_roles(const CsvTable &table, const std::vector<ColumnInfo> &columns,
                                     const RoleAssignment &proposed) {
	for (const auto &[name, role] : proposed.roles) {
		find_column(columns, name);
	}
	for (const auto &c : columns) {
		if (!proposed.roles.contains(c.name)) {
			throw Error(ErrorCode::ValidationFailed, "no role given for column '" + c.name + "'", c.name);
		}
	}
	std::size_t time = 0, target = 0, grouping = 0;
	for (const auto &[name, role] : proposed.roles) {
		time += role == Role::TimeComponent;
		target += role == Role::Target;
		grouping += role == Role::Grouping;
	}
	if (time == 0) {
		throw Error(ErrorCode::NoTime, "exactly one column must have the time role");
	}
	if (time > 1) {
		throw Error(ErrorCode::MultipleTime, "only one column may have the time role");
	}
	if (target == 0) {
		throw Error(ErrorCode::NoTarget, "at least one column must have the target role");
	}
	if (grouping > 1) {
		throw Error(ErrorCode::MultipleGrouping, "at most one column may have the grouping role");
	}
	for (const auto &c : columns) {
		const Role role = proposed.roles.at(c.name);
		switch (role) {
		case Role::TimeComponent: {
			if (c.inferred_kind == ColumnKind::Categorical) {
				throw Error(ErrorCode::TypeMismatch, "time column '" + c.name + "' is neither datetime nor integer",
				            c.name);
			}
			if (c.inferred_kind == ColumnKind::Numeric) {
				const auto values = parse_time_column(table, table.column_index(c.name), ColumnKind::Numeric);
				for (std::size_t r = 0; r < values.size(); ++r) {
					if (!values[r]) {
						throw Error(ErrorCode::TypeMismatch,
						            "time column '" + c.name + "' has a non-integer value on row " +
						                std::to_string(r + 1),
						            c.name);
					}
				}
			}
			break;
		}
		case Role::Target:
		case Role::PastCovariate:
		case Role::FutureCovariate:
			if (c.inferred_kind != ColumnKind::Numeric) {
				throw Error(ErrorCode::TypeMismatch,
				            "column '" + c.name + "' with role " + std::string(to_string(role)) + " must be numeric",
				            c.name);
			}
			break;
		default:
			break;
		}
	}
	return proposed;
}

// ---------------------------------------------------------------------------
// Plot data

enum class PlotKind { Line, Gantt };

struct GanttSpan {
	double start;
	double end;
	std::string category;
	std::string row;
};

struct PlotData {
	PlotKind kind = PlotKind::Line;
	ColumnKind x_kind = ColumnKind::Numeric;
	std::vector<double> x;
	std::vector<std::pair<std::string, std::vector<double>>> series; // NaN marks a missing cell
	std::vector<GanttSpan> spans;

	json x_value(double v) const {
		if (x_kind == ColumnKind::Datetime) {
			return format_iso8601(static_cast<std::int64_t>(v));
		}
		return v;
	}

	json to_json() const {
		json j;
		j["kind"] = kind == PlotKind::Line ? "line" : "gantt";
		json xs = json::array();
		for (double v : x) {
			xs.push_back(x_value(v));
		}
		j["x"] = std::move(xs);
		json s = json::object();
		for (const auto &[name, values] : series) {
			json arr = json::array();
			for (double v : values) {
				arr.push_back(std::isnan(v) ? json(nullptr) : json(v));
			}
			s[name] = std::move(arr);
		}
		j["series"] = std::move(s);
		json spans_json = json::array();
		for (const auto &sp : spans) {
			spans_json.push_back(
			    {{"start", x_value(sp.start)}, {"end", x_value(sp.end)}, {"category", sp.category}, {"row", sp.row}});
		}
		j["spans"] = std::move(spans_json);
		return j;
	}
};

// Line chart when every y column is numeric, Gantt chart when every y column is
// categorical (or datetime). Rows are ordered by x; Gantt spans are maximal runs
// of one category and the last span ends one x-step past the final point.
inline PlotData plot_data(const CsvTable &table, const std::vector<ColumnInfo> &columns, std::string_view x_col,
                          const std::vector<std::string> &y_cols) {
	const ColumnInfo &xinfo = find_column(columns, x_col);
	std::vector<const ColumnInfo *> ys;
	for (const auto &y : y_cols) {
		ys.push_back(&find_column(columns, y));
	}
	const bool any_numeric =
	    std::any_of(ys.begin(), ys.end(), [](auto *c) { return c->inferred_kind == ColumnKind::Numeric; });
	const bool any_other =
	    std::any_of(ys.begin(), ys.end(), [](auto *c) { return c->inferred_kind != ColumnKind::Numeric; });
	if (any_numeric && any_other) {
		throw Error(ErrorCode::MixedKinds, "cannot plot numeric and categorical columns together", "y");
	}

	PlotData plot;
	plot.kind = any_other ? PlotKind::Gantt : PlotKind::Line;
	plot.x_kind = xinfo.inferred_kind;

	const std::size_t xi = table.column_index(x_col);
	std::vector<double> xraw(table.rows.size(), std::numeric_limits<double>::quiet_NaN());
	for (std::size_t r = 0; r < table.rows.size(); ++r) {
		const std::string &cell = table.rows[r][xi];
		if (xinfo.inferred_kind == ColumnKind::Datetime) {
			if (auto t = parse_iso8601(cell)) {
				xraw[r] = static_cast<double>(*t);
			}
		} else if (xinfo.inferred_kind == ColumnKind::Numeric) {
			if (auto v = parse_number(cell)) {
				xraw[r] = *v;
			}
		} else {
			xraw[r] = static_cast<double>(r);
		}
	}
	// Rows whose x is missing are dropped; the rest are stably sorted by x.
	std::vector<std::size_t> order;
	for (std::size_t r = 0; r < xraw.size(); ++r) {
		if (!std::isnan(xraw[r])) {
			order.push_back(r);
		}
	}
	std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xraw[a] < xraw[b]; });
	for (std::size_t r : order) {
		plot.x.push_back(xraw[r]);
	}
	if (plot.x_kind == ColumnKind::Categorical) {
		plot.x_kind = ColumnKind::Numeric;
	}

	if (plot.kind == PlotKind::Line) {
		for (const auto *c : ys) {
			const std::size_t ci = table.column_index(c->name);
			std::vector<double> values;
			values.reserve(order.size());
			for (std::size_t r : order) {
				auto v = parse_number(table.rows[r][ci]);
				values.push_back(v ? *v : std::numeric_limits<double>::quiet_NaN());
			}
			plot.series.emplace_back(c->name, std::move(values));
		}
		return plot;
	}

	// Step used to close the final span: the smallest positive x gap.
	double step = 1.0;
	{
		double best = std::numeric_limits<double>::infinity();
		for (std::size_t i = 1; i < plot.x.size(); ++i) {
			const double d = plot.x[i] - plot.x[i - 1];
			if (d > 0 && d < best) {
				best = d;
			}
		}
		if (std::isfinite(best)) {
			step = best;
		}
	}
	for (const auto *c : ys) {
		const std::size_t ci = table.column_index(c->name);
		std::size_t run_start = 0;
		for (std::size_t i = 1; i <= order.size(); ++i) {
			const bool boundary =
			    i == order.size() || trim(table.rows[order[i]][ci]) != trim(table.rows[order[run_start]][ci]);
			if (!boundary) {
				continue;
			}
			const double end = i == order.size() ? plot.x.back() + step : plot.x[i];
			plot.spans.push_back({plot.x[run_start], end, std::string(trim(table.rows[order[run_start]][ci])), c->name});
			run_start = i;
		}
	}
	return plot;
}

} // namespace forecaster::ingest

namespace forecaster::ingest {

struct DatasetRecord {
	std::string dataset_id;
	std::string owner_id;
	std::string filename;
	std::string uploaded_at; // ISO-8601 UTC
	std::size_t byte_size = 0;
	std::size_t row_count = 0;
	std::vector<ColumnInfo> columns;
	std::optional<RoleAssignment> roles;

	std::string object_key() const {
		return owner_id + "/" + filename;
	}

	json to_json() const {
		json cols = json::array();
		for (const auto &c : columns) {
			cols.push_back({{"name", c.name}, {"inferred_kind", std::string(to_string(c.inferred_kind))}});
		}
		json j{{"dataset_id", dataset_id}, {"owner_id", owner_id},     {"filename", filename},
		       {"uploaded_at", uploaded_at}, {"byte_size", byte_size}, {"row_count", row_count},
		       {"columns", std::move(cols)}};
		j["roles"] = roles ? roles->to_json() : json(nullptr);
		return j;
	}
};

inline std::vector<ColumnInfo> columns_from_json(const json &j);

inline DatasetRecord dataset_record_from_json(const json &j) {
	DatasetRecord r;
	r.dataset_id = j.at("dataset_id").get<std::string>();
	r.owner_id = j.at("owner_id").get<std::string>();
	r.filename = j.at("filename").get<std::string>();
	r.uploaded_at = j.value("uploaded_at", "");
	r.byte_size = j.value("byte_size", std::size_t{0});
	r.row_count = j.value("row_count", std::size_t{0});
	r.columns = columns_from_json(j.at("columns"));
	if (j.contains("roles") && j["roles"].is_object()) {
		r.roles = RoleAssignment::from_json(j["roles"]);
	}
	return r;
}

inline json columns_to_json(const std::vector<ColumnInfo> &columns) {
	json cols = json::array();
	for (const auto &c : columns) {
		cols.push_back({{"name", c.name}, {"inferred_kind", std::string(to_string(c.inferred_kind))}});
	}
	return cols;
}

inline std::vector<ColumnInfo> columns_from_json(const json &j) {
	std::vector<ColumnInfo> out;
	for (const auto &c : j) {
		out.push_back({c.at("name").get<std::string>(), column_kind_from_string(c.at("inferred_kind").get<std::string>())});
	}
	return out;
}

} // namespace forecaster::ingest
