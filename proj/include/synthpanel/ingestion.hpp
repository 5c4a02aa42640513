#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "synthpanel/panel.hpp"

namespace synthpanel {

/// Filesystem / stream failures; mapped to a distinct exit code by the CLI.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class EstimatorChoice { scm, sdid, both };

struct BootstrapSettings {
  int replications = 200;
  int resample_size = 0;  // 0: default to the surviving donor-pool size
  double level = 0.95;
  std::uint64_t seed = 42;
};

/// Parsed run configuration with defaults applied.
struct RunConfig {
  std::string input_path;
  TreatmentSpec spec;
  EstimatorChoice estimator = EstimatorChoice::both;
  BootstrapSettings bootstrap;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

inline std::optional<long> parse_long(std::string_view s) {
  s = trim(s);
  long value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

inline std::optional<std::uint64_t> parse_u64(std::string_view s) {
  s = trim(s);
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace detail

/// Parses the counts CSV (header `unit,year,month,value`). Malformed rows are
/// rejected with their line number.
inline std::vector<Record> parse_counts_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("counts csv: empty input");
  {
    auto cols = detail::split(detail::trim(line), ',');
    const char* expect[] = {"unit", "year", "month", "value"};
    if (cols.size() != 4) throw std::invalid_argument("counts csv: header must have 4 columns");
    for (std::size_t i = 0; i < 4; ++i)
      if (detail::trim(cols[i]) != expect[i])
        throw std::invalid_argument(std::string("counts csv: header column ") + std::to_string(i + 1) +
                                    " must be '" + expect[i] + "'");
  }

  std::vector<Record> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = detail::trim(line);
    if (sv.empty()) continue;
    auto cols = detail::split(sv, ',');
    const std::string at = "counts csv line " + std::to_string(line_no);
    if (cols.size() != 4) throw std::invalid_argument(at + ": expected 4 columns");
    Record rec;
    rec.unit = std::string(detail::trim(cols[0]));
    if (rec.unit.empty()) throw std::invalid_argument(at + ": empty unit name");
    auto year = detail::parse_long(cols[1]);
    if (!year) throw std::invalid_argument(at + ": unparsable year");
    auto month = detail::parse_long(cols[2]);
    if (!month) throw std::invalid_argument(at + ": unparsable month");
    if (*month < 1 || *month > 12) throw std::invalid_argument(at + ": month outside 1..12");
    auto value = detail::parse_double(cols[3]);
    if (!value) throw std::invalid_argument(at + ": unparsable value");
    rec.year = static_cast<int>(*year);
    rec.month = static_cast<int>(*month);
    rec.value = *value;
    records.push_back(std::move(rec));
  }
  return records;
}

/// Shortest round-trip decimal form; keeps CSV emission byte-stable and the
/// parse(emit(x)) composition exact.
inline void write_csv_double(std::ostream& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

inline void emit_counts_csv(std::ostream& out, std::span<const Record> records) {
  out << "unit,year,month,value\n";
  for (const auto& rec : records) {
    out << rec.unit << ',' << rec.year << ',' << rec.month << ',';
    write_csv_double(out, rec.value);
    out << '\n';
  }
}

inline void emit_counts_csv(std::ostream& out, const Panel& panel) {
  std::vector<Record> records = emit_records(panel);
  emit_counts_csv(out, records);
}

/// Parses the flat `key = value` run configuration. Unknown keys are
/// rejected; treated_unit and t0_year are required, everything else has a
/// documented default.
inline RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  bool have_treated = false, have_t0 = false, have_m = false;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = line;
    if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
    sv = detail::trim(sv);
    if (sv.empty()) continue;

    auto eq = sv.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key(detail::trim(sv.substr(0, eq)));
    std::string_view value = detail::trim(sv.substr(eq + 1));
    auto bad = [&](const std::string& why) {
      return std::invalid_argument("config key '" + key + "': " + why);
    };

    if (key == "input") {
      cfg.input_path = std::string(value);
    } else if (key == "treated_unit") {
      if (value.empty()) throw bad("empty value");
      cfg.spec.treated_unit = std::string(value);
      have_treated = true;
    } else if (key == "t0_year") {
      auto v = detail::parse_long(value);
      if (!v) throw bad("unparsable integer");
      cfg.spec.t0_year = static_cast<int>(*v);
      have_t0 = true;
    } else if (key == "season_months") {
      std::set<int> months;
      for (auto part : detail::split(value, ',')) {
        auto m = detail::parse_long(part);
        if (!m || *m < 1 || *m > 12) throw bad("month outside 1..12");
        months.insert(static_cast<int>(*m));
      }
      if (months.empty()) throw bad("empty month list");
      cfg.spec.season_months = std::move(months);
    } else if (key == "excluded_donors") {
      cfg.spec.excluded_donors.clear();
      for (auto part : detail::split(value, ',')) {
        auto name = detail::trim(part);
        if (!name.empty()) cfg.spec.excluded_donors.insert(std::string(name));
      }
    } else if (key == "fit_target") {
      if (value == "per_period")
        cfg.spec.fit_target = FitTarget::per_period;
      else if (value == "pre_mean")
        cfg.spec.fit_target = FitTarget::pre_mean;
      else
        throw bad("must be per_period or pre_mean");
    } else if (key == "estimator") {
      if (value == "scm")
        cfg.estimator = EstimatorChoice::scm;
      else if (value == "sdid")
        cfg.estimator = EstimatorChoice::sdid;
      else if (value == "both")
        cfg.estimator = EstimatorChoice::both;
      else
        throw bad("must be scm, sdid or both");
    } else if (key == "bootstrap_replications") {
      auto v = detail::parse_long(value);
      if (!v || *v < 1) throw bad("must be an integer >= 1");
      cfg.bootstrap.replications = static_cast<int>(*v);
    } else if (key == "bootstrap_resample_size") {
      auto v = detail::parse_long(value);
      if (!v || *v < 1) throw bad("must be an integer >= 1");
      cfg.bootstrap.resample_size = static_cast<int>(*v);
      have_m = true;
    } else if (key == "confidence_level") {
      auto v = detail::parse_double(value);
      if (!v || !(*v > 0.0 && *v < 1.0)) throw bad("must be in (0, 1)");
      cfg.bootstrap.level = *v;
    } else if (key == "seed") {
      auto v = detail::parse_u64(value);
      if (!v) throw bad("must be a 64-bit unsigned integer");
      cfg.bootstrap.seed = *v;
    } else if (key == "occupancy") {
      auto v = detail::parse_double(value);
      if (!v || !(*v > 0.0)) throw bad("must be a positive number");
      cfg.spec.occupancy = *v;
    } else {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": unknown key '" +
                                  key + "'");
    }
  }
  (void)have_m;
  if (!have_treated) throw std::invalid_argument("config: missing required key treated_unit");
  if (!have_t0) throw std::invalid_argument("config: missing required key t0_year");
  return cfg;
}

inline RunConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

/// Donor usability report against a TreatmentSpec. Donors missing any
/// pre-treatment season cell are listed for dropping; the panel itself is
/// never mutated here. Hard failures: incomplete treated unit, fewer than
/// two surviving donors.
struct ValidationReport {
  bool treated_complete = false;
  std::vector<std::string> usable_donors;
  std::vector<std::string> dropped_donors;   // incomplete pre-treatment seasons
  std::vector<std::string> excluded_donors;  // excluded by configuration
  std::size_t donor_count = 0;
  std::vector<std::string> notes;
};

inline ValidationReport validate_panel(const Panel& panel, const TreatmentSpec& spec) {
  validate_spec(panel, spec);

  // Pre-treatment season grid cells that a complete unit must cover.
  std::vector<std::size_t> required;
  for (std::size_t p = 0; p < panel.n_periods(); ++p)
    if (panel.periods[p].year <= spec.t0_year && spec.season_months.count(panel.periods[p].month))
      required.push_back(p);

  auto missing_cell = [&](std::size_t u) -> std::optional<Period> {
    for (std::size_t p : required)
      if (!panel.is_observed(u, p)) return panel.periods[p];
    return std::nullopt;
  };

  ValidationReport report;
  const std::size_t treated = panel.unit_index(spec.treated_unit);
  if (auto cell = missing_cell(treated))
    throw std::runtime_error("validate_panel: treated unit '" + spec.treated_unit +
                             "' unobserved in pre-treatment cell " + std::to_string(cell->year) +
                             "-" + std::to_string(cell->month));
  report.treated_complete = true;

  for (std::size_t u = 0; u < panel.n_units(); ++u) {
    if (u == treated) continue;
    const std::string& name = panel.units[u];
    if (spec.excluded_donors.count(name)) {
      report.excluded_donors.push_back(name);
      continue;
    }
    if (auto cell = missing_cell(u)) {
      report.dropped_donors.push_back(name);
      report.notes.push_back("donor " + name + " dropped: unobserved pre-treatment cell " +
                             std::to_string(cell->year) + "-" + std::to_string(cell->month));
    } else {
      report.usable_donors.push_back(name);
    }
  }
  report.donor_count = report.usable_donors.size();
  if (report.donor_count < 2)
    throw std::runtime_error("validate_panel: fewer than 2 usable donors (" +
                             std::to_string(report.donor_count) + ")");
  return report;
}

}  // namespace synthpanel
