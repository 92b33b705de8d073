#pragma once

// Named experiment pipelines. Each one is a pure function of its resolved
// configuration and seed and produces a table (series), a JSON summary and
// a pass/fail verdict for the quantitative claims it checks.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "singhom/homeo.hpp"
#include "singhom/interval_fn.hpp"

namespace singhom {

using Config = std::map<std::string, std::string>;

struct ParamSpec {
  std::string key;
  std::string default_value;
  std::string help;
};

struct ExperimentInfo {
  std::string name;
  std::string claim;  // the statement the experiment tests
  bool stochastic = false;
  std::vector<ParamSpec> params;
};

const std::vector<ExperimentInfo>& experiment_catalog();
// Throws PreconditionError for an unknown name.
const ExperimentInfo& experiment_info(const std::string& name);

// Defaults overlaid with `overrides`; unknown keys raise PreconditionError.
Config resolve_config(const ExperimentInfo& info, const Config& overrides);

struct Column {
  std::string name;
  bool exact = false;  // computed in exact arithmetic (or exactly certified)
};

struct Series {
  std::vector<Column> columns;
  std::vector<std::vector<std::string>> rows;

  std::string csv() const;
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

struct PlotSpec {
  std::string title, x, y;
  std::string x_column;
  std::vector<std::string> y_columns;
  bool log_y = false;
  std::string group_column;  // rows are plotted only when this column equals group_value
  std::string group_value;
};

struct ExperimentResult {
  std::string name, claim;
  Config config;
  std::optional<std::uint64_t> seed;
  Series series;
  nlohmann::json summary;
  bool passed = true;
  std::vector<std::string> failures;
  std::optional<PlotSpec> plot;

  void fail(std::string why) {
    passed = false;
    failures.push_back(std::move(why));
  }
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
};

// Resolves the configuration and dispatches. Stochastic experiments without
// a seed raise PreconditionError.
ExperimentResult run_experiment(const std::string& name, const Config& overrides, const RunOptions& opt);

// Writes run.json, series.csv and plot.svg into `dir` (created if needed),
// each atomically.
void write_run_files(const ExperimentResult& r, const std::string& dir);

nlohmann::json run_document(const ExperimentResult& r);

std::string render_svg(const Series& s, const PlotSpec& p);

// Shared helpers, exposed for the command line.
std::vector<Rational> parse_rational_list(const std::string& text);
std::vector<unsigned> parse_unsigned_list(const std::string& text);
std::string format_double(double v);

}  // namespace singhom
