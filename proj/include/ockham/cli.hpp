#pragma once

// Command-line front end. Needs CLI11 and nlohmann/json on the include path;
// the numerical headers do not.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ockham/ockham.hpp"

namespace ockham::cli {

using Json = nlohmann::ordered_json;

/// Malformed command line. Maps to exit status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown by parse_args for --help; carries the rendered grammar.
struct HelpRequested {
  std::string text;
};

enum class Command { Fit, Evidence, Decompose, Select, Risk, PolyDemo, MackayDemo, BicSweep };
enum class Format { Json, Csv };

inline constexpr std::string_view kCommandNames[] = {
    "fit", "evidence", "decompose", "select", "risk", "poly-demo", "mackay-demo", "bic-sweep"};

inline std::string_view to_string(Command c) noexcept {
  return kCommandNames[static_cast<std::size_t>(c)];
}

inline std::string_view to_string(Format f) noexcept { return f == Format::Json ? "json" : "csv"; }

struct RunConfig {
  Command command = Command::Evidence;
  std::optional<std::string> data_path;
  /// Every key of the command with defaults filled in, as given on the line.
  std::map<std::string, std::string> params;
  std::string output_path = "-";
  Format format = Format::Json;
  /// Arguments after the program name, verbatim.
  std::vector<std::string> argv;

  bool operator==(const RunConfig&) const = default;

  const std::string& param(const std::string& key) const { return params.at(key); }
  bool has(const std::string& key) const {
    const auto it = params.find(key);
    return it != params.end() && !it->second.empty();
  }
};

namespace detail {

struct KeySpec {
  std::string name;
  std::string default_value;  // empty: no default
  bool required = false;
  std::string help;
};

inline std::vector<KeySpec> command_keys(Command c) {
  const KeySpec sigma{"sigma", "", true, "noise standard deviation (> 0)"};
  const KeySpec lambda{"lambda", "", true, "prior precision scale (> 0)"};
  const KeySpec seed{"seed", "0", false, "random seed"};
  const KeySpec estimator{"estimator", "glm-exact", false,
                          "glm-exact | quadrature | laplace | importance-sampling"};
  const KeySpec grid{"grid", "auto", false, "quadrature points per dimension (odd) or auto"};
  const KeySpec samples{"samples", "100000", false, "importance-sampling draws"};
  switch (c) {
    case Command::Fit:
      return {sigma, lambda, {"degrees", "0", false, "polynomial degree(s), e.g. 2 or 0..3"}, seed};
    case Command::Evidence:
      return {sigma, lambda, {"degrees", "0", false, "polynomial degree(s)"}, estimator, grid,
              samples, seed};
    case Command::Decompose:
      return {{"sigma", "", false, "noise standard deviation (data mode)"},
              {"lambda", "", false, "prior precision scale (data mode)"},
              {"degrees", "0", false, "polynomial degree(s)"},
              estimator,
              grid,
              samples,
              {"penalty", "bic", false, "supplied penalty: a number or bic"},
              {"log-evidence", "", false, "log-evidence (number mode)"},
              {"log-fit", "", false, "log-likelihood at the MAP (number mode)"},
              seed};
    case Command::Select:
      return {sigma,
              lambda,
              {"degrees", "", true, "candidate degrees, e.g. 0..9"},
              {"weights", "uniform", false, "prior model weights, comma separated"},
              {"rule", "max-evidence", false, "max-evidence | max-posterior"},
              estimator,
              grid,
              samples,
              seed};
    case Command::Risk:
      return {sigma,
              lambda,
              {"degrees", "", true, "candidate degrees"},
              {"weights", "uniform", false, "prior model weights"},
              {"n", "50", false, "design size when no data file is given"},
              {"reps", "200", false, "Monte Carlo replicates"},
              seed};
    case Command::PolyDemo:
      return {{"true-degree", "3", false, "degree that generates the data"},
              {"degrees", "0..9", false, "candidate degrees"},
              {"n", "100", false, "training size"},
              {"sigma", "1", false, "noise standard deviation"},
              {"lambda", "1", false, "prior precision scale"},
              {"reps", "200", false, "replicates"},
              seed};
    case Command::MackayDemo:
      return {{"sigma", "1", false, "noise standard deviation"},
              {"lambda-simple", "10", false, "prior precision of the stiff model"},
              {"lambda-complex", "0.1", false, "prior precision of the flexible model"},
              {"y-min", "-25", false, "grid start"},
              {"y-max", "25", false, "grid end"},
              {"grid", "501", false, "grid points"},
              seed};
    case Command::BicSweep:
      return {{"family", "line", false, "line | all-ones"},
              {"ns", "100,1000,10000,100000", false, "strictly increasing sample sizes"},
              {"sigma", "1", false, "noise standard deviation"},
              {"lambda", "1", false, "prior precision scale"},
              {"theta", "1,-0.5", false, "true intercept and slope (line family)"},
              seed};
  }
  return {};
}

inline std::string_view describe(Command c) {
  switch (c) {
    case Command::Fit: return "MAP coefficients of polynomial ridge fits";
    case Command::Evidence: return "log-evidence, fit and flexibility per degree";
    case Command::Decompose: return "flexibility, BIC penalty and pen' for data or given numbers";
    case Command::Select: return "choose a degree by maximum evidence or posterior probability";
    case Command::Risk: return "zero-one risk of the selection rules by simulation";
    case Command::PolyDemo: return "degree selection and test error on simulated polynomials";
    case Command::MackayDemo: return "log-evidence of a stiff and a flexible scalar model over y";
    case Command::BicSweep: return "flexibility minus the BIC penalty as n grows";
  }
  return "";
}

inline bool takes_data(Command c) {
  return c == Command::Fit || c == Command::Evidence || c == Command::Decompose ||
         c == Command::Select || c == Command::Risk;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string malformed(std::string_view what, std::string_view text, std::size_t pos) {
  std::ostringstream msg;
  msg << what << ": malformed number '" << text << "' at position " << pos;
  return msg.str();
}

template <class T>
T parse_number(std::string_view what, std::string_view text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec == std::errc::result_out_of_range) {
    throw UsageError(std::string(what) + ": number '" + std::string(text) + "' is out of range");
  }
  if (ec != std::errc() || text.empty()) throw UsageError(malformed(what, text, 0));
  if (ptr != end) throw UsageError(malformed(what, text, static_cast<std::size_t>(ptr - begin)));
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw UsageError(malformed(what, text, 0));
  }
  return value;
}

inline double parse_real(std::string_view key, std::string_view text) {
  return parse_number<double>("--" + std::string(key), text);
}

inline double parse_positive(std::string_view key, std::string_view text) {
  const double v = parse_real(key, text);
  if (!(v > 0.0)) throw UsageError(std::string(key) + " must be positive");
  return v;
}

inline std::uint64_t parse_count(std::string_view key, std::string_view text) {
  const auto v = parse_number<std::uint64_t>("--" + std::string(key), text);
  if (v == 0) throw UsageError(std::string(key) + " must be positive");
  return v;
}

inline std::vector<double> parse_reals(std::string_view key, std::string_view text) {
  std::vector<double> out;
  for (const std::string& tok : split(text, ',')) out.push_back(parse_real(key, tok));
  return out;
}

/// "0..3,7" -> {0, 1, 2, 3, 7}.
inline std::vector<unsigned> parse_degrees(std::string_view text) {
  std::vector<unsigned> out;
  for (const std::string& tok : split(text, ',')) {
    const auto dots = tok.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_number<unsigned>("--degrees", tok));
      continue;
    }
    const unsigned lo = parse_number<unsigned>("--degrees", trim(tok.substr(0, dots)));
    const unsigned hi = parse_number<unsigned>("--degrees", trim(tok.substr(dots + 2)));
    if (hi < lo) throw UsageError("--degrees: empty range '" + tok + "'");
    for (unsigned p = lo; p <= hi; ++p) out.push_back(p);
  }
  std::vector<unsigned> sorted = out;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw UsageError("--degrees: degrees must be distinct");
  }
  return out;
}

inline std::vector<std::size_t> parse_sizes(std::string_view key, std::string_view text) {
  std::vector<std::size_t> out;
  for (const std::string& tok : split(text, ',')) {
    out.push_back(static_cast<std::size_t>(parse_count(key, tok)));
  }
  for (std::size_t k = 1; k < out.size(); ++k) {
    if (out[k] <= out[k - 1]) throw UsageError(std::string(key) + " must be strictly increasing");
  }
  return out;
}

inline std::optional<int> parse_grid(std::string_view text) {
  if (text == "auto") return std::nullopt;
  const auto v = parse_count("grid", text);
  if (v < 3 || v % 2 == 0) throw UsageError("grid must be an odd number of at least 3 points");
  return static_cast<int>(v);
}

inline void require(const RunConfig& c, const std::string& key) {
  if (!c.has(key)) throw UsageError("missing required option --" + key);
}

/// Checks every value once so run() only meets well-formed input.
inline void validate_params(const RunConfig& c) {
  const auto& p = c.params;
  const auto positive = [&](const char* key) {
    if (c.has(key)) (void)parse_positive(key, p.at(key));
  };
  for (const char* key : {"sigma", "lambda", "lambda-simple", "lambda-complex"}) positive(key);
  if (c.has("seed")) (void)parse_number<std::uint64_t>("--seed", p.at("seed"));
  for (const char* key : {"n", "reps", "samples"}) {
    if (c.has(key)) (void)parse_count(key, p.at(key));
  }
  if (c.has("true-degree")) (void)parse_number<unsigned>("--true-degree", p.at("true-degree"));
  if (c.has("degrees")) (void)parse_degrees(p.at("degrees"));
  if (c.has("estimator")) {
    try {
      (void)parse_estimator(p.at("estimator"));
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
  }
  if (c.has("rule")) {
    try {
      (void)parse_rule(p.at("rule"));
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
  }
  if (c.command == Command::MackayDemo) {
    const double lo = parse_real("y-min", p.at("y-min"));
    const double hi = parse_real("y-max", p.at("y-max"));
    if (!(lo < hi)) throw UsageError("y-min must be below y-max");
    if (parse_count("grid", p.at("grid")) < 2) throw UsageError("grid needs at least 2 points");
  } else if (c.has("grid")) {
    (void)parse_grid(p.at("grid"));
  }
  if (c.has("weights") && p.at("weights") != "uniform") {
    const auto w = parse_reals("weights", p.at("weights"));
    const auto degrees = parse_degrees(p.at("degrees"));
    if (w.size() != degrees.size()) throw UsageError("weights must have one entry per degree");
    for (const double x : w) {
      if (!(x > 0.0)) throw UsageError("weights must be positive");
    }
  }
  if (c.has("ns")) (void)parse_sizes("ns", p.at("ns"));
  if (c.has("family") && p.at("family") != "line" && p.at("family") != "all-ones") {
    throw UsageError("family must be line or all-ones");
  }
  if (c.has("theta") && parse_reals("theta", p.at("theta")).size() != 2) {
    throw UsageError("theta needs two values: intercept and slope");
  }
  if (c.has("penalty") && p.at("penalty") != "bic") (void)parse_real("penalty", p.at("penalty"));
  for (const char* key : {"log-evidence", "log-fit"}) {
    if (c.has(key)) (void)parse_real(key, p.at(key));
  }
}

inline void check_required(const RunConfig& c) {
  if (c.command == Command::Decompose) {
    const bool numbers = c.has("log-evidence") || c.has("log-fit");
    if (numbers) {
      require(c, "log-evidence");
      require(c, "log-fit");
      if (c.data_path) throw UsageError("--data cannot be combined with --log-evidence/--log-fit");
      return;
    }
    if (!c.data_path) throw UsageError("missing required option --data (or --log-evidence and --log-fit)");
    require(c, "sigma");
    require(c, "lambda");
    return;
  }
  for (const KeySpec& k : command_keys(c.command)) {
    if (k.required) require(c, k.name);
  }
  if (takes_data(c.command) && c.command != Command::Risk && !c.data_path) {
    throw UsageError("missing required option --data");
  }
}

}  // namespace detail

inline std::string grammar() {
  std::ostringstream out;
  out << "usage: ockham <command> [--key value]...\n\ncommands:\n";
  for (std::size_t i = 0; i < std::size(kCommandNames); ++i) {
    const auto c = static_cast<Command>(i);
    out << "  " << kCommandNames[i];
    if (c == Command::Risk || c == Command::Decompose) {
      out << " [--data FILE]";
    } else if (detail::takes_data(c)) {
      out << " --data FILE";
    }
    for (const auto& k : detail::command_keys(c)) {
      out << (k.required ? " --" : " [--") << k.name << ' '
          << (k.default_value.empty() ? "VALUE" : k.default_value) << (k.required ? "" : "]");
    }
    out << " [--out FILE] [--format json|csv]\n";
  }
  return out.str();
}

/// Parses the arguments that follow the program name.
inline RunConfig parse_args(const std::vector<std::string>& args) {
  CLI::App app{"Evidence, flexibility and model selection for penalized-likelihood models", "ockham"};
  app.require_subcommand(1, 1);
  app.footer(grammar());

  struct Slot {
    std::string value;
    CLI::Option* option = nullptr;
  };
  std::map<std::string, std::map<std::string, Slot>> slots;
  std::map<std::string, CLI::App*> subs;

  for (std::size_t i = 0; i < std::size(kCommandNames); ++i) {
    const auto c = static_cast<Command>(i);
    const std::string name(kCommandNames[i]);
    CLI::App* sub = app.add_subcommand(name, std::string(detail::describe(c)));
    subs[name] = sub;
    auto& s = slots[name];
    std::vector<detail::KeySpec> keys = detail::command_keys(c);
    if (detail::takes_data(c)) keys.push_back({"data", "", false, "input CSV with y or x,y columns"});
    keys.push_back({"out", "-", false, "output file, - for stdout"});
    keys.push_back({"format", "", false, "json | csv (default: from --out extension)"});
    for (const auto& k : keys) {
      Slot& slot = s[k.name];
      slot.option = sub->add_option("--" + k.name, slot.value, k.help);
      if (!k.default_value.empty()) slot.option->default_str(k.default_value);
    }
  }

  if (!args.empty() && !args.front().empty() && args.front()[0] != '-' &&
      subs.find(args.front()) == subs.end()) {
    throw UsageError("unknown command '" + args.front() + "'");
  }

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("ockham");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> raw;
  for (auto& s : storage) raw.push_back(s.data());
  try {
    app.parse(static_cast<int>(raw.size()), raw.data());
  } catch (const CLI::Error& e) {
    if (e.get_exit_code() == 0) {
      std::ostringstream out;
      std::ostringstream err;
      app.exit(e, out, err);
      throw HelpRequested{out.str()};
    }
    throw UsageError(e.what());
  }

  RunConfig config;
  config.argv = args;
  std::string chosen;
  for (std::size_t i = 0; i < std::size(kCommandNames); ++i) {
    if (subs[std::string(kCommandNames[i])]->parsed()) {
      config.command = static_cast<Command>(i);
      chosen = kCommandNames[i];
    }
  }
  auto& s = slots[chosen];
  for (const auto& k : detail::command_keys(config.command)) {
    const Slot& slot = s[k.name];
    const std::string& v = slot.option->count() > 0 ? slot.value : k.default_value;
    if (!v.empty()) config.params[k.name] = v;
  }
  if (s.count("data") && s["data"].option->count() > 0) config.data_path = s["data"].value;
  if (s["out"].option->count() > 0) config.output_path = s["out"].value;
  if (config.output_path.empty()) throw UsageError("--out must not be empty");

  if (s["format"].option->count() > 0) {
    const std::string& f = s["format"].value;
    if (f == "json") {
      config.format = Format::Json;
    } else if (f == "csv") {
      config.format = Format::Csv;
    } else {
      throw UsageError("format must be json or csv, got '" + f + "'");
    }
  } else {
    const std::string ext = std::filesystem::path(config.output_path).extension().string();
    config.format = ext == ".csv" ? Format::Csv : Format::Json;
  }
  if (config.data_path && config.output_path != "-") {
    std::error_code ec;
    if (std::filesystem::equivalent(*config.data_path, config.output_path, ec) ||
        *config.data_path == config.output_path) {
      throw UsageError("--out must not overwrite the input data file");
    }
  }

  detail::check_required(config);
  detail::validate_params(config);
  return config;
}

// ---------------------------------------------------------------------------
// Input

struct Dataset {
  Eigen::VectorXd y;
  std::optional<Eigen::VectorXd> x;
};

/// Header row naming `y` or `x,y` (any order); one observation per row.
inline Dataset read_csv(std::istream& in, const std::string& label) {
  std::string line;
  std::size_t row = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++row;
    if (row == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    header = detail::split(line, ',');
  }
  if (header.empty()) throw Error(label + ": missing header row");
  std::optional<std::size_t> x_col;
  std::optional<std::size_t> y_col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "x" && !x_col) {
      x_col = i;
    } else if (header[i] == "y" && !y_col) {
      y_col = i;
    } else {
      throw Error(label + ": unexpected column '" + header[i] + "' (expected y or x,y)");
    }
  }
  if (!y_col) throw Error(label + ": no y column");

  std::vector<double> xs;
  std::vector<double> ys;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != header.size()) {
      throw Error(label + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                  " fields, expected " + std::to_string(header.size()));
    }
    const auto number = [&](std::size_t col) {
      try {
        return detail::parse_number<double>(header[col], cells[col]);
      } catch (const UsageError&) {
        throw Error(label + ": row " + std::to_string(row) + ": non-numeric " + header[col] +
                    " value '" + cells[col] + "'");
      }
    };
    ys.push_back(number(*y_col));
    if (x_col) xs.push_back(number(*x_col));
  }
  if (ys.empty()) throw Error(label + ": no data rows");
  Dataset out;
  out.y = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  if (x_col) out.x = Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  return out;
}

inline Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open data file '" + path + "'");
  return read_csv(in, path);
}

// ---------------------------------------------------------------------------
// Output

inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// JSON has no non-finite numbers; those become strings.
inline Json real(double v) { return std::isfinite(v) ? Json(v) : Json(format_real(v)); }

inline Json reals(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(real(v(i)));
  return out;
}

inline Json reals(const std::vector<double>& v) {
  Json out = Json::array();
  for (const double x : v) out.push_back(real(x));
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

struct Output {
  Json result = Json::object();
  Json diagnostics = Json::object();
  Table table;
};

inline Json config_json(const RunConfig& c) {
  Json j;
  j["command"] = std::string(to_string(c.command));
  j["data"] = c.data_path ? Json(*c.data_path) : Json(nullptr);
  j["out"] = c.output_path;
  j["format"] = std::string(to_string(c.format));
  j["params"] = Json::object();
  for (const auto& [k, v] : c.params) j["params"][k] = v;
  j["argv"] = c.argv;
  return j;
}

inline std::string render(const RunConfig& c, const Output& out) {
  if (c.format == Format::Json) {
    Json doc;
    doc["config"] = config_json(c);
    doc["result"] = out.result;
    doc["diagnostics"] = out.diagnostics;
    return doc.dump(2) + "\n";
  }
  std::ostringstream s;
  s << "# ockham " << to_string(c.command) << "\n";
  s << "# argv: " << Json(c.argv).dump() << "\n";
  s << "# data: " << (c.data_path ? *c.data_path : std::string("-")) << "\n";
  for (const auto& [k, v] : c.params) s << "# param " << k << "=" << v << "\n";
  const auto join = [&s](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) s << (i ? "," : "") << cells[i];
    s << "\n";
  };
  join(out.table.header);
  for (const auto& row : out.table.rows) join(row);
  return s.str();
}

/// Writes via a sibling temporary file and a rename.
inline void write_atomic(const std::string& path, const std::string& content) {
  if (path == "-") {
    std::cout << content << std::flush;
    return;
  }
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open '" + tmp.string() + "' for writing");
    f << content;
    f.flush();
    if (!f) throw Error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot move output into place at '" + path + "': " + ec.message());
  }
}

// ---------------------------------------------------------------------------
// Commands

namespace detail {

struct Settings {
  Estimator estimator = Estimator::GlmExact;
  std::optional<int> grid;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
};

inline Settings settings(const RunConfig& c) {
  Settings s;
  if (c.has("estimator")) s.estimator = parse_estimator(c.param("estimator"));
  if (c.has("grid")) s.grid = parse_grid(c.param("grid"));
  if (c.has("samples")) s.samples = static_cast<std::size_t>(parse_count("samples", c.param("samples")));
  s.seed = parse_number<std::uint64_t>("--seed", c.param("seed"));
  return s;
}

inline int default_grid(Eigen::Index d) { return d == 1 ? 2001 : d == 2 ? 401 : 81; }

inline EvidenceDecomposition evidence_for(const GaussianLinearSpec& spec, const ObservationSet& obs,
                                          const Settings& s) {
  if (s.estimator == Estimator::GlmExact) return glm_log_evidence(spec, obs);
  const GenericModelSpec wrapped = wrap_glm(spec, obs);
  const NormalizedPrior prior = glm_prior(spec, wrapped);
  switch (s.estimator) {
    case Estimator::Quadrature:
      return evidence_quadrature(wrapped, prior, s.grid.value_or(default_grid(spec.d())));
    case Estimator::Laplace: return evidence_laplace(wrapped, prior);
    case Estimator::ImportanceSampling:
      return evidence_importance(wrapped, prior, s.samples, s.seed);
    case Estimator::GlmExact: break;
  }
  return glm_log_evidence(spec, obs);
}

struct DataModels {
  Dataset data;
  std::vector<unsigned> degrees;
  std::vector<GaussianLinearSpec> specs;
  double scale = 1.0;
  std::vector<std::string> warnings;
};

inline DataModels data_models(const RunConfig& c) {
  DataModels m;
  m.data = read_csv(*c.data_path);
  m.degrees = parse_degrees(c.param("degrees"));
  const double sigma = parse_positive("sigma", c.param("sigma"));
  const double lambda = parse_positive("lambda", c.param("lambda"));
  if (!m.data.x) {
    for (const unsigned p : m.degrees) {
      if (p != 0) throw InvalidArgument("degree " + std::to_string(p) + " needs an x column in the data");
    }
    m.specs.push_back(GaussianLinearSpec{Eigen::MatrixXd::Ones(m.data.y.size(), 1), sigma, lambda});
    return m;
  }
  const PolynomialFamily fam = polynomial_family(*m.data.x, m.degrees, sigma, lambda);
  m.scale = fam.scale;
  m.warnings = fam.warnings;
  for (const auto& member : fam.set.members) m.specs.push_back(std::get<GaussianLinearSpec>(member));
  return m;
}

inline Json merged(Json head, const Json& tail) {
  head.update(tail);
  return head;
}

inline Json decomposition_json(const EvidenceDecomposition& e) {
  Json j;
  j["log_evidence"] = real(e.log_evidence);
  j["log_fit"] = real(e.log_fit);
  j["flexibility"] = real(e.flexibility);
  j["estimator"] = std::string(to_string(e.estimator));
  j["err_estimate"] = real(e.err_estimate);
  j["theta_hat"] = reals(e.theta_hat);
  j["notes"] = e.notes;
  Json diag = Json::object();
  for (const auto& [k, v] : e.diagnostics) diag[k] = real(v);
  j["diagnostics"] = diag;
  return j;
}

inline void data_diagnostics(const DataModels& m, Output& out) {
  out.diagnostics["n"] = m.data.y.size();
  out.diagnostics["has_x"] = m.data.x.has_value();
  out.diagnostics["column_scale"] = real(m.scale);
  out.diagnostics["warnings"] = m.warnings;
}

inline Output run_fit(const RunConfig& c) {
  const DataModels m = data_models(c);
  const ObservationSet obs{m.data.y, m.data.x};
  Output out;
  out.table.header = {"degree", "coefficient", "theta_hat", "posterior_sd"};
  Json models = Json::array();
  for (std::size_t i = 0; i < m.specs.size(); ++i) {
    const GaussianPosterior post = fit_posterior(m.specs[i], obs);
    const Eigen::VectorXd sd = post.post_precision.inverse().diagonal().cwiseSqrt();
    Json j;
    j["degree"] = m.degrees[i];
    j["theta_hat"] = reals(post.theta_hat);
    j["posterior_sd"] = reals(sd);
    j["log_fit"] = real(glm_log_likelihood(m.specs[i], obs, post.theta_hat));
    const GramDiagnostics gram = gram_diagnostics(m.specs[i]);
    j["gram_min_eigenvalue"] = real(gram.min_eigenvalue);
    j["gram_max_eigenvalue"] = real(gram.max_eigenvalue);
    models.push_back(j);
    for (Eigen::Index k = 0; k < post.theta_hat.size(); ++k) {
      out.table.add({std::to_string(m.degrees[i]), std::to_string(k), format_real(post.theta_hat(k)),
                     format_real(sd(k))});
    }
  }
  out.result["models"] = models;
  data_diagnostics(m, out);
  return out;
}

inline Output run_evidence(const RunConfig& c) {
  const DataModels m = data_models(c);
  const ObservationSet obs{m.data.y, m.data.x};
  const Settings s = settings(c);
  Output out;
  out.table.header = {"degree", "log_evidence", "log_fit", "flexibility", "err_estimate", "estimator"};
  Json models = Json::array();
  for (std::size_t i = 0; i < m.specs.size(); ++i) {
    const EvidenceDecomposition e = evidence_for(m.specs[i], obs, s);
    const Json j = merged(Json{{"degree", m.degrees[i]}}, decomposition_json(e));
    models.push_back(j);
    out.table.add({std::to_string(m.degrees[i]), format_real(e.log_evidence), format_real(e.log_fit),
                   format_real(e.flexibility), format_real(e.err_estimate),
                   std::string(to_string(e.estimator))});
  }
  if (models.size() == 1) {
    out.result = models[0];
  } else {
    out.result["models"] = models;
  }
  data_diagnostics(m, out);
  return out;
}

inline Json penalty_json(const PenaltyComparison& p) {
  return Json{{"supplied_penalty", real(p.supplied_penalty)},
              {"bic_penalty", real(p.bic_penalty)},
              {"flexibility", real(p.flexibility)},
              {"pen_prime", real(p.pen_prime)},
              {"d", p.d},
              {"n", p.n}};
}

inline Output run_decompose(const RunConfig& c) {
  Output out;
  if (!c.data_path) {
    const double log_e = parse_real("log-evidence", c.param("log-evidence"));
    const double log_fit = parse_real("log-fit", c.param("log-fit"));
    const EvidenceDecomposition e = decompose(log_e, log_fit);
    out.result["log_evidence"] = real(e.log_evidence);
    out.result["log_fit"] = real(e.log_fit);
    out.result["flexibility"] = real(e.flexibility);
    out.result["notes"] = e.notes;
    out.table.header = {"log_evidence", "log_fit", "flexibility", "supplied_penalty", "pen_prime"};
    std::vector<std::string> row{format_real(e.log_evidence), format_real(e.log_fit),
                                 format_real(e.flexibility), "", ""};
    if (c.param("penalty") != "bic") {
      const PenaltyComparison p = pen_prime(parse_real("penalty", c.param("penalty")), e.flexibility);
      out.result["supplied_penalty"] = real(p.supplied_penalty);
      out.result["pen_prime"] = real(p.pen_prime);
      row[3] = format_real(p.supplied_penalty);
      row[4] = format_real(p.pen_prime);
    } else {
      out.diagnostics["notes"] = Json::array({"bic penalty needs d and n; pass --data or a numeric --penalty"});
    }
    out.table.add(std::move(row));
    return out;
  }

  const DataModels m = data_models(c);
  const ObservationSet obs{m.data.y, m.data.x};
  const Settings s = settings(c);
  const auto n = static_cast<std::size_t>(m.data.y.size());
  out.table.header = {"degree",      "log_evidence", "log_fit",   "flexibility",
                      "bic_penalty", "supplied_penalty", "pen_prime", "estimator"};
  Json models = Json::array();
  for (std::size_t i = 0; i < m.specs.size(); ++i) {
    const EvidenceDecomposition e = evidence_for(m.specs[i], obs, s);
    const auto d = static_cast<std::size_t>(m.specs[i].d());
    const double supplied = c.param("penalty") == "bic" ? bic_penalty(d, n)
                                                        : parse_real("penalty", c.param("penalty"));
    const PenaltyComparison p = compare_penalties(supplied, e.flexibility, d, n);
    Json j = merged(Json{{"degree", m.degrees[i]}}, decomposition_json(e));
    j["penalty"] = penalty_json(p);
    models.push_back(j);
    out.table.add({std::to_string(m.degrees[i]), format_real(e.log_evidence), format_real(e.log_fit),
                   format_real(e.flexibility), format_real(p.bic_penalty),
                   format_real(p.supplied_penalty), format_real(p.pen_prime),
                   std::string(to_string(e.estimator))});
  }
  out.result["models"] = models;
  data_diagnostics(m, out);
  return out;
}

inline std::optional<std::vector<double>> weights_of(const RunConfig& c) {
  if (c.param("weights") == "uniform") return std::nullopt;
  std::vector<double> w = parse_reals("weights", c.param("weights"));
  double total = 0.0;
  for (const double x : w) total += x;
  for (double& x : w) x /= total;
  return w;
}

inline Output run_select(const RunConfig& c) {
  const DataModels m = data_models(c);
  const ObservationSet obs{m.data.y, m.data.x};
  const Settings s = settings(c);
  std::vector<ModelMember> members(m.specs.begin(), m.specs.end());
  const ModelSet set = make_model_set(std::move(members), weights_of(c));
  std::vector<EvidenceDecomposition> evidence;
  for (std::size_t i = 0; i < m.specs.size(); ++i) {
    try {
      evidence.push_back(evidence_for(m.specs[i], obs, s));
    } catch (const Error& e) {
      throw SelectionFailure("member " + std::to_string(i) + " (degree " +
                                 std::to_string(m.degrees[i]) + "): " + e.what(),
                             i);
    }
  }
  const SelectionRule rule = parse_rule(c.param("rule"));
  const SelectionOutcome sel = select_from_evidence(set, evidence, rule);

  Output out;
  out.result["rule"] = std::string(to_string(rule));
  out.result["chosen_index"] = sel.chosen;
  out.result["chosen_degree"] = m.degrees[sel.chosen];
  out.result["tie_broken"] = sel.tie_broken;
  out.table.header = {"degree", "weight", "log_evidence", "log_fit", "flexibility", "log_score", "chosen"};
  Json models = Json::array();
  for (std::size_t i = 0; i < m.specs.size(); ++i) {
    const auto& e = sel.evidence[i];
    Json j = merged(Json{{"degree", m.degrees[i]}, {"weight", real(set.weights[i])}},
                    decomposition_json(e));
    j["log_score"] = real(sel.log_scores[i]);
    models.push_back(j);
    out.table.add({std::to_string(m.degrees[i]), format_real(set.weights[i]), format_real(e.log_evidence),
                   format_real(e.log_fit), format_real(e.flexibility), format_real(sel.log_scores[i]),
                   i == sel.chosen ? "1" : "0"});
  }
  out.result["models"] = models;
  data_diagnostics(m, out);
  return out;
}

inline Output run_risk(const RunConfig& c) {
  const std::vector<unsigned> degrees = parse_degrees(c.param("degrees"));
  const double sigma = parse_positive("sigma", c.param("sigma"));
  const double lambda = parse_positive("lambda", c.param("lambda"));
  const auto seed = parse_number<std::uint64_t>("--seed", c.param("seed"));
  const auto reps = static_cast<std::size_t>(parse_count("reps", c.param("reps")));

  Eigen::VectorXd x;
  std::string design;
  if (c.data_path) {
    const Dataset data = read_csv(*c.data_path);
    if (!data.x) throw InvalidArgument("risk needs an x column in the data file");
    x = *data.x;
    design = "data";
  } else {
    CounterRng rng(derive_seed(seed, 0xD5E1u), 0);
    x = standard_normal_vector(rng, static_cast<Eigen::Index>(parse_count("n", c.param("n"))));
    design = "standard-normal";
  }
  PolynomialFamily fam = polynomial_family(x, degrees, sigma, lambda);
  if (const auto w = weights_of(c)) fam.set = make_model_set(fam.set.members, *w);

  const std::vector<SelectionRule> rules{SelectionRule::MaxEvidence, SelectionRule::MaxPosterior};
  const RiskReport r = risk_mc(fam.set, prior_predictive_generator(), reps, rules, seed);

  Output out;
  out.result["rules"] = r.rule_names;
  out.result["risks"] = reals(r.risks);
  out.result["reps"] = r.reps;
  out.result["true_counts"] = r.true_counts;
  Json per = Json::array();
  for (Eigen::Index j = 0; j < r.per_true_model.rows(); ++j) {
    per.push_back(Json{{"degree", degrees[static_cast<std::size_t>(j)]},
                       {"risks", reals(Eigen::VectorXd(r.per_true_model.row(j).transpose()))}});
  }
  out.result["per_true_model"] = per;
  out.table.header = {"rule", "true_degree", "risk", "count"};
  for (std::size_t k = 0; k < rules.size(); ++k) {
    out.table.add({r.rule_names[k], "all", format_real(r.risks[k]), std::to_string(r.reps)});
    for (std::size_t j = 0; j < degrees.size(); ++j) {
      out.table.add({r.rule_names[k], std::to_string(degrees[j]),
                     format_real(r.per_true_model(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k))),
                     std::to_string(r.true_counts[j])});
    }
  }
  out.diagnostics["design"] = design;
  out.diagnostics["n"] = x.size();
  out.diagnostics["column_scale"] = real(fam.scale);
  out.diagnostics["weights"] = reals(fam.set.weights);
  out.diagnostics["warnings"] = fam.warnings;
  return out;
}

inline Output run_poly_demo(const RunConfig& c) {
  const auto true_degree = parse_number<unsigned>("--true-degree", c.param("true-degree"));
  const std::vector<unsigned> degrees = parse_degrees(c.param("degrees"));
  const SweetSpotReport r = sweet_spot_experiment(
      true_degree, degrees, static_cast<std::size_t>(parse_count("n", c.param("n"))),
      parse_positive("sigma", c.param("sigma")), parse_positive("lambda", c.param("lambda")),
      static_cast<std::size_t>(parse_count("reps", c.param("reps"))),
      parse_number<std::uint64_t>("--seed", c.param("seed")));

  Output out;
  out.result["true_degree"] = true_degree;
  out.result["modal_degree"] = r.modal_degree;
  out.result["mean_relative_regret"] = real(r.mean_relative_regret);
  out.result["mean_chosen_rmse"] = real(r.mean_chosen_rmse);
  out.result["mean_best_rmse"] = real(r.mean_best_rmse);
  out.result["degrees"] = r.degrees;
  out.result["chosen_counts"] = r.chosen_counts;
  out.result["chosen_frequency"] = reals(r.chosen_frequency);
  out.result["mean_rmse"] = reals(r.mean_rmse);
  out.table.header = {"degree", "chosen_count", "chosen_frequency", "mean_test_rmse"};
  for (std::size_t i = 0; i < r.degrees.size(); ++i) {
    out.table.add({std::to_string(r.degrees[i]), std::to_string(r.chosen_counts[i]),
                   format_real(r.chosen_frequency[i]), format_real(r.mean_rmse[i])});
  }
  out.diagnostics["reps"] = r.reps;
  out.diagnostics["test_size"] = r.test_size;
  return out;
}

inline Output run_mackay_demo(const RunConfig& c) {
  const double sigma = parse_positive("sigma", c.param("sigma"));
  const double ls = parse_positive("lambda-simple", c.param("lambda-simple"));
  const double lc = parse_positive("lambda-complex", c.param("lambda-complex"));
  const double lo = parse_real("y-min", c.param("y-min"));
  const double hi = parse_real("y-max", c.param("y-max"));
  const auto points = static_cast<std::size_t>(parse_count("grid", c.param("grid")));
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = i + 1 == points ? hi
                              : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  const GaussianLinearSpec simple{Eigen::MatrixXd::Ones(1, 1), sigma, ls};
  const GaussianLinearSpec complex{Eigen::MatrixXd::Ones(1, 1), sigma, lc};
  const CrossoverReport r = mackay_crossover(simple, complex, grid);

  Output out;
  out.result["crossovers"] = reals(r.crossovers);
  out.result["residuals"] = reals(r.residuals);
  out.result["marginal_variance_simple"] = real(r.marginal_variance_simple);
  out.result["marginal_variance_complex"] = real(r.marginal_variance_complex);
  out.result["simple_wins_somewhere"] = r.simple_wins_somewhere;
  out.result["complex_wins_somewhere"] = r.complex_wins_somewhere;
  out.result["y"] = reals(r.y_grid);
  out.result["log_evidence_simple"] = reals(r.log_evidence_simple);
  out.result["log_evidence_complex"] = reals(r.log_evidence_complex);
  out.diagnostics["notes"] = r.notes;
  out.table.header = {"kind", "y", "log_evidence_simple", "log_evidence_complex", "difference"};
  for (std::size_t i = 0; i < r.y_grid.size(); ++i) {
    out.table.add({"grid", format_real(r.y_grid[i]), format_real(r.log_evidence_simple[i]),
                   format_real(r.log_evidence_complex[i]),
                   format_real(r.log_evidence_simple[i] - r.log_evidence_complex[i])});
  }
  const ObservationSet probe{Eigen::VectorXd(1), std::nullopt};
  for (std::size_t k = 0; k < r.crossovers.size(); ++k) {
    ObservationSet at = probe;
    at.y(0) = r.crossovers[k];
    const double a = glm_log_evidence(simple, at).log_evidence;
    const double b = glm_log_evidence(complex, at).log_evidence;
    out.table.add({"crossover", format_real(r.crossovers[k]), format_real(a), format_real(b),
                   format_real(r.residuals[k])});
  }
  return out;
}

inline Output run_bic_sweep(const RunConfig& c) {
  const double sigma = parse_positive("sigma", c.param("sigma"));
  const double lambda = parse_positive("lambda", c.param("lambda"));
  const std::vector<std::size_t> ns = parse_sizes("ns", c.param("ns"));
  const auto seed = parse_number<std::uint64_t>("--seed", c.param("seed"));
  SweepGenerator gen;
  if (c.param("family") == "all-ones") {
    gen = all_ones_generator(sigma, lambda);
  } else {
    const std::vector<double> t = parse_reals("theta", c.param("theta"));
    gen = linear_gaussian_generator(Eigen::Vector2d(t[0], t[1]), sigma, lambda);
  }
  const AsymptoticSweepResult r = bic_sweep(gen, ns, seed);

  Output out;
  out.result["d"] = r.d;
  out.result["ns"] = r.ns;
  out.result["flexibility"] = reals(r.flexibilities);
  out.result["bic_penalty"] = reals(r.bic_penalties);
  out.result["gap"] = reals(r.gaps);
  out.result["predicted_constant"] = real(r.predicted_constant);
  Json h = Json::array();
  for (Eigen::Index i = 0; i < r.H_hat.rows(); ++i) h.push_back(reals(Eigen::VectorXd(r.H_hat.row(i).transpose())));
  out.result["H_hat"] = h;
  out.result["m_hat"] = reals(r.m_hat);
  out.table.header = {"n", "flexibility", "bic_penalty", "gap", "predicted_constant"};
  for (std::size_t k = 0; k < r.ns.size(); ++k) {
    out.table.add({std::to_string(r.ns[k]), format_real(r.flexibilities[k]),
                   format_real(r.bic_penalties[k]), format_real(r.gaps[k]),
                   format_real(r.predicted_constant)});
  }
  return out;
}

inline Output execute(const RunConfig& c) {
  switch (c.command) {
    case Command::Fit: return run_fit(c);
    case Command::Evidence: return run_evidence(c);
    case Command::Decompose: return run_decompose(c);
    case Command::Select: return run_select(c);
    case Command::Risk: return run_risk(c);
    case Command::PolyDemo: return run_poly_demo(c);
    case Command::MackayDemo: return run_mackay_demo(c);
    case Command::BicSweep: return run_bic_sweep(c);
  }
  throw UsageError("unknown command");
}

}  // namespace detail

/// Executes a parsed configuration. 0 on success, 1 on a domain or I/O error.
inline int run(const RunConfig& config, std::ostream& diag = std::cerr) {
  try {
    const Output out = detail::execute(config);
    write_atomic(config.output_path, render(config, out));
    return 0;
  } catch (const UsageError& e) {
    diag << "ockham: usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    diag << "ockham: error: " << e.what() << "\n";
    return 1;
  }
}

inline int main_entry(const std::vector<std::string>& args, std::ostream& diag = std::cerr) {
  RunConfig config;
  try {
    config = parse_args(args);
  } catch (const HelpRequested& h) {
    std::cout << h.text;
    return 0;
  } catch (const UsageError& e) {
    diag << "ockham: usage error: " << e.what() << "\n";
    return 2;
  }
  return run(config, diag);
}

}  // namespace ockham::cli
