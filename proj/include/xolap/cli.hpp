#pragma once

#include <cstdlib>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xolap/error.hpp"
#include "xolap/matcher.hpp"
#include "xolap/mdmodel.hpp"
#include "xolap/pattern.hpp"
#include "xolap/rollup.hpp"
#include "xolap/xmltree.hpp"

namespace xolap::cli {

enum class Command { match, embed, rollup, classify, validate };
enum class Format { xml, json };

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int data = 2;
inline constexpr int divergence = 3;
}  // namespace exit_code

struct CliConfig {
  Command command = Command::match;
  std::string document_path;
  std::optional<std::string> pattern_path;
  std::optional<std::string> schema_path;
  std::optional<std::string> dimension;
  std::optional<std::string> fact;
  std::optional<std::string> hierarchy;
  std::optional<std::string> measure;
  std::optional<std::string> value;
  std::optional<std::string> agg;
  Format output_format = Format::xml;
  bool oracle_check = false;
  // Replaces the default node limits of both oracles (XOLAP_ORACLE_LIMIT).
  std::optional<std::size_t> oracle_node_limit;
};

// Reads XOLAP_ORACLE_LIMIT; unset or unparsable leaves the defaults.
inline std::optional<std::size_t> oracle_limit_from_env() {
  const char* v = std::getenv("XOLAP_ORACLE_LIMIT");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long long n = std::strtoull(v, &end, 10);
  if (*end != '\0' || n == 0) return std::nullopt;
  return static_cast<std::size_t>(n);
}

// Returns an empty string when cfg carries everything its command needs.
inline std::string missing_arguments(const CliConfig& cfg) {
  std::vector<std::string> missing;
  const bool needs_document = cfg.command != Command::validate;
  if (needs_document && cfg.document_path.empty()) missing.push_back("--document");
  switch (cfg.command) {
    case Command::match:
    case Command::embed:
    case Command::validate:
      if (!cfg.pattern_path) missing.push_back("--pattern");
      break;
    case Command::classify:
      if (!cfg.schema_path) missing.push_back("--schema");
      break;
    case Command::rollup:
      if (!cfg.fact) missing.push_back("--fact");
      if (!cfg.hierarchy) missing.push_back("--hierarchy");
      if (!cfg.measure) missing.push_back("--measure");
      if (!cfg.value) missing.push_back("--value");
      if (!cfg.agg) missing.push_back("--agg");
      break;
  }
  std::string out;
  for (const auto& m : missing) out += (out.empty() ? "missing " : ", ") + m;
  return out;
}

namespace detail {

// Failure attributed to one input file.
struct FileError {
  std::string file;
  std::string message;
  int code;
};

template <typename F>
auto from_file(const std::string& path, F&& load) {
  try {
    return load(path);
  } catch (const Error& e) {
    throw FileError{path, e.what(), exit_code::data};
  }
}

inline std::string text_of(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LookupError("cannot open file");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline int run_match(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  const DataTree doc = from_file(cfg.document_path, [](const std::string& p) { return parse_document(text_of(p)); });
  PatternTree pt = from_file(*cfg.pattern_path, [](const std::string& p) { return parse_pattern(text_of(p)); });
  if (cfg.command == Command::embed) pt.formula = Formula::always();
  const std::vector<Binding> bindings = match(pt, doc);
  if (cfg.oracle_check) {
    OracleLimits limits;
    if (cfg.oracle_node_limit) limits.max_tree_nodes = *cfg.oracle_node_limit;
    std::vector<Binding> expected;
    try {
      expected = match_oracle(pt, doc, limits);
    } catch (const OracleLimitError& e) {
      throw FileError{cfg.document_path, e.what(), exit_code::data};
    }
    if (expected != bindings) {
      err << cfg.document_path << ": oracle divergence: engine returned " << bindings.size()
          << " bindings, oracle " << expected.size() << "\n";
      return exit_code::divergence;
    }
    err << "oracle check passed (" << bindings.size() << " bindings)\n";
  }
  if (cfg.output_format == Format::json) {
    out << bindings_to_json(pt, bindings, doc).dump(2) << "\n";
  } else {
    out << serialize(build_witness(pt, bindings, doc));
  }
  return exit_code::ok;
}

inline int run_rollup(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto agg = parse_aggregate_kind(*cfg.agg);
  if (!agg) {
    err << "--agg must be one of sum, count, avg, min, max (got '" << *cfg.agg << "')\n";
    return exit_code::usage;
  }
  const RollupQuery q{*cfg.fact, *cfg.hierarchy, *cfg.measure, *cfg.value, *agg};
  try {
    q.check();
  } catch (const InvariantError& e) {
    err << e.what() << "\n";
    return exit_code::usage;
  }
  const DataTree doc = from_file(cfg.document_path, [](const std::string& p) { return parse_document(text_of(p)); });
  const RollupResult result = from_file(cfg.document_path, [&](const std::string&) { return rollup(doc, q); });
  if (cfg.oracle_check) {
    RollupOracleLimits limits;
    if (cfg.oracle_node_limit) limits.max_tree_nodes = *cfg.oracle_node_limit;
    const Decimal expected =
        from_file(cfg.document_path, [&](const std::string&) { return rollup_oracle(doc, q, limits); });
    if (expected != result.value) {
      err << cfg.document_path << ": oracle divergence: rollup " << result.value.to_string() << ", oracle "
          << expected.to_string() << "\n";
      return exit_code::divergence;
    }
  }
  const std::string footer = "{\"value\":" + result.value.to_string() +
                             ",\"matched_facts\":" + std::to_string(result.matched_facts) + "}";
  if (cfg.output_format == Format::json) {
    out << footer << "\n";
  } else {
    out << serialize(result.witness);
    err << footer << "\n";
  }
  return exit_code::ok;
}

inline int run_classify(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  const DataTree doc = from_file(cfg.document_path, [](const std::string& p) { return parse_document(text_of(p)); });
  const SchemaConfig schema =
      from_file(*cfg.schema_path, [](const std::string& p) { return parse_schema_config(text_of(p)); });
  const WarehouseView view = from_file(cfg.document_path, [&](const std::string&) { return bind_schema(doc, schema); });
  for (const auto& w : view.warnings) err << cfg.document_path << ": warning: " << w << "\n";
  std::vector<std::string> dims = schema.dimension_roots;
  if (cfg.dimension) dims = {*cfg.dimension};
  nlohmann::json report = nlohmann::json::object();
  for (const auto& d : dims) {
    const HierarchyClass c = from_file(*cfg.schema_path, [&](const std::string&) { return classify_hierarchy(view, d); });
    report[d] = {{"strict", c.strict}, {"covering", c.covering}, {"complex", c.complex}};
  }
  out << report.dump(2) << "\n";
  return exit_code::ok;
}

inline int run_validate(const CliConfig& cfg, std::ostream& out) {
  const PatternTree pt = from_file(*cfg.pattern_path, [](const std::string& p) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text_of(p));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(e.what());
    }
    return pattern_from_json(j);
  });
  const std::vector<std::string> report = validate_pattern(pt);
  out << nlohmann::json{{"valid", report.empty()}, {"violations", report}}.dump(2) << "\n";
  return report.empty() ? exit_code::ok : exit_code::data;
}

}  // namespace detail

// Executes one command. Artifacts go to out, diagnostics to err.
inline int run(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  if (const std::string missing = missing_arguments(cfg); !missing.empty()) {
    err << "usage error: " << missing << "\n";
    return exit_code::usage;
  }
  try {
    switch (cfg.command) {
      case Command::match:
      case Command::embed:
        return detail::run_match(cfg, out, err);
      case Command::rollup:
        return detail::run_rollup(cfg, out, err);
      case Command::classify:
        return detail::run_classify(cfg, out, err);
      case Command::validate:
        return detail::run_validate(cfg, out);
    }
  } catch (const detail::FileError& e) {
    err << e.file << ": " << e.message << "\n";
    return e.code;
  } catch (const Error& e) {
    err << cfg.document_path << ": " << e.what() << "\n";
    return exit_code::data;
  }
  return exit_code::usage;
}

}  // namespace xolap::cli
