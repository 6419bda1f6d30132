// Command-line front end: match/embed pattern files against XML documents,
// run rollups, classify hierarchies and validate patterns.

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "xolap/cli.hpp"

namespace {

using xolap::cli::CliConfig;
using xolap::cli::Command;
using xolap::cli::Format;

void add_document(CLI::App* sub, CliConfig& cfg) {
  sub->add_option("-d,--document", cfg.document_path, "XML document")->required();
}

void add_common(CLI::App* sub, CliConfig& cfg) {
  sub->add_option("--format", cfg.output_format, "Output format")
      ->transform(CLI::CheckedTransformer(std::map<std::string, Format>{{"xml", Format::xml}, {"json", Format::json}}));
  sub->add_flag("--oracle-check", cfg.oracle_check, "Cross-check the result against the brute-force oracle");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xolap: tree pattern matching and rollup over multidimensional XML"};
  app.require_subcommand(1);
  CliConfig cfg;

  for (auto [name, cmd, help] : {std::tuple{"match", Command::match, "Match a pattern (structure and formula)"},
                                 std::tuple{"embed", Command::embed, "Embed a pattern (structure only)"}}) {
    auto* sub = app.add_subcommand(name, help);
    add_document(sub, cfg);
    sub->add_option("-p,--pattern", cfg.pattern_path, "Pattern JSON file")->required();
    add_common(sub, cfg);
    sub->callback([&cfg, cmd = cmd] { cfg.command = cmd; });
  }

  auto* roll = app.add_subcommand("rollup", "Aggregate a measure up to a hierarchy value");
  add_document(roll, cfg);
  roll->add_option("--fact", cfg.fact, "Fact element label")->required();
  roll->add_option("--hierarchy", cfg.hierarchy, "Hierarchy container label")->required();
  roll->add_option("--measure", cfg.measure, "Measure element label")->required();
  roll->add_option("--value", cfg.value, "Hierarchy value to aggregate to")->required();
  roll->add_option("--agg", cfg.agg, "sum, count, avg, min or max")->required();
  add_common(roll, cfg);
  roll->callback([&cfg] { cfg.command = Command::rollup; });

  auto* classify = app.add_subcommand("classify", "Classify dimension hierarchies");
  add_document(classify, cfg);
  classify->add_option("-s,--schema", cfg.schema_path, "Schema JSON file")->required();
  classify->add_option("--dimension", cfg.dimension, "Only this dimension");
  classify->callback([&cfg] { cfg.command = Command::classify; });

  auto* validate = app.add_subcommand("validate", "Validate a pattern file");
  validate->add_option("-p,--pattern", cfg.pattern_path, "Pattern JSON file")->required();
  validate->callback([&cfg] { cfg.command = Command::validate; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return xolap::cli::exit_code::usage;
  }
  cfg.oracle_node_limit = xolap::cli::oracle_limit_from_env();
  return xolap::cli::run(cfg, std::cout, std::cerr);
}
