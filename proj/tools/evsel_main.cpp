// evsel: command-line driver for chunking, selection, poisoning,
// evaluation and preference-data export.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "evsel/config.hpp"
#include "evsel/errors.hpp"
#include "evsel/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> output;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<double> tau;
  std::optional<std::string> expansion;
  std::optional<std::size_t> chunk_size;
  std::optional<std::size_t> n_rationales;
  std::optional<std::string> verifier;
  std::optional<double> fraction;
};

bool parse_switch(const std::string& field, const std::string& value) {
  if (value == "on" || value == "true") return true;
  if (value == "off" || value == "false") return false;
  throw evsel::ConfigError(field, "expected on|off, got '" + value + "'");
}

evsel::RunConfig build_config(const Overrides& o) {
  evsel::RunConfig c = evsel::load_config(o.config);
  if (o.output) c.output_dir = std::filesystem::absolute(*o.output).string();
  if (o.seed) {
    c.poisoning.seed = *o.seed;
    c.prefs.seed = *o.seed;
  }
  if (o.workers) c.workers = *o.workers;
  if (o.tau) c.ecse.tau = *o.tau;
  if (o.expansion) c.ecse.expansion = parse_switch("ecse.expansion", *o.expansion);
  if (o.chunk_size) c.chunk_size = *o.chunk_size;
  if (o.n_rationales) c.ecse.n_rationales = *o.n_rationales;
  if (o.verifier) c.verifier.enabled = parse_switch("verifier.enabled", *o.verifier);
  if (o.fraction) c.poisoning.fraction = *o.fraction;
  evsel::validate_config(c);
  return c;
}

nlohmann::json error_json(const std::exception& e) {
  nlohmann::json err{{"message", e.what()}};
  if (const auto* s = dynamic_cast<const evsel::SchemaError*>(&e)) {
    err["type"] = "schema";
    err["source"] = s->source();
    err["line"] = s->line();
    err["field"] = s->field();
  } else if (const auto* c = dynamic_cast<const evsel::ConfigError*>(&e)) {
    err["type"] = "config";
    err["field"] = c->field();
  } else if (const auto* m = dynamic_cast<const evsel::MissingArtifactError*>(&e)) {
    err["type"] = "missing_artifact";
    err["path"] = m->path();
    err["producer"] = m->producer();
  } else if (const auto* t = dynamic_cast<const evsel::TransportError*>(&e)) {
    err["type"] = "transport";
    err["retryable"] = t->retryable();
    if (t->status()) err["status"] = t->status();
  } else if (dynamic_cast<const evsel::Error*>(&e) != nullptr) {
    err["type"] = "error";
  } else {
    err["type"] = "internal";
  }
  return {{"error", err}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evidence selection pipeline"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config, "Run configuration (JSON)")->required();
  app.add_option("--output", o.output, "Output directory (overrides output_dir)");
  app.add_option("--seed", o.seed, "Seed for poisoning and preference splits");
  app.add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--tau", o.tau, "Elbow z-score threshold");
  app.add_option("--expansion", o.expansion, "Neighbour expansion (on|off)");
  app.add_option("--chunk-size", o.chunk_size, "Tokens per chunk");
  app.add_option("--n-rationales", o.n_rationales, "Rationales per query");
  app.add_option("--verifier", o.verifier, "Run the verifier (on|off)");
  app.add_option("--fraction", o.fraction, "Fraction of instances to poison");

  auto* chunk = app.add_subcommand("chunk", "Chunk the corpus and resolve gold spans");
  auto* poison = app.add_subcommand("poison", "Inject poisoned chunks");
  auto* select = app.add_subcommand("select", "Generate rationales, select and verify evidence");
  auto* eval = app.add_subcommand("eval", "Score selections and baselines");
  auto* prefs = app.add_subcommand("build-prefs", "Export preference pairs");
  for (auto* sub : {chunk, poison, select, eval, prefs}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const evsel::RunConfig config = build_config(o);
    if (chunk->parsed()) {
      evsel::cmd_chunk(config);
      return EXIT_SUCCESS;
    }
    const auto providers = evsel::Providers::from_config(config);
    if (poison->parsed()) evsel::cmd_poison(config, providers);
    if (select->parsed()) evsel::cmd_select(config, providers);
    if (eval->parsed()) evsel::cmd_eval(config, providers);
    if (prefs->parsed()) evsel::cmd_build_prefs(config, providers);
  } catch (const std::exception& e) {
    std::cerr << error_json(e).dump() << "\n";
    return EXIT_FAILURE;
  }
  return EXIT_SUCCESS;
}
