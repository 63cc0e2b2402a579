// flowsum command line: one subcommand per pipeline stage plus run-all.

#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "flowsum/errors.hpp"
#include "flowsum/pipeline.hpp"

namespace {

int run(int argc, char** argv) {
  CLI::App app{"Extractive summarization via flow-network sentence alignment"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> output_dir, corpus, embeddings;
  bool strict = false;
  bool dump_networks = false;

  app.add_option("--config", config_path, "pipeline config file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "override split and model seeds");
  app.add_option("--workers", workers, "admission-level worker threads (0 = cores)");
  app.add_option("--output-dir", output_dir, "override the run directory");
  app.add_option("--corpus", corpus, "override the corpus path");
  app.add_option("--embeddings", embeddings, "override the embeddings path");
  app.add_flag("--strict", strict, "fail fast on malformed or unresolvable input");
  app.add_flag("--dump-networks", dump_networks,
               "write per-admission alignment networks as Graphviz files");

  for (const char* name : {"align", "match", "dataset", "train", "generate", "eval",
                           "run-all"})
    app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  flowsum::PipelineConfig cfg = flowsum::PipelineConfig::from_file(config_path);
  if (seed) {
    cfg.split.seed = *seed;
    cfg.model.seed = *seed;
  }
  if (workers) cfg.workers = *workers;
  if (output_dir) cfg.output_dir = *output_dir;
  if (corpus) cfg.corpus = *corpus;
  if (embeddings) cfg.embeddings = *embeddings;
  if (strict) cfg.strict = true;
  if (dump_networks) cfg.dump_networks = true;
  cfg.validate();

  const std::string stage = app.get_subcommands().front()->get_name();
  if (stage == "align")
    flowsum::cmd_align(cfg);
  else if (stage == "match")
    flowsum::cmd_match(cfg);
  else if (stage == "dataset")
    flowsum::cmd_dataset(cfg);
  else if (stage == "train")
    flowsum::cmd_train(cfg);
  else if (stage == "generate")
    flowsum::cmd_generate(cfg);
  else if (stage == "eval")
    flowsum::cmd_eval(cfg);
  else
    flowsum::cmd_run_all(cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const flowsum::UserError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
}
