#pragma once

// Pipeline orchestration behind the CLI: a declarative config plus one
// function per stage. Every stage reads and writes plain files in the
// run directory, so stages can be re-run and diffed independently.

#include <filesystem>
#include <string>
#include <vector>

#include "flowsum/align.hpp"
#include "flowsum/dataset.hpp"
#include "flowsum/model.hpp"

namespace flowsum {

struct PipelineConfig {
  std::filesystem::path corpus;
  std::filesystem::path embeddings;
  std::filesystem::path output_dir;
  AlignConfig align;
  SplitSpec split;
  ModelConfig model;
  std::vector<std::string> sections;  // section vocabulary, output order
  bool strict = false;
  unsigned workers = 0;  // 0 = hardware concurrency
  bool dump_networks = false;

  // Relative paths resolve against the config file's directory.
  static PipelineConfig from_file(const std::filesystem::path& path);
  void validate() const;
};

const std::vector<std::string>& default_sections();

void cmd_align(const PipelineConfig& cfg);
void cmd_match(const PipelineConfig& cfg);
void cmd_dataset(const PipelineConfig& cfg);
void cmd_train(const PipelineConfig& cfg);
void cmd_generate(const PipelineConfig& cfg);
void cmd_eval(const PipelineConfig& cfg);
void cmd_run_all(const PipelineConfig& cfg);

}  // namespace flowsum
