#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ubiphysio/classifier.hpp"
#include "ubiphysio/kv.hpp"
#include "ubiphysio/llm.hpp"
#include "ubiphysio/metrics.hpp"
#include "ubiphysio/vq.hpp"

namespace ubiphysio {

// Whole-pipeline settings as one flat key=value file. Keys:
//   seed                      root seed; vq.seed and cls.seed follow it unless set
//   vq.preset                 desk | full, applied before the vq.* keys
//   vq.<key>, cls.<key>       fields of VqConfig / ClsConfig
//   llm.base_url, llm.model, llm.api_key_env, llm.timeout_s, llm.max_in_flight
//   metrics.bleu_mode         corpus | sentence
//   metrics.cider_sigma
//   paths.knowledge_base, paths.label_table
// Any other key is rejected.
struct PipelineConfig {
  std::uint64_t seed = 0;
  std::string vq_preset = "desk";
  VqConfig vq = VqConfig::desk();
  ClsConfig cls;
  LlmConfig llm;
  metrics::BleuMode bleu_mode = metrics::BleuMode::Corpus;
  double cider_sigma = 6.0;
  std::string knowledge_base = "data/knowledge_base.jsonl";
  std::string label_table;  // empty: built-in table

  static PipelineConfig from_kv(const KvMap& kv);
  KvMap to_kv() const;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path, const KvMap& overrides = {});

}  // namespace ubiphysio
