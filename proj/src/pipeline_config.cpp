#include "ubiphysio/pipeline_config.hpp"

#include "ubiphysio/errors.hpp"
#include "ubiphysio/file_util.hpp"

namespace ubiphysio {

PipelineConfig PipelineConfig::from_kv(const KvMap& kv) {
  PipelineConfig c;
  if (auto it = kv.find("seed"); it != kv.end()) {
    long s = kv_long("seed", it->second);
    if (s < 0) throw ValidationError("config seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (auto it = kv.find("vq.preset"); it != kv.end()) {
    if (it->second == "desk") {
      c.vq = VqConfig::desk();
    } else if (it->second == "full") {
      c.vq = VqConfig::full();
    } else {
      throw ValidationError("config vq.preset: expected desk or full, got '" + it->second + "'");
    }
    c.vq_preset = it->second;
  }
  c.vq.seed = c.seed;
  c.cls.seed = c.seed;

  KvMap vq, cls;
  for (const auto& [k, v] : kv) {
    if (k == "seed" || k == "vq.preset") continue;
    if (k.rfind("vq.", 0) == 0) {
      vq[k.substr(3)] = v;
    } else if (k.rfind("cls.", 0) == 0) {
      cls[k.substr(4)] = v;
    } else if (k == "llm.base_url") {
      c.llm.base_url = v;
    } else if (k == "llm.model") {
      c.llm.model = v;
    } else if (k == "llm.api_key_env") {
      c.llm.api_key_env = v;
    } else if (k == "llm.timeout_s") {
      c.llm.timeout_s = kv_double(k, v);
    } else if (k == "llm.max_in_flight") {
      c.llm.max_in_flight = static_cast<int>(kv_long(k, v));
    } else if (k == "metrics.bleu_mode") {
      if (v == "corpus") {
        c.bleu_mode = metrics::BleuMode::Corpus;
      } else if (v == "sentence") {
        c.bleu_mode = metrics::BleuMode::SentenceAverage;
      } else {
        throw ValidationError("config metrics.bleu_mode: expected corpus or sentence, got '" + v + "'");
      }
    } else if (k == "metrics.cider_sigma") {
      c.cider_sigma = kv_double(k, v);
    } else if (k == "paths.knowledge_base") {
      c.knowledge_base = v;
    } else if (k == "paths.label_table") {
      c.label_table = v;
    } else {
      throw ValidationError("unknown config key '" + k + "'");
    }
  }
  c.vq.apply(vq);
  c.cls.apply(cls);
  c.vq.validate();
  c.cls.validate();
  if (!(c.llm.timeout_s > 0.0)) throw ValidationError("config llm.timeout_s must be positive");
  if (c.llm.max_in_flight < 1) throw ValidationError("config llm.max_in_flight must be >= 1");
  if (!(c.cider_sigma > 0.0)) throw ValidationError("config metrics.cider_sigma must be positive");
  return c;
}

KvMap PipelineConfig::to_kv() const {
  KvMap kv;
  kv["seed"] = std::to_string(seed);
  kv["vq.preset"] = vq_preset;
  for (const auto& [k, v] : vq.to_kv()) kv["vq." + k] = v;
  for (const auto& [k, v] : cls.to_kv()) kv["cls." + k] = v;
  kv["llm.base_url"] = llm.base_url;
  kv["llm.model"] = llm.model;
  kv["llm.api_key_env"] = llm.api_key_env;
  kv["llm.timeout_s"] = format_double(llm.timeout_s);
  kv["llm.max_in_flight"] = std::to_string(llm.max_in_flight);
  kv["metrics.bleu_mode"] = bleu_mode == metrics::BleuMode::Corpus ? "corpus" : "sentence";
  kv["metrics.cider_sigma"] = format_double(cider_sigma);
  kv["paths.knowledge_base"] = knowledge_base;
  kv["paths.label_table"] = label_table;
  return kv;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path, const KvMap& overrides) {
  KvMap kv = path.empty() ? KvMap{} : parse_kv(read_file(path));
  for (const auto& [k, v] : overrides) kv[k] = v;
  return PipelineConfig::from_kv(kv);
}

}  // namespace ubiphysio
