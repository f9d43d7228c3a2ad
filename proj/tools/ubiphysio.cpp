// Command-line front end: one subcommand per pipeline stage. Every command
// writes its effective configuration and a result.json into a run directory.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ubiphysio/actions.hpp"
#include "ubiphysio/classifier.hpp"
#include "ubiphysio/dataset.hpp"
#include "ubiphysio/errors.hpp"
#include "ubiphysio/features.hpp"
#include "ubiphysio/file_util.hpp"
#include "ubiphysio/language.hpp"
#include "ubiphysio/llm.hpp"
#include "ubiphysio/metrics.hpp"
#include "ubiphysio/pipeline_config.hpp"
#include "ubiphysio/plot.hpp"
#include "ubiphysio/preprocess.hpp"
#include "ubiphysio/synth.hpp"
#include "ubiphysio/vq.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ubiphysio;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string run_dir;
  std::optional<long> seed;
  bool json_out = false;
  std::string log_level = "info";
};

class Run {
 public:
  Run(const Common& common, const std::string& command, const KvMap& flag_overrides) {
    KvMap overrides;
    for (const auto& s : common.sets) {
      auto eq = s.find('=');
      if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + s + "'");
      overrides[s.substr(0, eq)] = s.substr(eq + 1);
    }
    if (common.seed) overrides["seed"] = std::to_string(*common.seed);
    for (const auto& [k, v] : flag_overrides) overrides[k] = v;
    cfg = load_pipeline_config(common.config_path, overrides);
    dir = common.run_dir.empty() ? fs::path("runs") / command : fs::path(common.run_dir);
    fs::create_directories(dir);
    write_file(dir / "config.kv", "# effective configuration of '" + command + "'\n" + format_kv(cfg.to_kv()));
    result["command"] = command;
    json_out_ = common.json_out;
  }

  fs::path path(const std::string& name) const { return dir / name; }

  void finish() {
    result["run_dir"] = dir.string();
    write_file(dir / "result.json", result.dump(2) + "\n");
    if (json_out_) {
      std::cout << result.dump() << "\n";
    } else {
      for (const auto& [k, v] : result.items()) {
        if (!v.is_structured()) std::cout << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
      }
    }
  }

  PipelineConfig cfg;
  fs::path dir;
  json result;

 private:
  bool json_out_ = false;
};

PromptOptions prompt_options(const PipelineConfig& cfg) {
  PromptOptions opt;
  if (!cfg.label_table.empty()) opt.labels = LabelTable::load(cfg.label_table);
  opt.codebook_size = cfg.vq.codebook_size;
  return opt;
}

int parse_action(const std::string& s) {
  try {
    std::size_t used = 0;
    int v = std::stoi(s, &used);
    if (used == s.size()) {
      action_info(v);
      return v;
    }
  } catch (const std::invalid_argument&) {
  } catch (const std::out_of_range&) {
  }
  return action_from_name(s);
}

FeatureMatrix features_of(const fs::path& data, ManifestEntry& e) {
  if (!e.features.empty() && fs::exists(data / e.features)) return load_features(data / e.features);
  auto seq = load_sequence(data / e.motion);
  return extract(preprocess(seq, CanonicalSkeleton::standard()));
}

// ---- synth ----

struct SynthArgs {
  std::string out;
  std::string actions = "all";
  int per_class = 40;
  int repeats = 1;
  double min_duration = 3.0, max_duration = 6.0, pattern_prob = 0.3;
  std::string format = "bin";
};

void cmd_synth(const Common& common, const SynthArgs& a) {
  Run run(common, "synth", {});
  SynthDatasetSpec spec;
  spec.participants = a.per_class;
  spec.repeats = a.repeats;
  spec.min_duration_s = a.min_duration;
  spec.max_duration_s = a.max_duration;
  spec.pattern_prob = a.pattern_prob;
  spec.seed = run.cfg.seed;
  if (a.actions != "all") {
    std::stringstream ss(a.actions);
    std::string item;
    while (std::getline(ss, item, ',')) spec.actions.push_back(parse_action(item));
  }
  if (a.format != "bin" && a.format != "csv") throw ValidationError("--format must be bin or csv");
  const auto t0 = Clock::now();
  auto items = synthesize_dataset(spec);
  const fs::path out(a.out);
  std::vector<ManifestEntry> manifest;
  long frames = 0;
  for (auto& it : items) {
    ManifestEntry e;
    e.id = it.id;
    e.participant = it.participant;
    e.action_type = it.data.annotation.action_type;
    e.patterns = it.data.annotation.patterns;
    e.motion = "motion/" + it.id + "." + a.format;
    e.descriptions = it.descriptions;
    fs::create_directories(out / "motion");
    save_sequence(it.data.motion, out / e.motion);
    frames += it.data.motion.size();
    manifest.push_back(std::move(e));
  }
  save_manifest(manifest, out);
  run.result["dataset"] = out.string();
  run.result["instances"] = manifest.size();
  run.result["frames"] = frames;
  run.result["seconds"] = seconds_since(t0);
  spdlog::info("synthesized {} instances into {}", manifest.size(), out.string());
  run.finish();
}

// ---- ingest ----

struct IngestArgs {
  std::string motion, annotations, out, participant;
};

void cmd_ingest(const Common& common, const IngestArgs& a) {
  Run run(common, "ingest", {});
  const fs::path out(a.out);
  auto seq = load_sequence(a.motion);
  auto anns = load_annotations(a.annotations);
  auto instances = segment_instances(seq, anns);
  std::vector<ManifestEntry> manifest;
  if (fs::exists(out / kManifestName)) manifest = load_manifest(out);
  const std::string stem = fs::path(a.motion).stem().string();
  const std::string participant = a.participant.empty() ? stem : a.participant;
  fs::create_directories(out / "motion");
  for (std::size_t i = 0; i < instances.size(); ++i) {
    ManifestEntry e;
    e.id = fmt::format("{}_{:03d}", stem, i);
    e.participant = participant;
    e.action_type = instances[i].annotation.action_type;
    e.patterns = instances[i].annotation.patterns;
    e.motion = "motion/" + e.id + ".bin";
    save_sequence(instances[i].motion, out / e.motion);
    manifest.push_back(std::move(e));
  }
  save_manifest(manifest, out);
  run.result["instances_added"] = instances.size();
  run.result["instances_total"] = manifest.size();
  run.finish();
}

// ---- extract ----

struct ExtractArgs {
  std::string data, in, out;
};

void cmd_extract(const Common& common, const ExtractArgs& a) {
  Run run(common, "extract", {});
  long frames = 0;
  double seconds = 0.0;
  if (!a.in.empty()) {
    if (a.out.empty()) throw ValidationError("extract --in needs --out");
    auto seq = load_sequence(a.in);
    const auto t0 = Clock::now();
    auto f = extract(preprocess(seq, CanonicalSkeleton::standard()));
    seconds = seconds_since(t0);
    save_features(f, a.out);
    frames = f.frames();
    run.result["width"] = f.values.cols();
  } else {
    if (a.data.empty()) throw ValidationError("extract needs --data or --in");
    const fs::path data(a.data);
    auto manifest = load_manifest(data);
    for (auto& e : manifest) {
      auto seq = load_sequence(data / e.motion);
      const auto t0 = Clock::now();
      auto f = extract(preprocess(seq, CanonicalSkeleton::standard()));
      seconds += seconds_since(t0);
      e.features = "features/" + e.id + ".ubft";
      save_features(f, data / e.features);
      frames += f.frames();
    }
    save_manifest(manifest, data);
    run.result["instances"] = manifest.size();
  }
  run.result["frames"] = frames;
  run.result["ms_per_frame"] = frames ? 1000.0 * seconds / static_cast<double>(frames) : 0.0;
  run.finish();
}

// ---- train-vqvae ----

struct TrainVqArgs {
  std::string data, out;
  long steps = 0;
};

void cmd_train_vqvae(const Common& common, const TrainVqArgs& a) {
  KvMap flags;
  if (a.steps > 0) flags["vq.steps"] = std::to_string(a.steps);
  Run run(common, "train-vqvae", flags);
  const fs::path data(a.data);
  auto manifest = load_manifest(data);
  std::vector<FeatureMatrix> feats;
  for (auto& e : manifest) feats.push_back(features_of(data, e));
  auto res = train_vqvae(feats, run.cfg.vq, [](const VqLogRow& r) {
    spdlog::info("step {} loss {:.4f} recon {:.4f} perplexity {:.1f}", r.step, r.total, r.recon_plain, r.perplexity);
  });
  const fs::path model = a.out.empty() ? run.path("vqvae.ubvq") : fs::path(a.out);
  res.model->save(model);
  write_vq_log_csv(res.log, run.path("vq_log.csv"));
  auto table = parse_csv(read_file(run.path("vq_log.csv")));
  write_file(run.path("vq_curve.svg"),
             curve_svg(curves_from_csv(table, "step", {"recon_plain", "commit"}), "step", "VQ-VAE training"));
  run.result["model"] = model.string();
  run.result["initial_recon"] = res.initial_recon;
  run.result["final_recon"] = res.final_recon;
  run.result["recon_drop"] = res.initial_recon > 0 ? 1.0 - res.final_recon / res.initial_recon : 0.0;
  run.result["codes_used_tail"] = res.codes_used_tail;
  run.result["codebook_size"] = run.cfg.vq.codebook_size;
  run.result["seconds"] = res.seconds;
  run.finish();
}

// ---- tokenize ----

struct TokenizeArgs {
  std::string model, in, data, out;
};

void cmd_tokenize(const Common& common, const TokenizeArgs& a) {
  Run run(common, "tokenize", {});
  auto model = VqModel::load(a.model);
  if (!a.in.empty()) {
    auto seq = load_sequence(a.in);
    const auto t0 = Clock::now();
    auto t = tokenize(*model, seq);
    const double s = seconds_since(t0);
    run.result["tokens"] = t.tokens;
    run.result["frames"] = t.frames;
    run.result["n"] = t.tokens.size();
    run.result["ms_per_frame"] = t.frames ? 1000.0 * s / t.frames : 0.0;
  } else {
    if (a.data.empty()) throw ValidationError("tokenize needs --in or --data");
    const fs::path data(a.data);
    auto manifest = load_manifest(data);
    std::vector<TokenSequence> seqs;
    double s = 0.0;
    long frames = 0;
    for (auto& e : manifest) {
      auto f = features_of(data, e);
      const auto t0 = Clock::now();
      auto t = tokenize_features(*model, f);
      s += seconds_since(t0);
      frames += t.frames;
      t.id = e.id;
      seqs.push_back(std::move(t));
    }
    const fs::path out = a.out.empty() ? run.path("tokens.jsonl") : fs::path(a.out);
    save_tokens_jsonl(seqs, out);
    run.result["sequences"] = seqs.size();
    run.result["tokens_file"] = out.string();
    run.result["ms_per_frame"] = frames ? 1000.0 * s / static_cast<double>(frames) : 0.0;
  }
  run.finish();
}

// ---- train-classifier ----

struct TrainClsArgs {
  std::string data, out;
  int epochs = 0;
};

std::vector<std::string> class_labels(int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back(std::to_string(i));
  return out;
}

void cmd_train_classifier(const Common& common, const TrainClsArgs& a) {
  KvMap flags;
  if (a.epochs > 0) flags["cls.epochs"] = std::to_string(a.epochs);
  Run run(common, "train-classifier", flags);
  const fs::path data(a.data);
  auto manifest = load_manifest(data);
  std::vector<LabeledInstance> inst;
  for (auto& e : manifest) inst.push_back({e.id, e.participant, e.action_type, features_of(data, e)});
  auto res = train_classifier(inst, run.cfg.cls, [](const ClsEpochLog& l) {
    spdlog::info("epoch {} loss {:.4f} train acc {:.3f} val macro F1 {:.3f}", l.epoch, l.train_loss,
                 l.train_accuracy, l.val_macro_f1);
  });
  const fs::path model = a.out.empty() ? run.path("classifier.ubcl") : fs::path(a.out);
  res.model->save(model);

  std::string log = "epoch,lr,train_loss,train_accuracy,val_macro_f1\n";
  for (const auto& l : res.log) {
    log += fmt::format("{},{},{},{},{}\n", l.epoch, l.lr, l.train_loss, l.train_accuracy, l.val_macro_f1);
  }
  write_file(run.path("training_curve.csv"), log);
  write_file(run.path("training_curve.svg"),
             curve_svg(curves_from_csv(parse_csv(log), "epoch", {"train_loss", "train_accuracy", "val_macro_f1"}),
                       "epoch", "Classifier training"));
  const auto labels = class_labels(run.cfg.cls.num_classes);
  write_file(run.path("confusion.csv"), confusion_to_csv(res.test.confusion, labels));
  write_file(run.path("confusion.svg"), confusion_svg(res.test.confusion, labels, "Test confusion matrix"));

  std::string preds;
  for (std::size_t i = 0; i < res.test_ids.size(); ++i) {
    preds += json{{"id", res.test_ids[i]}, {"label", res.test_predicted[i]}, {"truth", res.test_truth[i]}}.dump() +
             "\n";
  }
  write_file(run.path("test_predictions.jsonl"), preds);

  auto split = [](const std::set<std::string>& s) { return std::vector<std::string>(s.begin(), s.end()); };
  run.result["model"] = model.string();
  run.result["macro_f1"] = res.test.macro_f1;
  run.result["accuracy"] = res.test.accuracy;
  run.result["best_epoch"] = res.best_epoch;
  run.result["test_instances"] = res.test_ids.size();
  run.result["masked_classes"] = res.masked_classes;
  run.result["split"] = {{"train", split(res.split.train)}, {"val", split(res.split.val)}, {"test", split(res.split.test)}};
  run.result["seconds"] = res.seconds;
  run.finish();
}

// ---- classify ----

struct ClassifyArgs {
  std::string model, in, data, out;
};

void cmd_classify(const Common& common, const ClassifyArgs& a) {
  Run run(common, "classify", {});
  auto model = Classifier::load(a.model);
  if (!a.in.empty()) {
    auto seq = load_sequence(a.in);
    auto p = model->predict(extract(preprocess(seq, CanonicalSkeleton::standard())));
    run.result["label"] = p.label;
    run.result["action"] = std::string(action_info(p.label).name);
    run.result["label_text"] = std::string(action_info(p.label).label_text);
    run.finish();
    return;
  }
  if (a.data.empty()) throw ValidationError("classify needs --in or --data");
  const fs::path data(a.data);
  auto manifest = load_manifest(data);
  std::vector<int> truth, pred;
  std::string lines;
  int skipped = 0;
  for (auto& e : manifest) {
    try {
      auto p = model->predict(features_of(data, e));
      truth.push_back(e.action_type);
      pred.push_back(p.label);
      lines += json{{"id", e.id}, {"label", p.label}, {"truth", e.action_type}}.dump() + "\n";
    } catch (const InsufficientFramesError& err) {
      spdlog::warn("{}: {}", e.id, err.what());
      ++skipped;
    }
  }
  const fs::path out = a.out.empty() ? run.path("predictions.jsonl") : fs::path(a.out);
  write_file(out, lines);
  run.result["predictions_file"] = out.string();
  run.result["instances"] = pred.size();
  run.result["skipped"] = skipped;
  if (!pred.empty()) {
    auto rep = metrics::classification_report(truth, pred, model->config().num_classes);
    run.result["accuracy"] = rep.accuracy;
    run.result["macro_f1"] = rep.macro_f1;
  }
  run.finish();
}

// ---- export-finetune ----

struct ExportArgs {
  std::string data, tokens, out;
  bool tokens_only = false;
};

void cmd_export(const Common& common, const ExportArgs& a) {
  Run run(common, "export-finetune", {});
  const fs::path data(a.data);
  auto manifest = load_manifest(data);
  std::map<std::string, std::vector<int>> tokens;
  for (auto& t : load_tokens_jsonl(a.tokens)) tokens[t.id] = std::move(t.tokens);
  std::vector<FinetuneInstance> inst;
  for (const auto& e : manifest) {
    auto it = tokens.find(e.id);
    if (it == tokens.end()) throw NotFoundError("no tokens for instance '" + e.id + "'");
    if (e.descriptions.empty()) {
      spdlog::warn("instance '{}' has no descriptions, skipped", e.id);
      continue;
    }
    inst.push_back({e.id, e.action_type, it->second, e.descriptions});
  }
  auto records = build_finetune_records(inst, !a.tokens_only, prompt_options(run.cfg));
  const fs::path out = a.out.empty() ? run.path("finetune.jsonl") : fs::path(a.out);
  write_file(out, finetune_to_jsonl(records));
  run.result["instances"] = inst.size();
  run.result["records"] = records.size();
  run.result["action_conditioned"] = !a.tokens_only;
  run.result["output"] = out.string();
  run.finish();
}

// ---- feedback ----

struct FeedbackArgs {
  std::string profile, desc, desc_text, kb, action, batch, data, base_url, model;
  bool no_knowledge = false;
  bool mock = false;
};

int infer_action(const std::string& description) {
  std::string lower = description;
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  int best = 0;
  std::size_t best_len = 0;
  for (const auto& info : action_catalog()) {
    if (lower.find(info.label_text) != std::string::npos && info.label_text.size() > best_len) {
      best = info.id;
      best_len = info.label_text.size();
    }
  }
  if (!best) throw NotFoundError("cannot infer the action type from the description; pass --action");
  return best;
}

void cmd_feedback(const Common& common, const FeedbackArgs& a) {
  KvMap flags;
  if (!a.base_url.empty()) flags["llm.base_url"] = a.base_url;
  if (!a.model.empty()) flags["llm.model"] = a.model;
  Run run(common, "feedback", flags);
  LlmConfig llm = run.cfg.llm;
  llm.mock = a.mock;
  LlmClient client(llm);
  const auto profile = UserProfile::from_json(read_file(a.profile));
  std::optional<KnowledgeBase> kb;
  if (!a.no_knowledge) kb = KnowledgeBase::load(a.kb.empty() ? run.cfg.knowledge_base : a.kb);

  auto prompt_for = [&](int action, const std::string& desc) {
    const KnowledgeEntry* k = kb ? &kb->retrieve(action) : nullptr;
    return assemble_feedback_prompt(profile, k, desc);
  };

  run.result["role"] = profile.effective_role() == Role::FitnessCoach ? "fitness coach" : "physiotherapist";
  run.result["mock"] = a.mock;
  run.result["knowledge"] = !a.no_knowledge;
  if (!a.batch.empty()) {
    if (a.data.empty()) throw ValidationError("feedback --batch needs --data for the descriptions");
    std::map<std::string, ManifestEntry> by_id;
    for (auto& e : load_manifest(a.data)) by_id[e.id] = e;
    std::vector<std::string> ids, prompts;
    std::vector<int> actions;
    std::istringstream in(read_file(a.batch));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = json::parse(line);
      auto id = j.at("id").get<std::string>();
      auto it = by_id.find(id);
      if (it == by_id.end()) throw NotFoundError("prediction for unknown instance '" + id + "'");
      if (it->second.descriptions.empty()) continue;
      int action = j.at("label").get<int>();
      ids.push_back(id);
      actions.push_back(action);
      prompts.push_back(prompt_for(action, it->second.descriptions.front()));
    }
    const auto t0 = Clock::now();
    auto replies = client.generate_batch(prompts);
    const double s = seconds_since(t0);
    std::string out;
    int failed = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      json r = {{"id", ids[i]}, {"action_type", actions[i]}, {"prompt", prompts[i]}};
      if (replies[i].error) {
        r["error"] = replies[i].error->what();
        r["error_kind"] = to_string(replies[i].error->kind());
        ++failed;
      } else {
        r["response"] = replies[i].text;
      }
      out += r.dump() + "\n";
    }
    write_file(run.path("feedback.jsonl"), out);
    run.result["prompts"] = ids.size();
    run.result["failed"] = failed;
    run.result["seconds"] = s;
    run.result["output"] = run.path("feedback.jsonl").string();
    run.finish();
    if (failed) throw LlmError(LlmError::Kind::Network, fmt::format("{} of {} requests failed", failed, ids.size()));
    return;
  }

  std::string desc = a.desc_text;
  if (!a.desc.empty()) desc = read_file(a.desc);
  while (!desc.empty() && (desc.back() == '\n' || desc.back() == '\r')) desc.pop_back();
  if (desc.empty()) throw ValidationError("feedback needs --desc or --desc-text");
  const int action = a.action.empty() ? infer_action(desc) : parse_action(a.action);
  const auto t0 = Clock::now();
  const std::string prompt = prompt_for(action, desc);
  const std::string reply = client.generate(prompt);
  const double s = seconds_since(t0);
  write_file(run.path("prompt.txt"), prompt);
  write_file(run.path("response.txt"), reply + "\n");
  spdlog::info("feedback generated in {:.3f} s", s);
  run.result["action_type"] = action;
  run.result["prompt"] = prompt;
  run.result["response"] = reply;
  run.result["seconds"] = s;
  run.finish();
}

// ---- evaluate ----

struct EvaluateArgs {
  std::vector<std::string> candidates;
  std::string references;
};

void cmd_evaluate(const Common& common, const EvaluateArgs& a) {
  Run run(common, "evaluate", {});
  std::map<std::string, std::vector<std::string>> refs;
  for (auto& r : parse_text_records(read_file(a.references))) refs[r.id].push_back(std::move(r.text));
  std::vector<std::map<std::string, double>> folds;
  json fold_json = json::array();
  std::size_t items = 0;
  for (const auto& path : a.candidates) {
    metrics::Corpus corpus;
    for (auto& c : parse_text_records(read_file(path))) {
      auto it = refs.find(c.id);
      if (it == refs.end()) throw NotFoundError("no reference for candidate '" + c.id + "' in " + path);
      corpus.ids.push_back(c.id);
      corpus.candidates.push_back(std::move(c.text));
      corpus.references.push_back(it->second);
    }
    items = corpus.ids.size();
    auto scores = metrics::score_corpus(corpus, run.cfg.bleu_mode);
    folds.push_back(scores.as_map());
    json f = folds.back();
    f["file"] = path;
    f["items"] = corpus.ids.size();
    f["cider_smoothed"] = scores.cider_smoothed;
    fold_json.push_back(f);
  }
  json mean, ci;
  std::string csv = "metric,mean,ci95_half_width";
  for (std::size_t i = 0; i < folds.size(); ++i) csv += ",fold" + std::to_string(i);
  csv += "\n";
  for (const auto& [name, v0] : folds.front()) {
    std::vector<double> vals;
    for (const auto& f : folds) vals.push_back(f.at(name));
    auto m = metrics::mean_ci(vals);
    mean[name] = m.mean;
    ci[name] = m.half_width;
    csv += fmt::format("{},{},{}", name, m.mean, m.half_width);
    for (double v : vals) csv += fmt::format(",{}", v);
    csv += "\n";
  }
  write_file(run.path("scores.csv"), csv);
  json scores = {{"folds", fold_json}, {"mean", mean}, {"ci95_half_width", ci}, {"items", items}};
  write_file(run.path("scores.json"), scores.dump(2) + "\n");
  run.result["scores"] = scores;
  for (const auto& [name, v] : mean.items()) run.result[name] = v;
  run.finish();
}

// ---- plot ----

struct PlotArgs {
  std::string kind, in, out, x;
  std::vector<std::string> y;
};

void cmd_plot(const Common& common, const PlotArgs& a) {
  Run run(common, "plot", {});
  if (!fs::exists(a.in)) throw NotFoundError("plot source '" + a.in + "' does not exist");
  const std::string text = read_file(a.in);
  const fs::path out = a.out.empty() ? run.path(fs::path(a.in).stem().string() + ".svg") : fs::path(a.out);
  if (a.kind == "confusion") {
    std::vector<std::string> labels;
    auto m = confusion_from_csv(text, &labels);
    write_file(out, confusion_svg(m, labels));
    run.result["cells"] = m.size();
  } else if (a.kind == "curve") {
    auto t = parse_csv(text);
    if (t.rows.empty()) throw ValidationError("training log '" + a.in + "' is empty");
    std::string x = a.x.empty() ? t.header.front() : a.x;
    std::vector<std::string> y = a.y;
    if (y.empty()) {
      for (const auto& h : t.header) {
        if (h != x) y.push_back(h);
      }
    }
    write_file(out, curve_svg(curves_from_csv(t, x, y), x));
    run.result["points"] = t.rows.size();
  } else {
    throw ValidationError("--kind must be confusion or curve");
  }
  run.result["svg"] = out.string();
  run.finish();
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("ubiphysio");
  spdlog::set_default_logger(logger);

  CLI::App app{"Motion tokenization, action classification and feedback prompting pipeline", "ubiphysio"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "key=value configuration file");
  app.add_option("--set", common.sets, "Override a config key (key=value); repeatable");
  app.add_option("--run-dir", common.run_dir, "Output directory for this run (default runs/<command>)");
  app.add_option("--seed", common.seed, "Root seed");
  app.add_flag("--json", common.json_out, "Print the result as one JSON line on stdout");
  app.add_option("--log-level", common.log_level, "trace, debug, info, warn, error or off");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic labelled motion dataset");
  s->add_option("--out", synth.out, "Dataset directory")->required();
  s->add_option("--actions", synth.actions, "'all' or a comma list of action ids/names");
  s->add_option("--per-class", synth.per_class, "Participants, i.e. instances per action and repeat");
  s->add_option("--repeats", synth.repeats, "Repetitions per participant and action");
  s->add_option("--min-duration", synth.min_duration, "Shortest instance, seconds");
  s->add_option("--max-duration", synth.max_duration, "Longest instance, seconds");
  s->add_option("--pattern-prob", synth.pattern_prob, "Probability of each candidate movement pattern");
  s->add_option("--format", synth.format, "Pose file format: bin or csv");

  IngestArgs ingest;
  auto* ig = app.add_subcommand("ingest", "Cut an annotated recording into instances");
  ig->add_option("--motion", ingest.motion, "Pose file (.csv or .bin)")->required();
  ig->add_option("--annotations", ingest.annotations, "Annotation file")->required();
  ig->add_option("--out", ingest.out, "Dataset directory")->required();
  ig->add_option("--participant", ingest.participant, "Participant id (default: file stem)");

  ExtractArgs ext;
  auto* ex = app.add_subcommand("extract", "Preprocess poses and compute the 315-wide features");
  ex->add_option("--data", ext.data, "Dataset directory");
  ex->add_option("--in", ext.in, "Single pose file");
  ex->add_option("--out", ext.out, "Feature file for --in");

  TrainVqArgs tvq;
  auto* tv = app.add_subcommand("train-vqvae", "Train the motion tokenizer");
  tv->add_option("--data", tvq.data, "Dataset directory")->required();
  tv->add_option("--steps", tvq.steps, "Training steps (overrides vq.steps)");
  tv->add_option("--out", tvq.out, "Model file (default <run-dir>/vqvae.ubvq)");

  TokenizeArgs tok;
  auto* tk = app.add_subcommand("tokenize", "Turn motion into discrete tokens");
  tk->add_option("--model", tok.model, "Tokenizer model")->required();
  tk->add_option("--in", tok.in, "Single pose file");
  tk->add_option("--data", tok.data, "Dataset directory");
  tk->add_option("--out", tok.out, "Token JSONL for --data");

  TrainClsArgs tcl;
  auto* tc = app.add_subcommand("train-classifier", "Train the action classifier");
  tc->add_option("--data", tcl.data, "Dataset directory")->required();
  tc->add_option("--epochs", tcl.epochs, "Epochs (overrides cls.epochs)");
  tc->add_option("--out", tcl.out, "Model file (default <run-dir>/classifier.ubcl)");

  ClassifyArgs cls;
  auto* cl = app.add_subcommand("classify", "Predict action types");
  cl->add_option("--model", cls.model, "Classifier model")->required();
  cl->add_option("--in", cls.in, "Single pose file");
  cl->add_option("--data", cls.data, "Dataset directory");
  cl->add_option("--out", cls.out, "Prediction JSONL for --data");

  ExportArgs exp;
  auto* ef = app.add_subcommand("export-finetune", "Write instruction-tuning pairs as JSONL");
  ef->add_option("--data", exp.data, "Dataset directory")->required();
  ef->add_option("--tokens", exp.tokens, "Token JSONL from tokenize")->required();
  ef->add_option("--out", exp.out, "Output JSONL");
  ef->add_flag("--tokens-only", exp.tokens_only, "Leave the action type out of the instruction");

  FeedbackArgs fb;
  auto* f = app.add_subcommand("feedback", "Assemble a feedback prompt and query the language model");
  f->add_option("--profile", fb.profile, "User profile JSON {age, pain, tug, role?}")->required();
  f->add_option("--desc", fb.desc, "File with the action description");
  f->add_option("--desc-text", fb.desc_text, "Action description text");
  f->add_option("--action", fb.action, "Action id or name (default: inferred from the description)");
  f->add_option("--kb", fb.kb, "Knowledge base JSONL (default paths.knowledge_base)");
  f->add_flag("--no-knowledge", fb.no_knowledge, "Leave the knowledge block out of the prompt");
  f->add_option("--batch", fb.batch, "Prediction JSONL {id, label}; one prompt per line");
  f->add_option("--data", fb.data, "Dataset directory with descriptions for --batch");
  f->add_flag("--mock", fb.mock, "Use the deterministic offline responder");
  f->add_option("--base-url", fb.base_url, "Chat-completion endpoint base URL");
  f->add_option("--model", fb.model, "Model name sent to the endpoint");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score generated text against references");
  e->add_option("--candidates", ev.candidates, "Candidate JSONL {id, text}; several files are folds")->required();
  e->add_option("--references", ev.references, "Reference JSONL {id, text}; repeated ids add references")
      ->required();

  PlotArgs pl;
  auto* p = app.add_subcommand("plot", "Render a confusion matrix or training curve CSV as SVG");
  p->add_option("--kind", pl.kind, "confusion or curve")->required();
  p->add_option("--in", pl.in, "Source CSV")->required();
  p->add_option("--out", pl.out, "SVG path");
  p->add_option("--x", pl.x, "x column for curves (default: first column)");
  p->add_option("--y", pl.y, "y columns for curves (default: all others)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    spdlog::set_level(spdlog::level::from_str(common.log_level));
    if (*s) cmd_synth(common, synth);
    else if (*ig) cmd_ingest(common, ingest);
    else if (*ex) cmd_extract(common, ext);
    else if (*tv) cmd_train_vqvae(common, tvq);
    else if (*tk) cmd_tokenize(common, tok);
    else if (*tc) cmd_train_classifier(common, tcl);
    else if (*cl) cmd_classify(common, cls);
    else if (*ef) cmd_export(common, exp);
    else if (*f) cmd_feedback(common, fb);
    else if (*e) cmd_evaluate(common, ev);
    else if (*p) cmd_plot(common, pl);
  } catch (const std::exception& err) {
    std::string msg = err.what();
    for (auto& c : msg) {
      if (c == '\n') c = ' ';
    }
    std::fprintf(stderr, "ubiphysio: error: %s\n", msg.c_str());
    return 1;
  }
  return 0;
}
