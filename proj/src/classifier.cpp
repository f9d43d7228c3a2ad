#include "ubiphysio/classifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <spdlog/spdlog.h>

#include "ubiphysio/checkpoint.hpp"
#include "ubiphysio/errors.hpp"
#include "ubiphysio/nn/optim.hpp"

namespace ubiphysio {

using nn::Mat;
using nn::SeqBatch;

KvMap ClsConfig::to_kv() const {
  return {
      {"input_dim", std::to_string(input_dim)},
      {"num_classes", std::to_string(num_classes)},
      {"stem_channels", std::to_string(stem_channels)},
      {"stage2_channels", std::to_string(stage2_channels)},
      {"dropout", format_double(dropout)},
      {"batch", std::to_string(batch)},
      {"lr", format_double(lr)},
      {"epochs", std::to_string(epochs)},
      {"lr_decay_epoch", std::to_string(lr_decay_epoch)},
      {"lr_decay", format_double(lr_decay)},
      {"weight_decay", format_double(weight_decay)},
      {"train_ratio", format_double(train_ratio)},
      {"val_ratio", format_double(val_ratio)},
      {"test_ratio", format_double(test_ratio)},
      {"seed", std::to_string(seed)},
  };
}

void ClsConfig::apply(const KvMap& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "input_dim") input_dim = static_cast<int>(kv_long(k, v));
    else if (k == "num_classes") num_classes = static_cast<int>(kv_long(k, v));
    else if (k == "stem_channels") stem_channels = static_cast<int>(kv_long(k, v));
    else if (k == "stage2_channels") stage2_channels = static_cast<int>(kv_long(k, v));
    else if (k == "dropout") dropout = kv_double(k, v);
    else if (k == "batch") batch = static_cast<int>(kv_long(k, v));
    else if (k == "lr") lr = kv_double(k, v);
    else if (k == "epochs") epochs = static_cast<int>(kv_long(k, v));
    else if (k == "lr_decay_epoch") lr_decay_epoch = static_cast<int>(kv_long(k, v));
    else if (k == "lr_decay") lr_decay = kv_double(k, v);
    else if (k == "weight_decay") weight_decay = kv_double(k, v);
    else if (k == "train_ratio") train_ratio = kv_double(k, v);
    else if (k == "val_ratio") val_ratio = kv_double(k, v);
    else if (k == "test_ratio") test_ratio = kv_double(k, v);
    else if (k == "seed") seed = static_cast<std::uint64_t>(kv_long(k, v));
    else throw ValidationError("unknown classifier config key '" + k + "'");
  }
}

void ClsConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("classifier config: ") + what);
  };
  need(input_dim > 0 && num_classes >= 2 && stem_channels > 0 && stage2_channels > 0, "bad dimensions");
  need(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  need(batch > 0 && epochs >= 0 && lr > 0.0, "batch, epochs and lr must be positive");
  need(train_ratio > 0.0 && val_ratio >= 0.0 && test_ratio >= 0.0 &&
           std::abs(train_ratio + val_ratio + test_ratio - 1.0) < 1e-6,
       "split ratios must be non-negative and sum to 1");
}

int argmax_lowest(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw ValidationError("argmax of an empty vector");
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

Classifier::Classifier(const ClsConfig& cfg)
    : cfg_(cfg), init_rng_(mix_seed(cfg.seed ^ 0xc1a5ULL)), dropout_rng_(mix_seed(cfg.seed ^ 0xd20bULL)) {
  cfg_.validate();
  net_ = std::make_unique<ClassifierNet<float>>(cfg_, init_rng_, dropout_rng_);
}

namespace {

SeqBatch<float> to_batch(const std::vector<const FeatureMatrix*>& items, const FeatureStats& stats) {
  SeqBatch<float> b;
  int total = 0;
  for (const auto* f : items) total += f->frames();
  b.x.resize(items.front()->values.cols(), total);
  int off = 0;
  for (const auto* f : items) {
    b.x.middleCols(off, f->frames()) = apply_z(*f, stats).values.transpose().cast<float>();
    b.lengths.push_back(f->frames());
    off += f->frames();
  }
  return b;
}

}  // namespace

Prediction Classifier::predict(const FeatureMatrix& raw) {
  if (raw.values.cols() != cfg_.input_dim) {
    throw ShapeError("classifier expects " + std::to_string(cfg_.input_dim) + " features, got " +
                     std::to_string(raw.values.cols()));
  }
  if (raw.frames() < kMinClassifierFrames) {
    throw InsufficientFramesError("classifier input needs at least " + std::to_string(kMinClassifierFrames) +
                                  " frames, got " + std::to_string(raw.frames()));
  }
  auto batch = to_batch({&raw}, stats);
  Prediction p;
  p.logits = net_->forward(batch, false).col(0).cast<double>();
  p.label = argmax_lowest(p.logits) + 1;
  return p;
}

void Classifier::save(const std::filesystem::path& path) {
  TensorFile f;
  f.magic = "UBCL";
  f.config = cfg_.to_kv();
  store_params(f, net_->params());
  store_params(f, net_->buffers());
  f.add("stats.mean", stats.mean.cast<float>());
  f.add("stats.std", stats.std.cast<float>());
  save_tensor_file(f, path);
}

std::unique_ptr<Classifier> Classifier::load(const std::filesystem::path& path) {
  TensorFile f = load_tensor_file(path, "UBCL");
  ClsConfig cfg;
  cfg.apply(f.config);
  auto m = std::make_unique<Classifier>(cfg);
  restore_params(f, m->net_->params());
  restore_params(f, m->net_->buffers());
  m->stats.mean = f.get("stats.mean").cast<double>();
  m->stats.std = f.get("stats.std").cast<double>();
  return m;
}

ParticipantSplit split_participants(const std::vector<std::string>& participants, double val_ratio,
                                    double test_ratio, std::uint64_t seed) {
  std::vector<std::string> ids(participants);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  Rng rng(mix_seed(seed ^ 0x5b117ULL));
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);

  const double n = static_cast<double>(ids.size());
  std::size_t n_test = static_cast<std::size_t>(std::lround(test_ratio * n));
  std::size_t n_val = static_cast<std::size_t>(std::lround(val_ratio * n));
  if (ids.size() >= 3) {
    if (test_ratio > 0.0) n_test = std::max<std::size_t>(n_test, 1);
    if (val_ratio > 0.0) n_val = std::max<std::size_t>(n_val, 1);
  }
  if (n_test + n_val >= ids.size()) throw ValidationError("too few participants for a three-way split");

  ParticipantSplit s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i < n_test) s.test.insert(ids[i]);
    else if (i < n_test + n_val) s.val.insert(ids[i]);
    else s.train.insert(ids[i]);
  }
  return s;
}

void verify_disjoint(const ParticipantSplit& split) {
  for (const auto& p : split.train) {
    if (split.val.count(p) || split.test.count(p)) {
      throw ValidationError("participant '" + p + "' appears in the training split and another split");
    }
  }
  for (const auto& p : split.val) {
    if (split.test.count(p)) throw ValidationError("participant '" + p + "' appears in validation and test");
  }
}

metrics::ClassificationReport evaluate_classifier(Classifier& model, const std::vector<LabeledInstance>& test,
                                                  std::vector<int>* predicted, const std::set<int>& masked) {
  if (test.empty()) throw ValidationError("evaluate: empty test set");
  std::vector<int> truth, pred;
  for (const auto& inst : test) {
    truth.push_back(inst.label);
    pred.push_back(model.predict(inst.features).label);
  }
  if (predicted) *predicted = pred;
  return metrics::classification_report(truth, pred, model.config().num_classes, masked);
}

ClsTrainResult train_classifier(const std::vector<LabeledInstance>& data, const ClsConfig& cfg,
                                const ClsProgress& progress) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> people;
  for (const auto& d : data) {
    if (d.label < 1 || d.label > cfg.num_classes) {
      throw ValidationError("instance '" + d.id + "' has label " + std::to_string(d.label) + " out of range");
    }
    if (d.features.values.cols() != cfg.input_dim) throw ShapeError("instance '" + d.id + "' has the wrong width");
    people.push_back(d.participant);
  }

  ClsTrainResult result;
  result.split = split_participants(people, cfg.val_ratio, cfg.test_ratio, cfg.seed);
  verify_disjoint(result.split);

  std::vector<const LabeledInstance*> train;
  std::vector<LabeledInstance> val, test;
  for (const auto& d : data) {
    if (result.split.train.count(d.participant)) train.push_back(&d);
    else if (result.split.val.count(d.participant)) val.push_back(d);
    else test.push_back(d);
  }
  std::set<int> classes;
  for (const auto* d : train) classes.insert(d->label);
  if (classes.size() < 2) throw ValidationError("classifier training needs at least two classes");
  for (int c = 1; c <= cfg.num_classes; ++c) {
    if (!classes.count(c)) {
      result.masked_classes.insert(c);
      spdlog::warn("action type {} is absent from the training split; masked in metrics", c);
    }
  }

  result.model = std::make_unique<Classifier>(cfg);
  Classifier& model = *result.model;
  {
    std::vector<FeatureMatrix> feats;
    for (const auto* d : train) feats.push_back(d->features);
    model.stats = fit_stats(feats);
  }

  auto params = model.net().params();
  auto buffers = model.net().buffers();
  nn::Adam<float> opt(params, nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  Rng rng(mix_seed(cfg.seed ^ 0x0dd5ULL));

  std::vector<Mat<float>> best_params, best_buffers;
  double best_f1 = -1.0;
  auto snapshot = [&]() {
    best_params.clear();
    best_buffers.clear();
    for (auto* p : params) best_params.push_back(p->value);
    for (auto* b : buffers) best_buffers.push_back(b->value);
  };

  std::vector<std::size_t> order(train.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    opt.set_lr(epoch >= cfg.lr_decay_epoch ? cfg.lr * cfg.lr_decay : cfg.lr);

    double loss_sum = 0.0;
    long correct = 0, seen = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch) {
      std::size_t b1 = std::min(order.size(), b0 + cfg.batch);
      if (b1 - b0 < 2 && b0 > 0) break;  // batch statistics need two samples
      std::vector<const FeatureMatrix*> items;
      std::vector<int> labels;
      for (std::size_t i = b0; i < b1; ++i) {
        items.push_back(&train[order[i]]->features);
        labels.push_back(train[order[i]]->label - 1);
      }
      auto x = to_batch(items, model.stats);
      auto logits = model.net().forward(x, true);
      auto ce = nn::softmax_cross_entropy<float>(logits, labels);
      if (!std::isfinite(ce.value)) {
        throw TrainingError("non-finite classifier loss in epoch " + std::to_string(epoch), epoch);
      }
      nn::zero_grads(params);
      model.net().backward(ce.grad);
      opt.step();
      loss_sum += ce.value * static_cast<double>(labels.size());
      for (std::size_t j = 0; j < labels.size(); ++j) {
        correct += argmax_lowest(logits.col(j).cast<double>()) == labels[j];
      }
      seen += static_cast<long>(labels.size());
    }

    ClsEpochLog row;
    row.epoch = epoch;
    row.lr = opt.lr();
    row.train_loss = seen ? loss_sum / seen : 0.0;
    row.train_accuracy = seen ? static_cast<double>(correct) / seen : 0.0;
    row.val_macro_f1 = val.empty() ? row.train_accuracy
                                   : evaluate_classifier(model, val, nullptr, result.masked_classes).macro_f1;
    result.log.push_back(row);
    if (progress) progress(row);
    if (row.val_macro_f1 >= best_f1) {
      best_f1 = row.val_macro_f1;
      result.best_epoch = epoch;
      snapshot();
    }
  }
  if (!best_params.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_params[i];
    for (std::size_t i = 0; i < buffers.size(); ++i) buffers[i]->value = best_buffers[i];
  }

  if (!test.empty()) {
    result.test = evaluate_classifier(model, test, &result.test_predicted, result.masked_classes);
    for (const auto& t : test) {
      result.test_ids.push_back(t.id);
      result.test_truth.push_back(t.label);
    }
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace ubiphysio
