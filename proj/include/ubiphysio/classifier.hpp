#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ubiphysio/actions.hpp"
#include "ubiphysio/features.hpp"
#include "ubiphysio/kv.hpp"
#include "ubiphysio/metrics.hpp"
#include "ubiphysio/nn/layers.hpp"
#include "ubiphysio/nn/loss.hpp"

namespace ubiphysio {

struct ClsConfig {
  int input_dim = layout::kTotal;
  int num_classes = kActionCount;
  int stem_channels = 64;
  int stage2_channels = 128;
  double dropout = 0.5;

  int batch = 32;
  double lr = 1e-3;
  int epochs = 40;
  int lr_decay_epoch = 30;
  double lr_decay = 0.1;
  double weight_decay = 0.01;
  double train_ratio = 0.85;
  double val_ratio = 0.05;
  double test_ratio = 0.10;
  std::uint64_t seed = 0;

  KvMap to_kv() const;
  void apply(const KvMap& kv);
  void validate() const;
};

inline constexpr int kMinClassifierFrames = 8;

// Stem conv(k7, s2) + BN + ReLU + max-pool(k3, s2); stage 1: two residual
// blocks at stem width; stage 2: two blocks, the first strided with a 1x1
// projection shortcut; global average pool; linear head.
template <typename S>
class ClassifierNet {
 public:
  ClassifierNet(const ClsConfig& cfg, Rng& init_rng, Rng& dropout_rng)
      : stem_("stem.conv", nn::ConvShape{cfg.input_dim, cfg.stem_channels, 7, 2, 3, 1}, init_rng),
        stem_bn_("stem.bn", cfg.stem_channels),
        pool_(3, 2, 1),
        head_("head", cfg.stage2_channels, cfg.num_classes, init_rng) {
    const int c1 = cfg.stem_channels, c2 = cfg.stage2_channels;
    blocks_.push_back(std::make_unique<nn::BasicBlock<S>>("stage1.block0", c1, c1, 1, cfg.dropout, init_rng, dropout_rng));
    blocks_.push_back(std::make_unique<nn::BasicBlock<S>>("stage1.block1", c1, c1, 1, cfg.dropout, init_rng, dropout_rng));
    blocks_.push_back(std::make_unique<nn::BasicBlock<S>>("stage2.block0", c1, c2, 2, cfg.dropout, init_rng, dropout_rng));
    blocks_.push_back(std::make_unique<nn::BasicBlock<S>>("stage2.block1", c2, c2, 1, cfg.dropout, init_rng, dropout_rng));
  }

  // in: input_dim x frames per sample -> logits num_classes x batch.
  nn::Mat<S> forward(const nn::SeqBatch<S>& in, bool train) {
    for (int len : in.lengths) {
      if (len < kMinClassifierFrames) {
        throw InsufficientFramesError("classifier input needs at least " + std::to_string(kMinClassifierFrames) +
                                      " frames, got " + std::to_string(len));
      }
    }
    auto h = stem_.forward(in, train);
    h = stem_bn_.forward(h, train);
    h = relu_.forward(h, train);
    h = pool_.forward(h, train);
    for (auto& b : blocks_) h = b->forward(h, train);
    pooled_lengths_ = h.lengths;
    return head_.forward(nn::global_avg_pool(h));
  }

  void backward(const nn::Mat<S>& grad_logits) {
    auto g = nn::global_avg_pool_backward<S>(head_.backward(grad_logits), pooled_lengths_);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = (*it)->backward(g);
    g = pool_.backward(g);
    g = relu_.backward(g);
    g = stem_bn_.backward(g);
    stem_.backward(g);
  }

  std::vector<nn::Param<S>*> params() {
    std::vector<nn::Param<S>*> out;
    stem_.params(out);
    stem_bn_.params(out);
    for (auto& b : blocks_) b->params(out);
    head_.params(out);
    return out;
  }
  std::vector<nn::Param<S>*> buffers() {
    std::vector<nn::Param<S>*> out;
    stem_bn_.buffers(out);
    for (auto& b : blocks_) b->buffers(out);
    return out;
  }
  void freeze_dropout(bool f) {
    for (auto& b : blocks_) b->freeze_dropout(f);
  }

 private:
  nn::Conv1d<S> stem_;
  nn::BatchNorm1d<S> stem_bn_;
  nn::ReLU<S> relu_;
  nn::MaxPool1d<S> pool_;
  std::vector<std::unique_ptr<nn::BasicBlock<S>>> blocks_;
  nn::Linear<S> head_;
  std::vector<int> pooled_lengths_;
};

// Index of the largest entry; the lowest index wins a tie.
int argmax_lowest(const Eigen::VectorXd& v);

struct Prediction {
  int label = 0;  // 1-based action type
  Eigen::VectorXd logits;
};

class Classifier {
 public:
  explicit Classifier(const ClsConfig& cfg);

  const ClsConfig& config() const { return cfg_; }
  FeatureStats stats;
  ClassifierNet<float>& net() { return *net_; }

  // Raw (unnormalized) features of one instance.
  Prediction predict(const FeatureMatrix& raw);

  void save(const std::filesystem::path& path);
  static std::unique_ptr<Classifier> load(const std::filesystem::path& path);

 private:
  ClsConfig cfg_;
  Rng init_rng_, dropout_rng_;
  std::unique_ptr<ClassifierNet<float>> net_;
};

struct LabeledInstance {
  std::string id;
  std::string participant;
  int label = 0;  // 1-based
  FeatureMatrix features;
};

struct ParticipantSplit {
  std::set<std::string> train, val, test;
};

// Shuffles the sorted participant ids with the seed and cuts them by ratio
// (validation and test get at least one participant each when there are three
// or more).
ParticipantSplit split_participants(const std::vector<std::string>& participants, double val_ratio,
                                    double test_ratio, std::uint64_t seed);
// Throws ValidationError when a participant appears in more than one split.
void verify_disjoint(const ParticipantSplit& split);

struct ClsEpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_macro_f1 = 0.0;
};

struct ClsTrainResult {
  std::unique_ptr<Classifier> model;
  ParticipantSplit split;
  std::vector<ClsEpochLog> log;
  int best_epoch = 0;
  std::set<int> masked_classes;  // absent from the training split
  metrics::ClassificationReport test;
  std::vector<std::string> test_ids;
  std::vector<int> test_truth, test_predicted;
  double seconds = 0.0;
};

using ClsProgress = std::function<void(const ClsEpochLog&)>;

// Participant-disjoint split, z-normalization fit on the training split,
// cross-entropy training with best-validation checkpoint selection, then
// evaluation on the test split.
ClsTrainResult train_classifier(const std::vector<LabeledInstance>& data, const ClsConfig& cfg,
                                const ClsProgress& progress = {});

metrics::ClassificationReport evaluate_classifier(Classifier& model, const std::vector<LabeledInstance>& test,
                                                  std::vector<int>* predicted = nullptr,
                                                  const std::set<int>& masked = {});

}  // namespace ubiphysio
