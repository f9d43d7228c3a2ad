#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "ubiphysio/features.hpp"
#include "ubiphysio/kv.hpp"
#include "ubiphysio/nn/layers.hpp"
#include "ubiphysio/nn/loss.hpp"
#include "ubiphysio/nn/optim.hpp"
#include "ubiphysio/rng.hpp"

namespace ubiphysio {

struct VqConfig {
  int input_dim = layout::kTotal;
  int bio_dim = layout::kBiomech;  // trailing columns weighted by alpha
  int width = 512;
  int code_dim = 512;
  int codebook_size = 512;
  int down_t = 2;  // stride-2 stages; downsampling rate is 2^down_t
  int res_blocks = 3;
  std::vector<int> dilations = {9, 9, 9};

  double beta = 1.0;   // embedding term weight
  double alpha = 0.5;  // biomechanical reconstruction weight
  double decay = 0.99;  // EMA constant

  int window = 64;
  int batch = 128;
  long steps = 150000;
  double lr = 2e-4;
  long lr_decay_step = 100000;
  double lr_decay = 0.1;
  double weight_decay = 0.01;
  long reset_interval = 1000;
  double reset_threshold = 1.0;
  long log_interval = 100;
  std::uint64_t seed = 0;

  int rate() const { return 1 << down_t; }

  static VqConfig full();
  // Reduced width and schedule sized for a single CPU core.
  static VqConfig desk();

  KvMap to_kv() const;
  // Overrides fields from kv; unknown keys throw ValidationError.
  void apply(const KvMap& kv);
  void validate() const;
};

// Nearest code by squared Euclidean distance over columns; ties go to the
// lowest index. latents: d x N, codes: d x K.
template <typename S>
std::vector<int> quantize(const nn::Mat<S>& latents, const nn::Mat<S>& codes) {
  nn::check_shape(latents.rows() == codes.rows(), "quantize: latent dim does not match code dim");
  std::vector<int> out(latents.cols(), 0);
  for (Eigen::Index n = 0; n < latents.cols(); ++n) {
    S best = std::numeric_limits<S>::infinity();
    int arg = 0;
    for (Eigen::Index k = 0; k < codes.cols(); ++k) {
      S d = (codes.col(k) - latents.col(n)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(k);
      }
    }
    out[n] = arg;
  }
  return out;
}

template <typename S>
struct Codebook {
  nn::Mat<S> codes;      // d x K
  nn::Vec<S> ema_count;  // K
  nn::Mat<S> ema_sum;    // d x K
  std::vector<long> usage;  // assignments since the last clear_usage()

  Codebook() = default;
  Codebook(int dim, int size)
      : codes(nn::Mat<S>::Zero(dim, size)),
        ema_count(nn::Vec<S>::Ones(size)),
        ema_sum(nn::Mat<S>::Zero(dim, size)),
        usage(size, 0) {}

  int size() const { return static_cast<int>(codes.cols()); }
  int dim() const { return static_cast<int>(codes.rows()); }

  nn::Mat<S> lookup(const std::vector<int>& idx) const {
    nn::Mat<S> z(codes.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t n = 0; n < idx.size(); ++n) z.col(n) = codes.col(idx[n]);
    return z;
  }

  // Codes drawn (with replacement) from the valid latent columns.
  void init_from(const nn::Mat<S>& latents, const std::vector<char>& mask, Rng& rng) {
    auto valid = valid_columns(latents, mask);
    if (valid.empty()) return;
    for (int k = 0; k < size(); ++k) {
      codes.col(k) = latents.col(valid[rng.below(valid.size())]);
      ema_sum.col(k) = codes.col(k);
    }
    ema_count.setOnes();
  }

  // count_k <- decay * count_k + (1 - decay) * n_k
  // sum_k   <- decay * sum_k   + (1 - decay) * (sum of latents assigned to k)
  // code_k  <- sum_k / count_k
  void ema_update(const nn::Mat<S>& latents, const std::vector<int>& idx, double decay,
                  const std::vector<char>& mask = {}) {
    if (latents.cols() == 0) return;
    nn::Vec<S> n = nn::Vec<S>::Zero(size());
    nn::Mat<S> s = nn::Mat<S>::Zero(dim(), size());
    for (Eigen::Index j = 0; j < latents.cols(); ++j) {
      if (!mask.empty() && !mask[j]) continue;
      n(idx[j]) += S(1);
      s.col(idx[j]) += latents.col(j);
      ++usage[idx[j]];
    }
    const S d = static_cast<S>(decay);
    ema_count = d * ema_count + (S(1) - d) * n;
    ema_sum = d * ema_sum + (S(1) - d) * s;
    for (int k = 0; k < size(); ++k) {
      if (ema_count(k) > S(1e-12)) codes.col(k) = ema_sum.col(k) / ema_count(k);
    }
  }

  // Replaces every code whose EMA count is below threshold by a random valid
  // latent. Returns the number of codes replaced.
  int reset_dead(const nn::Mat<S>& latents, double threshold, Rng& rng, const std::vector<char>& mask = {}) {
    auto valid = valid_columns(latents, mask);
    if (valid.empty()) return 0;
    int replaced = 0;
    for (int k = 0; k < size(); ++k) {
      if (ema_count(k) >= static_cast<S>(threshold)) continue;
      codes.col(k) = latents.col(valid[rng.below(valid.size())]);
      ema_sum.col(k) = codes.col(k);
      ema_count(k) = S(1);
      ++replaced;
    }
    return replaced;
  }

  void clear_usage() { std::fill(usage.begin(), usage.end(), 0L); }
  int used_codes() const {
    int c = 0;
    for (long u : usage) c += u > 0;
    return c;
  }

 private:
  static std::vector<Eigen::Index> valid_columns(const nn::Mat<S>& latents, const std::vector<char>& mask) {
    std::vector<Eigen::Index> valid;
    for (Eigen::Index j = 0; j < latents.cols(); ++j) {
      if (mask.empty() || mask[j]) valid.push_back(j);
    }
    return valid;
  }
};

template <typename S>
void build_encoder(nn::Sequential<S>& seq, const VqConfig& cfg, Rng& rng) {
  using nn::ConvShape;
  seq.template add<nn::Conv1d<S>>("encoder.in", ConvShape{cfg.input_dim, cfg.width, 3, 1, 1, 1}, rng);
  seq.template add<nn::ReLU<S>>();
  for (int i = 0; i < cfg.down_t; ++i) {
    std::string stage = "encoder.down" + std::to_string(i);
    seq.template add<nn::Conv1d<S>>(stage + ".conv", ConvShape{cfg.width, cfg.width, 4, 2, 1, 1}, rng);
    for (int r = 0; r < cfg.res_blocks; ++r) {
      seq.template add<nn::ResConv<S>>(stage + ".res" + std::to_string(r), cfg.width,
                                       cfg.dilations[r % cfg.dilations.size()], rng);
    }
  }
  seq.template add<nn::Conv1d<S>>("encoder.out", ConvShape{cfg.width, cfg.code_dim, 3, 1, 1, 1}, rng);
}

template <typename S>
void build_decoder(nn::Sequential<S>& seq, const VqConfig& cfg, Rng& rng) {
  using nn::ConvShape;
  seq.template add<nn::Conv1d<S>>("decoder.in", ConvShape{cfg.code_dim, cfg.width, 3, 1, 1, 1}, rng);
  seq.template add<nn::ReLU<S>>();
  for (int i = 0; i < cfg.down_t; ++i) {
    std::string stage = "decoder.up" + std::to_string(i);
    for (int r = 0; r < cfg.res_blocks; ++r) {
      int d = cfg.dilations[(cfg.res_blocks - 1 - r) % cfg.dilations.size()];
      seq.template add<nn::ResConv<S>>(stage + ".res" + std::to_string(r), cfg.width, d, rng);
    }
    seq.template add<nn::Upsample2<S>>();
    seq.template add<nn::Conv1d<S>>(stage + ".conv", ConvShape{cfg.width, cfg.width, 3, 1, 1, 1}, rng);
  }
  seq.template add<nn::Conv1d<S>>("decoder.mid", ConvShape{cfg.width, cfg.width, 3, 1, 1, 1}, rng);
  seq.template add<nn::ReLU<S>>();
  seq.template add<nn::Conv1d<S>>("decoder.out", ConvShape{cfg.width, cfg.input_dim, 3, 1, 1, 1}, rng);
}

template <typename S>
struct VqLossTerms {
  double recon = 0.0;        // smooth-L1 over all dims + alpha * smooth-L1 over the bio dims
  double recon_plain = 0.0;  // smooth-L1 over all dims
  double commit = 0.0;       // mean squared distance, gradient to the encoder only
  double embed = 0.0;        // beta * mean squared distance, gradient to the codes only
  double total = 0.0;
  nn::Mat<S> grad_recon;     // d total / d x_r
  nn::Mat<S> grad_latent;    // d commit / d h (the embedding term contributes nothing)
  nn::Mat<S> grad_codes;     // d embed / d z, for reference; codes are updated by EMA
};

// x, x_r: input_dim x T; h, z: code_dim x N. frame_mask has T entries and
// latent_mask N entries (empty selects all).
template <typename S>
VqLossTerms<S> vq_loss(const nn::Mat<S>& x, const nn::Mat<S>& xr, const nn::Mat<S>& h, const nn::Mat<S>& z,
                       const VqConfig& cfg, const std::vector<char>& frame_mask = {},
                       const std::vector<char>& latent_mask = {}) {
  nn::check_shape(h.rows() == z.rows() && h.cols() == z.cols(), "vq_loss: latent/code shape mismatch");
  VqLossTerms<S> out;
  auto plain = nn::smooth_l1(xr, x, frame_mask);
  auto bio = nn::smooth_l1(xr, x, frame_mask, cfg.input_dim - cfg.bio_dim, cfg.bio_dim);
  out.recon_plain = plain.value;
  out.recon = plain.value + cfg.alpha * bio.value;
  out.grad_recon = plain.grad + static_cast<S>(cfg.alpha) * bio.grad;
  auto commit = nn::mse(h, z, latent_mask);
  out.commit = commit.value;
  out.grad_latent = commit.grad;
  auto embed = nn::mse(z, h, latent_mask);
  out.embed = cfg.beta * embed.value;
  out.grad_codes = static_cast<S>(cfg.beta) * embed.grad;
  out.total = out.recon + out.commit + out.embed;
  return out;
}

// Trained tokenizer: feature statistics, encoder, decoder and codebook.
class VqModel {
 public:
  explicit VqModel(const VqConfig& cfg);

  const VqConfig& config() const { return cfg_; }
  FeatureStats stats;
  Codebook<float> codebook;
  double train_recon_p95 = 0.0;  // per-window reconstruction error on the training set

  nn::Sequential<float>& encoder() { return encoder_; }
  nn::Sequential<float>& decoder() { return decoder_; }

  // z-normalized features (T x input_dim, T divisible by the rate) -> code_dim x T/rate.
  nn::Mat<float> encode(const Eigen::MatrixXd& z_features);
  // Token indices -> T x input_dim z-normalized features.
  Eigen::MatrixXd decode(const std::vector<int>& tokens);

  void save(const std::filesystem::path& path);
  static std::unique_ptr<VqModel> load(const std::filesystem::path& path);

 private:
  VqConfig cfg_;
  nn::Sequential<float> encoder_, decoder_;
};

struct TokenSequence {
  std::string id;
  std::vector<int> tokens;
  int frames = 0;         // valid frames before padding
  int padded_frames = 0;  // multiple of the downsampling rate
};

// Z-normalized feature matrix -> tokens. The tail is zero-padded to a multiple
// of the rate and the sequence is encoded in windows of cfg.window frames.
TokenSequence tokenize_features(VqModel& model, const FeatureMatrix& raw_features);
// Full path from raw positions: preprocess, extract, normalize, encode, quantize.
TokenSequence tokenize(VqModel& model, const MotionSequence& seq,
                       const CanonicalSkeleton& canon = CanonicalSkeleton::standard());

void save_tokens_jsonl(const std::vector<TokenSequence>& seqs, const std::filesystem::path& path);
std::vector<TokenSequence> load_tokens_jsonl(const std::filesystem::path& path);

struct VqLogRow {
  long step = 0;
  double lr = 0.0;
  double total = 0.0;
  double recon = 0.0;
  double recon_plain = 0.0;
  double commit = 0.0;
  double embed = 0.0;
  double perplexity = 0.0;
  int codes_reset = 0;
};

struct VqTrainResult {
  std::unique_ptr<VqModel> model;
  std::vector<VqLogRow> log;
  double initial_recon = 0.0;  // plain smooth-L1 on the evaluation windows before training
  double final_recon = 0.0;    // same windows after training
  int codes_used_tail = 0;     // distinct codes assigned during the final 500 steps
  double seconds = 0.0;
};

using VqProgress = std::function<void(const VqLogRow&)>;

// Non-overlapping windows of cfg.window frames from every sequence (tail
// windows zero-padded and masked). Feature statistics are fit on the input.
// Throws TrainingError on a non-finite loss.
VqTrainResult train_vqvae(const std::vector<FeatureMatrix>& dataset, const VqConfig& cfg,
                          const VqProgress& progress = {});

void write_vq_log_csv(const std::vector<VqLogRow>& log, const std::filesystem::path& path);

}  // namespace ubiphysio
