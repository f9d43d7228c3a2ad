#include "ubiphysio/vq.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "ubiphysio/checkpoint.hpp"
#include "ubiphysio/errors.hpp"
#include "ubiphysio/file_util.hpp"
#include "ubiphysio/preprocess.hpp"

namespace ubiphysio {

using nn::Mat;
using nn::SeqBatch;

VqConfig VqConfig::full() { return VqConfig{}; }

VqConfig VqConfig::desk() {
  VqConfig c;
  c.width = 128;
  c.code_dim = 128;
  c.batch = 16;
  c.steps = 5000;
  c.lr = 6e-4;
  c.lr_decay_step = 4000;
  // Same expected-usage cut as the full run: the full batch yields 8x more
  // latents per step, so the EMA cluster sizes are 8x larger there.
  c.reset_threshold = 0.125;
  c.log_interval = 50;
  return c;
}

KvMap VqConfig::to_kv() const {
  std::string dil;
  for (std::size_t i = 0; i < dilations.size(); ++i) dil += (i ? "," : "") + std::to_string(dilations[i]);
  return {
      {"input_dim", std::to_string(input_dim)},
      {"bio_dim", std::to_string(bio_dim)},
      {"width", std::to_string(width)},
      {"code_dim", std::to_string(code_dim)},
      {"codebook_size", std::to_string(codebook_size)},
      {"down_t", std::to_string(down_t)},
      {"res_blocks", std::to_string(res_blocks)},
      {"dilations", dil},
      {"beta", format_double(beta)},
      {"alpha", format_double(alpha)},
      {"decay", format_double(decay)},
      {"window", std::to_string(window)},
      {"batch", std::to_string(batch)},
      {"steps", std::to_string(steps)},
      {"lr", format_double(lr)},
      {"lr_decay_step", std::to_string(lr_decay_step)},
      {"lr_decay", format_double(lr_decay)},
      {"weight_decay", format_double(weight_decay)},
      {"reset_interval", std::to_string(reset_interval)},
      {"reset_threshold", format_double(reset_threshold)},
      {"log_interval", std::to_string(log_interval)},
      {"seed", std::to_string(seed)},
  };
}

void VqConfig::apply(const KvMap& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "input_dim") input_dim = static_cast<int>(kv_long(k, v));
    else if (k == "bio_dim") bio_dim = static_cast<int>(kv_long(k, v));
    else if (k == "width") width = static_cast<int>(kv_long(k, v));
    else if (k == "code_dim") code_dim = static_cast<int>(kv_long(k, v));
    else if (k == "codebook_size") codebook_size = static_cast<int>(kv_long(k, v));
    else if (k == "down_t") down_t = static_cast<int>(kv_long(k, v));
    else if (k == "res_blocks") res_blocks = static_cast<int>(kv_long(k, v));
    else if (k == "dilations") dilations = kv_int_list(k, v);
    else if (k == "beta") beta = kv_double(k, v);
    else if (k == "alpha") alpha = kv_double(k, v);
    else if (k == "decay") decay = kv_double(k, v);
    else if (k == "window") window = static_cast<int>(kv_long(k, v));
    else if (k == "batch") batch = static_cast<int>(kv_long(k, v));
    else if (k == "steps") steps = kv_long(k, v);
    else if (k == "lr") lr = kv_double(k, v);
    else if (k == "lr_decay_step") lr_decay_step = kv_long(k, v);
    else if (k == "lr_decay") lr_decay = kv_double(k, v);
    else if (k == "weight_decay") weight_decay = kv_double(k, v);
    else if (k == "reset_interval") reset_interval = kv_long(k, v);
    else if (k == "reset_threshold") reset_threshold = kv_double(k, v);
    else if (k == "log_interval") log_interval = kv_long(k, v);
    else if (k == "seed") seed = static_cast<std::uint64_t>(kv_long(k, v));
    else throw ValidationError("unknown VQ-VAE config key '" + k + "'");
  }
}

void VqConfig::validate() const {
  auto positive = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("VQ-VAE config: ") + what);
  };
  positive(input_dim > 0 && width > 0 && code_dim > 0 && codebook_size > 0, "dimensions must be positive");
  positive(bio_dim >= 0 && bio_dim <= input_dim, "bio_dim must lie in [0, input_dim]");
  positive(down_t >= 0 && res_blocks >= 0, "down_t and res_blocks must be non-negative");
  positive(!dilations.empty(), "dilations must not be empty");
  for (int d : dilations) positive(d > 0, "dilations must be positive");
  positive(window > 0 && window % rate() == 0, "window must be a positive multiple of the downsampling rate");
  positive(batch > 0 && steps >= 0, "batch must be positive and steps non-negative");
  positive(lr > 0.0 && lr_decay > 0.0, "learning rate and decay must be positive");
  positive(decay >= 0.0 && decay < 1.0, "EMA decay must lie in [0, 1)");
  positive(reset_interval > 0 && log_interval > 0, "intervals must be positive");
  positive(beta >= 0.0 && alpha >= 0.0, "loss weights must be non-negative");
}

VqModel::VqModel(const VqConfig& cfg) : codebook(cfg.code_dim, cfg.codebook_size), cfg_(cfg) {
  cfg_.validate();
  Rng rng(mix_seed(cfg.seed));
  build_encoder(encoder_, cfg_, rng);
  build_decoder(decoder_, cfg_, rng);
}

Mat<float> VqModel::encode(const Eigen::MatrixXd& z) {
  if (z.rows() % cfg_.rate() != 0) {
    throw ShapeError("encoder input length " + std::to_string(z.rows()) + " is not divisible by " +
                     std::to_string(cfg_.rate()));
  }
  if (z.cols() != cfg_.input_dim) throw ShapeError("encoder input width mismatch");
  SeqBatch<float> x{z.transpose().cast<float>(), {static_cast<int>(z.rows())}};
  return encoder_.forward(x, false).x;
}

Eigen::MatrixXd VqModel::decode(const std::vector<int>& tokens) {
  for (int t : tokens) {
    if (t < 0 || t >= codebook.size()) throw ValidationError("token " + std::to_string(t) + " out of range");
  }
  if (tokens.empty()) return Eigen::MatrixXd(0, cfg_.input_dim);
  SeqBatch<float> z{codebook.lookup(tokens), {static_cast<int>(tokens.size())}};
  return decoder_.forward(z, false).x.transpose().cast<double>();
}

void VqModel::save(const std::filesystem::path& path) {
  TensorFile f;
  f.magic = "UBVQ";
  f.config = cfg_.to_kv();
  f.config["train_recon_p95"] = format_double(train_recon_p95);
  store_params(f, nn::collect_params<float>(encoder_));
  store_params(f, nn::collect_params<float>(decoder_));
  f.add("codebook.codes", codebook.codes);
  f.add("codebook.ema_count", codebook.ema_count);
  f.add("codebook.ema_sum", codebook.ema_sum);
  f.add("stats.mean", stats.mean.cast<float>());
  f.add("stats.std", stats.std.cast<float>());
  save_tensor_file(f, path);
}

std::unique_ptr<VqModel> VqModel::load(const std::filesystem::path& path) {
  TensorFile f = load_tensor_file(path, "UBVQ");
  KvMap kv = f.config;
  double p95 = 0.0;
  if (auto it = kv.find("train_recon_p95"); it != kv.end()) {
    p95 = kv_double(it->first, it->second);
    kv.erase(it);
  }
  VqConfig cfg;
  cfg.apply(kv);
  auto m = std::make_unique<VqModel>(cfg);
  m->train_recon_p95 = p95;
  restore_params(f, nn::collect_params<float>(m->encoder_));
  restore_params(f, nn::collect_params<float>(m->decoder_));
  m->codebook.codes = f.get("codebook.codes");
  m->codebook.ema_count = f.get("codebook.ema_count");
  m->codebook.ema_sum = f.get("codebook.ema_sum");
  if (m->codebook.codes.rows() != cfg.code_dim || m->codebook.codes.cols() != cfg.codebook_size) {
    throw ShapeError("checkpoint codebook shape does not match its config");
  }
  m->stats.mean = f.get("stats.mean").cast<double>();
  m->stats.std = f.get("stats.std").cast<double>();
  return m;
}

namespace {

// Packs windows of z-normalized features into one batch, zero-padding each
// to `len` frames. Returns the batch and the per-frame validity mask.
struct PackedWindows {
  SeqBatch<float> x;
  std::vector<char> frame_mask;
  std::vector<char> latent_mask;
};

struct WindowRef {
  int seq;
  int start;
  int len;
};

PackedWindows pack(const std::vector<Eigen::MatrixXd>& data, const std::vector<WindowRef>& refs, int len,
                   int rate) {
  PackedWindows p;
  const int dim = static_cast<int>(data.front().cols());
  p.x.x = Mat<float>::Zero(dim, static_cast<Eigen::Index>(refs.size()) * len);
  p.x.lengths.assign(refs.size(), len);
  p.frame_mask.assign(refs.size() * len, 0);
  p.latent_mask.assign(refs.size() * (len / rate), 0);
  for (std::size_t b = 0; b < refs.size(); ++b) {
    const auto& r = refs[b];
    p.x.x.middleCols(b * len, r.len) = data[r.seq].middleRows(r.start, r.len).transpose().cast<float>();
    for (int t = 0; t < r.len; ++t) p.frame_mask[b * len + t] = 1;
    for (int n = 0; n < len / rate; ++n) p.latent_mask[b * (len / rate) + n] = n * rate < r.len;
  }
  return p;
}

// Plain smooth-L1 reconstruction of each window, evaluation mode.
std::vector<double> window_errors(VqModel& m, const std::vector<Eigen::MatrixXd>& data,
                                  const std::vector<WindowRef>& refs) {
  const auto& cfg = m.config();
  std::vector<double> out;
  const std::size_t chunk = 64;
  for (std::size_t b0 = 0; b0 < refs.size(); b0 += chunk) {
    std::vector<WindowRef> part(refs.begin() + b0, refs.begin() + std::min(refs.size(), b0 + chunk));
    auto p = pack(data, part, cfg.window, cfg.rate());
    auto h = m.encoder().forward(p.x, false);
    auto idx = quantize(h.x, m.codebook.codes);
    SeqBatch<float> z{m.codebook.lookup(idx), h.lengths};
    auto xr = m.decoder().forward(z, false);
    for (std::size_t b = 0; b < part.size(); ++b) {
      Mat<float> xb = p.x.x.middleCols(b * cfg.window, cfg.window);
      Mat<float> rb = xr.x.middleCols(b * cfg.window, cfg.window);
      std::vector<char> mask(p.frame_mask.begin() + b * cfg.window,
                             p.frame_mask.begin() + (b + 1) * cfg.window);
      out.push_back(nn::smooth_l1(rb, xb, mask).value);
    }
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

VqTrainResult train_vqvae(const std::vector<FeatureMatrix>& dataset, const VqConfig& cfg,
                          const VqProgress& progress) {
  cfg.validate();
  if (dataset.empty()) throw ValidationError("train_vqvae: empty dataset");
  for (const auto& f : dataset) {
    if (f.values.cols() != cfg.input_dim) {
      throw ShapeError("train_vqvae: feature width " + std::to_string(f.values.cols()) + ", expected " +
                       std::to_string(cfg.input_dim));
    }
  }
  const auto t0 = std::chrono::steady_clock::now();

  VqTrainResult result;
  result.model = std::make_unique<VqModel>(cfg);
  VqModel& model = *result.model;
  model.stats = fit_stats(dataset);

  std::vector<Eigen::MatrixXd> data;
  data.reserve(dataset.size());
  for (const auto& f : dataset) data.push_back(apply_z(f, model.stats).values);

  std::vector<WindowRef> windows;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const int frames = static_cast<int>(data[s].rows());
    for (int start = 0; start < frames; start += cfg.window) {
      windows.push_back({static_cast<int>(s), start, std::min(cfg.window, frames - start)});
    }
  }
  if (windows.empty()) throw ValidationError("train_vqvae: no training windows");

  // Fixed evaluation subset spread over the whole window list.
  std::vector<WindowRef> eval;
  const std::size_t eval_count = std::min<std::size_t>(64, windows.size());
  for (std::size_t i = 0; i < eval_count; ++i) eval.push_back(windows[i * windows.size() / eval_count]);

  Rng rng(mix_seed(cfg.seed ^ 0x7e11ULL));
  std::vector<std::size_t> order(windows.size());
  std::size_t cursor = order.size();
  auto next_batch = [&]() {
    std::vector<WindowRef> refs;
    while (static_cast<int>(refs.size()) < cfg.batch) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        cursor = 0;
      }
      refs.push_back(windows[order[cursor++]]);
    }
    return pack(data, refs, cfg.window, cfg.rate());
  };

  auto params = nn::collect_params<float>(model.encoder());
  auto dec_params = nn::collect_params<float>(model.decoder());
  params.insert(params.end(), dec_params.begin(), dec_params.end());
  nn::Adam<float> opt(params, nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});

  const long tail_start = std::max(0L, cfg.steps - 500);
  // Codebook initialised from the encoder outputs of the first batch; the
  // step-0 reconstruction error is measured right after.
  auto pending = next_batch();
  {
    auto h = model.encoder().forward(pending.x, false);
    model.codebook.init_from(h.x, pending.latent_mask, rng);
    result.initial_recon = mean_of(window_errors(model, data, eval));
  }
  for (long step = 0; step < cfg.steps; ++step) {
    auto batch = step == 0 ? std::move(pending) : next_batch();
    if (step == tail_start) model.codebook.clear_usage();
    auto h = model.encoder().forward(batch.x, true);
    auto idx = quantize(h.x, model.codebook.codes);
    SeqBatch<float> z{model.codebook.lookup(idx), h.lengths};
    auto xr = model.decoder().forward(z, true);
    auto terms = vq_loss<float>(batch.x.x, xr.x, h.x, z.x, cfg, batch.frame_mask, batch.latent_mask);
    if (!std::isfinite(terms.total)) {
      throw TrainingError("non-finite VQ-VAE loss at step " + std::to_string(step), step);
    }

    nn::zero_grads(params);
    auto gz = model.decoder().backward(SeqBatch<float>{terms.grad_recon, xr.lengths});
    gz.x += terms.grad_latent;  // straight-through plus commitment
    model.encoder().backward(gz);
    opt.set_lr(step >= cfg.lr_decay_step ? cfg.lr * cfg.lr_decay : cfg.lr);
    opt.step();

    model.codebook.ema_update(h.x, idx, cfg.decay, batch.latent_mask);
    int reset = 0;
    // No reset on the final step: a fresh code would ship untrained.
    if ((step + 1) % cfg.reset_interval == 0 && step + 1 < cfg.steps) {
      reset = model.codebook.reset_dead(h.x, cfg.reset_threshold, rng, batch.latent_mask);
    }

    if (step % cfg.log_interval == 0 || step + 1 == cfg.steps || reset > 0) {
      std::vector<double> counts(model.codebook.size(), 0.0);
      double valid = 0.0;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        if (batch.latent_mask[j]) {
          counts[idx[j]] += 1.0;
          valid += 1.0;
        }
      }
      double entropy = 0.0;
      for (double c : counts) {
        if (c > 0) entropy -= (c / valid) * std::log(c / valid);
      }
      VqLogRow row{step,        opt.lr(),     terms.total, terms.recon, terms.recon_plain,
                   terms.commit, terms.embed, std::exp(entropy), reset};
      result.log.push_back(row);
      if (progress) progress(row);
    }
  }

  result.codes_used_tail = model.codebook.used_codes();
  result.final_recon = mean_of(window_errors(model, data, eval));
  auto all = window_errors(model, data, windows);
  std::sort(all.begin(), all.end());
  model.train_recon_p95 = all[std::min(all.size() - 1, static_cast<std::size_t>(0.95 * all.size()))];
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

TokenSequence tokenize_features(VqModel& model, const FeatureMatrix& raw) {
  const auto& cfg = model.config();
  const int frames = raw.frames();
  if (frames < cfg.rate()) {
    throw InsufficientFramesError("tokenization needs at least " + std::to_string(cfg.rate()) +
                                  " frames, got " + std::to_string(frames));
  }
  Eigen::MatrixXd z = apply_z(raw, model.stats).values;
  const int padded = (frames + cfg.rate() - 1) / cfg.rate() * cfg.rate();
  SeqBatch<float> x;
  x.x = Mat<float>::Zero(cfg.input_dim, padded);
  x.x.leftCols(frames) = z.transpose().cast<float>();
  for (int start = 0; start < padded; start += cfg.window) x.lengths.push_back(std::min(cfg.window, padded - start));
  auto h = model.encoder().forward(x, false);

  TokenSequence out;
  out.tokens = quantize(h.x, model.codebook.codes);
  out.frames = frames;
  out.padded_frames = padded;
  return out;
}

TokenSequence tokenize(VqModel& model, const MotionSequence& seq, const CanonicalSkeleton& canon) {
  return tokenize_features(model, extract(preprocess(seq, canon)));
}

void save_tokens_jsonl(const std::vector<TokenSequence>& seqs, const std::filesystem::path& path) {
  std::string out;
  for (const auto& s : seqs) {
    nlohmann::json j;
    j["id"] = s.id;
    j["tokens"] = s.tokens;
    j["frames"] = s.frames;
    j["padded_frames"] = s.padded_frames;
    out += j.dump() + "\n";
  }
  write_file(path, out);
}

std::vector<TokenSequence> load_tokens_jsonl(const std::filesystem::path& path) {
  std::vector<TokenSequence> out;
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      TokenSequence s;
      s.id = j.at("id").get<std::string>();
      s.tokens = j.at("tokens").get<std::vector<int>>();
      s.frames = j.value("frames", 0);
      s.padded_frames = j.value("padded_frames", 0);
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_vq_log_csv(const std::vector<VqLogRow>& log, const std::filesystem::path& path) {
  std::string out = "step,lr,total,recon,recon_plain,commit,embed,perplexity,codes_reset\n";
  for (const auto& r : log) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.step, r.lr, r.total, r.recon, r.recon_plain,
                       r.commit, r.embed, r.perplexity, r.codes_reset);
  }
  write_file(path, out);
}

}  // namespace ubiphysio
