#include "ubiphysio/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <spdlog/spdlog.h>

#include "ubiphysio/errors.hpp"

namespace ubiphysio::metrics {

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngrams(const Tokens& t, int n) {
  NgramCounts out;
  if (static_cast<int>(t.size()) < n) return out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Tokens(t.begin() + i, t.begin() + i + n)];
  return out;
}

int total(const NgramCounts& c) {
  int s = 0;
  for (const auto& [g, k] : c) s += k;
  return s;
}

void check_shapes(const std::vector<Tokens>& c, const std::vector<std::vector<Tokens>>& r) {
  if (c.size() != r.size()) throw ValidationError("metric: candidate and reference counts differ");
  if (c.empty()) throw ValidationError("metric: empty corpus");
  for (const auto& refs : r) {
    if (refs.empty()) throw ValidationError("metric: item without references");
  }
}

struct BleuStats {
  std::vector<double> matches, possible;
  double cand_len = 0.0, ref_len = 0.0;
};

void accumulate_bleu(const Tokens& cand, const std::vector<Tokens>& refs, int max_order, BleuStats& s) {
  for (int n = 1; n <= max_order; ++n) {
    auto cc = ngrams(cand, n);
    std::map<std::vector<std::string>, int> max_ref;
    for (const auto& r : refs) {
      for (const auto& [g, k] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], k);
    }
    for (const auto& [g, k] : cc) {
      auto it = max_ref.find(g);
      if (it != max_ref.end()) s.matches[n - 1] += std::min(k, it->second);
    }
    s.possible[n - 1] += total(cc);
  }
  s.cand_len += static_cast<double>(cand.size());
  // Closest reference length; the shorter one wins a tie.
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    long d = std::labs(static_cast<long>(r.size()) - static_cast<long>(cand.size()));
    long bd = std::labs(static_cast<long>(best) - static_cast<long>(cand.size()));
    if (d < bd || (d == bd && r.size() < best)) best = r.size();
  }
  s.ref_len += static_cast<double>(best);
}

double bleu_from(const BleuStats& s, int max_order) {
  if (s.cand_len == 0.0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < max_order; ++n) {
    if (s.matches[n] == 0.0 || s.possible[n] == 0.0) return 0.0;
    log_sum += std::log(s.matches[n] / s.possible[n]);
  }
  double bp = s.cand_len > s.ref_len ? 1.0 : std::exp(1.0 - s.ref_len / s.cand_len);
  return 100.0 * bp * std::exp(log_sum / max_order);
}

double f1(double overlap, double cand_total, double ref_total) {
  if (overlap == 0.0 || cand_total == 0.0 || ref_total == 0.0) return 0.0;
  double p = overlap / cand_total;
  double r = overlap / ref_total;
  return 2.0 * p * r / (p + r);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && cur.find_first_not_of('\'') != std::string::npos) out.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u) || ch == '\'') {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

void Corpus::validate() const {
  if (ids.size() != candidates.size() || ids.size() != references.size()) {
    throw ValidationError("corpus: ids, candidates and references differ in length");
  }
  if (ids.empty()) throw ValidationError("corpus: no items");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (references[i].empty()) throw ValidationError("corpus: item '" + ids[i] + "' has no reference");
  }
}

double bleu(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references,
            int max_order, BleuMode mode) {
  check_shapes(candidates, references);
  if (max_order < 1) throw ValidationError("bleu: max_order must be >= 1");
  if (mode == BleuMode::Corpus) {
    BleuStats s{std::vector<double>(max_order, 0.0), std::vector<double>(max_order, 0.0)};
    for (std::size_t i = 0; i < candidates.size(); ++i) accumulate_bleu(candidates[i], references[i], max_order, s);
    return bleu_from(s, max_order);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    BleuStats s{std::vector<double>(max_order, 0.0), std::vector<double>(max_order, 0.0)};
    accumulate_bleu(candidates[i], references[i], max_order, s);
    sum += bleu_from(s, max_order);
  }
  return sum / static_cast<double>(candidates.size());
}

double rouge_n(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references, int n) {
  check_shapes(candidates, references);
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto cc = ngrams(candidates[i], n);
    double best = 0.0;
    for (const auto& r : references[i]) {
      auto rc = ngrams(r, n);
      double overlap = 0.0;
      for (const auto& [g, k] : cc) {
        auto it = rc.find(g);
        if (it != rc.end()) overlap += std::min(k, it->second);
      }
      best = std::max(best, f1(overlap, total(cc), total(rc)));
    }
    sum += best;
  }
  return 100.0 * sum / static_cast<double>(candidates.size());
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references) {
  check_shapes(candidates, references);
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double best = 0.0;
    for (const auto& r : references[i]) {
      best = std::max(best, f1(static_cast<double>(lcs_length(candidates[i], r)),
                               static_cast<double>(candidates[i].size()), static_cast<double>(r.size())));
    }
    sum += best;
  }
  return 100.0 * sum / static_cast<double>(candidates.size());
}

double cider_d(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references,
               const CiderOptions& opt, bool* smoothed) {
  check_shapes(candidates, references);
  const int orders = opt.max_order;
  const double n_docs = static_cast<double>(candidates.size());
  const bool smooth = candidates.size() == 1;
  if (smoothed) *smoothed = smooth;
  if (smooth) spdlog::warn("CIDEr-D on a single item: using smoothed document frequencies");

  // Document frequency: number of items whose reference set contains the n-gram.
  std::vector<std::map<Tokens, double>> df(orders);
  for (const auto& refs : references) {
    for (int n = 1; n <= orders; ++n) {
      std::set<Tokens> seen;
      for (const auto& r : refs) {
        for (const auto& [g, k] : ngrams(r, n)) seen.insert(g);
      }
      for (const auto& g : seen) df[n - 1][g] += 1.0;
    }
  }
  auto idf = [&](int n, const Tokens& g) {
    auto it = df[n - 1].find(g);
    double d = it == df[n - 1].end() ? 0.0 : it->second;
    if (smooth) return std::log((1.0 + n_docs) / (1.0 + d)) + 1.0;
    return std::log(n_docs) - std::log(std::max(1.0, d));
  };
  using Vecs = std::vector<std::map<Tokens, double>>;
  auto to_vec = [&](const Tokens& t, Vecs& vec, std::vector<double>& norm) {
    vec.assign(orders, {});
    norm.assign(orders, 0.0);
    for (int n = 1; n <= orders; ++n) {
      for (const auto& [g, k] : ngrams(t, n)) {
        double v = static_cast<double>(k) * idf(n, g);
        vec[n - 1][g] = v;
        norm[n - 1] += v * v;
      }
      norm[n - 1] = std::sqrt(norm[n - 1]);
    }
  };

  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    Vecs cv;
    std::vector<double> cn;
    to_vec(candidates[i], cv, cn);
    std::vector<double> score(orders, 0.0);
    for (const auto& r : references[i]) {
      Vecs rv;
      std::vector<double> rn;
      to_vec(r, rv, rn);
      double delta = static_cast<double>(candidates[i].size()) - static_cast<double>(r.size());
      double penalty = std::exp(-(delta * delta) / (2.0 * opt.sigma * opt.sigma));
      for (int n = 0; n < orders; ++n) {
        double val = 0.0;
        for (const auto& [g, v] : cv[n]) {
          auto it = rv[n].find(g);
          if (it != rv[n].end()) val += std::min(v, it->second) * it->second;
        }
        if (cn[n] != 0.0 && rn[n] != 0.0) val /= cn[n] * rn[n];
        score[n] += val * penalty;
      }
    }
    double avg = 0.0;
    for (double s : score) avg += s;
    avg /= orders;
    avg /= static_cast<double>(references[i].size());
    sum += 10.0 * avg;
  }
  return sum / n_docs;
}

std::map<std::string, double> NlgScores::as_map() const {
  return {{"BLEU-1", bleu1}, {"BLEU-2", bleu2},   {"BLEU-3", bleu3},   {"BLEU-4", bleu4},
          {"ROUGE-1", rouge1}, {"ROUGE-2", rouge2}, {"ROUGE-L", rouge_l}, {"CIDEr", cider}};
}

NlgScores score_corpus(const Corpus& corpus, BleuMode bleu_mode) {
  corpus.validate();
  std::vector<Tokens> cands;
  std::vector<std::vector<Tokens>> refs;
  for (std::size_t i = 0; i < corpus.ids.size(); ++i) {
    cands.push_back(tokenize(corpus.candidates[i]));
    std::vector<Tokens> r;
    for (const auto& t : corpus.references[i]) r.push_back(tokenize(t));
    refs.push_back(std::move(r));
  }
  NlgScores s;
  s.bleu1 = bleu(cands, refs, 1, bleu_mode);
  s.bleu2 = bleu(cands, refs, 2, bleu_mode);
  s.bleu3 = bleu(cands, refs, 3, bleu_mode);
  s.bleu4 = bleu(cands, refs, 4, bleu_mode);
  s.rouge1 = rouge_n(cands, refs, 1);
  s.rouge2 = rouge_n(cands, refs, 2);
  s.rouge_l = rouge_l(cands, refs);
  s.cider = cider_d(cands, refs, {}, &s.cider_smoothed);
  return s;
}

ClassificationReport classification_report(const std::vector<int>& truth, const std::vector<int>& predicted,
                                           int num_classes, const std::set<int>& masked) {
  if (truth.empty()) throw ValidationError("classification report: empty test set");
  if (truth.size() != predicted.size()) throw ValidationError("classification report: length mismatch");
  ClassificationReport r;
  r.confusion = Eigen::MatrixXi::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 1 || truth[i] > num_classes || predicted[i] < 1 || predicted[i] > num_classes) {
      throw ValidationError("classification report: label out of range");
    }
    ++r.confusion(truth[i] - 1, predicted[i] - 1);
  }
  r.precision.assign(num_classes, 0.0);
  r.recall.assign(num_classes, 0.0);
  r.f1.assign(num_classes, 0.0);
  r.support.assign(num_classes, 0);
  r.counted.assign(num_classes, 0);
  double f1_sum = 0.0;
  int counted = 0;
  for (int c = 0; c < num_classes; ++c) {
    const double tp = r.confusion(c, c);
    const double row = r.confusion.row(c).sum();
    const double col = r.confusion.col(c).sum();
    r.support[c] = static_cast<int>(row);
    r.precision[c] = col > 0 ? tp / col : 0.0;
    r.recall[c] = row > 0 ? tp / row : 0.0;
    r.f1[c] = (r.precision[c] + r.recall[c]) > 0
                  ? 2.0 * r.precision[c] * r.recall[c] / (r.precision[c] + r.recall[c])
                  : 0.0;
    if ((row > 0 || col > 0) && !masked.count(c + 1)) {
      r.counted[c] = 1;
      f1_sum += r.f1[c];
      ++counted;
    }
  }
  r.macro_f1 = counted > 0 ? f1_sum / counted : 0.0;
  r.accuracy = static_cast<double>(r.confusion.trace()) / static_cast<double>(truth.size());
  return r;
}

MeanCi mean_ci(const std::vector<double>& values) {
  MeanCi out;
  if (values.empty()) return out;
  double n = static_cast<double>(values.size());
  for (double v : values) out.mean += v;
  out.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / (n - 1.0));
  }
  out.half_width = 1.96 * out.sd / std::sqrt(n);
  return out;
}

}  // namespace ubiphysio::metrics
