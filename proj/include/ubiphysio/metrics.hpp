#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ubiphysio::metrics {

// Lowercases and splits on every character that is neither alphanumeric nor
// an apostrophe; punctuation is dropped. Tokens made only of apostrophes are
// discarded.
std::vector<std::string> tokenize(std::string_view text);

using Tokens = std::vector<std::string>;

// One candidate and one or more references per item.
struct Corpus {
  std::vector<std::string> ids;
  std::vector<std::string> candidates;
  std::vector<std::vector<std::string>> references;

  void validate() const;
};

enum class BleuMode { Corpus, SentenceAverage };

// BLEU with uniform weights over orders 1..max_order, clipped by the maximum
// reference count, closest-reference brevity penalty (shorter reference on a
// tie), no smoothing. Scaled to 0..100.
double bleu(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references,
            int max_order = 4, BleuMode mode = BleuMode::Corpus);

// ROUGE-N F1 of clipped n-gram overlap; best reference per item; mean x 100.
double rouge_n(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references, int n);
// ROUGE-L F1 (beta = 1) from the longest common subsequence; best reference; mean x 100.
double rouge_l(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references);
std::size_t lcs_length(const Tokens& a, const Tokens& b);

struct CiderOptions {
  double sigma = 6.0;
  int max_order = 4;
};

// CIDEr-D x 10. Document frequencies come from the reference sets. With a
// single item the plain idf is zero everywhere, so a smoothed idf
// log((1 + N) / (1 + df)) + 1 is used instead and *smoothed is set.
double cider_d(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references,
               const CiderOptions& opt = {}, bool* smoothed = nullptr);

struct NlgScores {
  double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
  double rouge1 = 0, rouge2 = 0, rouge_l = 0;
  double cider = 0;
  bool cider_smoothed = false;

  std::map<std::string, double> as_map() const;
};

NlgScores score_corpus(const Corpus& corpus, BleuMode bleu_mode = BleuMode::Corpus);

// Labels are 1-based class indices.
struct ClassificationReport {
  Eigen::MatrixXi confusion;  // rows = true class, cols = predicted class
  std::vector<double> precision, recall, f1;
  std::vector<int> support;
  std::vector<char> counted;  // classes included in the macro average
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};

// Macro F1 averages over classes that occur in the truth or the predictions,
// minus any masked classes. Throws ValidationError on empty input.
ClassificationReport classification_report(const std::vector<int>& truth, const std::vector<int>& predicted,
                                           int num_classes, const std::set<int>& masked = {});

struct MeanCi {
  double mean = 0.0;
  double sd = 0.0;
  double half_width = 0.0;  // 1.96 * sd / sqrt(n)
};
// Sample standard deviation (n - 1); zero spread for n = 1.
MeanCi mean_ci(const std::vector<double>& values);

}  // namespace ubiphysio::metrics
