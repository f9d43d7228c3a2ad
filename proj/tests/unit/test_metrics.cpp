#include <doctest.h>

#include <cmath>

#include "ubiphysio/errors.hpp"
#include "ubiphysio/metrics.hpp"
#include "ubiphysio/rng.hpp"

using namespace ubiphysio;
using namespace ubiphysio::metrics;

namespace {

// Frozen from an independent script implementation on the toy corpus below.
constexpr double kBleu[4] = {86.956521739130437, 65.938047339578702, 50.380725319929120, 36.764088402419773};
constexpr double kRouge1 = 77.129629629629619;
constexpr double kRouge2 = 46.703296703296701;
constexpr double kRougeL = 73.425925925925910;
constexpr double kCider = 2.567812579649674;

Corpus toy() {
  Corpus c;
  c.ids = {"a", "b", "c"};
  c.candidates = {"the man bends to his left side slowly", "a person squats down with knees bent forward",
                  "someone walks with a steady pace forward"};
  c.references = {{"the man bends his trunk to the left side slowly", "a person leans to the left"},
                  {"the person squats deeply with knees moving forward"},
                  {"someone walks with a steady and even pace", "a person is walking forward"}};
  return c;
}

std::vector<Tokens> tok(const std::vector<std::string>& v) {
  std::vector<Tokens> out;
  for (const auto& s : v) out.push_back(tokenize(s));
  return out;
}

std::vector<std::vector<Tokens>> tok(const std::vector<std::vector<std::string>>& v) {
  std::vector<std::vector<Tokens>> out;
  for (const auto& r : v) out.push_back(tok(r));
  return out;
}

// Longest common subsequence by enumerating every subsequence of the shorter
// sequence.
std::size_t lcs_brute(const Tokens& a, const Tokens& b) {
  const Tokens& s = a.size() <= b.size() ? a : b;
  const Tokens& t = a.size() <= b.size() ? b : a;
  std::size_t best = 0;
  for (unsigned mask = 0; mask < (1u << s.size()); ++mask) {
    std::size_t j = 0, n = 0;
    bool ok = true;
    for (std::size_t i = 0; i < s.size() && ok; ++i) {
      if (!(mask & (1u << i))) continue;
      while (j < t.size() && t[j] != s[i]) ++j;
      if (j == t.size()) ok = false;
      else {
        ++j;
        ++n;
      }
    }
    if (ok) best = std::max(best, n);
  }
  return best;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("tokenizer lowercases and drops punctuation") {
    CHECK(tokenize("The man's knee, BENT!") == Tokens{"the", "man's", "knee", "bent"});
    CHECK(tokenize("  '' -- ").empty());
  }

  TEST_CASE("toy corpus matches the frozen reference values") {
    auto s = score_corpus(toy());
    CHECK(s.bleu1 == doctest::Approx(kBleu[0]).epsilon(1e-8));
    CHECK(s.bleu2 == doctest::Approx(kBleu[1]).epsilon(1e-8));
    CHECK(s.bleu3 == doctest::Approx(kBleu[2]).epsilon(1e-8));
    CHECK(s.bleu4 == doctest::Approx(kBleu[3]).epsilon(1e-8));
    CHECK(std::abs(s.rouge1 - kRouge1) < 1e-6);
    CHECK(std::abs(s.rouge2 - kRouge2) < 1e-6);
    CHECK(std::abs(s.rouge_l - kRougeL) < 1e-6);
    CHECK(std::abs(s.cider - kCider) < 1e-6);
    CHECK_FALSE(s.cider_smoothed);
  }

  TEST_CASE("hand-computed BLEU-1 with a brevity penalty") {
    auto c = tok(std::vector<std::string>{"the cat sat"});
    auto r = tok(std::vector<std::vector<std::string>>{{"the cat sat on mat"}});
    CHECK(bleu(c, r, 1) == doctest::Approx(100.0 * std::exp(-2.0 / 3.0)).epsilon(1e-12));
  }

  TEST_CASE("a candidate equal to its only reference scores the maximum") {
    auto c = toy();
    for (std::size_t i = 0; i < c.candidates.size(); ++i) {
      c.references[i].resize(1);
      c.candidates[i] = c.references[i][0];
    }
    auto s = score_corpus(c);
    CHECK(s.bleu4 == doctest::Approx(100.0));
    CHECK(s.rouge1 == doctest::Approx(100.0));
    CHECK(s.rouge_l == doctest::Approx(100.0));
    CHECK(s.cider == doctest::Approx(10.0));
  }

  TEST_CASE("empty and disjoint candidates score zero") {
    auto c = toy();
    c.candidates = {"", "", ""};
    auto s = score_corpus(c);
    CHECK(s.bleu1 == 0.0);
    CHECK(s.rouge_l == 0.0);
    CHECK(s.cider == 0.0);
    c.candidates = {"zzz yyy", "qqq", "xxx www vvv"};
    s = score_corpus(c);
    CHECK(s.bleu1 == 0.0);
    CHECK(s.rouge1 == 0.0);
    CHECK(s.cider == 0.0);
  }

  TEST_CASE("a single item uses the smoothed idf and says so") {
    auto c = toy();
    c.ids.resize(1);
    c.candidates.resize(1);
    c.references.resize(1);
    auto s = score_corpus(c);
    CHECK(s.cider_smoothed);
    CHECK(s.cider > 0.0);
  }

  TEST_CASE("LCS agrees with subset enumeration on random short sequences") {
    Rng rng(9);
    const std::vector<std::string> vocab = {"a", "b", "c", "d"};
    for (int trial = 0; trial < 300; ++trial) {
      Tokens x, y;
      for (std::size_t i = 0, n = rng.below(10); i < n; ++i) x.push_back(vocab[rng.below(4)]);
      for (std::size_t i = 0, n = rng.below(12); i < n; ++i) y.push_back(vocab[rng.below(4)]);
      CHECK(lcs_length(x, y) == lcs_brute(x, y));
    }
  }

  TEST_CASE("ill-formed corpora are rejected") {
    Corpus c = toy();
    c.references[1].clear();
    CHECK_THROWS_AS(c.validate(), ValidationError);
    CHECK_THROWS_AS(classification_report({}, {}, 3), ValidationError);
  }

  TEST_CASE("mean and 95% interval") {
    auto m = mean_ci({1.0, 2.0, 3.0, 4.0});
    CHECK(m.mean == doctest::Approx(2.5));
    CHECK(m.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(m.half_width == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0) / 2.0));
    CHECK(mean_ci({7.0}).half_width == 0.0);
  }
}
