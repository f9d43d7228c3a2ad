#include <doctest.h>

#include <chrono>
#include <cmath>

#include "helpers.hpp"
#include "ubiphysio/actions.hpp"
#include "ubiphysio/errors.hpp"
#include "ubiphysio/file_util.hpp"
#include "ubiphysio/synth.hpp"
#include "ubiphysio/vq.hpp"

using namespace ubiphysio;
using nn::Mat;

namespace {

// Exhaustive scan written against the definition: smallest squared distance,
// first index among equals.
std::vector<int> oracle_argmin(const Eigen::MatrixXd& h, const Eigen::MatrixXd& codes) {
  std::vector<int> out;
  for (Eigen::Index n = 0; n < h.cols(); ++n) {
    std::vector<double> d(codes.cols());
    for (Eigen::Index k = 0; k < codes.cols(); ++k) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < h.rows(); ++i) s += (h(i, n) - codes(i, k)) * (h(i, n) - codes(i, k));
      d[k] = s;
    }
    out.push_back(static_cast<int>(std::min_element(d.begin(), d.end()) - d.begin()));
  }
  return out;
}

VqConfig tiny_vq() {
  VqConfig c;
  c.width = 16;
  c.code_dim = 8;
  c.codebook_size = 32;
  c.res_blocks = 1;
  c.dilations = {3};
  c.batch = 4;
  c.window = 16;
  c.steps = 30;
  c.log_interval = 10;
  c.reset_interval = 10;
  return c;
}

std::vector<FeatureMatrix> tiny_dataset(int n) {
  std::vector<FeatureMatrix> out;
  for (int i = 0; i < n; ++i) {
    SynthSpec s;
    s.action_type = 1 + i % kActionCount;
    s.seed = static_cast<std::uint64_t>(i);
    s.duration_s = 1.0;
    out.push_back(extract(synthesize_action(s).motion));
  }
  return out;
}

}  // namespace

TEST_SUITE("vq") {
  TEST_CASE("quantizer equals the exhaustive-scan oracle on 100 random latents") {
    Rng rng(1);
    Eigen::MatrixXd codes = Eigen::MatrixXd::NullaryExpr(16, 512, [&] { return rng.normal(); });
    Eigen::MatrixXd h = Eigen::MatrixXd::NullaryExpr(16, 100, [&] { return rng.normal(); });
    auto t0 = std::chrono::steady_clock::now();
    auto got = quantize<double>(h, codes);
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 1.0);
    CHECK(got == oracle_argmin(h, codes));
  }

  TEST_CASE("ties go to the lowest index and exact matches are found") {
    Mat<double> codes(2, 4);
    codes << 1, -1, 1, 0,
             0, 0, 0, 5;
    Mat<double> h(2, 3);
    h << 0, 1, 0,
         0, 0, 5;
    // (0,0) is equidistant from codes 0, 1 and 2.
    CHECK(quantize<double>(h, codes) == std::vector<int>{0, 0, 3});
    Mat<double> dup(2, 3);
    dup << 2, 2, 2, 2, 2, 2;
    Mat<double> one = Mat<double>::Constant(2, 1, 2.0);
    CHECK(quantize<double>(one, dup) == std::vector<int>{0});
    CHECK_THROWS_AS(quantize<double>(Mat<double>::Zero(3, 1), codes), ShapeError);
  }

  TEST_CASE("one EMA step matches the closed form") {
    Rng rng(2);
    Codebook<double> cb(3, 4);
    cb.codes = Mat<double>::NullaryExpr(3, 4, [&] { return rng.normal(); });
    cb.ema_sum = Mat<double>::NullaryExpr(3, 4, [&] { return rng.normal(); });
    cb.ema_count << 2.0, 0.5, 1.0, 3.0;
    Mat<double> h = Mat<double>::NullaryExpr(3, 6, [&] { return rng.normal(); });
    std::vector<int> idx = {0, 2, 0, 3, 2, 2};
    const double lam = 0.99;

    Eigen::VectorXd n = Eigen::VectorXd::Zero(4);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 4);
    for (int j = 0; j < 6; ++j) {
      n[idx[j]] += 1;
      s.col(idx[j]) += h.col(j);
    }
    Eigen::VectorXd count = lam * cb.ema_count + (1 - lam) * n;
    Eigen::MatrixXd sum = lam * cb.ema_sum + (1 - lam) * s;
    cb.ema_update(h, idx, lam);
    CHECK((cb.ema_count - count).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((cb.ema_sum - sum).cwiseAbs().maxCoeff() < 1e-9);
    for (int k = 0; k < 4; ++k) CHECK((cb.codes.col(k) - sum.col(k) / count[k]).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(cb.usage == std::vector<long>{2, 0, 3, 1});
  }

  TEST_CASE("decay 0 makes each code the mean of its latents; masked columns are ignored") {
    Codebook<double> cb(2, 3);
    Mat<double> h(2, 4);
    h << 1, 3, 10, 7,
         2, 4, 20, 7;
    cb.ema_update(h, {0, 0, 1, 2}, 0.0, {1, 1, 1, 0});
    CHECK(cb.codes(0, 0) == doctest::Approx(2.0));
    CHECK(cb.codes(1, 0) == doctest::Approx(3.0));
    CHECK(cb.codes(0, 1) == doctest::Approx(10.0));
    CHECK(cb.ema_count[2] == 0.0);
  }

  TEST_CASE("repeated EMA updates converge to the assigned cluster mean") {
    Codebook<double> cb(1, 1);
    Mat<double> h(1, 2);
    h << 4.0, 6.0;
    for (int i = 0; i < 3000; ++i) cb.ema_update(h, {0, 0}, 0.99);
    CHECK(cb.codes(0, 0) == doctest::Approx(5.0).epsilon(1e-6));
    CHECK(cb.ema_count[0] == doctest::Approx(2.0).epsilon(1e-6));
  }

  TEST_CASE("reset replaces exactly the codes below the threshold with batch latents") {
    Rng rng(3);
    Codebook<double> cb(2, 4);
    cb.codes.setZero();
    cb.ema_count << 5.0, 0.2, 1.0, 0.99;
    Mat<double> h(2, 3);
    h << 10, 20, 30,
         11, 21, 31;
    int n = cb.reset_dead(h, 1.0, rng, {1, 0, 1});
    CHECK(n == 2);
    CHECK(cb.codes.col(0).isZero());
    CHECK(cb.codes.col(2).isZero());
    for (int k : {1, 3}) {
      bool from_valid = (cb.codes.col(k) - h.col(0)).norm() == 0.0 || (cb.codes.col(k) - h.col(2)).norm() == 0.0;
      CHECK(from_valid);
      CHECK(cb.ema_count[k] == 1.0);
      CHECK((cb.ema_sum.col(k) - cb.codes.col(k)).norm() == 0.0);
    }
  }

  TEST_CASE("config round-trips through key=value and rejects unknown keys") {
    auto c = VqConfig::desk();
    VqConfig d;
    d.apply(c.to_kv());
    CHECK(d.to_kv() == c.to_kv());
    CHECK_THROWS_AS(d.apply({{"widht", "3"}}), ValidationError);
    d.dilations = {};
    CHECK_THROWS_AS(d.validate(), ValidationError);
  }

  TEST_CASE("short training run is deterministic, saves and reloads to identical tokens") {
    auto data = tiny_dataset(6);
    auto cfg = tiny_vq();
    auto a = train_vqvae(data, cfg);
    auto b = train_vqvae(data, cfg);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].total == b.log[i].total);
    CHECK(std::isfinite(a.final_recon));

    auto dir = testutil::temp_dir("vq_model");
    a.model->save(dir / "m.ubvq");
    auto loaded = VqModel::load(dir / "m.ubvq");
    auto t1 = tokenize_features(*a.model, data[0]);
    auto t2 = tokenize_features(*loaded, data[0]);
    CHECK(t1.tokens == t2.tokens);
    CHECK(loaded->train_recon_p95 == doctest::Approx(a.model->train_recon_p95));

    // 60 frames -> padded to 60 (multiple of 4) -> 15 tokens; 61 -> 64 -> 16.
    CHECK(t1.tokens.size() == 15);
    FeatureMatrix longer = data[0];
    longer.values.conservativeResize(61, Eigen::NoChange);
    longer.values.row(60) = longer.values.row(59);
    CHECK(tokenize_features(*a.model, longer).tokens.size() == 16);
    FeatureMatrix tiny = data[0];
    tiny.values.conservativeResize(3, Eigen::NoChange);
    CHECK_THROWS_AS(tokenize_features(*a.model, tiny), InsufficientFramesError);
    for (int t : t1.tokens) CHECK((t >= 0 && t < cfg.codebook_size));

    std::string bytes = read_file(dir / "m.ubvq");
    write_file(dir / "cut.ubvq", bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(VqModel::load(dir / "cut.ubvq"), ParseError);
  }

  TEST_CASE("token JSONL round trip") {
    auto dir = testutil::temp_dir("tokens");
    std::vector<TokenSequence> s = {{"a", {1, 2, 3}, 12, 12}, {"b", {}, 0, 0}};
    save_tokens_jsonl(s, dir / "t.jsonl");
    auto back = load_tokens_jsonl(dir / "t.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[0].tokens == s[0].tokens);
    CHECK(back[0].frames == 12);
    CHECK(back[1].id == "b");
  }
}
