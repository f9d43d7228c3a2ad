#include <doctest.h>

#include <cmath>

#include "ubiphysio/classifier.hpp"
#include "ubiphysio/nn/gradcheck.hpp"
#include "ubiphysio/nn/layers.hpp"
#include "ubiphysio/nn/loss.hpp"
#include "ubiphysio/nn/optim.hpp"
#include "ubiphysio/vq.hpp"

using namespace ubiphysio;
using nn::Mat;
using nn::SeqBatch;

namespace {

VqConfig toy_vq() {
  VqConfig c;
  c.input_dim = 7;
  c.bio_dim = 3;
  c.width = 5;
  c.code_dim = 4;
  c.codebook_size = 6;
  c.down_t = 2;
  c.res_blocks = 2;
  c.dilations = {3, 1};
  return c;
}

SeqBatch<double> random_batch(int channels, std::vector<int> lengths, Rng& rng) {
  SeqBatch<double> b;
  b.lengths = std::move(lengths);
  b.x = Mat<double>::NullaryExpr(channels, b.total(), [&] { return rng.normal(); });
  return b;
}

void check_all(const std::vector<nn::GradCheckResult>& results) {
  REQUIRE_FALSE(results.empty());
  for (const auto& r : results) {
    INFO(r.name << " rel " << r.rel_error << " max abs " << r.max_abs_diff);
    // A bias feeding batch norm has a true gradient of exactly zero, so both
    // sides are rounding noise and the ratio is meaningless there.
    CHECK((r.rel_error < 1e-4 || r.max_abs_diff < 1e-8));
  }
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("conv output length follows the usual formula") {
    nn::ConvShape s{3, 4, 4, 2, 1, 1};
    CHECK(s.out_length(64) == 32);
    CHECK(s.out_length(7) == 3);
    nn::ConvShape d{3, 4, 3, 1, 9, 9};
    CHECK(d.out_length(20) == 20);
  }

  TEST_CASE("encoder maps T frames to T/4 latents per sample") {
    Rng rng(1);
    auto cfg = toy_vq();
    nn::Sequential<double> enc, dec;
    build_encoder(enc, cfg, rng);
    build_decoder(dec, cfg, rng);
    auto x = random_batch(cfg.input_dim, {64, 12, 4}, rng);
    auto h = enc.forward(x, false);
    CHECK(h.lengths == std::vector<int>{16, 3, 1});
    CHECK(h.channels() == cfg.code_dim);
    auto y = dec.forward(h, false);
    CHECK(y.lengths == x.lengths);
    CHECK(y.channels() == cfg.input_dim);
  }

  TEST_CASE("gradient check: encoder and decoder with the reconstruction and commitment loss") {
    // The quantizer is replaced by a fixed code matrix for the commitment
    // term and by the identity on the decoder path, so the whole chain is
    // differentiable for the finite-difference probe.
    Rng rng(2);
    auto cfg = toy_vq();
    nn::Sequential<double> enc, dec;
    build_encoder(enc, cfg, rng);
    build_decoder(dec, cfg, rng);
    auto x = random_batch(cfg.input_dim, {16, 8}, rng);
    Mat<double> target = Mat<double>::NullaryExpr(cfg.input_dim, x.total(), [&] { return 0.3 * rng.normal(); });
    Mat<double> codes = Mat<double>::NullaryExpr(cfg.code_dim, 6, [&] { return rng.normal(); });

    auto loss = [&](bool backprop) {
      auto h = enc.forward(x, true);
      auto xr = dec.forward(h, true);
      auto terms = vq_loss<double>(target, xr.x, h.x, codes, cfg);
      if (backprop) {
        auto gh = dec.backward(SeqBatch<double>{terms.grad_recon, xr.lengths});
        gh.x += terms.grad_latent;
        enc.backward(gh);
      }
      return terms.recon + terms.commit;
    };
    auto params = nn::collect_params(enc);
    auto dp = nn::collect_params(dec);
    params.insert(params.end(), dp.begin(), dp.end());
    nn::zero_grads(params);
    loss(true);
    check_all(nn::gradient_check(params, [&] { return loss(false); }));
  }

  TEST_CASE("gradient check: classifier in training mode with frozen dropout") {
    Rng init(3), drop(4), data(5);
    ClsConfig cfg;
    cfg.input_dim = 6;
    cfg.num_classes = 4;
    cfg.stem_channels = 4;
    cfg.stage2_channels = 6;
    cfg.dropout = 0.3;
    ClassifierNet<double> net(cfg, init, drop);
    auto x = random_batch(cfg.input_dim, {8, 13, 20}, data);
    std::vector<int> labels = {0, 3, 1};

    net.freeze_dropout(false);
    net.forward(x, true);  // draws the dropout masks
    net.freeze_dropout(true);
    auto params = net.params();
    nn::zero_grads(params);
    auto out = nn::softmax_cross_entropy(net.forward(x, true), labels);
    net.backward(out.grad);
    check_all(nn::gradient_check(
        params, [&] { return nn::softmax_cross_entropy(net.forward(x, true), labels).value; }, 1e-6, 48));
  }

  TEST_CASE("gradient check: batch norm, max pool and linear head directly") {
    Rng rng(6);
    nn::BatchNorm1d<double> bn("bn", 3);
    nn::MaxPool1d<double> pool(3, 2, 1);
    nn::Linear<double> lin("lin", 3, 2, rng);
    auto x = random_batch(3, {9, 6}, rng);
    Mat<double> w = Mat<double>::NullaryExpr(2, 2, [&] { return rng.normal(); });
    auto f = [&](bool back) {
      auto h = pool.forward(bn.forward(x, true), true);
      auto y = lin.forward(nn::global_avg_pool(h));
      if (back) {
        auto g = nn::global_avg_pool_backward<double>(lin.backward(w), h.lengths);
        bn.backward(pool.backward(g));
      }
      return (y.array() * w.array()).sum();
    };
    std::vector<nn::Param<double>*> ps;
    bn.params(ps);
    lin.params(ps);
    nn::zero_grads(ps);
    f(true);
    check_all(nn::gradient_check(ps, [&] { return f(false); }));
  }

  TEST_CASE("input gradient of the packed conv matches finite differences") {
    Rng rng(7);
    nn::Conv1d<double> conv("c", nn::ConvShape{2, 3, 4, 2, 1, 1}, rng);
    auto x = random_batch(2, {7, 10}, rng);
    auto y0 = conv.forward(x, true);
    Mat<double> w = Mat<double>::NullaryExpr(y0.x.rows(), y0.x.cols(), [&] { return rng.normal(); });
    auto g = conv.backward(SeqBatch<double>{w, y0.lengths});
    const double h = 1e-6;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < x.x.size(); ++i) {
      auto xp = x, xm = x;
      xp.x.data()[i] += h;
      xm.x.data()[i] -= h;
      double num = ((conv.forward(xp, true).x.array() - conv.forward(xm, true).x.array()) * w.array()).sum() / (2 * h);
      worst = std::max(worst, std::abs(num - g.x.data()[i]));
    }
    CHECK(worst < 1e-7);
  }

  TEST_CASE("stop-gradient: the embedding term sends nothing to the encoder") {
    // d(total)/dh must equal d(commit)/dh alone; the codebook-side term is
    // only reported.
    Rng rng(8);
    auto cfg = toy_vq();
    Mat<double> h = Mat<double>::NullaryExpr(4, 5, [&] { return rng.normal(); });
    Mat<double> z = Mat<double>::NullaryExpr(4, 5, [&] { return rng.normal(); });
    Mat<double> x = Mat<double>::Zero(cfg.input_dim, 20), xr = x;
    auto terms = vq_loss<double>(x, xr, h, z, cfg);
    Mat<double> expected = 2.0 * (h - z) / static_cast<double>(h.size());
    CHECK((terms.grad_latent - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(terms.embed == doctest::Approx(cfg.beta * terms.commit));
    CHECK((terms.grad_codes + static_cast<double>(cfg.beta) * expected).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("smooth L1 switches from quadratic to linear at 1 and honours the mask") {
    Mat<double> p(1, 3), t = Mat<double>::Zero(1, 3);
    p << 0.5, -2.0, 10.0;
    auto all = nn::smooth_l1(p, t);
    CHECK(all.value == doctest::Approx((0.125 + 1.5 + 9.5) / 3));
    auto masked = nn::smooth_l1(p, t, {1, 1, 0});
    CHECK(masked.value == doctest::Approx((0.125 + 1.5) / 2));
    CHECK(masked.grad(0, 2) == 0.0);
    CHECK(masked.grad(0, 1) == doctest::Approx(-0.5));
  }

  TEST_CASE("AdamW step matches a hand computation and skips decay on biases") {
    nn::Param<double> w, b;
    w.name = "w";
    w.decay = true;
    w.value = Mat<double>::Constant(1, 1, 1.0);
    w.grad = Mat<double>::Constant(1, 1, 0.5);
    b.name = "b";
    b.value = Mat<double>::Constant(1, 1, 1.0);
    b.grad = Mat<double>::Constant(1, 1, 0.5);
    nn::Adam<double> opt({&w, &b}, nn::AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.01});
    opt.step();
    // First step: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps).
    const double step = 0.1 * 0.5 / (0.5 + 1e-8);
    CHECK(b.value(0, 0) == doctest::Approx(1.0 - step).epsilon(1e-12));
    CHECK(w.value(0, 0) == doctest::Approx(1.0 - step - 0.1 * 0.01 * 1.0).epsilon(1e-12));
  }

  TEST_CASE("softmax cross-entropy gradient is softmax minus one-hot over the batch") {
    Mat<double> logits(3, 2);
    logits << 1, 0, 2, 0, 3, 0;
    auto r = nn::softmax_cross_entropy(logits, {2, 0});
    const double e = std::exp(1) + std::exp(2) + std::exp(3);
    CHECK(r.value == doctest::Approx((-(3 - std::log(e)) + std::log(3.0)) / 2));
    CHECK(r.grad(2, 0) == doctest::Approx((std::exp(3) / e - 1) / 2));
    CHECK(r.grad(1, 1) == doctest::Approx(1.0 / 6));
  }
}
