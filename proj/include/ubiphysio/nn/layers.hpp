#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ubiphysio/nn/core.hpp"
#include "ubiphysio/rng.hpp"

namespace ubiphysio::nn {

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
template <typename S>
void init_uniform(Mat<S>& m, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<S>(rng.uniform(-bound, bound));
}

struct ConvShape {
  int cin = 1;
  int cout = 1;
  int kernel = 1;
  int stride = 1;
  int pad = 0;
  int dilation = 1;

  int out_length(int len) const { return (len + 2 * pad - dilation * (kernel - 1) - 1) / stride + 1; }
};

// 1-D convolution via im2col. Weight layout: cout x (kernel * cin) with column
// k * cin + c multiplying input channel c at tap k.
template <typename S>
class Conv1d : public Layer<S> {
 public:
  Conv1d(const std::string& name, const ConvShape& shape, Rng& rng) : shape_(shape) {
    weight_.name = name + ".weight";
    weight_.decay = true;
    bias_.name = name + ".bias";
    weight_.value.resize(shape.cout, shape.kernel * shape.cin);
    bias_.value.resize(shape.cout, 1);
    init_uniform(weight_.value, shape.kernel * shape.cin, rng);
    init_uniform(bias_.value, shape.kernel * shape.cin, rng);
    weight_.zero_grad();
    bias_.zero_grad();
  }

  SeqBatch<S> forward(const SeqBatch<S>& in, bool /*train*/) override {
    check_shape(in.channels() == shape_.cin, weight_.name + ": expected " + std::to_string(shape_.cin) +
                                                 " input channels, got " + std::to_string(in.channels()));
    in_lengths_ = in.lengths;
    std::vector<int> out_len(in.lengths.size());
    int total = 0;
    for (std::size_t b = 0; b < in.lengths.size(); ++b) {
      out_len[b] = shape_.out_length(in.lengths[b]);
      check_shape(out_len[b] >= 1, weight_.name + ": input of length " + std::to_string(in.lengths[b]) +
                                       " is too short");
      total += out_len[b];
    }
    const int kc = shape_.kernel * shape_.cin;
    col_.setZero(kc, total);
    int in_off = 0, out_off = 0;
    for (std::size_t b = 0; b < in.lengths.size(); ++b) {
      for (int j = 0; j < out_len[b]; ++j) {
        for (int k = 0; k < shape_.kernel; ++k) {
          int t = j * shape_.stride - shape_.pad + k * shape_.dilation;
          if (t < 0 || t >= in.lengths[b]) continue;
          col_.block(k * shape_.cin, out_off + j, shape_.cin, 1) = in.x.col(in_off + t);
        }
      }
      in_off += in.lengths[b];
      out_off += out_len[b];
    }
    SeqBatch<S> out;
    out.lengths = std::move(out_len);
    out.x.noalias() = weight_.value * col_;
    out.x.colwise() += bias_.value.col(0);
    return out;
  }

  SeqBatch<S> backward(const SeqBatch<S>& g) override {
    weight_.grad.noalias() += g.x * col_.transpose();
    bias_.grad.col(0) += g.x.rowwise().sum();
    Mat<S> dcol = weight_.value.transpose() * g.x;
    SeqBatch<S> gin;
    gin.lengths = in_lengths_;
    gin.x.setZero(shape_.cin, gin.total());
    int in_off = 0, out_off = 0;
    for (std::size_t b = 0; b < in_lengths_.size(); ++b) {
      for (int j = 0; j < g.lengths[b]; ++j) {
        for (int k = 0; k < shape_.kernel; ++k) {
          int t = j * shape_.stride - shape_.pad + k * shape_.dilation;
          if (t < 0 || t >= in_lengths_[b]) continue;
          gin.x.col(in_off + t) += dcol.block(k * shape_.cin, out_off + j, shape_.cin, 1);
        }
      }
      in_off += in_lengths_[b];
      out_off += g.lengths[b];
    }
    return gin;
  }

  void params(std::vector<Param<S>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  const ConvShape& shape() const { return shape_; }

 private:
  ConvShape shape_;
  Param<S> weight_, bias_;
  Mat<S> col_;
  std::vector<int> in_lengths_;
};

template <typename S>
class ReLU : public Layer<S> {
 public:
  SeqBatch<S> forward(const SeqBatch<S>& in, bool /*train*/) override {
    mask_ = (in.x.array() > S(0)).template cast<S>();
    return SeqBatch<S>{in.x.cwiseMax(S(0)), in.lengths};
  }
  SeqBatch<S> backward(const SeqBatch<S>& g) override {
    return SeqBatch<S>{(g.x.array() * mask_.array()).matrix(), g.lengths};
  }

 private:
  Mat<S> mask_;
};

// Nearest-neighbour upsampling by 2 along time.
template <typename S>
class Upsample2 : public Layer<S> {
 public:
  SeqBatch<S> forward(const SeqBatch<S>& in, bool /*train*/) override {
    SeqBatch<S> out;
    out.x.resize(in.x.rows(), 2 * in.x.cols());
    for (Eigen::Index t = 0; t < in.x.cols(); ++t) {
      out.x.col(2 * t) = in.x.col(t);
      out.x.col(2 * t + 1) = in.x.col(t);
    }
    out.lengths = in.lengths;
    for (auto& l : out.lengths) l *= 2;
    return out;
  }
  SeqBatch<S> backward(const SeqBatch<S>& g) override {
    SeqBatch<S> gin;
    gin.x.resize(g.x.rows(), g.x.cols() / 2);
    for (Eigen::Index t = 0; t < gin.x.cols(); ++t) gin.x.col(t) = g.x.col(2 * t) + g.x.col(2 * t + 1);
    gin.lengths = g.lengths;
    for (auto& l : gin.lengths) l /= 2;
    return gin;
  }
};

// x + conv1x1(relu(conv3_dilated(relu(x)))).
template <typename S>
class ResConv : public Layer<S> {
 public:
  ResConv(const std::string& name, int width, int dilation, Rng& rng)
      : conv1_(name + ".conv1", ConvShape{width, width, 3, 1, dilation, dilation}, rng),
        conv2_(name + ".conv2", ConvShape{width, width, 1, 1, 0, 1}, rng) {}

  SeqBatch<S> forward(const SeqBatch<S>& in, bool train) override {
    auto h = relu1_.forward(in, train);
    h = conv1_.forward(h, train);
    h = relu2_.forward(h, train);
    h = conv2_.forward(h, train);
    h.x += in.x;
    return h;
  }
  SeqBatch<S> backward(const SeqBatch<S>& g) override {
    auto h = conv2_.backward(g);
    h = relu2_.backward(h);
    h = conv1_.backward(h);
    h = relu1_.backward(h);
    h.x += g.x;
    return h;
  }
  void params(std::vector<Param<S>*>& out) override {
    conv1_.params(out);
    conv2_.params(out);
  }

 private:
  ReLU<S> relu1_, relu2_;
  Conv1d<S> conv1_, conv2_;
};

// Statistics over every time step of every sample in the batch.
template <typename S>
class BatchNorm1d : public Layer<S> {
 public:
  BatchNorm1d(const std::string& name, int channels, double momentum = 0.1, double eps = 1e-5)
      : momentum_(momentum), eps_(eps) {
    gamma_.name = name + ".weight";
    beta_.name = name + ".bias";
    mean_.name = name + ".running_mean";
    var_.name = name + ".running_var";
    gamma_.value = Mat<S>::Ones(channels, 1);
    beta_.value = Mat<S>::Zero(channels, 1);
    mean_.value = Mat<S>::Zero(channels, 1);
    var_.value = Mat<S>::Ones(channels, 1);
    gamma_.zero_grad();
    beta_.zero_grad();
  }

  SeqBatch<S> forward(const SeqBatch<S>& in, bool train) override {
    const Eigen::Index n = in.x.cols();
    Vec<S> mean, var;
    if (train) {
      check_shape(n > 1, gamma_.name + ": batch statistics need more than one value per channel");
      mean = in.x.rowwise().mean();
      var = (in.x.colwise() - mean).array().square().rowwise().mean();
      const S m = static_cast<S>(momentum_);
      mean_.value.col(0) = (S(1) - m) * mean_.value.col(0) + m * mean;
      var_.value.col(0) = (S(1) - m) * var_.value.col(0) + m * var * (S(n) / S(n - 1));
    } else {
      mean = mean_.value.col(0);
      var = var_.value.col(0);
    }
    inv_std_ = (var.array() + static_cast<S>(eps_)).rsqrt().matrix();
    xhat_ = (in.x.colwise() - mean).array().colwise() * inv_std_.array();
    SeqBatch<S> out{(xhat_.array().colwise() * gamma_.value.col(0).array()).matrix(), in.lengths};
    out.x.colwise() += beta_.value.col(0);
    train_ = train;
    return out;
  }

  SeqBatch<S> backward(const SeqBatch<S>& g) override {
    gamma_.grad.col(0) += (g.x.array() * xhat_.array()).rowwise().sum().matrix();
    beta_.grad.col(0) += g.x.rowwise().sum();
    Mat<S> dxhat = g.x.array().colwise() * gamma_.value.col(0).array();
    SeqBatch<S> gin{Mat<S>(), g.lengths};
    if (!train_) {
      gin.x = dxhat.array().colwise() * inv_std_.array();
      return gin;
    }
    const S n = static_cast<S>(g.x.cols());
    Vec<S> sum_d = dxhat.rowwise().sum();
    Vec<S> sum_dx = (dxhat.array() * xhat_.array()).rowwise().sum();
    gin.x = (n * dxhat.array() - (xhat_.array().colwise() * sum_dx.array())).colwise() - sum_d.array();
    gin.x = gin.x.array().colwise() * (inv_std_.array() / n);
    return gin;
  }

  void params(std::vector<Param<S>*>& out) override {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }
  void buffers(std::vector<Param<S>*>& out) override {
    out.push_back(&mean_);
    out.push_back(&var_);
  }

 private:
  double momentum_, eps_;
  Param<S> gamma_, beta_, mean_, var_;
  Vec<S> inv_std_;
  Mat<S> xhat_;
  bool train_ = false;
};

template <typename S>
class MaxPool1d : public Layer<S> {
 public:
  MaxPool1d(int kernel, int stride, int pad) : shape_{1, 1, kernel, stride, pad, 1} {}

  SeqBatch<S> forward(const SeqBatch<S>& in, bool /*train*/) override {
    in_lengths_ = in.lengths;
    SeqBatch<S> out;
    out.lengths.resize(in.lengths.size());
    for (std::size_t b = 0; b < in.lengths.size(); ++b) {
      out.lengths[b] = shape_.out_length(in.lengths[b]);
      check_shape(out.lengths[b] >= 1, "max pool: input too short");
    }
    const int total = out.total();
    out.x.resize(in.x.rows(), total);
    arg_.resize(in.x.rows(), total);
    int in_off = 0, out_off = 0;
    for (std::size_t b = 0; b < in.lengths.size(); ++b) {
      for (int j = 0; j < out.lengths[b]; ++j) {
        for (Eigen::Index c = 0; c < in.x.rows(); ++c) {
          S best = -std::numeric_limits<S>::infinity();
          int arg = -1;
          for (int k = 0; k < shape_.kernel; ++k) {
            int t = j * shape_.stride - shape_.pad + k;
            if (t < 0 || t >= in.lengths[b]) continue;
            S v = in.x(c, in_off + t);
            if (v > best || arg < 0) {
              best = v;
              arg = in_off + t;
            }
          }
          out.x(c, out_off + j) = best;
          arg_(c, out_off + j) = arg;
        }
      }
      in_off += in.lengths[b];
      out_off += out.lengths[b];
    }
    return out;
  }

  SeqBatch<S> backward(const SeqBatch<S>& g) override {
    SeqBatch<S> gin;
    gin.lengths = in_lengths_;
    gin.x.setZero(g.x.rows(), gin.total());
    for (Eigen::Index j = 0; j < g.x.cols(); ++j)
      for (Eigen::Index c = 0; c < g.x.rows(); ++c) gin.x(c, arg_(c, j)) += g.x(c, j);
    return gin;
  }

 private:
  ConvShape shape_;
  Eigen::MatrixXi arg_;
  std::vector<int> in_lengths_;
};

// Inverted dropout. A frozen layer keeps reusing its last mask, which makes the
// training-mode function deterministic for finite-difference checks.
template <typename S>
class Dropout : public Layer<S> {
 public:
  Dropout(double p, Rng& rng) : p_(p), rng_(&rng) {}

  void freeze(bool f) { frozen_ = f; }

  SeqBatch<S> forward(const SeqBatch<S>& in, bool train) override {
    active_ = train && p_ > 0.0;
    if (!active_) return in;
    if (!(frozen_ && mask_.rows() == in.x.rows() && mask_.cols() == in.x.cols())) {
      mask_.resize(in.x.rows(), in.x.cols());
      const S keep = static_cast<S>(1.0 / (1.0 - p_));
      for (Eigen::Index j = 0; j < mask_.cols(); ++j)
        for (Eigen::Index i = 0; i < mask_.rows(); ++i) mask_(i, j) = rng_->uniform() < p_ ? S(0) : keep;
    }
    return SeqBatch<S>{(in.x.array() * mask_.array()).matrix(), in.lengths};
  }
  SeqBatch<S> backward(const SeqBatch<S>& g) override {
    if (!active_) return g;
    return SeqBatch<S>{(g.x.array() * mask_.array()).matrix(), g.lengths};
  }

 private:
  double p_;
  Rng* rng_;
  Mat<S> mask_;
  bool frozen_ = false;
  bool active_ = false;
};

// conv-bn-relu-conv-bn-dropout on the main path, identity or 1x1 projection
// (conv + bn) on the shortcut, ReLU after the sum.
template <typename S>
class BasicBlock : public Layer<S> {
 public:
  BasicBlock(const std::string& name, int cin, int cout, int stride, double dropout, Rng& rng,
             Rng& dropout_rng)
      : conv1_(name + ".conv1", ConvShape{cin, cout, 3, stride, 1, 1}, rng),
        bn1_(name + ".bn1", cout),
        conv2_(name + ".conv2", ConvShape{cout, cout, 3, 1, 1, 1}, rng),
        bn2_(name + ".bn2", cout),
        drop_(dropout, dropout_rng) {
    if (stride != 1 || cin != cout) {
      proj_ = std::make_unique<Conv1d<S>>(name + ".proj", ConvShape{cin, cout, 1, stride, 0, 1}, rng);
      proj_bn_ = std::make_unique<BatchNorm1d<S>>(name + ".proj_bn", cout);
    }
  }

  void freeze_dropout(bool f) { drop_.freeze(f); }

  SeqBatch<S> forward(const SeqBatch<S>& in, bool train) override {
    auto h = conv1_.forward(in, train);
    h = bn1_.forward(h, train);
    h = relu1_.forward(h, train);
    h = conv2_.forward(h, train);
    h = bn2_.forward(h, train);
    h = drop_.forward(h, train);
    if (proj_) {
      auto s = proj_->forward(in, train);
      s = proj_bn_->forward(s, train);
      h.x += s.x;
    } else {
      h.x += in.x;
    }
    return relu_out_.forward(h, train);
  }

  SeqBatch<S> backward(const SeqBatch<S>& g) override {
    auto gs = relu_out_.backward(g);
    auto h = drop_.backward(gs);
    h = bn2_.backward(h);
    h = conv2_.backward(h);
    h = relu1_.backward(h);
    h = bn1_.backward(h);
    h = conv1_.backward(h);
    if (proj_) {
      auto s = proj_bn_->backward(gs);
      s = proj_->backward(s);
      h.x += s.x;
    } else {
      h.x += gs.x;
    }
    return h;
  }

  void params(std::vector<Param<S>*>& out) override {
    conv1_.params(out);
    bn1_.params(out);
    conv2_.params(out);
    bn2_.params(out);
    if (proj_) {
      proj_->params(out);
      proj_bn_->params(out);
    }
  }
  void buffers(std::vector<Param<S>*>& out) override {
    bn1_.buffers(out);
    bn2_.buffers(out);
    if (proj_bn_) proj_bn_->buffers(out);
  }

 private:
  Conv1d<S> conv1_;
  BatchNorm1d<S> bn1_;
  ReLU<S> relu1_;
  Conv1d<S> conv2_;
  BatchNorm1d<S> bn2_;
  Dropout<S> drop_;
  std::unique_ptr<Conv1d<S>> proj_;
  std::unique_ptr<BatchNorm1d<S>> proj_bn_;
  ReLU<S> relu_out_;
};

// Mean over time of each sample: channels x batch.
template <typename S>
Mat<S> global_avg_pool(const SeqBatch<S>& in) {
  Mat<S> out(in.x.rows(), in.batch());
  int off = 0;
  for (int b = 0; b < in.batch(); ++b) {
    out.col(b) = in.x.middleCols(off, in.lengths[b]).rowwise().mean();
    off += in.lengths[b];
  }
  return out;
}

template <typename S>
SeqBatch<S> global_avg_pool_backward(const Mat<S>& g, const std::vector<int>& lengths) {
  SeqBatch<S> gin;
  gin.lengths = lengths;
  gin.x.resize(g.rows(), gin.total());
  int off = 0;
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    gin.x.middleCols(off, lengths[b]).colwise() = g.col(b) / static_cast<S>(lengths[b]);
    off += lengths[b];
  }
  return gin;
}

// y = W x + b on column vectors.
template <typename S>
class Linear {
 public:
  Linear(const std::string& name, int in, int out, Rng& rng) {
    weight_.name = name + ".weight";
    weight_.decay = true;
    bias_.name = name + ".bias";
    weight_.value.resize(out, in);
    bias_.value.resize(out, 1);
    init_uniform(weight_.value, in, rng);
    init_uniform(bias_.value, in, rng);
    weight_.zero_grad();
    bias_.zero_grad();
  }

  Mat<S> forward(const Mat<S>& x) {
    check_shape(x.rows() == weight_.value.cols(), weight_.name + ": input width mismatch");
    x_ = x;
    Mat<S> y = weight_.value * x;
    y.colwise() += bias_.value.col(0);
    return y;
  }
  Mat<S> backward(const Mat<S>& g) {
    weight_.grad.noalias() += g * x_.transpose();
    bias_.grad.col(0) += g.rowwise().sum();
    return weight_.value.transpose() * g;
  }
  void params(std::vector<Param<S>*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  Param<S> weight_, bias_;
  Mat<S> x_;
};

}  // namespace ubiphysio::nn
