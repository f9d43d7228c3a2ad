#pragma once

#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ubiphysio/errors.hpp"

namespace ubiphysio::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// A batch of variable-length sequences packed side by side: x has one row per
// channel and one column per time step; sample b occupies lengths[b] columns
// starting at offset(b).
template <typename S>
struct SeqBatch {
  Mat<S> x;
  std::vector<int> lengths;

  int batch() const { return static_cast<int>(lengths.size()); }
  int channels() const { return static_cast<int>(x.rows()); }
  int total() const { return std::accumulate(lengths.begin(), lengths.end(), 0); }
  std::vector<int> offsets() const {
    std::vector<int> off(lengths.size(), 0);
    for (std::size_t b = 1; b < lengths.size(); ++b) off[b] = off[b - 1] + lengths[b - 1];
    return off;
  }
  auto sample(int b) { return x.middleCols(offsets()[b], lengths[b]); }
  auto sample(int b) const { return x.middleCols(offsets()[b], lengths[b]); }

  static SeqBatch zeros_like(const SeqBatch& o) {
    return SeqBatch{Mat<S>::Zero(o.x.rows(), o.x.cols()), o.lengths};
  }

  template <typename T>
  SeqBatch<T> cast() const {
    return SeqBatch<T>{x.template cast<T>(), lengths};
  }
};

// A named tensor. Trainable parameters carry a gradient; buffers (running
// statistics) leave it empty.
template <typename S>
struct Param {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
  bool decay = false;  // subject to weight decay

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename S>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual SeqBatch<S> forward(const SeqBatch<S>& in, bool train) = 0;
  // Accumulates parameter gradients and returns the gradient w.r.t. the input
  // of the most recent forward call.
  virtual SeqBatch<S> backward(const SeqBatch<S>& grad) = 0;
  virtual void params(std::vector<Param<S>*>& /*out*/) {}
  virtual void buffers(std::vector<Param<S>*>& /*out*/) {}
};

template <typename S>
class Sequential : public Layer<S> {
 public:
  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  SeqBatch<S> forward(const SeqBatch<S>& in, bool train) override {
    SeqBatch<S> h = in;
    for (auto& l : layers_) h = l->forward(h, train);
    return h;
  }

  SeqBatch<S> backward(const SeqBatch<S>& grad) override {
    SeqBatch<S> g = grad;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  void params(std::vector<Param<S>*>& out) override {
    for (auto& l : layers_) l->params(out);
  }
  void buffers(std::vector<Param<S>*>& out) override {
    for (auto& l : layers_) l->buffers(out);
  }

  std::size_t size() const { return layers_.size(); }
  Layer<S>& at(std::size_t i) { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer<S>>> layers_;
};

template <typename S>
std::vector<Param<S>*> collect_params(Layer<S>& layer) {
  std::vector<Param<S>*> out;
  layer.params(out);
  return out;
}

template <typename S>
void zero_grads(const std::vector<Param<S>*>& ps) {
  for (auto* p : ps) p->zero_grad();
}

inline void check_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace ubiphysio::nn
