#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "fedhar/common.hpp"
#include "fedhar/param_set.hpp"
#include "fedhar/rng.hpp"
#include "fedhar/tensor.hpp"

namespace fedhar {

enum class Mode { train, eval };

struct TapeNode {
  std::vector<Tensor> saved;
};

// Records everything a forward pass needs for backward. A tape can be
// consumed exactly once.
class Tape {
 public:
  TapeNode& push() {
    nodes_.emplace_back();
    return nodes_.back();
  }

  void begin_backward() {
    require(!consumed_, "Tape: already consumed by a previous backward pass");
    consumed_ = true;
    cursor_ = nodes_.size();
  }

  TapeNode& pop() {
    require(cursor_ > 0, "Tape: backward pass exhausted the tape");
    return nodes_[--cursor_];
  }

  bool consumed() const { return consumed_; }

 private:
  std::vector<TapeNode> nodes_;
  std::size_t cursor_ = 0;
  bool consumed_ = false;
};

inline void glorot_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.flat()) v = rng.uniform(-limit, limit);
}

class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  const std::string& name() const { return name_; }

  // Registers this layer's parameters (seeded initialization).
  virtual void init(ParamSet& params, Rng& rng) const = 0;

  virtual Tensor forward(const Tensor& x, const ParamSet& params, Tape& tape,
                         Mode mode, Rng* rng) const = 0;

  // Pops this layer's tape node, accumulates parameter gradients into
  // `grads` and returns the gradient w.r.t. the layer input.
  virtual Tensor backward(const Tensor& gout, Tape& tape, const ParamSet& params,
                          ParamSet& grads) const = 0;

 protected:
  std::string name_;
};

// Fully connected layer: y = x W^T + b, W is (out x in).
class Dense : public Layer {
 public:
  Dense(std::string name, std::size_t in, std::size_t out)
      : Layer(std::move(name)), in_(in), out_(out) {}

  void init(ParamSet& params, Rng& rng) const override {
    Tensor w({out_, in_});
    glorot_fill(w, in_, out_, rng);
    params.insert(name_ + ".w", std::move(w));
    params.insert(name_ + ".b", Tensor({out_}));
  }

  Tensor forward(const Tensor& x, const ParamSet& params, Tape& tape, Mode,
                 Rng*) const override {
    require(x.rank() == 2 && x.dim(1) == in_,
            "Dense " + name_ + ": expected input (B x " + std::to_string(in_) + ")");
    const Tensor& w = params.at(name_ + ".w");
    const Tensor& b = params.at(name_ + ".b");
    const std::size_t batch = x.dim(0);
    Tensor y({batch, out_});
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t o = 0; o < out_; ++o) y.at(i, o) = b[o];
    matmul_bt_acc(x.data(), w.data(), y.data(), batch, in_, out_);
    y.check_finite("Dense " + name_);
    TapeNode& node = tape.push();
    node.saved.push_back(x);
    return y;
  }

  Tensor backward(const Tensor& gout, Tape& tape, const ParamSet& params,
                  ParamSet& grads) const override {
    TapeNode& node = tape.pop();
    const Tensor& x = node.saved[0];
    const Tensor& w = params.at(name_ + ".w");
    const std::size_t batch = x.dim(0);
    Tensor& gw = grads.at(name_ + ".w");
    Tensor& gb = grads.at(name_ + ".b");
    matmul_at_acc(gout.data(), x.data(), gw.data(), out_, batch, in_);
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t o = 0; o < out_; ++o) gb[o] += gout.at(i, o);
    Tensor gx({batch, in_});
    matmul_acc(gout.data(), w.data(), gx.data(), batch, out_, in_);
    return gx;
  }

  std::size_t input_dim() const { return in_; }
  std::size_t output_dim() const { return out_; }

 private:
  std::size_t in_, out_;
};

class Tanh : public Layer {
 public:
  explicit Tanh(std::string name) : Layer(std::move(name)) {}

  void init(ParamSet&, Rng&) const override {}

  Tensor forward(const Tensor& x, const ParamSet&, Tape& tape, Mode, Rng*) const override {
    Tensor y = x;
    for (double& v : y.flat()) v = std::tanh(v);
    TapeNode& node = tape.push();
    node.saved.push_back(y);
    return y;
  }

  Tensor backward(const Tensor& gout, Tape& tape, const ParamSet&, ParamSet&) const override {
    TapeNode& node = tape.pop();
    const Tensor& y = node.saved[0];
    Tensor gx = gout;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= 1.0 - y[i] * y[i];
    return gx;
  }
};

// 1-D convolution over the last dimension with same padding (odd kernel).
// x: (B, Cin, W) -> y: (B, Cout, W)
class Conv1d : public Layer {
 public:
  Conv1d(std::string name, std::size_t cin, std::size_t cout, std::size_t kernel)
      : Layer(std::move(name)), cin_(cin), cout_(cout), k_(kernel) {
    require(kernel % 2 == 1, "Conv1d: kernel must be odd for same padding");
  }

  void init(ParamSet& params, Rng& rng) const override {
    Tensor w({cout_, cin_, k_});
    glorot_fill(w, cin_ * k_, cout_ * k_, rng);
    params.insert(name_ + ".w", std::move(w));
    params.insert(name_ + ".b", Tensor({cout_}));
  }

  Tensor forward(const Tensor& x, const ParamSet& params, Tape& tape, Mode,
                 Rng*) const override {
    require(x.rank() == 3 && x.dim(1) == cin_, "Conv1d " + name_ + ": bad input shape");
    const Tensor& w = params.at(name_ + ".w");
    const Tensor& b = params.at(name_ + ".b");
    const std::size_t batch = x.dim(0), width = x.dim(2);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k_ / 2);
    Tensor y({batch, cout_, width});
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t o = 0; o < cout_; ++o) {
        for (std::size_t t = 0; t < width; ++t) {
          double acc = b[o];
          for (std::size_t c = 0; c < cin_; ++c) {
            for (std::size_t kk = 0; kk < k_; ++kk) {
              const std::ptrdiff_t s =
                  static_cast<std::ptrdiff_t>(t + kk) - pad;
              if (s < 0 || s >= static_cast<std::ptrdiff_t>(width)) continue;
              acc += w.at(o, c, kk) * x.at(n, c, static_cast<std::size_t>(s));
            }
          }
          y.at(n, o, t) = acc;
        }
      }
    }
    y.check_finite("Conv1d " + name_);
    TapeNode& node = tape.push();
    node.saved.push_back(x);
    return y;
  }

  Tensor backward(const Tensor& gout, Tape& tape, const ParamSet& params,
                  ParamSet& grads) const override {
    TapeNode& node = tape.pop();
    const Tensor& x = node.saved[0];
    const Tensor& w = params.at(name_ + ".w");
    Tensor& gw = grads.at(name_ + ".w");
    Tensor& gb = grads.at(name_ + ".b");
    const std::size_t batch = x.dim(0), width = x.dim(2);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k_ / 2);
    Tensor gx({batch, cin_, width});
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t o = 0; o < cout_; ++o) {
        for (std::size_t t = 0; t < width; ++t) {
          const double g = gout.at(n, o, t);
          if (g == 0.0) continue;
          gb[o] += g;
          for (std::size_t c = 0; c < cin_; ++c) {
            for (std::size_t kk = 0; kk < k_; ++kk) {
              const std::ptrdiff_t s =
                  static_cast<std::ptrdiff_t>(t + kk) - pad;
              if (s < 0 || s >= static_cast<std::ptrdiff_t>(width)) continue;
              gw.at(o, c, kk) += g * x.at(n, c, static_cast<std::size_t>(s));
              gx.at(n, c, static_cast<std::size_t>(s)) += g * w.at(o, c, kk);
            }
          }
        }
      }
    }
    return gx;
  }

 private:
  std::size_t cin_, cout_, k_;
};

// 2-D convolution; height uses explicit padding pad_h (0 = valid), width uses
// same padding for odd kernels. x: (B, Cin, H, W) -> (B, Cout, H', W').
class Conv2d : public Layer {
 public:
  Conv2d(std::string name, std::size_t cin, std::size_t cout, std::size_t kh,
         std::size_t kw, std::size_t pad_h = 0)
      : Layer(std::move(name)), cin_(cin), cout_(cout), kh_(kh), kw_(kw), pad_h_(pad_h) {
    require(kw % 2 == 1, "Conv2d: kernel width must be odd for same padding");
  }

  std::size_t out_height(std::size_t h) const { return h + 2 * pad_h_ - kh_ + 1; }

  void init(ParamSet& params, Rng& rng) const override {
    Tensor w({cout_, cin_, kh_, kw_});
    glorot_fill(w, cin_ * kh_ * kw_, cout_ * kh_ * kw_, rng);
    params.insert(name_ + ".w", std::move(w));
    params.insert(name_ + ".b", Tensor({cout_}));
  }

  Tensor forward(const Tensor& x, const ParamSet& params, Tape& tape, Mode,
                 Rng*) const override {
    require(x.rank() == 4 && x.dim(1) == cin_, "Conv2d " + name_ + ": bad input shape");
    const Tensor& w = params.at(name_ + ".w");
    const Tensor& b = params.at(name_ + ".b");
    const std::size_t batch = x.dim(0), h = x.dim(2), width = x.dim(3);
    require(h + 2 * pad_h_ >= kh_, "Conv2d " + name_ + ": input height too small");
    const std::size_t oh = out_height(h);
    const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(kw_ / 2);
    const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(pad_h_);
    Tensor y({batch, cout_, oh, width});
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t o = 0; o < cout_; ++o) {
        for (std::size_t i = 0; i < oh; ++i) {
          for (std::size_t j = 0; j < width; ++j) {
            double acc = b[o];
            for (std::size_t c = 0; c < cin_; ++c) {
              for (std::size_t ki = 0; ki < kh_; ++ki) {
                const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i + ki) - ph;
                if (r < 0 || r >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t kj = 0; kj < kw_; ++kj) {
                  const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(j + kj) - pw;
                  if (s < 0 || s >= static_cast<std::ptrdiff_t>(width)) continue;
                  acc += w.at(o, c, ki, kj) *
                         x.at(n, c, static_cast<std::size_t>(r), static_cast<std::size_t>(s));
                }
              }
            }
            y.at(n, o, i, j) = acc;
          }
        }
      }
    }
    y.check_finite("Conv2d " + name_);
    TapeNode& node = tape.push();
    node.saved.push_back(x);
    return y;
  }

  Tensor backward(const Tensor& gout, Tape& tape, const ParamSet& params,
                  ParamSet& grads) const override {
    TapeNode& node = tape.pop();
    const Tensor& x = node.saved[0];
    const Tensor& w = params.at(name_ + ".w");
    Tensor& gw = grads.at(name_ + ".w");
    Tensor& gb = grads.at(name_ + ".b");
    const std::size_t batch = x.dim(0), h = x.dim(2), width = x.dim(3);
    const std::size_t oh = out_height(h);
    const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(kw_ / 2);
    const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(pad_h_);
    Tensor gx({batch, cin_, h, width});
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t o = 0; o < cout_; ++o) {
        for (std::size_t i = 0; i < oh; ++i) {
          for (std::size_t j = 0; j < width; ++j) {
            const double g = gout.at(n, o, i, j);
            if (g == 0.0) continue;
            gb[o] += g;
            for (std::size_t c = 0; c < cin_; ++c) {
              for (std::size_t ki = 0; ki < kh_; ++ki) {
                const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i + ki) - ph;
                if (r < 0 || r >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t kj = 0; kj < kw_; ++kj) {
                  const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(j + kj) - pw;
                  if (s < 0 || s >= static_cast<std::ptrdiff_t>(width)) continue;
                  gw.at(o, c, ki, kj) +=
                      g * x.at(n, c, static_cast<std::size_t>(r), static_cast<std::size_t>(s));
                  gx.at(n, c, static_cast<std::size_t>(r), static_cast<std::size_t>(s)) +=
                      g * w.at(o, c, ki, kj);
                }
              }
            }
          }
        }
      }
    }
    return gx;
  }

 private:
  std::size_t cin_, cout_, kh_, kw_, pad_h_;
};

// Single LSTM layer; gate order [input, forget, candidate, output].
// x: (B, T, I) -> hidden sequence (B, T, H); initial state is zero.
class Lstm : public Layer {
 public:
  Lstm(std::string name, std::size_t input, std::size_t hidden)
      : Layer(std::move(name)), in_(input), h_(hidden) {}

  void init(ParamSet& params, Rng& rng) const override {
    Tensor wx({4 * h_, in_});
    glorot_fill(wx, in_, 4 * h_, rng);
    Tensor wh({4 * h_, h_});
    glorot_fill(wh, h_, 4 * h_, rng);
    params.insert(name_ + ".wx", std::move(wx));
    params.insert(name_ + ".wh", std::move(wh));
    params.insert(name_ + ".b", Tensor({4 * h_}));
  }

  Tensor forward(const Tensor& x, const ParamSet& params, Tape& tape, Mode,
                 Rng*) const override {
    require(x.rank() == 3 && x.dim(2) == in_, "Lstm " + name_ + ": bad input shape");
    const Tensor& wx = params.at(name_ + ".wx");
    const Tensor& wh = params.at(name_ + ".wh");
    const Tensor& b = params.at(name_ + ".b");
    const std::size_t batch = x.dim(0), steps = x.dim(1);

    Tensor gates({batch, steps, 4 * h_});
    Tensor cells({batch, steps, h_});
    Tensor tanhc({batch, steps, h_});
    Tensor hidden({batch, steps, h_});

    Tensor xt({batch, in_}), ht({batch, h_}, 0.0), ct({batch, h_}, 0.0), z({batch, 4 * h_});
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t i = 0; i < in_; ++i) xt.at(n, i) = x.at(n, t, i);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t j = 0; j < 4 * h_; ++j) z.at(n, j) = b[j];
      matmul_bt_acc(xt.data(), wx.data(), z.data(), batch, in_, 4 * h_);
      matmul_bt_acc(ht.data(), wh.data(), z.data(), batch, h_, 4 * h_);
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t j = 0; j < h_; ++j) {
          const double gi = sigmoid(z.at(n, j));
          const double gf = sigmoid(z.at(n, h_ + j));
          const double gg = std::tanh(z.at(n, 2 * h_ + j));
          const double go = sigmoid(z.at(n, 3 * h_ + j));
          const double c = gf * ct.at(n, j) + gi * gg;
          const double tc = std::tanh(c);
          gates.at(n, t, j) = gi;
          gates.at(n, t, h_ + j) = gf;
          gates.at(n, t, 2 * h_ + j) = gg;
          gates.at(n, t, 3 * h_ + j) = go;
          cells.at(n, t, j) = c;
          tanhc.at(n, t, j) = tc;
          ct.at(n, j) = c;
          ht.at(n, j) = go * tc;
          hidden.at(n, t, j) = ht.at(n, j);
        }
      }
    }
    hidden.check_finite("Lstm " + name_);
    TapeNode& node = tape.push();
    node.saved.push_back(x);
    node.saved.push_back(std::move(gates));
    node.saved.push_back(std::move(cells));
    node.saved.push_back(std::move(tanhc));
    node.saved.push_back(std::move(hidden));
    return node.saved.back();
  }

  Tensor backward(const Tensor& gout, Tape& tape, const ParamSet& params,
                  ParamSet& grads) const override {
    TapeNode& node = tape.pop();
    const Tensor& x = node.saved[0];
    const Tensor& gates = node.saved[1];
    const Tensor& cells = node.saved[2];
    const Tensor& tanhc = node.saved[3];
    const Tensor& hidden = node.saved[4];
    const Tensor& wx = params.at(name_ + ".wx");
    const Tensor& wh = params.at(name_ + ".wh");
    Tensor& gwx = grads.at(name_ + ".wx");
    Tensor& gwh = grads.at(name_ + ".wh");
    Tensor& gb = grads.at(name_ + ".b");
    const std::size_t batch = x.dim(0), steps = x.dim(1);

    Tensor gx({batch, steps, in_});
    Tensor dh({batch, h_}, 0.0), dc({batch, h_}, 0.0);
    Tensor dz({batch, 4 * h_});
    Tensor xt({batch, in_}), hprev({batch, h_}), gxt({batch, in_});
    for (std::size_t t = steps; t-- > 0;) {
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t j = 0; j < h_; ++j) {
          const double gi = gates.at(n, t, j);
          const double gf = gates.at(n, t, h_ + j);
          const double gg = gates.at(n, t, 2 * h_ + j);
          const double go = gates.at(n, t, 3 * h_ + j);
          const double tc = tanhc.at(n, t, j);
          const double cprev = t > 0 ? cells.at(n, t - 1, j) : 0.0;
          const double dht = dh.at(n, j) + gout.at(n, t, j);
          const double dgo = dht * tc;
          const double dct = dht * go * (1.0 - tc * tc) + dc.at(n, j);
          const double dgi = dct * gg;
          const double dgg = dct * gi;
          const double dgf = dct * cprev;
          dc.at(n, j) = dct * gf;
          dz.at(n, j) = dgi * gi * (1.0 - gi);
          dz.at(n, h_ + j) = dgf * gf * (1.0 - gf);
          dz.at(n, 2 * h_ + j) = dgg * (1.0 - gg * gg);
          dz.at(n, 3 * h_ + j) = dgo * go * (1.0 - go);
        }
      }
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t i = 0; i < in_; ++i) xt.at(n, i) = x.at(n, t, i);
        for (std::size_t j = 0; j < h_; ++j)
          hprev.at(n, j) = t > 0 ? hidden.at(n, t - 1, j) : 0.0;
      }
      matmul_at_acc(dz.data(), xt.data(), gwx.data(), 4 * h_, batch, in_);
      matmul_at_acc(dz.data(), hprev.data(), gwh.data(), 4 * h_, batch, h_);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t j = 0; j < 4 * h_; ++j) gb[j] += dz.at(n, j);
      gxt.fill(0.0);
      matmul_acc(dz.data(), wx.data(), gxt.data(), batch, 4 * h_, in_);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t i = 0; i < in_; ++i) gx.at(n, t, i) = gxt.at(n, i);
      dh.fill(0.0);
      matmul_acc(dz.data(), wh.data(), dh.data(), batch, 4 * h_, h_);
    }
    return gx;
  }

  static double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

 private:
  std::size_t in_, h_;
};

// Inverted dropout; identity in eval mode.
class Dropout : public Layer {
 public:
  Dropout(std::string name, double rate) : Layer(std::move(name)), rate_(rate) {
    require(rate >= 0.0 && rate < 1.0, "Dropout: rate must be in [0, 1)");
  }

  void init(ParamSet&, Rng&) const override {}

  Tensor forward(const Tensor& x, const ParamSet&, Tape& tape, Mode mode,
                 Rng* rng) const override {
    TapeNode& node = tape.push();
    if (mode == Mode::eval || rate_ == 0.0) return x;
    require(rng != nullptr, "Dropout " + name_ + ": rng required in train mode");
    const double keep = 1.0 - rate_;
    Tensor mask(x.shape());
    for (double& m : mask.flat()) m = rng->uniform() < rate_ ? 0.0 : 1.0 / keep;
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
    node.saved.push_back(std::move(mask));
    return y;
  }

  Tensor backward(const Tensor& gout, Tape& tape, const ParamSet&, ParamSet&) const override {
    TapeNode& node = tape.pop();
    if (node.saved.empty()) return gout;
    const Tensor& mask = node.saved[0];
    Tensor gx = gout;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= mask[i];
    return gx;
  }

 private:
  double rate_;
};

// Row-wise softmax over (B x M).
class Softmax : public Layer {
 public:
  explicit Softmax(std::string name) : Layer(std::move(name)) {}

  void init(ParamSet&, Rng&) const override {}

  Tensor forward(const Tensor& x, const ParamSet&, Tape& tape, Mode, Rng*) const override {
    Tensor y = softmax_rows(x);
    TapeNode& node = tape.push();
    node.saved.push_back(y);
    return y;
  }

  Tensor backward(const Tensor& gout, Tape& tape, const ParamSet&, ParamSet&) const override {
    TapeNode& node = tape.pop();
    const Tensor& y = node.saved[0];
    const std::size_t batch = y.dim(0), m = y.dim(1);
    Tensor gx({batch, m});
    for (std::size_t n = 0; n < batch; ++n) {
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += gout.at(n, j) * y.at(n, j);
      for (std::size_t j = 0; j < m; ++j) gx.at(n, j) = y.at(n, j) * (gout.at(n, j) - dot);
    }
    return gx;
  }

  static Tensor softmax_rows(const Tensor& x) {
    require(x.rank() == 2, "softmax: expected (B x M)");
    const std::size_t batch = x.dim(0), m = x.dim(1);
    Tensor y({batch, m});
    for (std::size_t n = 0; n < batch; ++n) {
      double mx = x.at(n, 0);
      for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, x.at(n, j));
      double sum = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double e = std::exp(x.at(n, j) - mx);
        y.at(n, j) = e;
        sum += e;
      }
      for (std::size_t j = 0; j < m; ++j) y.at(n, j) /= sum;
    }
    return y;
  }
};

// Plain chain of layers; implements the generic forward/backward contract.
class Sequential {
 public:
  Sequential() = default;

  Sequential& add(std::unique_ptr<Layer> layer) {
    layers_.push_back(std::move(layer));
    return *this;
  }

  template <class L, class... Args>
  Sequential& emplace(Args&&... args) {
    layers_.push_back(std::make_unique<L>(std::forward<Args>(args)...));
    return *this;
  }

  ParamSet init_params(Rng& rng) const {
    ParamSet params;
    for (const auto& l : layers_) l->init(params, rng);
    return params;
  }

  Tensor forward(const Tensor& x, const ParamSet& params, Tape& tape, Mode mode,
                 Rng* rng = nullptr) const {
    Tensor h = x;
    for (const auto& l : layers_) h = l->forward(h, params, tape, mode, rng);
    return h;
  }

  // Returns gradients w.r.t. parameters; `grads` must be zeros_like(params).
  Tensor backward(const Tensor& loss_grad, Tape& tape, const ParamSet& params,
                  ParamSet& grads) const {
    tape.begin_backward();
    Tensor g = loss_grad;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
      g = (*it)->backward(g, tape, params, grads);
    return g;
  }

  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace fedhar
