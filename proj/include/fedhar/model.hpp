#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fedhar/common.hpp"
#include "fedhar/losses.hpp"
#include "fedhar/nn.hpp"
#include "fedhar/signals.hpp"

namespace fedhar {

struct SensorShape {
  std::string name;
  std::size_t raw_axes = 3;  // before amplitude augmentation
  std::size_t aug_axes() const { return raw_axes + 1; }
};

struct EmbeddingHyper {
  std::vector<SensorShape> sensors;
  std::size_t intervals = 5;   // k
  std::size_t freq_bins = 16;  // f
  std::size_t filters = 64;
  std::size_t embed_dim = 100;
  double dropout = 0.3;

  static EmbeddingHyper infer(const SampleFeatures& example,
                              const std::vector<std::string>& sensor_names,
                              std::size_t filters, std::size_t embed_dim,
                              double dropout = 0.3) {
    require(example.per_sensor.size() == sensor_names.size(),
            "EmbeddingHyper::infer: sensor name count mismatch");
    EmbeddingHyper h;
    for (std::size_t s = 0; s < sensor_names.size(); ++s) {
      const auto& shape = example.per_sensor[s].shape();
      require(shape.size() == 3 && shape[1] % 2 == 0,
              "EmbeddingHyper::infer: bad feature tensor shape");
      h.sensors.push_back({sensor_names[s], shape[1] / 2 - 1});
      h.intervals = shape[0];
      h.freq_bins = shape[2];
    }
    h.filters = filters;
    h.embed_dim = embed_dim;
    h.dropout = dropout;
    return h;
  }
};

// CNN + LSTM signal embedding network. Per sensor: a shared 1-D convolution
// over each axis' stacked magnitude/frequency pair, then a 2-D convolution
// across the sensor's axes; sensor outputs are fused by a final 2-D
// convolution; two LSTM layers over the k interval outputs produce the
// embedding (last hidden state of the second layer).
class EmbeddingNet {
 public:
  explicit EmbeddingNet(EmbeddingHyper hyper) : hyper_(std::move(hyper)), act_("embed.act") {
    require(!hyper_.sensors.empty(), "EmbeddingNet: no sensors");
    require(hyper_.filters >= 1 && hyper_.embed_dim >= 1, "EmbeddingNet: bad hyperparameters");
    const std::size_t f = hyper_.filters;
    for (const auto& s : hyper_.sensors) {
      conv1_.push_back(std::make_unique<Conv1d>("embed." + s.name + ".c1", 2, f, 3));
      conv2_.push_back(
          std::make_unique<Conv2d>("embed." + s.name + ".c2", f, f, s.aug_axes(), 3, 0));
    }
    fuse_ = std::make_unique<Conv2d>("embed.fuse", f, f, hyper_.sensors.size(), 3, 0);
    drop_conv_ = std::make_unique<Dropout>("embed.drop_conv", hyper_.dropout);
    lstm1_ = std::make_unique<Lstm>("embed.lstm1", f * hyper_.freq_bins, hyper_.embed_dim);
    drop_mid_ = std::make_unique<Dropout>("embed.drop_mid", hyper_.dropout);
    lstm2_ = std::make_unique<Lstm>("embed.lstm2", hyper_.embed_dim, hyper_.embed_dim);
  }

  const EmbeddingHyper& hyper() const { return hyper_; }

  ParamSet init_params(Rng& rng) const {
    ParamSet params;
    for (std::size_t s = 0; s < conv1_.size(); ++s) {
      conv1_[s]->init(params, rng);
      conv2_[s]->init(params, rng);
    }
    fuse_->init(params, rng);
    lstm1_->init(params, rng);
    lstm2_->init(params, rng);
    return params;
  }

  // Stacks per-sample feature tensors into one batch tensor per sensor.
  std::vector<Tensor> assemble_batch(const std::vector<const SampleFeatures*>& samples) const {
    require(!samples.empty(), "assemble_batch: empty batch");
    const std::size_t batch = samples.size();
    std::vector<Tensor> out;
    for (std::size_t s = 0; s < hyper_.sensors.size(); ++s) {
      const std::size_t channels = 2 * hyper_.sensors[s].aug_axes();
      Tensor t({batch, hyper_.intervals, channels, hyper_.freq_bins});
      for (std::size_t n = 0; n < batch; ++n) {
        require(samples[n]->per_sensor.size() == hyper_.sensors.size(),
                "assemble_batch: sensor count mismatch");
        const Tensor& src = samples[n]->per_sensor[s];
        require(src.shape() ==
                    std::vector<std::size_t>({hyper_.intervals, channels, hyper_.freq_bins}),
                "assemble_batch: feature shape mismatch for sensor " + hyper_.sensors[s].name);
        std::copy(src.data(), src.data() + src.size(),
                  t.data() + n * src.size());
      }
      out.push_back(std::move(t));
    }
    return out;
  }

  // inputs: one tensor per sensor, each (B, k, 2(d+1), f). Returns (B, E).
  Tensor forward(const ParamSet& params, const std::vector<Tensor>& inputs, Tape& tape,
                 Mode mode, Rng* rng = nullptr) const {
    require(inputs.size() == hyper_.sensors.size(), "EmbeddingNet: sensor count mismatch");
    const std::size_t batch = inputs[0].dim(0);
    const std::size_t k = hyper_.intervals, f = hyper_.freq_bins, nf = hyper_.filters;

    std::vector<Tensor> per_sensor;
    per_sensor.reserve(inputs.size());
    for (std::size_t s = 0; s < inputs.size(); ++s) {
      const Tensor& x = inputs[s];
      const std::size_t d = hyper_.sensors[s].aug_axes();
      require(x.rank() == 4 && x.dim(0) == batch && x.dim(1) == k && x.dim(2) == 2 * d &&
                  x.dim(3) == f,
              "EmbeddingNet: bad input shape for sensor " + hyper_.sensors[s].name);
      Tensor s1 = gather_axis_pairs(x, d);                                // (B*k*d, 2, f)
      Tensor a1 = act_.forward(conv1_[s]->forward(s1, params, tape, mode, rng), params, tape,
                               mode, rng);                                // (B*k*d, nf, f)
      Tensor r1 = group_axes(a1, d);                                      // (B*k, nf, d, f)
      Tensor a2 = act_.forward(conv2_[s]->forward(r1, params, tape, mode, rng), params, tape,
                               mode, rng);                                // (B*k, nf, 1, f)
      a2.reshape({batch * k, nf, f});
      per_sensor.push_back(std::move(a2));
    }

    Tensor stacked = stack_sensors(per_sensor);                           // (B*k, nf, S, f)
    Tensor fused = act_.forward(fuse_->forward(stacked, params, tape, mode, rng), params, tape,
                                mode, rng);                               // (B*k, nf, 1, f)
    fused.reshape({batch * k, nf * f});
    Tensor dropped = drop_conv_->forward(fused, params, tape, mode, rng);
    dropped.reshape({batch, k, nf * f});

    Tensor h1 = lstm1_->forward(dropped, params, tape, mode, rng);        // (B, k, E)
    Tensor h1d = drop_mid_->forward(h1, params, tape, mode, rng);
    Tensor h2 = lstm2_->forward(h1d, params, tape, mode, rng);            // (B, k, E)

    Tensor emb({batch, hyper_.embed_dim});
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t e = 0; e < hyper_.embed_dim; ++e) emb.at(n, e) = h2.at(n, k - 1, e);
    return emb;
  }

  // gout: (B, E); accumulates into `grads` (zeros_like of params subset).
  void backward(const Tensor& gout, Tape& tape, const ParamSet& params, ParamSet& grads) const {
    tape.begin_backward();
    const std::size_t batch = gout.dim(0);
    const std::size_t k = hyper_.intervals, f = hyper_.freq_bins, nf = hyper_.filters;

    Tensor gh2({batch, k, hyper_.embed_dim});
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t e = 0; e < hyper_.embed_dim; ++e) gh2.at(n, k - 1, e) = gout.at(n, e);

    Tensor gh1d = lstm2_->backward(gh2, tape, params, grads);
    Tensor gh1 = drop_mid_->backward(gh1d, tape, params, grads);
    Tensor gdrop = lstm1_->backward(gh1, tape, params, grads);            // (B, k, nf*f)
    gdrop.reshape({batch * k, nf * f});
    Tensor gfused = drop_conv_->backward(gdrop, tape, params, grads);
    gfused.reshape({batch * k, nf, 1, f});
    Tensor gstacked = fuse_->backward(act_.backward(gfused, tape, params, grads), tape, params,
                                      grads);                             // (B*k, nf, S, f)

    for (std::size_t s = inputs_count(); s-- > 0;) {
      const std::size_t d = hyper_.sensors[s].aug_axes();
      Tensor gs = unstack_sensor(gstacked, s);                            // (B*k, nf, f)
      gs.reshape({batch * k, nf, 1, f});
      Tensor gr1 = conv2_[s]->backward(act_.backward(gs, tape, params, grads), tape, params,
                                       grads);                            // (B*k, nf, d, f)
      Tensor ga1 = ungroup_axes(gr1);                                     // (B*k*d, nf, f)
      conv1_[s]->backward(act_.backward(ga1, tape, params, grads), tape, params, grads);
    }
  }

  // Eval-mode embedding of a single sample.
  std::vector<double> embed(const ParamSet& params, const SampleFeatures& x) const {
    Tape tape;
    Tensor e = forward(params, assemble_batch({&x}), tape, Mode::eval);
    return std::vector<double>(e.data(), e.data() + e.size());
  }

 private:
  std::size_t inputs_count() const { return hyper_.sensors.size(); }

  // (B, k, 2d, f) -> (B*k*d, 2, f): per-axis magnitude/frequency pair
  static Tensor gather_axis_pairs(const Tensor& x, std::size_t d) {
    const std::size_t batch = x.dim(0), k = x.dim(1), f = x.dim(3);
    Tensor out({batch * k * d, 2, f});
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t t = 0; t < k; ++t)
        for (std::size_t a = 0; a < d; ++a) {
          const std::size_t row = (n * k + t) * d + a;
          for (std::size_t j = 0; j < f; ++j) {
            out.at(row, 0, j) = x.at(n, t, 2 * a, j);
            out.at(row, 1, j) = x.at(n, t, 2 * a + 1, j);
          }
        }
    return out;
  }

  // (B*k*d, C, f) -> (B*k, C, d, f)
  static Tensor group_axes(const Tensor& x, std::size_t d) {
    const std::size_t rows = x.dim(0) / d, c = x.dim(1), f = x.dim(2);
    Tensor out({rows, c, d, f});
    for (std::size_t m = 0; m < rows; ++m)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t j = 0; j < f; ++j) out.at(m, ch, a, j) = x.at(m * d + a, ch, j);
    return out;
  }

  // gradient mirror of group_axes: (B*k, C, d, f) -> (B*k*d, C, f)
  static Tensor ungroup_axes(const Tensor& g) {
    const std::size_t rows = g.dim(0), c = g.dim(1), d = g.dim(2), f = g.dim(3);
    Tensor out({rows * d, c, f});
    for (std::size_t m = 0; m < rows; ++m)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t j = 0; j < f; ++j) out.at(m * d + a, ch, j) = g.at(m, ch, a, j);
    return out;
  }

  // list of (B*k, C, f) -> (B*k, C, S, f)
  static Tensor stack_sensors(const std::vector<Tensor>& xs) {
    const std::size_t rows = xs[0].dim(0), c = xs[0].dim(1), f = xs[0].dim(2);
    Tensor out({rows, c, xs.size(), f});
    for (std::size_t s = 0; s < xs.size(); ++s)
      for (std::size_t m = 0; m < rows; ++m)
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t j = 0; j < f; ++j) out.at(m, ch, s, j) = xs[s].at(m, ch, j);
    return out;
  }

  // slice sensor s of (B*k, C, S, f) -> (B*k, C, f)
  static Tensor unstack_sensor(const Tensor& g, std::size_t s) {
    const std::size_t rows = g.dim(0), c = g.dim(1), f = g.dim(3);
    Tensor out({rows, c, f});
    for (std::size_t m = 0; m < rows; ++m)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t j = 0; j < f; ++j) out.at(m, ch, j) = g.at(m, ch, s, j);
    return out;
  }

  EmbeddingHyper hyper_;
  std::vector<std::unique_ptr<Conv1d>> conv1_;
  std::vector<std::unique_ptr<Conv2d>> conv2_;
  std::unique_ptr<Conv2d> fuse_;
  std::unique_ptr<Dropout> drop_conv_;
  std::unique_ptr<Lstm> lstm1_;
  std::unique_ptr<Dropout> drop_mid_;
  std::unique_ptr<Lstm> lstm2_;
  Tanh act_;
};

// Per-user fully connected output layer over the embedding.
class ClassifierHead {
 public:
  ClassifierHead(std::size_t embed_dim, std::size_t classes)
      : fc_("head.fc", embed_dim, classes) {}

  std::size_t classes() const { return fc_.output_dim(); }
  std::size_t embed_dim() const { return fc_.input_dim(); }

  ParamSet init_params(Rng& rng) const {
    ParamSet p;
    fc_.init(p, rng);
    return p;
  }

  Tensor logits(const ParamSet& params, const Tensor& emb, Tape& tape) const {
    require(emb.dim(1) == fc_.input_dim(), "ClassifierHead: embedding dimension mismatch");
    return fc_.forward(emb, params, tape, Mode::eval, nullptr);
  }

  Tensor backward(const Tensor& glogits, Tape& tape, const ParamSet& params,
                  ParamSet& grads) const {
    tape.begin_backward();
    return fc_.backward(glogits, tape, params, grads);
  }

 private:
  Dense fc_;
};

// Probabilities over the head's classes for one sample (eval mode).
inline std::vector<double> classify(const EmbeddingNet& net, const ClassifierHead& head,
                                    const ParamSet& embed_params, const ParamSet& head_params,
                                    const SampleFeatures& x) {
  Tape tape;
  Tensor emb = net.forward(embed_params, net.assemble_batch({&x}), tape, Mode::eval);
  Tape head_tape;
  Tensor logits = head.logits(head_params, emb, head_tape);
  Tensor probs = Softmax::softmax_rows(logits);
  return std::vector<double>(probs.data(), probs.data() + probs.size());
}

inline std::size_t argmax(std::span<const double> v) {
  require(!v.empty(), "argmax: empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace fedhar
