#include <gtest/gtest.h>

#include "fedhar/adam.hpp"
#include "fedhar/model.hpp"
#include "test_util.hpp"

using namespace fedhar;
namespace tu = fedhar::testutil;

static EmbeddingHyper small_hyper(std::size_t filters = 4, std::size_t embed = 6,
                                  double dropout = 0.0) {
  EmbeddingHyper h;
  h.sensors = {{"accelerometer", 3}, {"gyroscope", 3}};
  h.intervals = 3;
  h.freq_bins = 5;
  h.filters = filters;
  h.embed_dim = embed;
  h.dropout = dropout;
  return h;
}

TEST(EmbeddingNet, CanonicalShapesProduceConfiguredEmbedding) {
  EmbeddingHyper h;
  h.sensors = {{"accelerometer", 3}, {"gyroscope", 3}};
  h.intervals = 5;
  h.freq_bins = 16;
  h.filters = 8;
  h.embed_dim = 100;
  h.dropout = 0.0;
  EmbeddingNet net(h);
  Rng rng(60);
  ParamSet params = net.init_params(rng);
  SampleFeatures x = tu::random_features(rng, 5, 3, 16, 2);
  std::vector<double> e = net.embed(params, x);
  EXPECT_EQ(e.size(), 100u);
  for (double v : e) EXPECT_TRUE(std::isfinite(v));
}

TEST(EmbeddingNet, SameHyperparametersGiveCongruentParamSets) {
  EmbeddingNet a(small_hyper()), b(small_hyper());
  Rng r1(1), r2(2);
  ParamSet pa = a.init_params(r1);
  ParamSet pb = b.init_params(r2);
  EXPECT_TRUE(pa.congruent_with(pb));
  EXPECT_FALSE(pa.bitwise_equal(pb));  // different seeds, different values
}

TEST(EmbeddingNet, BatchContractAndComposition) {
  EmbeddingNet net(small_hyper());
  Rng rng(61);
  ParamSet params = net.init_params(rng);
  std::vector<SampleFeatures> xs;
  for (int i = 0; i < 5; ++i) xs.push_back(tu::random_features(rng, 3, 3, 5, 2));

  std::vector<const SampleFeatures*> ptrs;
  for (const auto& x : xs) ptrs.push_back(&x);
  Tape tape;
  Tensor batch_emb = net.forward(params, net.assemble_batch(ptrs), tape, Mode::eval);
  EXPECT_EQ(batch_emb.shape(), (std::vector<std::size_t>{5, 6}));

  // embedding of a sample is identical alone or within any batch (eval mode)
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::vector<double> solo = net.embed(params, xs[i]);
    for (std::size_t e = 0; e < solo.size(); ++e)
      EXPECT_NEAR(batch_emb.at(i, e), solo[e], 1e-6);
  }
}

TEST(EmbeddingNet, EvalModeIsDeterministic) {
  EmbeddingNet net(small_hyper(4, 6, 0.3));  // dropout present but eval disables it
  Rng rng(62);
  ParamSet params = net.init_params(rng);
  SampleFeatures x = tu::random_features(rng, 3, 3, 5, 2);
  auto e1 = net.embed(params, x);
  auto e2 = net.embed(params, x);
  for (std::size_t i = 0; i < e1.size(); ++i) EXPECT_DOUBLE_EQ(e1[i], e2[i]);
}

TEST(EmbeddingNet, RejectsWrongSensorShape) {
  EmbeddingNet net(small_hyper());
  Rng rng(63);
  ParamSet params = net.init_params(rng);
  SampleFeatures bad = tu::random_features(rng, 3, 2, 5, 2);  // wrong axis count
  EXPECT_THROW(net.embed(params, bad), std::invalid_argument);
}

TEST(EmbeddingNet, FullModelGradientCheckAtReducedWidth) {
  // full architecture, reduced width: 8 filters, 16-dim embedding
  EmbeddingHyper h;
  h.sensors = {{"accelerometer", 1}, {"gyroscope", 1}};
  h.intervals = 3;
  h.freq_bins = 4;
  h.filters = 8;
  h.embed_dim = 16;
  h.dropout = 0.0;
  EmbeddingNet net(h);
  for (std::uint64_t seed : {71u, 72u}) {
    Rng rng(seed);
    ParamSet params = net.init_params(rng);
    SampleFeatures x = tu::random_features(rng, 3, 1, 4, 2);
    Tensor r({1, h.embed_dim});
    for (double& v : r.flat()) v = rng.normal();

    Tape tape;
    net.forward(params, net.assemble_batch({&x}), tape, Mode::eval);
    ParamSet grads = params.zeros_like();
    net.backward(r, tape, params, grads);

    ParamSet fd = tu::finite_difference(params, [&](const ParamSet& p) {
      Tape t;
      Tensor e = net.forward(p, net.assemble_batch({&x}), t, Mode::eval);
      double loss = 0.0;
      for (std::size_t i = 0; i < e.size(); ++i) loss += r[i] * e[i];
      return loss;
    });
    EXPECT_LT(tu::max_rel_error(grads, fd), 1e-4) << "seed " << seed;
  }
}

TEST(ClassifierHead, ZeroWeightsGiveUniformProbabilities) {
  EmbeddingNet net(small_hyper());
  Rng rng(64);
  ParamSet embed_params = net.init_params(rng);
  ClassifierHead head(6, 4);
  ParamSet head_params = head.init_params(rng);
  head_params.fill(0.0);
  SampleFeatures x = tu::random_features(rng, 3, 3, 5, 2);
  auto probs = classify(net, head, embed_params, head_params, x);
  ASSERT_EQ(probs.size(), 4u);
  for (double p : probs) EXPECT_NEAR(p, 0.25, 1e-12);
}

TEST(ClassifierHead, OutputLengthMatchesActivitySet) {
  EmbeddingNet net(small_hyper());
  Rng rng(65);
  ParamSet embed_params = net.init_params(rng);
  for (std::size_t classes : {2u, 4u, 7u}) {
    ClassifierHead head(6, classes);
    ParamSet head_params = head.init_params(rng);
    SampleFeatures x = tu::random_features(rng, 3, 3, 5, 2);
    auto probs = classify(net, head, embed_params, head_params, x);
    EXPECT_EQ(probs.size(), classes);
    double sum = 0.0;
    for (double p : probs) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(ClassifierHead, DimensionMismatchIsAnError) {
  EmbeddingNet net(small_hyper());
  Rng rng(66);
  ParamSet embed_params = net.init_params(rng);
  ClassifierHead wrong(9, 4);  // embedding is 6-dim
  ParamSet head_params = wrong.init_params(rng);
  SampleFeatures x = tu::random_features(rng, 3, 3, 5, 2);
  EXPECT_THROW(classify(net, wrong, embed_params, head_params, x), std::invalid_argument);
}

TEST(ClassifierHead, HeadSwapNeverChangesTheEmbedding) {
  EmbeddingNet net(small_hyper());
  Rng rng(67);
  ParamSet embed_params = net.init_params(rng);
  SampleFeatures x = tu::random_features(rng, 3, 3, 5, 2);
  auto before = net.embed(embed_params, x);
  ClassifierHead h1(6, 3), h2(6, 5);
  ParamSet p1 = h1.init_params(rng), p2 = h2.init_params(rng);
  auto probs1 = classify(net, h1, embed_params, p1, x);
  auto probs2 = classify(net, h2, embed_params, p2, x);
  EXPECT_EQ(probs1.size(), 3u);
  EXPECT_EQ(probs2.size(), 5u);
  auto after = net.embed(embed_params, x);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_DOUBLE_EQ(before[i], after[i]);
}

// End-to-end sanity: a small model fit on cleanly separable synthetic
// features reaches high train accuracy.
TEST(ModelTraining, ToySeparableDataReachesHighTrainAccuracy) {
  Rng rng(68);
  EmbeddingHyper h = small_hyper(4, 8, 0.0);
  EmbeddingNet net(h);
  ClassifierHead head(8, 2);
  ParamSet params = net.init_params(rng);
  for (const auto& [name, t] : head.init_params(rng)) params.insert(name, t);

  // class 0: features near -1, class 1: features near +1
  std::vector<SampleFeatures> xs;
  std::vector<int> ys;
  for (int i = 0; i < 40; ++i) {
    const int label = i % 2;
    SampleFeatures f = tu::random_features(rng, 3, 3, 5, 2);
    for (auto& t : f.per_sensor)
      for (double& v : t.flat()) v = 0.25 * v + (label == 0 ? -1.0 : 1.0);
    xs.push_back(std::move(f));
    ys.push_back(label);
  }

  AdamState opt = AdamState::init(params, {5e-3, 0.9, 0.98, 1e-8});
  for (int epoch = 0; epoch < 30; ++epoch) {
    std::vector<const SampleFeatures*> batch;
    for (const auto& x : xs) batch.push_back(&x);
    Tape tape;
    Tensor emb = net.forward(params, net.assemble_batch(batch), tape, Mode::train, &rng);
    Tape head_tape;
    Tensor logits = head.logits(params, emb, head_tape);
    Tensor probs = Softmax::softmax_rows(logits);
    Tensor dlogits({xs.size(), 2});
    for (std::size_t n = 0; n < xs.size(); ++n)
      for (std::size_t j = 0; j < 2; ++j)
        dlogits.at(n, j) = (probs.at(n, j) - (static_cast<int>(j) == ys[n] ? 1.0 : 0.0)) /
                           static_cast<double>(xs.size());
    ParamSet grads = params.zeros_like();
    Tensor gemb = head.backward(dlogits, head_tape, params, grads);
    net.backward(gemb, tape, params, grads);
    opt.step(params, grads);
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    auto probs = classify(net, head, params, params, xs[i]);
    if (static_cast<int>(argmax(probs)) == ys[i]) ++correct;
  }
  EXPECT_GT(static_cast<double>(correct) / static_cast<double>(xs.size()), 0.95);
}

TEST(EmbeddingHyper, InferFromExample) {
  Rng rng(69);
  SampleFeatures x = tu::random_features(rng, 5, 3, 16, 2);
  EmbeddingHyper h =
      EmbeddingHyper::infer(x, {"accelerometer", "gyroscope"}, 64, 100, 0.3);
  EXPECT_EQ(h.intervals, 5u);
  EXPECT_EQ(h.freq_bins, 16u);
  EXPECT_EQ(h.sensors.size(), 2u);
  EXPECT_EQ(h.sensors[0].raw_axes, 3u);
  EXPECT_EQ(h.filters, 64u);
  EXPECT_EQ(h.embed_dim, 100u);
}
