#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "focus/ops.hpp"
#include "focus/train.hpp"

using namespace focus;
using namespace focus::train;

namespace {

// Quadratic bowl 0.5 * sum((w - c)^2), gradient w - c.
void bowl_backward(const std::vector<Tensor>& params, double c) {
  Tape tape;
  TapeScope scope(tape);
  Tensor loss = Tensor::scalar(0.0);
  for (const auto& p : params) {
    Tensor d = add_scalar(p, -c);
    loss = add(loss, scale(sum(mul(d, d)), 0.5));
  }
  tape.backward(loss);
}

FocusConfig tiny_config() {
  FocusConfig c;
  c.seq_len = 12;
  c.width = 16;
  c.att_width = 16;
  c.nfft = 4;
  c.chunk = 4;
  c.oversampling = 2;
  c.hidden = 4;
  c.n_layers = 1;
  c.vocab = 8;
  return c;
}

}  // namespace

TEST(Warmup, HalfwayGivesHalfRate) {
  EXPECT_DOUBLE_EQ(warmup_lr(1e-4, 5.0, 10), 0.5e-4);
  EXPECT_DOUBLE_EQ(warmup_lr(1e-4, 10.0, 10), 1e-4);
  EXPECT_DOUBLE_EQ(warmup_lr(1e-4, 37.0, 10), 1e-4);
  EXPECT_DOUBLE_EQ(warmup_lr(1e-4, 0.3, 0), 1e-4);
}

TEST(Warmup, MonotoneAndCapped) {
  double prev = 0.0;
  for (int i = 0; i <= 300; ++i) {
    const double lr = warmup_lr(2e-3, 0.05 * i, 10);
    EXPECT_GE(lr, prev);
    EXPECT_LE(lr, 2e-3);
    prev = lr;
  }
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  TrainConfig cfg;
  cfg.weight_decay = 0.0;
  for (double start : {5.0, -2.0}) {
    Tensor w = Tensor::from_vector({1, 1}, {start});
    w.set_requires_grad(true);
    AdamW opt({{"w", w}}, cfg);
    bowl_backward({w}, 1.0);
    opt.step(1e-3);
    // the bias-corrected first step is lr * g / (|g| + eps)
    EXPECT_NEAR(w.values()[0], start - 1e-3 * (start > 1.0 ? 1.0 : -1.0), 1e-9);
  }
}

TEST(AdamW, MatchesScalarReferenceOverTenSteps) {
  TrainConfig cfg;
  cfg.beta1 = 0.8;
  cfg.beta2 = 0.95;
  cfg.eps = 1e-6;
  cfg.weight_decay = 0.1;
  Tensor mat = Tensor::from_vector({1, 1}, {2.5});  // decayed
  Tensor vec = Tensor::from_vector({1}, {2.5});     // exempt
  mat.set_requires_grad(true);
  vec.set_requires_grad(true);
  AdamW opt({{"mat", mat}, {"vec", vec}}, cfg);

  struct Ref {
    double w, m = 0, v = 0;
    bool decay;
  };
  Ref refs[2] = {{2.5, 0, 0, true}, {2.5, 0, 0, false}};
  const double lr = 0.05;
  for (int t = 1; t <= 10; ++t) {
    bowl_backward({mat, vec}, -1.0);
    opt.step(lr);
    for (auto& r : refs) {
      const double g = r.w + 1.0;
      if (r.decay) r.w *= 1.0 - lr * cfg.weight_decay;
      r.m = cfg.beta1 * r.m + (1 - cfg.beta1) * g;
      r.v = cfg.beta2 * r.v + (1 - cfg.beta2) * g * g;
      const double mh = r.m / (1 - std::pow(cfg.beta1, t)), vh = r.v / (1 - std::pow(cfg.beta2, t));
      r.w -= lr * mh / (std::sqrt(vh) + cfg.eps);
    }
    EXPECT_NEAR(mat.values()[0], refs[0].w, 1e-12) << "step " << t;
    EXPECT_NEAR(vec.values()[0], refs[1].w, 1e-12) << "step " << t;
  }
  EXPECT_EQ(opt.steps(), 10);
  EXPECT_NE(refs[0].w, refs[1].w);
}

TEST(AdamW, StateRoundTripContinuesIdentically) {
  TrainConfig cfg;
  Tensor a = Tensor::from_vector({2, 2}, {1, 2, 3, 4});
  a.set_requires_grad(true);
  AdamW opt({{"a", a}}, cfg);
  for (int i = 0; i < 3; ++i) {
    bowl_backward({a}, 0.5);
    opt.step(0.01);
  }
  Tensor b = Tensor::from_vector({2, 2}, {a.values().begin(), a.values().end()});
  b.set_requires_grad(true);
  AdamW restored({{"a", b}}, cfg);
  ASSERT_TRUE(restored.load_state(opt.state()));
  EXPECT_EQ(restored.steps(), 3);
  bowl_backward({a}, 0.5);
  opt.step(0.01);
  bowl_backward({b}, 0.5);
  restored.step(0.01);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(a.values()[i], b.values()[i]);

  AdamW other({{"zzz", b}}, cfg);
  EXPECT_FALSE(other.load_state(opt.state()));
}

TEST(LmPositions, LastPositionOfEachBin) {
  for (int64_t L : {8, 12, 16, 30}) {
    for (int64_t nfft : {1, 2, 4, 8}) {
      std::vector<int64_t> expect;
      for (int64_t t = 0; t < L; ++t) {
        if ((t + 1) % nfft == 0) expect.push_back(t);
      }
      EXPECT_EQ(lm_positions(L, nfft), expect) << L << " " << nfft;
    }
  }
}

TEST(TrainRecall, LossDecreases) {
  const auto all = tasks::gen_recall(8, 12, 200, 5);
  const auto [tr, te] = tasks::split(all, 0.9);
  Model m = init_model(tiny_config(), 1);
  TrainConfig cfg;
  cfg.lr = 3e-3;
  cfg.warmup_epochs = 0;
  cfg.max_epochs = 6;
  cfg.batch = 16;
  AdamW opt(named_parameters(m), cfg);
  const auto r = train_recall(m, tr, te, cfg, opt);
  ASSERT_EQ(r.log.size(), 6u);
  EXPECT_LT(r.log.back().loss, r.log.front().loss);
  EXPECT_EQ(r.log.back().step, 6 * ((180 + 15) / 16));
  EXPECT_DOUBLE_EQ(r.test_metric, eval_recall(m, te, 64));
}

TEST(TrainRecall, MicroBatchesMatchFullBatch) {
  const auto all = tasks::gen_recall(8, 12, 24, 9);
  const auto [tr, te] = tasks::split(all, 0.5);
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.warmup_epochs = 0;
  cfg.max_epochs = 1;
  cfg.batch = 12;
  Model full = init_model(tiny_config(), 3), micro = init_model(tiny_config(), 3);
  AdamW o1(named_parameters(full), cfg);
  train_recall(full, tr, te, cfg, o1);
  cfg.micro_batch = 4;
  AdamW o2(named_parameters(micro), cfg);
  train_recall(micro, tr, te, cfg, o2);
  const auto pa = named_parameters(full), pb = named_parameters(micro);
  for (size_t i = 0; i < pa.size(); ++i) {
    auto a = pa[i].second.values(), b = pb[i].second.values();
    for (size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-10) << pa[i].first;
  }
}

TEST(TrainRecall, NonFiniteLossRaisesDivergence) {
  const auto all = tasks::gen_recall(8, 12, 40, 2);
  const auto [tr, te] = tasks::split(all, 0.5);
  Model m = init_model(tiny_config(), 1);
  m.head_b.values()[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.max_epochs = 1;
  AdamW opt(named_parameters(m), cfg);
  try {
    train_recall(m, tr, te, cfg, opt);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
  }
}

TEST(TrainCharLm, BpcFallsBelowUniform) {
  tasks::CharCorpus corpus;
  const std::string text = "the quick brown fox jumps over the lazy dog. ";
  for (int rep = 0; rep < 40; ++rep) {
    for (char ch : text) (rep < 36 ? corpus.train : corpus.test).push_back(static_cast<unsigned char>(ch));
  }
  FocusConfig c = tiny_config();
  c.vocab = 256;
  c.seq_len = 16;
  Model m = init_model(c, 4);
  const double before = eval_char_lm(m, corpus.test, 16);
  TrainConfig cfg;
  cfg.lr = 3e-3;
  cfg.warmup_epochs = 0;
  cfg.max_epochs = 4;
  cfg.steps_per_epoch = 20;
  cfg.batch = 8;
  AdamW opt(named_parameters(m), cfg);
  const auto r = train_char_lm(m, corpus, cfg, opt);
  EXPECT_GT(before, 7.0);
  EXPECT_LT(r.test_metric, 6.0);
  EXPECT_DOUBLE_EQ(r.test_metric, eval_char_lm(m, corpus.test, 16));
}
