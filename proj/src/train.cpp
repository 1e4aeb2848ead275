#include "focus/train.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "focus/ops.hpp"

namespace focus::train {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<int64_t> shuffled(int64_t n, Rng& rng) {
  std::vector<int64_t> idx(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  for (int64_t i = n - 1; i > 0; --i) std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(rng.index(i + 1))]);
  return idx;
}

void check_finite(double loss, int64_t step) {
  if (!std::isfinite(loss)) {
    throw DivergenceError("training diverged: loss is " + std::to_string(loss) + " at step " + std::to_string(step));
  }
}

void enable_grads(const Model& m) {
  for (auto& [name, t] : named_parameters(m)) {
    Tensor h = t;
    h.set_requires_grad(true);
  }
}

struct BatchOutcome {
  double loss = 0.0;
  int64_t hits = 0;
};

// Recall loss on the samples idx[begin, end), accumulated into parameter grads
// with weight (end - begin) / total.
BatchOutcome recall_pass(const Model& m, const tasks::RecallSet& set, std::span<const int64_t> idx,
                         int64_t total) {
  const auto n = static_cast<int64_t>(idx.size());
  std::vector<int64_t> tokens, pos, targets;
  for (int64_t i : idx) {
    const auto& s = set.samples[static_cast<size_t>(i)];
    tokens.insert(tokens.end(), s.tokens.begin(), s.tokens.end());
    pos.push_back(s.query_pos);
    targets.push_back(s.target);
  }
  Tape tape;
  TapeScope scope(tape);
  Tensor logits = gather_positions(model_forward(m, tokens, n), pos);
  Tensor loss = cross_entropy(logits, targets);
  BatchOutcome out;
  out.loss = loss.item();
  out.hits = std::llround(tasks::accuracy(logits, targets) * static_cast<double>(n));
  if (std::isfinite(out.loss)) tape.backward(scale(loss, static_cast<double>(n) / static_cast<double>(total)));
  return out;
}

}  // namespace

double warmup_lr(double base, double progress_epochs, int64_t warmup_epochs) {
  if (warmup_epochs <= 0) return base;
  return base * std::min(1.0, progress_epochs / static_cast<double>(warmup_epochs));
}

AdamW::AdamW(std::vector<std::pair<std::string, Tensor>> params, const TrainConfig& cfg)
    : beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.eps), weight_decay_(cfg.weight_decay) {
  for (auto& [name, t] : params) {
    Slot s;
    s.name = name;
    s.param = t;
    s.m.assign(static_cast<size_t>(t.numel()), 0.0);
    s.v.assign(static_cast<size_t>(t.numel()), 0.0);
    s.decay = t.rank() >= 2;
    slots_.push_back(std::move(s));
  }
}

void AdamW::step(double lr) {
  ++step_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (auto& s : slots_) {
    auto w = s.param.values();
    if (s.decay && weight_decay_ > 0.0) {
      for (double& x : w) x -= lr * weight_decay_ * x;
    }
    if (!s.param.has_grad()) continue;
    auto g = s.param.grad();
    for (size_t i = 0; i < w.size(); ++i) {
      s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g[i];
      s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + eps_);
    }
    s.param.zero_grad();
  }
}

std::vector<NamedTensor> AdamW::state() const {
  std::vector<NamedTensor> out;
  for (const auto& s : slots_) {
    out.push_back({"opt.m." + s.name, Tensor::from_vector(s.param.shape(), s.m)});
    out.push_back({"opt.v." + s.name, Tensor::from_vector(s.param.shape(), s.v)});
  }
  out.push_back({"opt.step", IntTensor{{}, {step_}}});
  return out;
}

bool AdamW::load_state(const std::vector<NamedTensor>& records) {
  const NamedTensor* st = find_tensor(records, "opt.step");
  const auto* it = st ? std::get_if<IntTensor>(&st->value) : nullptr;
  if (!it || it->data.size() != 1) return false;
  std::vector<std::pair<std::vector<double>, std::vector<double>>> staged;
  for (const auto& s : slots_) {
    const NamedTensor* m = find_tensor(records, "opt.m." + s.name);
    const NamedTensor* v = find_tensor(records, "opt.v." + s.name);
    const auto* mt = m ? std::get_if<Tensor>(&m->value) : nullptr;
    const auto* vt = v ? std::get_if<Tensor>(&v->value) : nullptr;
    if (!mt || !vt || mt->numel() != s.param.numel() || vt->numel() != s.param.numel()) return false;
    staged.emplace_back(std::vector<double>(mt->values().begin(), mt->values().end()),
                        std::vector<double>(vt->values().begin(), vt->values().end()));
  }
  for (size_t i = 0; i < slots_.size(); ++i) {
    slots_[i].m = std::move(staged[i].first);
    slots_[i].v = std::move(staged[i].second);
  }
  step_ = it->data[0];
  return true;
}

Tensor recall_logits(const Model& m, const tasks::RecallSet& set, int64_t batch) {
  const auto n = static_cast<int64_t>(set.samples.size());
  std::vector<double> all;
  for (int64_t b = 0; b < n; b += batch) {
    const int64_t e = std::min(n, b + batch);
    std::vector<int64_t> tokens, pos;
    for (int64_t i = b; i < e; ++i) {
      const auto& s = set.samples[static_cast<size_t>(i)];
      tokens.insert(tokens.end(), s.tokens.begin(), s.tokens.end());
      pos.push_back(s.query_pos);
    }
    Tensor logits = gather_positions(model_forward(m, tokens, e - b), pos);
    all.insert(all.end(), logits.values().begin(), logits.values().end());
  }
  return Tensor::from_vector({n, m.cfg.vocab}, std::move(all));
}

double eval_recall(const Model& m, const tasks::RecallSet& set, int64_t batch) {
  std::vector<int64_t> targets;
  for (const auto& s : set.samples) targets.push_back(s.target);
  return tasks::accuracy(recall_logits(m, set, batch), targets);
}

TrainResult train_recall(Model& m, const tasks::RecallSet& train_set, const tasks::RecallSet& test_set,
                         const TrainConfig& cfg, AdamW& opt, const EpochHook& hook) {
  const auto t0 = Clock::now();
  enable_grads(m);
  const auto n = static_cast<int64_t>(train_set.samples.size());
  if (n == 0) throw ConfigError("n_samples: empty training set");
  const int64_t steps_per_epoch = (n + cfg.batch - 1) / cfg.batch;
  const int64_t micro = cfg.micro_batch > 0 ? cfg.micro_batch : cfg.batch;
  Rng rng(cfg.seed ^ 0x5eed5eedULL);
  TrainResult result;
  for (int64_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    auto order = shuffled(n, rng);
    double loss_sum = 0.0, lr = 0.0;
    int64_t hits = 0;
    for (int64_t s = 0; s < steps_per_epoch; ++s) {
      const int64_t b = s * cfg.batch, e = std::min(n, b + cfg.batch);
      double batch_loss = 0.0;
      for (int64_t mb = b; mb < e; mb += micro) {
        std::span<const int64_t> idx(order.data() + mb, static_cast<size_t>(std::min(e, mb + micro) - mb));
        auto out = recall_pass(m, train_set, idx, e - b);
        batch_loss += out.loss * static_cast<double>(idx.size());
        hits += out.hits;
      }
      batch_loss /= static_cast<double>(e - b);
      check_finite(batch_loss, opt.steps() + 1);
      loss_sum += batch_loss * static_cast<double>(e - b);
      lr = warmup_lr(cfg.lr, static_cast<double>(epoch * steps_per_epoch + s + 1) / static_cast<double>(steps_per_epoch),
                     cfg.warmup_epochs);
      opt.step(lr);
    }
    EpochLog row;
    row.epoch = epoch + 1;
    row.step = opt.steps();
    row.lr = lr;
    row.loss = loss_sum / static_cast<double>(n);
    row.train_accuracy = static_cast<double>(hits) / static_cast<double>(n);
    row.metric = test_set.samples.empty() ? 0.0 : eval_recall(m, test_set, cfg.eval_batch);
    result.log.push_back(row);
    if (hook) hook(row);
    result.test_metric = row.metric;
    if (row.train_accuracy >= cfg.target_train_accuracy) {
      result.reached_target = true;
      break;
    }
    if (cfg.max_seconds > 0 && seconds_since(t0) > cfg.max_seconds) break;
  }
  result.seconds = seconds_since(t0);
  return result;
}

std::vector<int64_t> lm_positions(int64_t seq_len, int64_t nfft) {
  std::vector<int64_t> pos;
  for (int64_t t = nfft - 1; t < seq_len; t += nfft) pos.push_back(t);
  return pos;
}

namespace {

// (B, L, V) -> (B * |pos|, V).
Tensor logits_at(const Tensor& logits, const std::vector<int64_t>& pos) {
  return reshape(index_select(logits, 1, pos), {logits.dim(0) * static_cast<int64_t>(pos.size()), logits.dim(2)});
}

}  // namespace

double eval_char_lm(const Model& m, const std::vector<int64_t>& tokens, int64_t batch) {
  const int64_t L = m.cfg.seq_len;
  const auto pos = lm_positions(L, m.cfg.nfft);
  const auto n_windows = (static_cast<int64_t>(tokens.size()) - 1) / L;
  if (n_windows < 1) throw InputError("eval_char_lm: text shorter than one window");
  double bits = 0.0;
  int64_t count = 0;
  for (int64_t w = 0; w < n_windows; w += batch) {
    const int64_t e = std::min(n_windows, w + batch);
    std::vector<int64_t> in, targets;
    for (int64_t i = w; i < e; ++i) in.insert(in.end(), tokens.begin() + i * L, tokens.begin() + (i + 1) * L);
    for (int64_t i = w; i < e; ++i) {
      for (int64_t p : pos) targets.push_back(tokens[static_cast<size_t>(i * L + p + 1)]);
    }
    Tensor logits = logits_at(model_forward(m, in, e - w), pos);
    bits += tasks::bpc(logits, targets) * static_cast<double>(targets.size());
    count += static_cast<int64_t>(targets.size());
  }
  return bits / static_cast<double>(count);
}

TrainResult train_char_lm(Model& m, const tasks::CharCorpus& corpus, const TrainConfig& cfg, AdamW& opt,
                          const EpochHook& hook) {
  const auto t0 = Clock::now();
  enable_grads(m);
  const int64_t L = m.cfg.seq_len;
  const auto pos = lm_positions(L, m.cfg.nfft);
  const auto max_start = static_cast<int64_t>(corpus.train.size()) - L - 1;
  if (max_start < 1) throw InputError("train_char_lm: corpus shorter than one window");
  Rng rng(cfg.seed ^ 0xc0ffeeULL);
  TrainResult result;
  for (int64_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    double loss_sum = 0.0, lr = 0.0;
    for (int64_t s = 0; s < cfg.steps_per_epoch; ++s) {
      std::vector<int64_t> in, targets;
      for (int64_t b = 0; b < cfg.batch; ++b) {
        const int64_t start = rng.index(max_start + 1);
        in.insert(in.end(), corpus.train.begin() + start, corpus.train.begin() + start + L);
        for (int64_t p : pos) targets.push_back(corpus.train[static_cast<size_t>(start + p + 1)]);
      }
      double loss_val = 0.0;
      {
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = cross_entropy(logits_at(model_forward(m, in, cfg.batch), pos), targets);
        loss_val = loss.item();
        check_finite(loss_val, opt.steps() + 1);
        tape.backward(loss);
      }
      loss_sum += loss_val;
      lr = warmup_lr(cfg.lr, static_cast<double>(epoch * cfg.steps_per_epoch + s + 1) / static_cast<double>(cfg.steps_per_epoch),
                     cfg.warmup_epochs);
      opt.step(lr);
    }
    EpochLog row;
    row.epoch = epoch + 1;
    row.step = opt.steps();
    row.lr = lr;
    row.loss = loss_sum / static_cast<double>(cfg.steps_per_epoch) / std::numbers::ln2;
    row.metric = eval_char_lm(m, corpus.test, cfg.eval_batch);
    result.log.push_back(row);
    if (hook) hook(row);
    result.test_metric = row.metric;
    if (cfg.max_seconds > 0 && seconds_since(t0) > cfg.max_seconds) break;
  }
  result.seconds = seconds_since(t0);
  return result;
}

}  // namespace focus::train
