#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "focus/model.hpp"
#include "focus/serialize.hpp"
#include "focus/tasks.hpp"

namespace focus::train {

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  double weight_decay = 0.01;
  int64_t batch = 32;
  int64_t micro_batch = 0;  // 0: whole batch in one pass
  int64_t warmup_epochs = 10;
  int64_t max_epochs = 200;
  double target_train_accuracy = 1.0;  // recall: stop once an epoch reaches it
  int64_t steps_per_epoch = 50;        // char-LM only
  double max_seconds = 0.0;            // 0: no wall-clock cap
  int64_t eval_batch = 64;
  uint64_t seed = 0;
};

// base * min(1, progress / warmup); progress is measured in epochs.
double warmup_lr(double base, double progress_epochs, int64_t warmup_epochs);

/// AdamW with decoupled weight decay. Decay applies to tensors of rank >= 2;
/// biases and norm parameters are exempt.
class AdamW {
 public:
  AdamW(std::vector<std::pair<std::string, Tensor>> params, const TrainConfig& cfg);

  // Consumes the current gradients, updates values in place, clears grads.
  void step(double lr);
  int64_t steps() const { return step_; }

  // "opt.m.<name>", "opt.v.<name>" and "opt.step".
  std::vector<NamedTensor> state() const;
  // Restores state when every record is present; returns false otherwise.
  bool load_state(const std::vector<NamedTensor>& records);

 private:
  struct Slot {
    std::string name;
    Tensor param;
    std::vector<double> m, v;
    bool decay = false;
  };
  std::vector<Slot> slots_;
  double beta1_, beta2_, eps_, weight_decay_;
  int64_t step_ = 0;
};

struct EpochLog {
  int64_t epoch = 0;
  int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;            // mean training loss over the epoch
  double metric = 0.0;          // test accuracy (recall) or test BPC (char-LM)
  double train_accuracy = 0.0;  // recall only, measured during the epoch
};

struct TrainResult {
  std::vector<EpochLog> log;
  double test_metric = 0.0;
  bool reached_target = false;
  double seconds = 0.0;
};

using EpochHook = std::function<void(const EpochLog&)>;

// Loss at each sample's query position. Throws DivergenceError on a
// non-finite loss, naming the step.
TrainResult train_recall(Model& m, const tasks::RecallSet& train_set, const tasks::RecallSet& test_set,
                         const TrainConfig& cfg, AdamW& opt, const EpochHook& hook = {});

// Query-position logits for every sample, (N, V).
Tensor recall_logits(const Model& m, const tasks::RecallSet& set, int64_t batch);
double eval_recall(const Model& m, const tasks::RecallSet& set, int64_t batch);

// Last position of each bin. The prediction there cannot see the next token,
// which for the final bin lies just past the window.
std::vector<int64_t> lm_positions(int64_t seq_len, int64_t nfft);

// Random windows from corpus.train; metric is held-out BPC.
TrainResult train_char_lm(Model& m, const tasks::CharCorpus& corpus, const TrainConfig& cfg, AdamW& opt,
                          const EpochHook& hook = {});
// Mean bits per character over non-overlapping windows of `tokens`.
double eval_char_lm(const Model& m, const std::vector<int64_t>& tokens, int64_t batch);

}  // namespace focus::train
