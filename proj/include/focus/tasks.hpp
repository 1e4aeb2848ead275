#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "focus/tensor.hpp"

namespace focus::tasks {

/// One associative-recall sequence: key/value pairs, then a query key. The
/// model must emit the value stored for the query at query_pos.
struct RecallSample {
  std::vector<int64_t> tokens;
  int64_t target = 0;
  int64_t query_pos = 0;
};

struct RecallSet {
  int64_t vocab = 0;
  int64_t seq_len = 0;
  std::vector<RecallSample> samples;
};

// Pairs per sequence: (L - 1) / 2.
int64_t recall_pairs(int64_t seq_len);

// n distinct sequences. Keys come from [0, vocab/2), values from
// [vocab/2, vocab); each sequence draws its own key->value dictionary, lists
// (L-1)/2 pairs, then repeats one listed key as the final token. For even L the
// sequence starts with the padding token 0. Throws ConfigError when vocab < 4 or L < 3.
RecallSet gen_recall(int64_t vocab, int64_t seq_len, int64_t n, uint64_t seed);

// Deterministic split: the first round(frac * n) samples train, the rest test.
std::pair<RecallSet, RecallSet> split(const RecallSet& all, double train_fraction);

// Value paired with the last occurrence of the query key before query_pos, or
// -1 when absent. Used as an independent check on generated samples.
int64_t scan_target(const RecallSample& s);

uint64_t sequence_hash(std::span<const int64_t> tokens);

// Dataset cache: tokens (n, L), targets (n), query_pos (n) as int64 records.
void save_recall(const std::filesystem::path& path, const RecallSet& set);
RecallSet load_recall(const std::filesystem::path& path, int64_t vocab);

// Fraction of rows whose argmax equals the target. logits: (N, V).
double accuracy(const Tensor& logits, std::span<const int64_t> targets);

// Mean -log2 p(target) over rows. logits: (N, V).
double bpc(const Tensor& logits, std::span<const int64_t> targets);

/// Byte-level corpus with a held-out tail.
struct CharCorpus {
  std::vector<int64_t> train;
  std::vector<int64_t> test;
};

// Reads bytes; the last `test_fraction` of the file is held out. Throws
// InputError when the file is unreadable or too short.
CharCorpus load_corpus(const std::filesystem::path& path, double test_fraction, int64_t min_len);

}  // namespace focus::tasks
