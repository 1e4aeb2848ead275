#include "focus/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <unordered_set>

#include "focus/ops.hpp"
#include "focus/random.hpp"
#include "focus/serialize.hpp"

namespace focus::tasks {

int64_t recall_pairs(int64_t seq_len) { return (seq_len - 1) / 2; }

uint64_t sequence_hash(std::span<const int64_t> tokens) {
  uint64_t h = 1469598103934665603ULL;  // FNV-1a over the 8 bytes of each id
  for (int64_t t : tokens) {
    auto u = static_cast<uint64_t>(t);
    for (int i = 0; i < 8; ++i) {
      h ^= (u >> (8 * i)) & 0xFF;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

RecallSet gen_recall(int64_t vocab, int64_t seq_len, int64_t n, uint64_t seed) {
  if (vocab < 4) throw ConfigError("vocab: recall needs at least 4 tokens, got " + std::to_string(vocab));
  if (seq_len < 3) throw ConfigError("L: recall needs room for one pair and a query, got " + std::to_string(seq_len));
  if (n < 1) throw ConfigError("n_samples: must be positive");
  const int64_t n_keys = vocab / 2;
  const int64_t n_values = vocab - n_keys;
  const int64_t pairs = recall_pairs(seq_len);
  Rng rng(seed);
  RecallSet set{vocab, seq_len, {}};
  std::unordered_set<uint64_t> seen;
  int64_t attempts = 0;
  while (static_cast<int64_t>(set.samples.size()) < n) {
    if (++attempts > 100 * n + 1000) {
      throw ConfigError("n_samples: cannot draw " + std::to_string(n) + " distinct sequences for this vocab and L");
    }
    std::vector<int64_t> dict(static_cast<size_t>(n_keys));
    for (auto& v : dict) v = n_keys + rng.index(n_values);
    RecallSample s;
    s.tokens.assign(static_cast<size_t>(seq_len), 0);
    const int64_t first = seq_len - 1 - 2 * pairs;  // 1 when a pad slot leads
    for (int64_t p = 0; p < pairs; ++p) {
      const int64_t key = rng.index(n_keys);
      s.tokens[static_cast<size_t>(first + 2 * p)] = key;
      s.tokens[static_cast<size_t>(first + 2 * p + 1)] = dict[static_cast<size_t>(key)];
    }
    const int64_t chosen = rng.index(pairs);
    s.query_pos = seq_len - 1;
    s.tokens[static_cast<size_t>(s.query_pos)] = s.tokens[static_cast<size_t>(first + 2 * chosen)];
    s.target = dict[static_cast<size_t>(s.tokens[static_cast<size_t>(s.query_pos)])];
    if (seen.insert(sequence_hash(s.tokens)).second) set.samples.push_back(std::move(s));
  }
  return set;
}

std::pair<RecallSet, RecallSet> split(const RecallSet& all, double train_fraction) {
  const auto n = static_cast<int64_t>(all.samples.size());
  const auto cut = static_cast<int64_t>(std::llround(train_fraction * static_cast<double>(n)));
  RecallSet a{all.vocab, all.seq_len, {all.samples.begin(), all.samples.begin() + cut}};
  RecallSet b{all.vocab, all.seq_len, {all.samples.begin() + cut, all.samples.end()}};
  return {std::move(a), std::move(b)};
}

int64_t scan_target(const RecallSample& s) {
  const int64_t key = s.tokens[static_cast<size_t>(s.query_pos)];
  for (int64_t p = s.query_pos - 2; p >= 0; p -= 2) {
    if (s.tokens[static_cast<size_t>(p)] == key) return s.tokens[static_cast<size_t>(p + 1)];
  }
  return -1;
}

void save_recall(const std::filesystem::path& path, const RecallSet& set) {
  const auto n = static_cast<int64_t>(set.samples.size());
  IntTensor tokens{{n, set.seq_len}, {}}, targets{{n}, {}}, qpos{{n}, {}};
  for (const auto& s : set.samples) {
    tokens.data.insert(tokens.data.end(), s.tokens.begin(), s.tokens.end());
    targets.data.push_back(s.target);
    qpos.data.push_back(s.query_pos);
  }
  save_named_tensors(path, {{"tokens", tokens}, {"targets", targets}, {"query_pos", qpos}});
}

RecallSet load_recall(const std::filesystem::path& path, int64_t vocab) {
  auto recs = load_named_tensors(path);
  auto get = [&](const char* name) -> const IntTensor& {
    const NamedTensor* nt = find_tensor(recs, name);
    const auto* it = nt ? std::get_if<IntTensor>(&nt->value) : nullptr;
    if (!it) throw FormatError(path.string() + ": missing int64 record '" + name + "'");
    return *it;
  };
  const IntTensor& tokens = get("tokens");
  const IntTensor& targets = get("targets");
  if (tokens.shape.size() != 2 || targets.shape.size() != 1 || targets.shape[0] != tokens.shape[0]) {
    throw FormatError(path.string() + ": tokens/targets shapes disagree");
  }
  const int64_t n = tokens.shape[0], L = tokens.shape[1];
  const NamedTensor* q = find_tensor(recs, "query_pos");
  const auto* qpos = q ? std::get_if<IntTensor>(&q->value) : nullptr;
  RecallSet set{vocab, L, {}};
  for (int64_t i = 0; i < n; ++i) {
    RecallSample s;
    s.tokens.assign(tokens.data.begin() + i * L, tokens.data.begin() + (i + 1) * L);
    s.target = targets.data[static_cast<size_t>(i)];
    s.query_pos = qpos ? qpos->data[static_cast<size_t>(i)] : L - 1;
    for (int64_t t : s.tokens) {
      if (t < 0 || t >= vocab) throw FormatError(path.string() + ": token " + std::to_string(t) + " outside vocab");
    }
    set.samples.push_back(std::move(s));
  }
  return set;
}

double accuracy(const Tensor& logits, std::span<const int64_t> targets) {
  if (logits.rank() != 2 || logits.dim(0) != static_cast<int64_t>(targets.size())) {
    throw DimensionError("accuracy: logits " + shape_str(logits.shape()) + " vs " +
                         std::to_string(targets.size()) + " targets");
  }
  const int64_t V = logits.dim(1);
  auto v = logits.values();
  int64_t hits = 0;
  for (size_t i = 0; i < targets.size(); ++i) {
    auto row = v.subspan(i * static_cast<size_t>(V), static_cast<size_t>(V));
    if (std::max_element(row.begin(), row.end()) - row.begin() == targets[i]) ++hits;
  }
  return targets.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(targets.size());
}

double bpc(const Tensor& logits, std::span<const int64_t> targets) {
  return cross_entropy(logits.detach(), targets).item() / std::numbers::ln2;
}

CharCorpus load_corpus(const std::filesystem::path& path, double test_fraction, int64_t min_len) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read corpus " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const auto n = static_cast<int64_t>(bytes.size());
  const auto n_test = static_cast<int64_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (n - n_test < min_len || n_test < min_len) {
    throw InputError("corpus " + path.string() + " is too short (" + std::to_string(n) + " bytes)");
  }
  CharCorpus c;
  for (int64_t i = 0; i < n; ++i) {
    const int64_t b = static_cast<unsigned char>(bytes[static_cast<size_t>(i)]);
    (i < n - n_test ? c.train : c.test).push_back(b);
  }
  return c;
}

}  // namespace focus::tasks
