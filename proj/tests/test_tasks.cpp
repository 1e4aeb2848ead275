#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "focus/tasks.hpp"

using namespace focus;
using namespace focus::tasks;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("focus_tasks_" + name);
}

}  // namespace

TEST(Recall, SamplesMatchBruteForceLookup) {
  for (int64_t L : {3, 10, 30, 31}) {
    const auto set = gen_recall(30, L, 200, 7);
    ASSERT_EQ(set.samples.size(), 200u);
    const int64_t pairs = (L - 1) / 2;
    for (const auto& s : set.samples) {
      ASSERT_EQ(static_cast<int64_t>(s.tokens.size()), L);
      EXPECT_EQ(s.query_pos, L - 1);
      const int64_t first = L % 2 ? 0 : 1;
      // keys in the lower half, values in the upper half
      for (int64_t p = 0; p < pairs; ++p) {
        EXPECT_LT(s.tokens[static_cast<size_t>(first + 2 * p)], 15);
        EXPECT_GE(s.tokens[static_cast<size_t>(first + 2 * p + 1)], 15);
        EXPECT_LT(s.tokens[static_cast<size_t>(first + 2 * p + 1)], 30);
      }
      // the query key appears among the listed keys, and every listing of a key
      // carries the same value
      int64_t found = -1;
      const int64_t key = s.tokens[static_cast<size_t>(s.query_pos)];
      for (int64_t p = 0; p < pairs; ++p) {
        if (s.tokens[static_cast<size_t>(first + 2 * p)] != key) continue;
        const int64_t v = s.tokens[static_cast<size_t>(first + 2 * p + 1)];
        if (found >= 0) EXPECT_EQ(v, found);
        found = v;
      }
      EXPECT_EQ(found, s.target);
      EXPECT_EQ(scan_target(s), s.target);
      if (L % 2 == 0) EXPECT_EQ(s.tokens.front(), 0);
    }
  }
}

TEST(Recall, SequencesAreDistinct) {
  const auto set = gen_recall(30, 30, 2000, 0);
  std::set<std::vector<int64_t>> uniq;
  for (const auto& s : set.samples) uniq.insert(s.tokens);
  EXPECT_EQ(uniq.size(), 2000u);
}

TEST(Recall, DeterministicPerSeed) {
  const auto a = gen_recall(30, 30, 50, 3), b = gen_recall(30, 30, 50, 3), c = gen_recall(30, 30, 50, 4);
  bool differs = false;
  for (size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(a.samples[i].tokens, b.samples[i].tokens);
    differs |= a.samples[i].tokens != c.samples[i].tokens;
  }
  EXPECT_TRUE(differs);
}

TEST(Recall, RejectsImpossibleRequests) {
  EXPECT_THROW(gen_recall(3, 30, 10, 0), ConfigError);
  EXPECT_THROW(gen_recall(30, 2, 10, 0), ConfigError);
  EXPECT_THROW(gen_recall(30, 30, 0, 0), ConfigError);
  // vocab 4, L 3: two keys times two values gives 4 distinct sequences
  EXPECT_NO_THROW(gen_recall(4, 3, 4, 0));
  EXPECT_THROW(gen_recall(4, 3, 5, 0), ConfigError);
}

TEST(Recall, SplitIsOrderedAndDisjoint) {
  const auto all = gen_recall(30, 30, 2000, 1);
  const auto [tr, te] = split(all, 0.9);
  ASSERT_EQ(tr.samples.size(), 1800u);
  ASSERT_EQ(te.samples.size(), 200u);
  EXPECT_EQ(tr.samples.front().tokens, all.samples.front().tokens);
  EXPECT_EQ(te.samples.back().tokens, all.samples.back().tokens);
  std::set<uint64_t> train_hashes;
  for (const auto& s : tr.samples) train_hashes.insert(sequence_hash(s.tokens));
  for (const auto& s : te.samples) EXPECT_EQ(train_hashes.count(sequence_hash(s.tokens)), 0u);
}

TEST(Recall, SaveLoadRoundTrip) {
  const auto path = temp_file("recall.bin");
  const auto all = gen_recall(30, 31, 40, 2);
  save_recall(path, all);
  const auto back = load_recall(path, 30);
  ASSERT_EQ(back.samples.size(), all.samples.size());
  EXPECT_EQ(back.seq_len, 31);
  for (size_t i = 0; i < all.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].tokens, all.samples[i].tokens);
    EXPECT_EQ(back.samples[i].target, all.samples[i].target);
    EXPECT_EQ(back.samples[i].query_pos, all.samples[i].query_pos);
  }
  EXPECT_THROW(load_recall(path, 10), FormatError);
  std::filesystem::remove(path);
}

TEST(Metrics, AccuracyCountsArgmaxHits) {
  Tensor logits = Tensor::from_vector({3, 4}, {0, 5, 1, 0,  //
                                               2, 0, 0, 1,  //
                                               0, 0, 0, 9});
  const std::vector<int64_t> targets = {1, 3, 3};
  EXPECT_DOUBLE_EQ(accuracy(logits, targets), 2.0 / 3.0);
}

TEST(Metrics, BpcUniformIsEightBits) {
  Tensor logits = Tensor::zeros({5, 256});
  const std::vector<int64_t> targets = {0, 17, 255, 128, 3};
  EXPECT_NEAR(bpc(logits, targets), 8.0, 1e-12);
}

TEST(Metrics, BpcPerfectIsZero) {
  Tensor logits = Tensor::zeros({3, 256});
  const std::vector<int64_t> targets = {4, 200, 65};
  for (size_t i = 0; i < targets.size(); ++i) logits.values()[i * 256 + static_cast<size_t>(targets[i])] = 200.0;
  EXPECT_LT(bpc(logits, targets), 1e-12);
}

TEST(Metrics, BpcMatchesHandComputedTwoWay) {
  // p(target) = e^1 / (e^1 + e^0)
  Tensor logits = Tensor::from_vector({1, 2}, {1.0, 0.0});
  const std::vector<int64_t> t = {0};
  const double p = std::exp(1.0) / (std::exp(1.0) + 1.0);
  EXPECT_NEAR(bpc(logits, t), -std::log2(p), 1e-12);
}

TEST(Corpus, SplitsBytesWithHeldOutTail) {
  const auto path = temp_file("corpus.txt");
  {
    std::ofstream os(path, std::ios::binary);
    for (int i = 0; i < 1000; ++i) os.put(static_cast<char>(i % 256));
  }
  const auto c = load_corpus(path, 0.1, 16);
  EXPECT_EQ(c.train.size(), 900u);
  EXPECT_EQ(c.test.size(), 100u);
  EXPECT_EQ(c.train[255], 255);
  EXPECT_EQ(c.test.front(), 900 % 256);
  EXPECT_THROW(load_corpus(path, 0.1, 500), InputError);
  EXPECT_THROW(load_corpus(temp_file("missing.txt"), 0.1, 16), InputError);
  std::filesystem::remove(path);
}
