#include <random>

#include "ause/segmetrics.hpp"
#include "test_helpers.hpp"

using namespace ause;
using ause::testing::catalog_of;
using ause::testing::expect_error;

TEST(Confusion, Examples) {
  auto all = confusion(LabelArray({0, 1}), LabelArray({0, 1}), catalog_of(2));
  EXPECT_EQ(all.at(0, 0), 1u);
  EXPECT_EQ(all.at(1, 1), 1u);
  EXPECT_EQ(all.at(0, 1) + all.at(1, 0), 0u);
  EXPECT_EQ(all.total(), 2u);

  auto err = confusion(LabelArray({1}), LabelArray({0}), catalog_of(2));
  EXPECT_EQ(err.at(0, 1), 1u);

  auto ign = confusion(LabelArray({1, 0}), LabelArray({255, 0}), catalog_of(2));
  EXPECT_EQ(ign.at(0, 0), 1u);
  EXPECT_EQ(ign.total(), 1u);
}

TEST(Confusion, LengthMismatch) {
  expect_error(ErrorKind::DimensionMismatch, [] { confusion(LabelArray({0}), LabelArray({0, 1}), catalog_of(2)); });
}

TEST(Merge, IdentityAndSum) {
  ConfusionMatrix a(2);
  a.add(0, 0, 3);
  a.add(1, 0, 2);
  EXPECT_EQ(merge(a, ConfusionMatrix(2)), a);
  ConfusionMatrix d(2);
  d.add(0, 0);
  d.add(1, 1);
  auto m = merge(d, d);
  EXPECT_EQ(m.at(0, 0), 2u);
  EXPECT_EQ(m.at(1, 1), 2u);
  EXPECT_EQ(m.total(), 4u);
  expect_error(ErrorKind::DimensionMismatch, [] { merge(ConfusionMatrix(2), ConfusionMatrix(3)); });
}

TEST(IoU, HandMatrices) {
  ConfusionMatrix perfect(2);
  perfect.add(0, 0, 5);
  perfect.add(1, 1, 5);
  auto v = iou(perfect);
  EXPECT_EQ(v.values[0], 1.0);
  EXPECT_EQ(v.values[1], 1.0);

  // Class 0: TP 2, FP 1 (gt 1 -> pred 0), FN 1 (gt 0 -> pred 2).
  ConfusionMatrix m(3);
  m.add(0, 0, 2);
  m.add(1, 0, 1);
  m.add(0, 2, 1);
  auto w = iou(m);
  EXPECT_EQ(w.values[0], 0.5);
  EXPECT_EQ(w.values[1], 0.0);  // FN only
  EXPECT_EQ(w.values[2], 0.0);  // FP only
  EXPECT_EQ(m.true_positives(0), 2u);
  EXPECT_EQ(m.false_positives(0), 1u);
  EXPECT_EQ(m.false_negatives(0), 1u);

  ConfusionMatrix absent(3);
  absent.add(0, 0, 4);
  auto u = iou(absent);
  EXPECT_TRUE(u.present(0));
  EXPECT_FALSE(u.present(1));
  EXPECT_FALSE(u.present(2));
}

TEST(MIoU, Conventions) {
  EXPECT_EQ(miou(IoUVector{{1.0, 0.0}}), 0.5);
  EXPECT_EQ(miou(IoUVector{{0.8, std::nullopt}}), 0.8);
  EXPECT_EQ(miou_all_classes(IoUVector{{0.8, std::nullopt}}), 0.4);
  expect_error(ErrorKind::NoPresentClasses, [] { miou(IoUVector{{std::nullopt, std::nullopt}}); });
}

// Property: the confusion of a concatenation equals the merge of the parts,
// and IoU matches direct TP/(TP+FP+FN) counting.
TEST(Confusion, SplitMergeProperty) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng() % 4, n = 1 + rng() % 200;
    std::vector<ClassIndex> p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<ClassIndex>(rng() % k);
      g[i] = rng() % 10 == 0 ? 255 : static_cast<ClassIndex>(rng() % k);
    }
    const auto cat = catalog_of(k);
    const std::size_t cut = rng() % (n + 1);
    auto whole = confusion(LabelArray(p), LabelArray(g), cat);
    auto left = confusion(LabelArray({p.begin(), p.begin() + cut}), LabelArray({g.begin(), g.begin() + cut}), cat);
    auto right = confusion(LabelArray({p.begin() + cut, p.end()}), LabelArray({g.begin() + cut, g.end()}), cat);
    EXPECT_EQ(merge(left, right), whole);
    EXPECT_EQ(merge(right, left), whole);

    auto v = iou(whole);
    for (std::size_t c = 0; c < k; ++c) {
      std::uint64_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (g[i] == 255) continue;
        const bool gc = g[i] == static_cast<ClassIndex>(c), pc = p[i] == static_cast<ClassIndex>(c);
        tp += gc && pc;
        fp += !gc && pc;
        fn += gc && !pc;
      }
      if (tp + fp + fn == 0) {
        EXPECT_FALSE(v.present(c));
      } else {
        EXPECT_EQ(*v.values[c], static_cast<double>(tp) / static_cast<double>(tp + fp + fn));
      }
    }
  }
}
