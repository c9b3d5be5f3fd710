#include <gtest/gtest.h>

#include <cmath>

#include "schane/objectives.hpp"
#include "support/gradcheck.hpp"
#include "support/testutil.hpp"

using namespace schane;
using numerics::Matrix;
using numerics::Vector;
using objectives::EmbeddingBatch;

namespace {

// anchor pair (e1 twice, class 0) plus one orthogonal negative (class 1):
// per contributing anchor, positive sim 1 and negative sim 0.
EmbeddingBatch one_pos_one_neg() {
  return EmbeddingBatch{Matrix{{1, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {0, 0, 1}, {0, 0, 1}};
}

// Frozen oracle values (mpmath, 30 digits).
constexpr double kLn1PlusEInv = 0.3132616875182228;   // ln(1 + e^-1)
constexpr double kLn4 = 1.3862943611198906;           // ln 4
constexpr double kLn3 = 1.0986122886681098;           // ln 3
constexpr double kBetaHi = 1.4621171572600098;        // 2e/(e+1)
constexpr double kBetaLo = 0.5378828427399902;        // 2/(e+1)
constexpr double kSupconTwoNeg = 0.5514447139320511;  // -ln(e/(e+2))
constexpr double kGrad10 = 0.2689414213699951;        // 1/(e+1)

}  // namespace

// ---- cross entropy ---------------------------------------------------------------

TEST(CrossEntropy, UniformLogitsFourClasses) {
  const auto res = objectives::cross_entropy(Matrix(3, 4, 0.0), {0, 1, 2});
  EXPECT_NEAR(res.value, kLn4, 1e-12);
}

TEST(CrossEntropy, HandValueAndGradient) {
  const auto res = objectives::cross_entropy(Matrix{{1.0, 0.0}}, {0});
  EXPECT_NEAR(res.value, kLn1PlusEInv, 1e-15);
  EXPECT_NEAR(res.grad_logits(0, 0), -kGrad10, 1e-15);
  EXPECT_NEAR(res.grad_logits(0, 1), kGrad10, 1e-15);
}

TEST(CrossEntropy, LargeMarginDrivesLossToZero) {
  const auto res = objectives::cross_entropy(Matrix{{60.0, 0.0}}, {0});
  EXPECT_LT(res.value, 1e-20);
  EXPECT_GE(res.value, 0.0);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  Rng rng(2);
  Matrix logits(4, 5);
  for (double& x : logits.data()) x = rng.normal() * 3.0;
  const std::vector<std::size_t> labels{3, 0, 4, 1};
  const auto res = objectives::cross_entropy(logits, labels);
  for (std::size_t i = 0; i < 4; ++i) {
    const Vector p = numerics::softmax(logits.row(i));
    for (std::size_t j = 0; j < 5; ++j) {
      const double expect = (p[j] - (labels[i] == j ? 1.0 : 0.0)) / 4.0;
      EXPECT_NEAR(res.grad_logits(i, j), expect, 1e-12);
    }
  }
}

TEST(CrossEntropy, LabelOutOfRangeFails) {
  try {
    objectives::cross_entropy(Matrix(2, 3, 0.0), {0, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LabelError);
  }
}

// ---- beta weights -----------------------------------------------------------------

TEST(BetaWeights, TwoNegativesHandValue) {
  // anchor e1; negatives e1 (sim 1) and e2 (sim 0), tau = 1
  EmbeddingBatch batch{Matrix{{1, 0}, {1, 0}, {0, 1}}, {0, 1, 1}, {0, 1, 2}};
  const Vector beta = objectives::beta_weights(batch, 0, 1.0);
  ASSERT_EQ(beta.size(), 2u);
  EXPECT_NEAR(beta[0], kBetaHi, 1e-12);
  EXPECT_NEAR(beta[1], kBetaLo, 1e-12);
}

TEST(BetaWeights, EqualSimilaritiesGiveOnes) {
  // one-hot embeddings: all negative sims are exactly 0
  EmbeddingBatch batch{Matrix{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {0, 1, 2}, {0, 1, 2}};
  for (std::size_t anchor = 0; anchor < 3; ++anchor) {
    const Vector beta = objectives::beta_weights(batch, anchor, 0.5);
    for (double b : beta) EXPECT_NEAR(b, 1.0, 1e-12);
  }
}

TEST(BetaWeights, SumEqualsNegativeCount) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const auto batch = testutil::random_batch(3 + rng.uniform_index(14), 2 + rng.uniform_index(4),
                                              4 + rng.uniform_index(12), rng);
    for (std::size_t anchor = 0; anchor < batch.size(); ++anchor) {
      const Vector beta = objectives::beta_weights(batch, anchor, 0.5);
      double sum = 0.0;
      for (double b : beta) {
        EXPECT_GT(b, 0.0);
        sum += b;
      }
      EXPECT_NEAR(sum, static_cast<double>(beta.size()), 1e-9);
    }
  }
}

TEST(BetaWeights, NoNegativesFails) {
  EmbeddingBatch batch{Matrix{{1, 0}, {0, 1}}, {0, 0}, {0, 0}};
  try {
    objectives::beta_weights(batch, 0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoNegatives);
  }
}

// ---- schane ------------------------------------------------------------------------

TEST(Schane, SinglePosSingleNegHandValue) {
  // beta is forced to 1 by the single negative
  const auto res = objectives::schane_loss(one_pos_one_neg(), 1.0);
  EXPECT_NEAR(res.value, kLn1PlusEInv, 1e-12);
  EXPECT_EQ(res.diagnostics.skipped_anchors, 1u);  // the lone negative has no positive
}

TEST(Schane, DominantPositiveDrivesLossToZero) {
  const auto res = objectives::schane_loss(
      EmbeddingBatch{Matrix{{1, 0}, {1, 0}, {-1, 0}}, {0, 0, 1}, {0, 0, 1}}, 0.05);
  EXPECT_GE(res.value, 0.0);
  EXPECT_LT(res.value, 1e-12);
}

TEST(Schane, SingleNegativeMatchesSupcon) {
  // three same-class rows plus exactly one row of another class:
  // every contributing anchor has |Neg| = 1, so beta == 1 identically.
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vector> rows;
    for (int i = 0; i < 4; ++i) rows.push_back(testutil::random_unit(6, rng));
    EmbeddingBatch batch{Matrix::from_rows(rows), {0, 0, 0, 1}, {0, 1, 2, 3}};
    const auto a = objectives::schane_loss(batch, 0.5);
    const auto b = objectives::supcon_loss(batch, 0.5);
    EXPECT_NEAR(a.value, b.value, 1e-12);
    EXPECT_LE(testutil::max_abs_diff(a.grad_embeddings, b.grad_embeddings), 1e-12);
  }
}

TEST(Schane, EqualNegativeSimilaritiesMatchSupcon) {
  // one-hot embedding per class: every negative similarity is 0
  Matrix z{{1, 0, 0, 0}, {1, 0, 0, 0}, {0, 1, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 1, 0}};
  EmbeddingBatch batch{z, {0, 0, 1, 1, 2, 2}, {0, 0, 1, 1, 2, 2}};
  const auto a = objectives::schane_loss(batch, 0.7);
  const auto b = objectives::supcon_loss(batch, 0.7);
  EXPECT_NEAR(a.value, b.value, 1e-12);
  EXPECT_LE(testutil::max_abs_diff(a.grad_embeddings, b.grad_embeddings), 1e-12);
}

TEST(Schane, ClassicDenominatorIsUnweighted) {
  Rng rng(23);
  const auto batch = testutil::random_batch(6, 3, 8, rng);
  const auto classic = objectives::schane_loss(batch, 0.5, /*classic_denominator=*/true);
  const auto supcon = objectives::supcon_loss(batch, 0.5);
  EXPECT_NEAR(classic.value, supcon.value, 1e-15);
}

TEST(Schane, SingleClassBatchFails) {
  EmbeddingBatch batch{Matrix{{1, 0}, {1, 0}}, {0, 0}, {0, 0}};
  try {
    objectives::schane_loss(batch, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoNegatives);
  }
}

TEST(Schane, GradientMatchesFiniteDifferences) {
  Rng rng(41);
  for (int trial = 0; trial < 8; ++trial) {
    const auto batch = testutil::random_batch(2 + rng.uniform_index(6), 2 + rng.uniform_index(3),
                                              4 + rng.uniform_index(8), rng);
    const double tau = 0.2 + rng.uniform() * 0.8;
    const double err = gradcheck::check_embedding_gradients(
        batch, [tau](const EmbeddingBatch& b) { return objectives::schane_loss(b, tau); });
    EXPECT_LT(err, 1e-5);
  }
}

TEST(Schane, StopGradBetaMatchesFrozenBetaOracle) {
  Rng rng(43);
  EmbeddingBatch batch = testutil::random_batch(5, 3, 6, rng);
  const double tau = 0.5;

  // Oracle: loss with beta frozen at the unperturbed batch.
  std::vector<Vector> frozen_beta(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    frozen_beta[i] = objectives::beta_weights(batch, i, tau);
  auto frozen_loss = [&](const EmbeddingBatch& b) {
    double total = 0.0;
    std::size_t contributing = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
      std::vector<double> pos;
      std::vector<double> neg;
      for (std::size_t j = 0; j < b.size(); ++j) {
        if (j == i) continue;
        const double s =
            numerics::dot(b.embeddings.row_ptr(i), b.embeddings.row_ptr(j), b.embeddings.cols()) /
            tau;
        (b.labels[j] == b.labels[i] ? pos : neg).push_back(s);
      }
      if (pos.empty()) continue;
      double denom = 0.0;
      for (double s : pos) denom += std::exp(s);
      for (std::size_t k = 0; k < neg.size(); ++k) denom += frozen_beta[i][k] * std::exp(neg[k]);
      double mean_pos = 0.0;
      for (double s : pos) mean_pos += s;
      mean_pos /= static_cast<double>(pos.size());
      total += std::log(denom) - mean_pos;
      ++contributing;
    }
    return total / static_cast<double>(contributing);
  };

  const auto res = objectives::schane_loss(batch, tau, false, /*stop_grad_beta=*/true);
  EXPECT_NEAR(res.value, frozen_loss(batch), 1e-12);  // value is unaffected by stop-grad

  auto& data = batch.embeddings.data();
  std::vector<double> analytic(res.grad_embeddings.data());
  const double err = gradcheck::relative_error(data, analytic, [&]() { return frozen_loss(batch); });
  EXPECT_LT(err, 1e-5);
}

TEST(Schane, HardestNegativeMonotonicity) {
  // Raising the hardest negative's similarity to the anchor strictly
  // raises that anchor's loss term.
  Rng rng(47);
  int checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    EmbeddingBatch batch = testutil::random_batch(5, 3, 8, rng);
    const std::size_t anchor = rng.uniform_index(batch.size());
    const std::size_t d = batch.embeddings.cols();
    std::size_t hardest = SIZE_MAX;
    double best = -2.0;
    for (std::size_t j = 0; j < batch.size(); ++j) {
      if (j == anchor || batch.labels[j] == batch.labels[anchor]) continue;
      const double s =
          numerics::dot(batch.embeddings.row_ptr(anchor), batch.embeddings.row_ptr(j), d);
      if (s > best) {
        best = s;
        hardest = j;
      }
    }
    ASSERT_NE(hardest, SIZE_MAX);
    if (best > 0.99) continue;  // no room to move closer

    const auto before = objectives::schane_loss(batch, 0.5);
    Vector moved = batch.embeddings.row(hardest);
    for (std::size_t k = 0; k < d; ++k) moved[k] += 0.05 * batch.embeddings(anchor, k);
    batch.embeddings.set_row(hardest, numerics::l2_normalize(moved));
    const double after_sim =
        numerics::dot(batch.embeddings.row_ptr(anchor), batch.embeddings.row_ptr(hardest), d);
    ASSERT_GT(after_sim, best);
    const auto after = objectives::schane_loss(batch, 0.5);
    EXPECT_GT(after.diagnostics.anchor_terms[anchor], before.diagnostics.anchor_terms[anchor]);
    ++checked;
  }
  EXPECT_GE(checked, 20);
}

TEST(Schane, PositiveSimilarityMonotonicity) {
  // Single-positive anchors: raising the positive's similarity does not
  // increase the anchor's loss term.
  Rng rng(53);
  int checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    EmbeddingBatch batch = testutil::random_batch(5, 5, 8, rng);  // distinct-ish classes
    const std::size_t anchor = 2 * rng.uniform_index(5);
    const std::size_t sibling = anchor + 1;
    if (batch.labels[anchor] != batch.labels[sibling]) continue;
    bool unique_class = true;
    for (std::size_t j = 0; j < batch.size(); ++j)
      if (j != anchor && j != sibling && batch.labels[j] == batch.labels[anchor]) unique_class = false;
    if (!unique_class) continue;

    const std::size_t d = batch.embeddings.cols();
    const double sim_before =
        numerics::dot(batch.embeddings.row_ptr(anchor), batch.embeddings.row_ptr(sibling), d);
    if (sim_before > 0.99) continue;
    const auto before = objectives::schane_loss(batch, 0.5);
    Vector moved = batch.embeddings.row(sibling);
    for (std::size_t k = 0; k < d; ++k) moved[k] += 0.05 * batch.embeddings(anchor, k);
    batch.embeddings.set_row(sibling, numerics::l2_normalize(moved));
    const auto after = objectives::schane_loss(batch, 0.5);
    EXPECT_LE(after.diagnostics.anchor_terms[anchor],
              before.diagnostics.anchor_terms[anchor] + 1e-12);
    ++checked;
  }
  EXPECT_GE(checked, 10);
}

TEST(Schane, FiniteAcrossTemperatureRange) {
  Rng rng(59);
  const auto batch = testutil::random_batch(8, 3, 16, rng);
  for (double tau : {0.05, 0.1, 0.5, 1.0, 10.0}) {
    EXPECT_TRUE(std::isfinite(objectives::schane_loss(batch, tau).value));
    EXPECT_TRUE(std::isfinite(objectives::supcon_loss(batch, tau).value));
    EXPECT_TRUE(std::isfinite(objectives::simclr_loss(batch, tau).value));
  }
}

TEST(Schane, PermutationEquivariance) {
  Rng rng(61);
  const auto batch = testutil::random_batch(6, 3, 8, rng);
  std::vector<std::size_t> perm(batch.size());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  EmbeddingBatch permuted;
  std::vector<Vector> rows(batch.size());
  permuted.labels.resize(batch.size());
  permuted.view_of.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    rows[perm[i]] = batch.embeddings.row(i);
    permuted.labels[perm[i]] = batch.labels[i];
    permuted.view_of[perm[i]] = batch.view_of[i];
  }
  permuted.embeddings = Matrix::from_rows(rows);

  for (auto loss : {&objectives::supcon_loss, &objectives::simclr_loss}) {
    const auto a = loss(batch, 0.5);
    const auto b = loss(permuted, 0.5);
    EXPECT_NEAR(a.value, b.value, 1e-12);
    for (std::size_t i = 0; i < batch.size(); ++i)
      for (std::size_t k = 0; k < batch.embeddings.cols(); ++k)
        EXPECT_NEAR(a.grad_embeddings(i, k), b.grad_embeddings(perm[i], k), 1e-12);
  }
  const auto a = objectives::schane_loss(batch, 0.5);
  const auto b = objectives::schane_loss(permuted, 0.5);
  EXPECT_NEAR(a.value, b.value, 1e-12);
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t k = 0; k < batch.embeddings.cols(); ++k)
      EXPECT_NEAR(a.grad_embeddings(i, k), b.grad_embeddings(perm[i], k), 1e-12);
}

// ---- supcon ------------------------------------------------------------------------

TEST(Supcon, TwoNegativesHandValue) {
  // 1 positive (sim 1), 2 negatives (sims 0, 0), tau=1: -log(e/(e+2))
  EmbeddingBatch batch{Matrix{{1, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}},
                       {0, 0, 1, 2},
                       {0, 0, 1, 2}};
  const auto res = objectives::supcon_loss(batch, 1.0);
  // anchors 0 and 1 contribute the hand value; anchors 2 and 3 have no
  // positives and are skipped.
  EXPECT_EQ(res.diagnostics.skipped_anchors, 2u);
  EXPECT_NEAR(res.diagnostics.anchor_terms[0], kSupconTwoNeg, 1e-12);
  EXPECT_NEAR(res.value, kSupconTwoNeg, 1e-12);
}

TEST(Supcon, GradientMatchesFiniteDifferences) {
  Rng rng(67);
  for (int trial = 0; trial < 8; ++trial) {
    const auto batch = testutil::random_batch(2 + rng.uniform_index(6), 2 + rng.uniform_index(3),
                                              4 + rng.uniform_index(8), rng);
    const double tau = 0.2 + rng.uniform() * 0.8;
    const double err = gradcheck::check_embedding_gradients(
        batch, [tau](const EmbeddingBatch& b) { return objectives::supcon_loss(b, tau); });
    EXPECT_LT(err, 1e-5);
  }
}

// ---- simclr ------------------------------------------------------------------------

TEST(Simclr, OrthogonalViewsHandValue) {
  EmbeddingBatch batch{Matrix::identity(4), {0, 0, 1, 1}, {0, 0, 1, 1}};
  const auto res = objectives::simclr_loss(batch, 1.0);
  EXPECT_NEAR(res.value, kLn3, 1e-12);
}

TEST(Simclr, LabelsDoNotMatter) {
  Rng rng(71);
  const auto batch = testutil::random_batch(5, 3, 8, rng);
  EmbeddingBatch relabeled = batch;
  for (auto& l : relabeled.labels) l = (l + 1) % 7;
  const auto a = objectives::simclr_loss(batch, 0.5);
  const auto b = objectives::simclr_loss(relabeled, 0.5);
  EXPECT_DOUBLE_EQ(a.value, b.value);
  EXPECT_LE(testutil::max_abs_diff(a.grad_embeddings, b.grad_embeddings), 0.0);
}

TEST(Simclr, SingleSampleFails) {
  EmbeddingBatch batch{Matrix{{1, 0}, {0, 1}}, {0, 0}, {0, 0}};
  try {
    objectives::simclr_loss(batch, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientBatch);
  }
}

TEST(Simclr, MissingSiblingFails) {
  EmbeddingBatch batch{Matrix{{1, 0}, {0, 1}, {0, 1}}, {0, 1, 1}, {0, 0, 1}};
  try {
    objectives::simclr_loss(batch, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ViewPairingError);
  }
}

TEST(Simclr, GradientMatchesFiniteDifferences) {
  Rng rng(73);
  for (int trial = 0; trial < 8; ++trial) {
    const auto batch = testutil::random_batch(2 + rng.uniform_index(6), 2 + rng.uniform_index(3),
                                              4 + rng.uniform_index(8), rng);
    const double err = gradcheck::check_embedding_gradients(
        batch, [](const EmbeddingBatch& b) { return objectives::simclr_loss(b, 0.5); });
    EXPECT_LT(err, 1e-5);
  }
}

// ---- combined ---------------------------------------------------------------------

TEST(Combined, LambdaZeroIsExactlyCe) {
  Rng rng(79);
  const auto batch = testutil::random_batch(4, 2, 6, rng);
  Matrix logits(batch.size(), 3);
  for (double& x : logits.data()) x = rng.normal();
  const auto ce = objectives::cross_entropy(logits, batch.labels);
  const auto con = objectives::schane_loss(batch, 0.5);
  const auto mix = objectives::combined_loss(ce, con, 0.0);
  EXPECT_DOUBLE_EQ(mix.value, ce.value);
  EXPECT_TRUE(testutil::matrices_equal(mix.grad_logits, ce.grad_logits));
  double zero = 0.0;
  for (double g : mix.grad_embeddings.data()) zero = std::max(zero, std::abs(g));
  EXPECT_EQ(zero, 0.0);
}

TEST(Combined, LambdaOneIsExactlyContrastive) {
  Rng rng(83);
  const auto batch = testutil::random_batch(4, 2, 6, rng);
  Matrix logits(batch.size(), 3);
  for (double& x : logits.data()) x = rng.normal();
  const auto ce = objectives::cross_entropy(logits, batch.labels);
  const auto con = objectives::schane_loss(batch, 0.5);
  const auto mix = objectives::combined_loss(ce, con, 1.0);
  EXPECT_DOUBLE_EQ(mix.value, con.value);
  EXPECT_TRUE(testutil::matrices_equal(mix.grad_embeddings, con.grad_embeddings));
  double zero = 0.0;
  for (double g : mix.grad_logits.data()) zero = std::max(zero, std::abs(g));
  EXPECT_EQ(zero, 0.0);
}

TEST(Combined, WeightsValues) {
  objectives::LossResult ce, con;
  ce.value = 1.0;
  con.value = 2.0;
  EXPECT_NEAR(objectives::combined_loss(ce, con, 0.9).value, 1.9, 1e-15);
}

TEST(Combined, LambdaOutOfRangeFails) {
  objectives::LossResult ce, con;
  try {
    objectives::combined_loss(ce, con, 1.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
  }
}

TEST(EmbeddingBatchMake, ValidatesNormsAndPairing) {
  EXPECT_NO_THROW(objectives::EmbeddingBatch::make(Matrix::identity(4), {0, 0, 1, 1}, {0, 0, 1, 1}));
  try {
    objectives::EmbeddingBatch::make(Matrix{{2, 0}, {0, 1}}, {0, 1}, {0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NumericError);
  }
  try {
    objectives::EmbeddingBatch::make(Matrix::identity(3), {0, 0, 1}, {0, 0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ViewPairingError);
  }
}
