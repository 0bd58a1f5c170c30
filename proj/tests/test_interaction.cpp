#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "samctr/errors.hpp"
#include "samctr/interaction.hpp"

using namespace samctr;

namespace {

// Layer plus random latent fields fed in as tape constants.
struct Harness {
  std::size_t n, d, batch;
  ParameterStore store;
  std::vector<SlotInit> inits;
  std::optional<InteractionLayer> layer;
  std::vector<DenseMatrix> fields;  // per field, batch x d

  Harness(const FIConfig& c, std::size_t n_, std::size_t d_, std::size_t batch_ = 3,
          std::uint64_t seed = 5)
      : n(n_), d(d_), batch(batch_) {
    layer.emplace(c, n, d, store, inits);
    init_parameters(store, inits, seed);
    // Non-zero everywhere so nothing passes by accident (e.g. zero afm.b).
    std::mt19937_64 rng(seed + 100);
    std::normal_distribution<double> g(0, 0.7);
    for (auto& slot : store)
      for (double& v : slot.value.span()) v += 0.1 * g(rng);
    for (std::size_t i = 0; i < n; ++i) {
      DenseMatrix m(batch, d);
      for (double& v : m.span()) v = g(rng);
      fields.push_back(m);
    }
  }

  InteractionOutput run(Tape& t) {
    LatentFields lf;
    for (const auto& m : fields) lf.fields.push_back(t.constant(m));
    return layer->forward(t, store, lf);
  }

  DenseVector f(std::size_t i, std::size_t r) const { return fields[i].row_vector(r); }
  DenseMatrix v(const std::string& s) const { return store.value(s); }
};

DenseVector row(const DenseMatrix& m, std::size_t r) { return m.row_vector(r); }

// Reference utility for (i, j) built from the store by slot name.
UtilityFn utility_for(const Harness& h, const FIConfig& c, std::size_t i, std::size_t j,
                      std::size_t weight_row, const std::string& sfx) {
  UtilityFn u;
  u.kind = c.utility;
  switch (c.utility) {
    case UtilityKind::kFieldScalar:
      u.weight = h.v("fi.w")(i, 0);
      break;
    case UtilityKind::kFieldPairWeight:
      u.weight = h.v("fi.pair")(unordered_pair_index(i, j, h.n), 0);
      break;
    case UtilityKind::kPairScalar:
      u.weight = h.v("fi.cin")(i * h.n + j, 0);
      break;
    case UtilityKind::kThetaInner:
      u.theta_i = row(h.v("fi.theta"), i);
      u.theta_j = row(h.v("fi.theta"), j);
      break;
    case UtilityKind::kVectorWeight:
      u.vector = row(h.v("fi.W" + sfx), weight_row);
      break;
    case UtilityKind::kLinearMap:
      u.map = h.v("fi.V" + sfx);
      break;
    default:
      break;
  }
  return u;
}

// Per-field forward, one record at a time through the value operators.
std::vector<DenseVector> value_forward(const Harness& h, const FIConfig& c, std::size_t r) {
  std::vector<DenseVector> g;
  for (std::size_t i = 0; i < h.n; ++i) g.push_back(h.f(i, r));
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string sfx = "." + std::to_string(l);
    SimilarityFn s;
    s.kind = c.similarity;
    s.constant = c.constant;
    if (h.store.contains("fi.Q" + sfx)) s.q = h.v("fi.Q" + sfx);
    if (h.store.contains("fi.K" + sfx)) s.k = h.v("fi.K" + sfx);
    std::vector<DenseVector> next;
    for (std::size_t i = 0; i < h.n; ++i) {
      std::vector<DenseVector> nb;
      std::vector<UtilityFn> us;
      for (std::size_t j : neighborhood(c.neighborhood, i, h.n)) {
        nb.push_back(g[j]);
        us.push_back(utility_for(h, c, i, j, i * h.n + j, sfx));
      }
      DenseVector z = neighborhood_interaction(s, c.softmax, us, nb, g[i]);
      if (c.residual) z = add(z, vec_mat(g[i], h.v("fi.R" + sfx)));
      next.push_back(z);
    }
    g = next;
  }
  return g;
}

void expect_close(const DenseMatrix& batched, std::size_t r, const DenseVector& ref, double tol) {
  ASSERT_EQ(batched.cols(), ref.size());
  for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(batched(r, k), ref[k], tol);
}

}  // namespace

// ---------------------------------------------------------------- value ops

TEST(PairInteraction, IdentityReturnsNeighbor) {
  const DenseVector f{0.3, -1.0, 2.0};
  EXPECT_EQ(pair_interaction({SimilarityKind::kOne}, {UtilityKind::kIdentity}, f, f), f);
}

TEST(PairInteraction, OrthogonalGivesZero) {
  const auto z = pair_interaction({SimilarityKind::kInner}, {UtilityKind::kHadamard}, {1, 0}, {0, 5});
  EXPECT_EQ(z, (DenseVector{0, 0}));
}

TEST(PairInteraction, InnerTimesHadamardByHand) {
  const auto z = pair_interaction({SimilarityKind::kInner}, {UtilityKind::kHadamard}, {1, 0}, {2, 0});
  EXPECT_EQ(z, (DenseVector{4, 0}));
  EXPECT_THROW(pair_interaction({SimilarityKind::kInner}, {UtilityKind::kHadamard}, {1, 0}, {2}),
               ShapeError);
}

TEST(NeighborhoodInteraction, FmExampleSumsToOne) {
  const std::vector<DenseVector> f = {{1, 0}, {0, 1}, {1, 1}};
  const std::vector<DenseVector> others = {f[1], f[2]};
  const std::vector<UtilityFn> one = {{UtilityKind::kOne}};
  const auto z = neighborhood_interaction({SimilarityKind::kInner}, false, one, others, f[0]);
  EXPECT_EQ(z, (DenseVector{1.0}));
}

TEST(NeighborhoodInteraction, SingletonAndUniformSoftmax) {
  const DenseVector fi{0.5, 2.0};
  const std::vector<DenseVector> single = {{1.0, -1.0}};
  const std::vector<UtilityFn> id = {{UtilityKind::kIdentity}};
  const SimilarityFn s{SimilarityKind::kInner};
  EXPECT_EQ(neighborhood_interaction(s, false, id, single, fi),
            pair_interaction(s, id[0], fi, single[0]));
  // Equal scores under a constant similarity: softmax gives the plain mean.
  const std::vector<DenseVector> nb = {{1, 2}, {3, 4}, {5, 0}};
  const auto z = neighborhood_interaction({SimilarityKind::kConstant, 4.2}, true, id, nb, fi);
  EXPECT_NEAR(z[0], 3.0, 1e-15);
  EXPECT_NEAR(z[1], 2.0, 1e-15);
  EXPECT_THROW(neighborhood_interaction(s, false, id, std::vector<DenseVector>{}, fi), DomainError);
}

TEST(Catalog, RowsAndErrors) {
  EXPECT_EQ(catalog_models().size(), 15u);
  const auto fm = fi_catalog("FM");
  EXPECT_EQ(fm.similarity, SimilarityKind::kInner);
  EXPECT_EQ(fm.utility, UtilityKind::kOne);
  EXPECT_EQ(fm.neighborhood, NeighborhoodKind::kAllOthers);
  EXPECT_EQ(fi_catalog("FwFM").utility, UtilityKind::kFieldPairWeight);
  EXPECT_EQ(fi_catalog("SAM2_A").utility, UtilityKind::kVectorWeight);
  EXPECT_EQ(fi_catalog("SAM2_E").utility, UtilityKind::kHadamard);
  EXPECT_EQ(fi_catalog("SAM2_E").arity, Arity::kPerPair);
  EXPECT_EQ(fi_catalog("SAM3_A").similarity, SimilarityKind::kKernelInner);
  EXPECT_TRUE(fi_catalog("SAM3_E").softmax);
  EXPECT_EQ(fi_catalog("AutoInt").utility, UtilityKind::kLinearMap);
  EXPECT_TRUE(fi_catalog("FFM").field_aware);
  EXPECT_THROW(fi_catalog("GBDT"), CatalogError);
  for (const auto& name : catalog_models()) {
    const auto c = fi_catalog(name);
    EXPECT_EQ(FIConfig::from_json(c.to_json()), c) << name;
  }
  auto bad = fi_catalog("FM").to_json();
  bad["utility"] = "nonsense";
  EXPECT_THROW(FIConfig::from_json(bad), ConfigError);
}

TEST(Neighborhood, SetsAndPairIndex) {
  EXPECT_EQ(neighborhood(NeighborhoodKind::kSelfOnly, 2, 4), (std::vector<std::size_t>{2}));
  EXPECT_EQ(neighborhood(NeighborhoodKind::kAllOthers, 1, 3), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(neighborhood(NeighborhoodKind::kAll, 0, 2), (std::vector<std::size_t>{0, 1}));
  EXPECT_THROW(neighborhood(NeighborhoodKind::kAllOthers, 0, 1), DomainError);
  EXPECT_EQ(pair_list(PairSet::kAllOrdered, 3).size(), 9u);
  EXPECT_EQ(pair_list(PairSet::kUpperTriangle, 4).size(), 6u);
  std::vector<bool> seen(10, false);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = i + 1; j < 5; ++j) {
      const auto k = unordered_pair_index(i, j, 5);
      EXPECT_EQ(k, unordered_pair_index(j, i, 5));
      EXPECT_FALSE(seen.at(k));
      seen[k] = true;
    }
}

// ---------------------------------------------------------------- batched layer

TEST(Layer, Sam1IsIdentity) {
  Harness h(fi_catalog("SAM1"), 4, 3);
  Tape t;
  const auto out = h.run(t);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(t.value(out.vectors[i]), h.fields[i]);
}

TEST(Layer, Sam2eHandExample) {
  Harness h(fi_catalog("SAM2_E"), 2, 2, 1);
  h.fields = {DenseMatrix(1, 2, {1, 1}), DenseMatrix(1, 2, {1, 1})};
  Tape t;
  const auto out = h.run(t);
  ASSERT_EQ(out.vectors.size(), 4u);
  for (const Var v : out.vectors) EXPECT_EQ(t.value(v), DenseMatrix(1, 2, {2, 2}));
}

TEST(Layer, Sam2eLiteralSelfReading) {
  FIConfig c = fi_catalog("SAM2_E");
  c.hadamard = HadamardReading::kLiteralSelf;
  Harness h(c, 2, 2, 1);
  h.fields = {DenseMatrix(1, 2, {1, 2}), DenseMatrix(1, 2, {3, 1})};
  Tape t;
  const auto out = h.run(t);
  // pair (0,1): <f0,f1> = 5, f0 (.) f0 = (1,4)
  for (std::size_t p = 0; p < out.pairs.size(); ++p)
    if (out.pairs[p] == std::pair<std::size_t, std::size_t>{0, 1})
      EXPECT_EQ(t.value(out.vectors[p]), DenseMatrix(1, 2, {5, 20}));
}

TEST(Layer, Sam2eSymmetric) {
  Harness h(fi_catalog("SAM2_E"), 4, 3, 5);
  Tape t;
  const auto out = h.run(t);
  ASSERT_EQ(out.vectors.size(), 16u);
  for (std::size_t p = 0; p < out.pairs.size(); ++p) {
    const auto [i, j] = out.pairs[p];
    EXPECT_EQ(t.value(out.vectors[p]), t.value(out.vectors[j * 4 + i]));
  }
}

TEST(Layer, Sam2PerPairMatchesValueRoute) {
  for (const char* name : {"SAM2_A", "SAM2_E"}) {
    for (PairSet ps : {PairSet::kAllOrdered, PairSet::kUpperTriangle}) {
      FIConfig c = fi_catalog(name);
      c.pairs = ps;
      Harness h(c, 4, 3, 3);
      Tape t;
      const auto out = h.run(t);
      ASSERT_EQ(out.pairs, pair_list(ps, 4));
      for (std::size_t p = 0; p < out.pairs.size(); ++p) {
        const auto [i, j] = out.pairs[p];
        for (std::size_t r = 0; r < h.batch; ++r) {
          const auto u = utility_for(h, c, i, j, p, ".0");
          const auto ref = pair_interaction({SimilarityKind::kInner}, u, h.f(i, r), h.f(j, r));
          expect_close(t.value(out.vectors[p]), r, ref, 1e-13);
        }
      }
    }
  }
}

TEST(Layer, PerFieldModelsMatchValueRoute) {
  for (const char* name : {"FM", "FwFM", "IPNN", "DCN", "CIN2", "AutoInt", "SAM3_A", "SAM3_E", "SAM1"}) {
    for (std::size_t layers : {1u, 2u}) {
      FIConfig c = fi_catalog(name);
      const bool layered = c.similarity == SimilarityKind::kKernelInner ||
                           c.similarity == SimilarityKind::kProjectedInner;
      if (!layered && layers > 1) continue;
      c.layers = layers;
      Harness h(c, 4, 3, 3);
      Tape t;
      const auto out = h.run(t);
      for (std::size_t r = 0; r < h.batch; ++r) {
        const auto ref = value_forward(h, c, r);
        for (std::size_t i = 0; i < 4; ++i) expect_close(t.value(out.vectors[i]), r, ref[i], 1e-12);
      }
    }
  }
}

TEST(Layer, RawSam3MatchesValueRoute) {
  FIConfig c = fi_catalog("SAM3_A");
  c.softmax = false;
  c.residual = false;
  Harness h(c, 3, 2, 2);
  Tape t;
  const auto out = h.run(t);
  for (std::size_t r = 0; r < 2; ++r) {
    const auto ref = value_forward(h, c, r);
    for (std::size_t i = 0; i < 3; ++i) expect_close(t.value(out.vectors[i]), r, ref[i], 1e-13);
  }
}

TEST(Layer, FmSumTrickMatchesDoubleLoop) {
  Harness h(fi_catalog("FM"), 6, 4, 4);
  ASSERT_TRUE(h.layer->sum_trick());
  Tape t;
  const auto out = h.run(t);
  for (std::size_t r = 0; r < 4; ++r) {
    double total = 0, pairs = 0;
    for (std::size_t i = 0; i < 6; ++i) total += t.value(out.vectors[i])(r, 0);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = i + 1; j < 6; ++j) pairs += inner(h.f(i, r), h.f(j, r));
    EXPECT_NEAR(0.5 * total, pairs, 1e-12);
  }
}

TEST(Layer, FfmFieldAwareByHand) {
  FIConfig c = fi_catalog("FFM");
  const std::size_t n = 3, d = 2;
  ParameterStore store;
  std::vector<SlotInit> inits;
  InteractionLayer layer(c, n, d, store, inits);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<std::vector<DenseMatrix>> aware(n, std::vector<DenseMatrix>(n));
  Tape t;
  LatentFields lf;
  lf.aware.resize(n, std::vector<Var>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      aware[i][k] = DenseMatrix(2, d);
      for (double& v : aware[i][k].span()) v = g(rng);
      lf.aware[i][k] = t.constant(aware[i][k]);
    }
  const auto out = layer.forward(t, store, lf);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t i = 0; i < n; ++i) {
      double ref = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) ref += inner(aware[i][j].row_vector(r), aware[j][i].row_vector(r));
      EXPECT_NEAR(t.value(out.vectors[i])(r, 0), ref, 1e-13);
    }
}

TEST(Layer, AfmByHandAndWeightsSumToOne) {
  Harness h(fi_catalog("AFM"), 4, 3, 3);
  Tape t;
  const auto out = h.run(t);
  ASSERT_EQ(out.attention.size(), 1u);
  const auto& a = t.value(out.attention[0]);
  const auto W = h.v("fi.afm.W"), b = h.v("fi.afm.b"), hv = h.v("fi.afm.h"), p = h.v("fi.afm.p");
  for (std::size_t r = 0; r < 3; ++r) {
    double sum = 0;
    for (std::size_t k = 0; k < a.cols(); ++k) sum += a(r, k);
    EXPECT_NEAR(sum, 1.0, 1e-12);
    std::vector<double> score, proj;
    std::vector<std::size_t> owner;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        if (i == j) continue;
        const auto e = hadamard(h.f(i, r), h.f(j, r));
        double s = 0;
        for (std::size_t q = 0; q < W.cols(); ++q) {
          double pre = b(0, q);
          for (std::size_t k = 0; k < 3; ++k) pre += e[k] * W(k, q);
          s += relu(pre) * hv(q, 0);
        }
        double pr = 0;
        for (std::size_t k = 0; k < 3; ++k) pr += e[k] * p(k, 0);
        score.push_back(s);
        proj.push_back(pr);
        owner.push_back(i);
      }
    const auto w = softmax_weights(score);
    std::vector<double> z(4, 0.0);
    for (std::size_t k = 0; k < w.size(); ++k) z[owner[k]] += w[k] * proj[k];
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(t.value(out.vectors[i])(r, 0), z[i], 1e-13);
  }
}

TEST(Layer, SoftmaxWeightsSumToOnePerTarget) {
  for (const char* name : {"SAM3_A", "SAM3_E", "AutoInt"}) {
    FIConfig c = fi_catalog(name);
    c.layers = 2;
    Harness h(c, 5, 3, 4);
    Tape t;
    const auto out = h.run(t);
    ASSERT_EQ(out.attention.size(), 10u);
    for (const Var a : out.attention)
      for (std::size_t r = 0; r < 4; ++r) {
        double s = 0;
        for (std::size_t k = 0; k < t.value(a).cols(); ++k) s += t.value(a)(r, k);
        EXPECT_NEAR(s, 1.0, 1e-12);
      }
  }
}

TEST(Layer, AutoIntIdentitySingleton) {
  FIConfig c = fi_catalog("AutoInt");
  Harness h(c, 1, 3, 2);
  h.store.value("fi.Q.0") = DenseMatrix::identity(3);
  h.store.value("fi.K.0") = DenseMatrix::identity(3);
  h.store.value("fi.V.0") = DenseMatrix::identity(3);
  Tape t;
  const auto out = h.run(t);
  for (std::size_t r = 0; r < 2; ++r) expect_close(t.value(out.vectors[0]), r, h.f(0, r), 1e-15);
}

// Pair terms with S = <,> and U in {One, scalar weight, vector weight}: linear
// in f_i with the others fixed, and each pair term scales by c^2.
TEST(Layer, Bilinearity) {
  for (const char* name : {"FM", "FwFM", "CIN2", "SAM2_A"}) {
    Harness h(fi_catalog(name), 4, 3, 2);
    auto eval = [&](const std::vector<DenseMatrix>& fs) {
      h.fields = fs;
      Tape t;
      const auto out = h.run(t);
      std::vector<DenseMatrix> v;
      for (Var x : out.vectors) v.push_back(t.value(x));
      return v;
    };
    const auto base = h.fields;
    const auto z0 = eval(base);
    // Scale field 1 by a and add b * delta: pair terms (1, j) for j != 1 move linearly.
    DenseMatrix delta(2, 3);
    for (std::size_t k = 0; k < delta.size(); ++k) delta[k] = 0.3 * static_cast<double>(k) - 0.5;
    auto with_f1 = [&](double a, double b) {
      auto fs = base;
      for (std::size_t k = 0; k < fs[1].size(); ++k) fs[1][k] = a * base[1][k] + b * delta[k];
      return eval(fs);
    };
    const auto z00 = with_f1(0.0, 0.0);
    const auto za = with_f1(2.0, 0.0), zb = with_f1(0.0, 1.0), zab = with_f1(2.0, 1.0);
    const FIConfig c = fi_catalog(name);
    const bool per_pair = c.arity == Arity::kPerPair;
    const auto pairs = per_pair ? pair_list(PairSet::kAllOrdered, 4)
                                : std::vector<std::pair<std::size_t, std::size_t>>{};
    for (std::size_t k = 0; k < z0.size(); ++k) {
      // The self pair of field 1 is quadratic in f_1.
      if (per_pair && pairs[k].first == 1 && pairs[k].second == 1) continue;
      if (!per_pair && k == 1 && c.neighborhood == NeighborhoodKind::kAll) continue;
      for (std::size_t e = 0; e < z0[k].size(); ++e)
        EXPECT_NEAR(zab[k][e] - z00[k][e], (za[k][e] - z00[k][e]) + (zb[k][e] - z00[k][e]), 1e-12)
            << name << " output " << k;
    }
    // Scaling every embedding by c scales each term by c^2.
    auto scaled = base;
    for (auto& m : scaled)
      for (double& v : m.span()) v *= 3.0;
    const auto zc = eval(scaled);
    for (std::size_t k = 0; k < z0.size(); ++k)
      for (std::size_t e = 0; e < z0[k].size(); ++e) EXPECT_NEAR(zc[k][e], 9.0 * z0[k][e], 1e-11);
  }
}

TEST(Layer, InvalidConfigsRejected) {
  ParameterStore s;
  std::vector<SlotInit> inits;
  FIConfig c = fi_catalog("FM");
  c.softmax = true;
  c.similarity = SimilarityKind::kOne;
  EXPECT_THROW(InteractionLayer(c, 3, 2, s, inits), ConfigError);
  FIConfig zero = fi_catalog("SAM3_A");
  zero.layers = 0;
  EXPECT_THROW(InteractionLayer(zero, 3, 2, s, inits), ConfigError);
}

TEST(Layer, SlotShapes) {
  Harness a(fi_catalog("SAM3_A"), 4, 3);
  EXPECT_EQ(a.v("fi.W.0").rows(), 16u);
  EXPECT_EQ(a.v("fi.K.0").rows(), 3u);
  EXPECT_EQ(a.v("fi.R.0").cols(), 3u);
  FIConfig up = fi_catalog("SAM2_A");
  up.pairs = PairSet::kUpperTriangle;
  Harness b(up, 4, 3);
  EXPECT_EQ(b.v("fi.W.0").rows(), 6u);
  Harness c(fi_catalog("AFM"), 4, 3);
  EXPECT_EQ(c.v("fi.afm.W").rows(), 3u);
  EXPECT_EQ(c.v("fi.afm.h").cols(), 1u);
  EXPECT_EQ(c.layer->residual_slots().size(), 1u);
}
