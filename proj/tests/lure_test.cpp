#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pdom/examples.hpp"
#include "pdom/lure.hpp"

using namespace pdom;
namespace ex = pdom::examples;

TEST(Nonlinearity, CubicSaturatedValuesAndSlopes) {
  const auto phi = Nonlinearity::cubic_saturated();
  EXPECT_DOUBLE_EQ(phi(0.0), 0.0);
  EXPECT_NEAR(phi(1.0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(phi(std::sqrt(3.0)), 0.0, 1e-15);
  EXPECT_NEAR(phi(3.0), -1.0, 1e-15);
  EXPECT_NEAR(phi(2.0), -2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(phi.slope(0.0), 1.0);
  EXPECT_DOUBLE_EQ(phi.slope(3.0), -1.0 / 3.0);
  // left derivative at the kinks
  EXPECT_DOUBLE_EQ(phi.slope(2.0), -3.0);
  EXPECT_DOUBLE_EQ(phi.slope(-2.0), -1.0 / 3.0);
  EXPECT_EQ(phi.slope_range(), std::make_pair(-3.0, 1.0));
  const auto scaled = Nonlinearity::cubic_saturated(-2.0);
  EXPECT_EQ(scaled.slope_range(), std::make_pair(-2.0, 6.0));
}

TEST(Nonlinearity, SlopeMatchesFiniteDifferences) {
  for (const auto& f : {Nonlinearity::cubic_saturated(), Nonlinearity::cubic_saturated(0.5), ex::two_slope_spring(-2.0, -0.5),
                        Nonlinearity::linear(1.5)}) {
    for (double s = -5.0; s <= 5.0; s += 0.0137) {
      const double h = 1e-6;
      EXPECT_NEAR(f.slope(s), (f(s) - f(s - h)) / h, 1e-4) << f.name() << " at " << s;
    }
  }
}

TEST(Nonlinearity, Tabulated) {
  const auto t = Nonlinearity::tabulated({0, 1, 3}, {0, 2, 1});
  EXPECT_DOUBLE_EQ(t(0.5), 1.0);
  EXPECT_DOUBLE_EQ(t(2.0), 1.5);
  EXPECT_DOUBLE_EQ(t(-1.0), -2.0);
  EXPECT_DOUBLE_EQ(t(5.0), 0.0);
  EXPECT_DOUBLE_EQ(t.slope(1.0), 2.0);
  EXPECT_DOUBLE_EQ(t.slope(1.0 + 1e-12), -0.5);
  EXPECT_EQ(t.slope_range(), std::make_pair(-0.5, 2.0));
  EXPECT_THROW(Nonlinearity::tabulated({0, 0}, {1, 2}), InputError);
  EXPECT_THROW(Nonlinearity::tabulated({0}, {1}), InputError);
}

TEST(LureSystem, ValidatesSlopeBounds) {
  LureChannel ch{Vector{0, 1}, Vector{1, 0}, Nonlinearity::cubic_saturated(), -3.0, 0.5};
  EXPECT_THROW(LureSystem(Matrix{{0, 1}, {0, -8}}, {ch}, Matrix{{0}, {1}}, Matrix{{1, 2}}), InputError);
  ch.alpha = 2.0;
  ch.beta = 1.0;
  EXPECT_THROW(LureSystem(Matrix{{0, 1}, {0, -8}}, {ch}, Matrix{{0}, {1}}, Matrix{{1, 2}}), InputError);
  ch = {Vector{0, 1, 0}, Vector{1, 0}, Nonlinearity::linear(0.0), 0.0, 0.0};
  EXPECT_THROW(LureSystem(Matrix{{0, 1}, {0, -8}}, {ch}, Matrix{{0}, {1}}, Matrix{{1, 2}}), DimensionError);
  EXPECT_THROW(LureSystem(Matrix{{0, 1}, {0, -8}}, {}, Matrix{{0}}, Matrix{{1, 2}}), DimensionError);
  EXPECT_NO_THROW(ex::spring_cubic());
  EXPECT_NO_THROW(ex::spring_monotone());
}

TEST(LureSystem, FieldAndRhs) {
  const auto sys = ex::spring_cubic();
  const Vector x{1.0, 0.5};
  const Vector f = sys.field(x);
  EXPECT_DOUBLE_EQ(f[0], 0.5);
  EXPECT_NEAR(f[1], 2.0 / 3.0 - 4.0, 1e-15);
  const Vector g = sys.rhs(x, Vector{2.0});
  EXPECT_NEAR(g[1], f[1] + 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(sys.output(x)[0], 2.0);
}

TEST(Jacobian, Examples) {
  const auto sys = ex::spring_cubic();
  EXPECT_EQ(jacobian(sys, Vector{0.0, 5.0}), (Matrix{{0, 1}, {1, -8}}));
  const Matrix j3 = jacobian(sys, Vector{3.0, 0.0});
  EXPECT_NEAR((j3 - Matrix{{0, 1}, {-1.0 / 3.0, -8}}).max_abs(), 0.0, 1e-15);
  const LureSystem lin(Matrix{{1, 2}, {3, 4}}, {}, Matrix(2, 0), Matrix(0, 2));
  EXPECT_EQ(jacobian(lin, Vector{7.0, -1.0}), lin.A);
  EXPECT_THROW(jacobian(sys, Vector{1.0}), DimensionError);
}

TEST(Jacobian, MatchesFiniteDifferences) {
  const auto sys = ex::spring_loop();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int rep = 0; rep < 50; ++rep) {
    Vector x(4);
    for (auto& v : x) v = u(rng);
    const Matrix j = jacobian(sys, x);
    const double h = 1e-7;
    for (std::size_t k = 0; k < 4; ++k) {
      Vector xm = x;
      xm[k] -= h;
      const Vector f = sys.field(x), fm = sys.field(xm);
      for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(j(i, k), (f[i] - fm[i]) / h, 1e-5);
    }
  }
}

TEST(VertexFamily, Examples) {
  const auto fam = vertex_family(ex::spring_cubic());
  ASSERT_EQ(fam.vertices.size(), 2U);
  EXPECT_EQ(fam.vertices[0], (Matrix{{0, 1}, {-3, -8}}));
  EXPECT_EQ(fam.vertices[1], (Matrix{{0, 1}, {1, -8}}));
  EXPECT_EQ(fam.corners[0], Vector{-3.0});
  const auto mono = vertex_family(ex::spring_monotone());
  EXPECT_DOUBLE_EQ(mono.vertices[0](1, 0), -2.0);
  EXPECT_DOUBLE_EQ(mono.vertices[1](1, 0), -0.5);
  const auto loop = vertex_family(ex::spring_loop());
  ASSERT_EQ(loop.vertices.size(), 4U);
  EXPECT_EQ(loop.corners[2], (Vector{-3.0, 1.0}));
  EXPECT_DOUBLE_EQ(loop.vertices[2](1, 0), -3.0);
  EXPECT_DOUBLE_EQ(loop.vertices[2](3, 2), 1.0);
}

// Every Jacobian has slope coordinates inside the box, which gives explicit convex weights.
TEST(VertexFamily, HullSoundness) {
  const auto sys = ex::spring_loop();
  const auto fam = vertex_family(sys);
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int rep = 0; rep < 1000; ++rep) {
    Vector x(4);
    for (auto& v : x) v = u(rng);
    const Matrix j = jacobian(sys, x);
    Vector theta(sys.channels.size());
    for (std::size_t c = 0; c < theta.size(); ++c) {
      const auto& ch = sys.channels[c];
      const double s = ch.sigma.slope(dot(ch.h, x));
      ASSERT_GE(s, ch.alpha);
      ASSERT_LE(s, ch.beta);
      theta[c] = (s - ch.alpha) / (ch.beta - ch.alpha);
    }
    Matrix hull(4, 4);
    double total = 0.0;
    for (std::size_t k = 0; k < fam.vertices.size(); ++k) {
      double w = 1.0;
      for (std::size_t c = 0; c < theta.size(); ++c) w *= (k >> c) & 1U ? theta[c] : 1.0 - theta[c];
      ASSERT_GE(w, 0.0);
      total += w;
      hull += w * fam.vertices[k];
    }
    EXPECT_NEAR(total, 1.0, 1e-14);
    EXPECT_LT((hull - j).max_abs(), 1e-12);
  }
}

TEST(DiffDominance, CubicSpringIsOneDominant) {
  const auto v = check_diff_dominance(ex::spring_cubic(), {ex::spring_cubic_dominance_storage(), 1.0, 0.0, 1});
  EXPECT_TRUE(v.pass) << v.message;
  ASSERT_EQ(v.vertices.size(), 2U);
  // vertex residuals [[-2, s-1],[s-1, -14]]
  for (std::size_t i = 0; i < 2; ++i) {
    const double s = i == 0 ? -3.0 : 1.0;
    const double tr = -16.0, det = 28.0 - (s - 1) * (s - 1);
    EXPECT_NEAR(v.vertices[i].residual_max, 0.5 * (tr + std::sqrt(tr * tr - 4 * det)), 1e-12);
    EXPECT_TRUE(v.split_matches[i]);
  }
}

TEST(DiffDominance, MonotoneSpringClaimFailsAtUpperVertex) {
  const auto v = check_diff_dominance(ex::spring_monotone(), {ex::spring_monotone_storage(), 0.0, 0.0, 0});
  EXPECT_FALSE(v.pass);
  ASSERT_EQ(v.vertices.size(), 2U);
  EXPECT_TRUE(v.vertices[0].pass);
  EXPECT_FALSE(v.vertices[1].pass);
  // det of [[-0.5,-3.5],[-3.5,-15]] is -4.75
  const double tr = -15.5, det = -4.75;
  EXPECT_NEAR(v.vertices[1].residual_max, 0.5 * (tr + std::sqrt(tr * tr - 4 * det)), 1e-12);
  EXPECT_NE(v.message.find("vertex 1"), std::string::npos);
  // brute-force slope scan: negative definite exactly where s^2 + 9 s + 9 < 0
  for (double s = -2.0; s <= -0.5; s += 1e-3) {
    const Matrix r = residual(Matrix{{0, 1}, {s, -8}}, ex::spring_monotone_storage(), 0.0).matrix();
    const bool nd = r(0, 0) < 0 && r(0, 0) * r(1, 1) - r(0, 1) * r(1, 0) > 0;
    const double lo = (-9.0 - std::sqrt(45.0)) / 2.0, hi = (-9.0 + std::sqrt(45.0)) / 2.0;
    EXPECT_EQ(nd, s > lo && s < hi) << s;
  }
}

TEST(DiffDominance, ContractiveVariantIsZeroDominant) {
  const auto v = check_diff_dominance(ex::spring_contractive(), {ex::spring_monotone_storage(), 0.0, 0.0, 0});
  EXPECT_TRUE(v.pass) << v.message;
}

TEST(DiffDissipativity, CubicSpringIsOnePassive) {
  const DissipativityCertificate cert{ex::spring_cubic_passivity_storage(), 1.0, 0.0, 1, supply_passivity(1)};
  const auto sys = ex::spring_cubic();
  EXPECT_EQ(cert.P.matrix() * sys.B, sys.C.transpose());
  const auto v = check_diff_dissipativity(sys, cert);
  EXPECT_TRUE(v.pass) << v.message;
  const auto bad = check_diff_dissipativity(ex::spring_cubic(Matrix{{0, 1}}), cert);
  EXPECT_FALSE(bad.pass);
}

TEST(DiffDissipativity, FeasibleSlopeInterval) {
  const double lo = (-5.0 - std::sqrt(65.0)) / 2.0, hi = (-5.0 + std::sqrt(65.0)) / 2.0;
  const DissipativityCertificate cert{ex::spring_cubic_passivity_storage(), 1.0, 0.0, 1, supply_passivity(1)};
  for (double s : {lo + 0.01, -3.0, 0.0, 1.0, hi - 0.01, lo - 0.01, hi + 0.01}) {
    const auto sys = LtiSystem::strictly_proper(Matrix{{0, 1}, {s, -8}}, Matrix{{0}, {1}}, Matrix{{1, 2}});
    EXPECT_EQ(verify_dissipativity(sys, cert).pass, s > lo && s < hi) << s;
  }
}

TEST(DiffDissipativity, StorageSearch) {
  const auto r = find_diff_passivity_storage(ex::spring_cubic(), 1.0, 1);
  ASSERT_TRUE(r.found) << r.report.message;
  EXPECT_TRUE(check_diff_dissipativity(ex::spring_cubic(), r.certificate).pass);
  EXPECT_LT((r.certificate.P.matrix() * Matrix{{0}, {1}} - Matrix{{1}, {2}}).max_abs(), 1e-10);
}

TEST(DiffCompose, LoopStructure) {
  const auto loop = ex::spring_loop();
  EXPECT_EQ(loop.states(), 4U);
  ASSERT_EQ(loop.channels.size(), 2U);
  EXPECT_EQ(loop.channels[0].h, (Vector{1, 0, 0, 0}));
  EXPECT_EQ(loop.channels[1].g, (Vector{0, 0, 0, 1}));
  const auto lin = feedback_compose(ex::spring_cubic().linear_part(), ex::spring_cubic().linear_part());
  EXPECT_EQ(loop.A, lin.A);
  EXPECT_EQ(loop.B, lin.B);
  EXPECT_EQ(loop.C, lin.C);
  EXPECT_THROW(diff_feedback_compose(ex::spring_cubic(), ex::spring_cubic(Matrix{{1, 0}, {0, 1}})), DimensionError);
}

TEST(DiffCompose, ChannelFreeReducesToFeedbackCompose) {
  std::mt19937_64 rng(107);
  for (int rep = 0; rep < 20; ++rep) {
    const LtiSystem a = LtiSystem::strictly_proper(oracle::random_matrix(rng, 3, 3), oracle::random_matrix(rng, 3, 2),
                                                   oracle::random_matrix(rng, 1, 3));
    const LtiSystem b = LtiSystem::strictly_proper(oracle::random_matrix(rng, 2, 2), oracle::random_matrix(rng, 2, 1),
                                                   oracle::random_matrix(rng, 2, 2));
    const auto lure = diff_feedback_compose(LureSystem(a.A, {}, a.B, a.C), LureSystem(b.A, {}, b.B, b.C));
    const auto lin = feedback_compose(a, b);
    EXPECT_EQ(lure.A, lin.A);
    EXPECT_TRUE(lure.channels.empty());
  }
}

TEST(DiffCompose, LoopIsTwoDominant) {
  const DissipativityCertificate c{ex::spring_cubic_passivity_storage(), 1.0, 0.0, 1, supply_passivity(1)};
  const auto cert = closed_loop_certificate(c, c);
  EXPECT_EQ(cert.p, 2U);
  EXPECT_EQ(inertia_of(cert.P), (Inertia{2, 0, 2}));
  const auto v = check_diff_dominance(ex::spring_loop(), cert);
  EXPECT_TRUE(v.pass) << v.message;
  EXPECT_EQ(v.vertices.size(), 4U);
}

// Blockdiag certificates from vertex-certified passive subsystems certify the composed vertex family.
TEST(DiffCompose, CompositionConsistency) {
  std::mt19937_64 rng(109);
  std::uniform_real_distribution<double> u(-1, 1);
  int tested = 0;
  for (int rep = 0; rep < 60 && tested < 20; ++rep) {
    auto make = [&] {
      Matrix a = oracle::random_matrix(rng, 2, 2);
      a(0, 0) -= 2.0;
      a(1, 1) -= 2.0;
      const double w = 0.5 * std::abs(u(rng));
      LureChannel ch{Vector{u(rng), u(rng)}, Vector{u(rng), u(rng)}, Nonlinearity::cubic_saturated(w / 3.0), -w, w / 3.0};
      const Matrix b = oracle::random_matrix(rng, 2, 1);
      return LureSystem(a, {ch}, b, Matrix(1, 2));
    };
    LureSystem s1 = make(), s2 = make();
    // C chosen so that PB = C' for the found storage
    auto r1 = find_diff_passivity_storage(LureSystem(s1.A, s1.channels, s1.B, s1.B.transpose()), 0.0, 0);
    auto r2 = find_diff_passivity_storage(LureSystem(s2.A, s2.channels, s2.B, s2.B.transpose()), 0.0, 0);
    if (!r1.found || !r2.found) continue;
    const LureSystem t1(s1.A, s1.channels, s1.B, s1.B.transpose());
    const LureSystem t2(s2.A, s2.channels, s2.B, s2.B.transpose());
    const auto cert = closed_loop_certificate(r1.certificate, r2.certificate);
    const auto v = check_diff_dominance(diff_feedback_compose(t1, t2), cert);
    EXPECT_TRUE(v.pass) << "rep " << rep << ": " << v.message;
    ++tested;
  }
  EXPECT_GE(tested, 10);
}

// Vertex pass implies the pointwise LMI at every sampled Jacobian.
TEST(DiffDominance, VertexPassImpliesPointwise) {
  const DissipativityCertificate c{ex::spring_cubic_passivity_storage(), 1.0, 0.0, 1, supply_passivity(1)};
  const auto loop = ex::spring_loop();
  const auto cert = closed_loop_certificate(c, c);
  ASSERT_TRUE(check_diff_dominance(loop, cert).pass);
  std::mt19937_64 rng(113);
  std::uniform_real_distribution<double> u(-4, 4);
  for (int rep = 0; rep < 1000; ++rep) {
    Vector x(4);
    for (auto& v : x) v = u(rng);
    EXPECT_TRUE(check_dominance(jacobian(loop, x), cert).pass);
  }
  const auto single = ex::spring_cubic();
  const DominanceCertificate d{ex::spring_cubic_dominance_storage(), 1.0, 0.0, 1};
  for (int rep = 0; rep < 1000; ++rep) {
    const Vector x{u(rng), u(rng)};
    EXPECT_TRUE(check_dominance(jacobian(single, x), d).pass);
  }
}

TEST(DiffDominance, StorageSearch) {
  const auto r = find_diff_dominance_storage(ex::spring_cubic(), 1.0, 1);
  ASSERT_TRUE(r.feasible()) << r.message;
  EXPECT_TRUE(check_diff_dominance(ex::spring_cubic(), {*r.P, 1.0, 1e-6, 1}).pass);
  const auto c = find_diff_dominance_storage(ex::spring_contractive(), 0.0, 0);
  EXPECT_TRUE(c.feasible()) << c.message;
  // a vertex at slope 1 has an unstable direction, so no contraction metric exists
  EXPECT_FALSE(find_diff_dominance_storage(ex::spring_cubic(), 0.0, 0).feasible());
}
