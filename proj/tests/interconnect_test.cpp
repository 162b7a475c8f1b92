#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pdom/interconnect.hpp"

using namespace pdom;

namespace {

constexpr double kLambda = 1.2679;

LtiSystem msd8() { return LtiSystem::strictly_proper(Matrix{{0, 1}, {-1, -8}}, Matrix{{0}, {1}}, Matrix{{0, 1}}); }

struct Planted {
  LtiSystem sys;
  DissipativityCertificate cert;
};

// passive by construction: C = B'P for a constructed dominance storage
std::optional<Planted> planted_passive(std::mt19937_64& rng, std::size_t n, std::size_t m, double lambda) {
  const Matrix a = oracle::random_matrix(rng, n, n);
  const std::size_t p = oracle::count_right_of(a, -lambda);
  DominanceCertificate dc;
  try {
    dc = construct_certificate(a, lambda, p);
  } catch (const NonHyperbolicError&) {
    return std::nullopt;
  }
  const Matrix b = oracle::random_matrix(rng, n, m);
  const auto sys = LtiSystem::strictly_proper(a, b, b.transpose() * dc.P.matrix());
  return Planted{sys, {dc.P, lambda, dc.epsilon, p, supply_passivity(m)}};
}

}  // namespace

TEST(FeedbackCompose, Integrators) {
  const auto integ = LtiSystem::strictly_proper(Matrix{{0}}, Matrix{{1}}, Matrix{{1}});
  const auto cl = feedback_compose(integ, integ);
  EXPECT_EQ(cl.A, (Matrix{{0, -1}, {1, 0}}));
  EXPECT_EQ(cl.B, Matrix::identity(2));
  EXPECT_EQ(cl.C, Matrix::identity(2));
  EXPECT_FALSE(cl.has_feedthrough());
}

TEST(FeedbackCompose, BlockStructure) {
  const auto lin = LtiSystem::strictly_proper(Matrix{{0, 1}, {-1, -4}}, Matrix{{0}, {1}}, Matrix{{1, 2}});
  const auto cl = feedback_compose(lin, lin);
  ASSERT_EQ(cl.states(), 4U);
  EXPECT_EQ(cl.A.block(0, 0, 2, 2), lin.A);
  EXPECT_EQ(cl.A.block(2, 2, 2, 2), lin.A);
  EXPECT_EQ(cl.A.block(0, 2, 2, 2), -1.0 * (lin.B * lin.C));
  EXPECT_EQ(cl.A.block(2, 0, 2, 2), lin.B * lin.C);
}

TEST(FeedbackCompose, Errors) {
  const auto lin = msd8();
  const LtiSystem with_d(lin.A, lin.B, lin.C, Matrix{{0.5}});
  EXPECT_THROW(feedback_compose(lin, with_d), UnsupportedConfiguration);
  const LtiSystem stub(Matrix(0, 0), Matrix(0, 1), Matrix(1, 0), Matrix(1, 1, 0.0));
  EXPECT_THROW(feedback_compose(lin, stub), DimensionError);
  const auto two_in = LtiSystem::strictly_proper(Matrix{{-1}}, Matrix{{1, 1}}, Matrix{{1}});
  EXPECT_THROW(feedback_compose(lin, two_in), DimensionError);
}

TEST(StaticFeedback, MassSpringDamperGains) {
  for (double k : {0.0, 1.0, 10.0, 100.0}) {
    const auto cl = static_feedback(msd8(), k);
    EXPECT_EQ(cl.A, msd8().A - k * (msd8().B * msd8().C));
    EXPECT_TRUE(eigen_split_test(cl, kLambda, 1).pass()) << k;
  }
  for (double k : {3.2, -3.2}) EXPECT_TRUE(eigen_split_test(static_feedback(msd8(), k), kLambda, 1).pass()) << k;
  EXPECT_EQ(static_feedback(msd8(), -3.2).A, (Matrix{{0, 1}, {-1, -4.8}}));
}

TEST(ComposeSupply, Examples) {
  const auto pp = compose_supply(supply_passivity(1), supply_passivity(1));
  EXPECT_EQ(pp.Q.matrix(), Matrix(2, 2));
  EXPECT_EQ(pp.L, Matrix::identity(2));
  EXPECT_EQ(pp.R.matrix(), Matrix(2, 2));

  const auto gg = compose_supply(supply_gain(0.5, 1, 1), supply_gain(0.5, 1, 1));
  EXPECT_EQ(gg.Q.matrix(), Matrix::diagonal({-0.75, -0.75}));

  const auto zz = compose_supply(supply_zero(1, 2), supply_zero(2, 1));
  EXPECT_EQ(zz.Q.matrix(), Matrix(3, 3));
  EXPECT_EQ(zz.L, Matrix(3, 3));
  EXPECT_THROW(compose_supply(supply_zero(1, 2), supply_zero(1, 1)), DimensionError);
}

// s_cl(y, v) = s1(y1, -y2 + v1) + s2(y2, y1 + v2) identically
TEST(ComposeSupply, PointwiseIdentity) {
  std::mt19937_64 rng(97);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t r1 = 1 + rep % 3, r2 = 1 + (rep / 3) % 3;
    const SupplyRate s1{SymmetricMatrix(oracle::random_symmetric(rng, r1)), oracle::random_matrix(rng, r1, r2), SymmetricMatrix(oracle::random_symmetric(rng, r2))};
    const SupplyRate s2{SymmetricMatrix(oracle::random_symmetric(rng, r2)), oracle::random_matrix(rng, r2, r1), SymmetricMatrix(oracle::random_symmetric(rng, r1))};
    const auto cl = compose_supply(s1, s2);
    Vector y1(r1), y2(r2), v1(r2), v2(r1);
    for (auto* v : {&y1, &y2, &v1, &v2})
      for (double& e : *v) e = nd(rng);
    Vector u1(r2), u2(r1);
    for (std::size_t i = 0; i < r2; ++i) u1[i] = -y2[i] + v1[i];
    for (std::size_t i = 0; i < r1; ++i) u2[i] = y1[i] + v2[i];
    Vector y = y1, v = v1;
    y.insert(y.end(), y2.begin(), y2.end());
    v.insert(v.end(), v2.begin(), v2.end());
    const double direct = s1.evaluate(y1, u1) + s2.evaluate(y2, u2);
    EXPECT_NEAR(cl.evaluate(y, v), direct, 1e-12 * (1 + std::abs(direct)));
  }
}

TEST(CouplingCondition, Examples) {
  const auto pp = coupling_condition(supply_passivity(1), supply_passivity(1));
  EXPECT_TRUE(pp.pass);
  EXPECT_DOUBLE_EQ(pp.lambda_max, 0.0);
  const auto small = coupling_condition(supply_gain(0.5, 1, 1), supply_gain(0.5, 1, 1));
  EXPECT_TRUE(small.pass);
  EXPECT_DOUBLE_EQ(small.lambda_max, -0.75);
  const auto big = coupling_condition(supply_gain(2.0, 1, 1), supply_gain(2.0, 1, 1));
  EXPECT_FALSE(big.pass);
  EXPECT_DOUBLE_EQ(big.lambda_max, 3.0);
}

// With p1 = p2 = 0 and lambda = 0 the scaled coupling test is the small-gain theorem.
TEST(CouplingCondition, SmallGainSpecialization) {
  const std::vector<std::tuple<double, double, bool>> pairs{
      {0.5, 0.5, true}, {2.0, 2.0, false}, {0.5, 1.9, true}, {2.0, 0.6, false},
      {0.1, 9.0, true}, {0.1, 11.0, false}, {1.0, 0.99, true}, {3.0, 0.34, false}};
  for (const auto& [g1, g2, expected] : pairs) {
    const auto v = scaled_coupling_condition(supply_gain(g1, 1, 1), supply_gain(g2, 1, 1));
    EXPECT_EQ(v.pass, expected) << g1 << " " << g2 << " lambda_max " << v.lambda_max;
    EXPECT_EQ(v.pass, g1 * g2 < 1.0);
  }
  // unit scalings alone need both gains below one
  EXPECT_FALSE(coupling_condition(supply_gain(0.5, 1, 1), supply_gain(1.9, 1, 1)).pass);
}

TEST(CouplingCondition, MassSpringDamperGainPair) {
  const SymmetricMatrix p = SymmetricMatrix::diagonal({-1.0, 1.0});
  const double gamma = min_gain_bisection(msd8(), p, kLambda, {0.0, 1.0});
  constexpr double delta = 0.05;
  EXPECT_TRUE(scaled_coupling_condition(supply_gain(gamma, 1, 1), supply_gain(1 / gamma - delta, 1, 1)).pass);
  EXPECT_FALSE(scaled_coupling_condition(supply_gain(gamma, 1, 1), supply_gain(1 / gamma + delta, 1, 1)).pass);
}

TEST(ClosedLoopCertificate, RateMismatch) {
  const DissipativityCertificate c1{SymmetricMatrix::identity(1), 0.5, 0.1, 0, supply_passivity(1)};
  DissipativityCertificate c2 = c1;
  c2.lambda = 0.6;
  EXPECT_THROW(closed_loop_certificate(c1, c2), RateMismatch);
  DissipativityCertificate bad = c1;
  bad.supply = supply_gain(2.0, 1, 1);
  EXPECT_THROW(closed_loop_certificate(bad, bad), CertificationError);
}

TEST(ClosedLoopCertificate, StablePassiveSystems) {
  const auto s1 = LtiSystem::strictly_proper(Matrix{{-1, 0}, {0, -2}}, Matrix{{1}, {1}}, Matrix{{1, 1}});
  const auto s2 = LtiSystem::strictly_proper(Matrix{{-3}}, Matrix{{2}}, Matrix{{2}});
  const DissipativityCertificate c1{SymmetricMatrix::identity(2), 0.0, 1.0, 0, supply_passivity(1)};
  const DissipativityCertificate c2{SymmetricMatrix::identity(1), 0.0, 1.0, 0, supply_passivity(1)};
  ASSERT_TRUE(verify_dissipativity(s1, c1).pass);
  ASSERT_TRUE(verify_dissipativity(s2, c2).pass);
  const auto cert = closed_loop_certificate(c1, c2);
  EXPECT_EQ(inertia_of(cert.P), (Inertia{0, 0, 3}));
  EXPECT_TRUE(check_dominance(feedback_compose(s1, s2), cert).pass);
}

// Open-loop certificates plus coupling give a verified closed-loop certificate and pointwise dissipation.
TEST(InterconnectProperty, ClosedLoopDissipationAndDegreeAdditivity) {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> nd;
  int loops = 0;
  while (loops < 50) {
    const std::size_t m = 1 + loops % 2;
    const auto a = planted_passive(rng, 2 + loops % 3, m, 0.4);
    const auto b = planted_passive(rng, 1 + loops % 4, m, 0.4);
    if (!a || !b) continue;
    ASSERT_TRUE(verify_dissipativity(a->sys, a->cert).pass);
    ASSERT_TRUE(verify_dissipativity(b->sys, b->cert).pass);
    const auto loop = feedback_compose(a->sys, b->sys);
    const auto cert = closed_loop_certificate(a->cert, b->cert);
    EXPECT_EQ(cert.p, a->cert.p + b->cert.p);
    const auto dv = check_dominance(loop, cert);
    EXPECT_TRUE(dv.pass) << dv.message;

    const SupplyRate s_cl = compose_supply(a->cert.supply, b->cert.supply);
    const std::size_t n = loop.states();
    const Matrix& p = cert.P.matrix();
    for (int k = 0; k < 1000; ++k) {
      Vector x(n), v(2 * m);
      for (double& e : x) e = nd(rng);
      for (double& e : v) e = nd(rng);
      const Vector xdot = axpy(1.0, loop.B * v, loop.A * x);
      const double lhs = 2 * quad_form(p, xdot, x) + 2 * cert.lambda * quad_form(p, x) + cert.epsilon * dot(x, x);
      const double rhs = s_cl.evaluate(loop.C * x, v);
      ASSERT_LE(lhs, rhs + 1e-8 * (1 + std::abs(lhs) + std::abs(rhs))) << "loop " << loops;
    }
    ++loops;
  }
}
