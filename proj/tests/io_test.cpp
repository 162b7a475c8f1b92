#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "pdom/examples.hpp"
#include "pdom/io.hpp"
#include "pdom/report.hpp"
#include "pdom/reproduce.hpp"

using namespace pdom;
using io::Json;

TEST(ParseJson, ReportsLineAndColumn) {
  try {
    io::parse_json("{\n  \"A\": [[1, 2],\n        [3, ]]\n}", "bad.json");
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    const std::string what = e.what();
    EXPECT_EQ(what.rfind("bad.json:3:", 0), 0u) << what;
  }
}

TEST(ParseJson, MissingFile) { EXPECT_THROW(io::read_json_file("/nonexistent/x.json"), InputError); }

TEST(MatrixJson, EmptyShapes) {
  EXPECT_EQ(io::matrix_from_json(Json::array(), "m").rows(), 0u);
  const Matrix m = io::matrix_from_json(Json::parse("[[],[]]"), "m");
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 0u);
}

TEST(MatrixJson, RaggedAndNonNumeric) {
  EXPECT_THROW(io::matrix_from_json(Json::parse("[[1,2],[3]]"), "m"), DimensionError);
  EXPECT_THROW(io::matrix_from_json(Json::parse("[[1,\"x\"]]"), "m"), InputError);
}

TEST(MatrixJson, RoundTripIsExact) {
  const Matrix m{{0.1, -2.5e-17}, {1.0 / 3.0, 1e300}};
  const Matrix back = io::matrix_from_json(Json::parse(io::to_json(m).dump()), "m");
  EXPECT_EQ((back - m).max_abs(), 0.0);
}

TEST(SystemJson, RoundTrip) {
  const LtiSystem s = examples::mass_spring_damper(4.0);
  const Json j = io::to_json(s);
  EXPECT_EQ(io::to_json(io::system_from_json(Json::parse(j.dump()))), j);
}

TEST(SystemJson, OptionalBlocks) {
  const LtiSystem s = io::system_from_json(Json::parse(R"({"A": [[-1, 0], [0, 2]]})"));
  EXPECT_EQ(s.states(), 2u);
  EXPECT_EQ(s.inputs(), 0u);
  EXPECT_EQ(s.outputs(), 0u);
}

TEST(SystemJson, DimensionMismatch) {
  EXPECT_THROW(io::system_from_json(Json::parse(R"({"A": [[1, 0]], "B": [[1]]})")), DimensionError);
  EXPECT_THROW(io::system_from_json(Json::parse(R"({"A": [[1, 0], [0, 1]], "B": [[1]]})")), DimensionError);
}

TEST(LureJson, RoundTrip) {
  for (const LureSystem& s : {examples::spring_cubic(), examples::spring_monotone()}) {
    const Json j = io::to_json(s);
    const auto parsed = io::any_system_from_json(Json::parse(j.dump()));
    ASSERT_TRUE(std::holds_alternative<LureSystem>(parsed));
    EXPECT_EQ(io::to_json(std::get<LureSystem>(parsed)), j);
  }
}

TEST(LureJson, DeclaredBoundsValidated) {
  Json j = io::to_json(examples::spring_cubic());
  j["channels"][0]["alpha"] = -1.0;
  EXPECT_THROW(io::lure_from_json(j), InputError);
  j["channels"][0]["sigma"] = Json{{"kind", "mystery"}};
  EXPECT_THROW(io::lure_from_json(j), InputError);
}

TEST(CertificateJson, InfersDegreeFromInertia) {
  const auto c = io::certificate_from_json(Json::parse(R"({"P": [[-1, 0], [0, 1]], "lambda": 1.2})"), 2);
  EXPECT_EQ(c.p, 1u);
  EXPECT_EQ(c.epsilon, 0.0);
  EXPECT_EQ(io::to_json(io::certificate_from_json(io::to_json(c), 2)), io::to_json(c));
}

TEST(CertificateJson, RejectsBadInput) {
  EXPECT_THROW(io::certificate_from_json(Json::parse(R"({"P": [[1, 0], [0, 1]], "lambda": 1})"), 3), DimensionError);
  EXPECT_THROW(io::certificate_from_json(Json::parse(R"({"P": [[1, 5], [0, 1]], "lambda": 1})"), 2), InputError);
  EXPECT_THROW(io::certificate_from_json(Json::parse(R"({"P": [[1, 0], [0, 1]], "lambda": 1, "epsilon": -1})"), 2),
               InputError);
}

TEST(SupplyJson, Shorthands) {
  const SupplyRate pass = io::supply_from_json(Json{{"kind", "passivity"}}, 1, 1);
  EXPECT_EQ(pass.Q.matrix().max_abs(), 0.0);
  EXPECT_EQ(pass.R.matrix().max_abs(), 0.0);
  EXPECT_EQ(pass.L(0, 0), 1.0);
  const SupplyRate gain = io::supply_from_json(Json{{"kind", "gain"}, {"gamma", 0.5}}, 1, 1);
  EXPECT_EQ(io::to_json(gain), io::to_json(supply_gain(0.5, 1, 1)));
  EXPECT_EQ(io::to_json(io::supply_from_json(Json("zero"), 2, 1)), io::to_json(supply_zero(2, 1)));
  EXPECT_THROW(io::supply_from_json(Json{{"kind", "passivity"}}, 2, 1), DimensionError);
  EXPECT_THROW(io::supply_from_json(Json{{"kind", "gain"}}, 1, 1), InputError);
  EXPECT_THROW(io::supply_from_json(Json{{"kind", "other"}}, 1, 1), InputError);
}

TEST(SupplyJson, ExplicitRoundTrip) {
  const SupplyRate s = supply_gain(2.0, 1, 1);
  EXPECT_EQ(io::to_json(io::supply_from_json(io::to_json(s), 1, 1)), io::to_json(s));
  EXPECT_THROW(io::supply_from_json(io::to_json(s), 2, 1), DimensionError);
}

TEST(LoopJson, RateMismatch) {
  Json j{{"sys1", io::to_json(examples::mass_spring_damper(8.0))},
         {"sys2", io::to_json(examples::mass_spring_damper(4.0))},
         {"supply1", "passivity"},
         {"supply2", "passivity"},
         {"lambda", Json::array({1.0, 1.5})}};
  EXPECT_THROW(io::loop_from_json(j), RateMismatch);
  j["lambda"] = Json::array({1.2, 1.2});
  EXPECT_DOUBLE_EQ(io::loop_from_json(j).lambda, 1.2);
}

TEST(PolicyJson, OverridesAndRejectsUnknown) {
  const NumericPolicy p = io::policy_from_json(Json{{"lmi_tol", 1e-6}, {"lmi_max_iter", 10}});
  EXPECT_EQ(p.lmi_tol, 1e-6);
  EXPECT_EQ(p.lmi_max_iter, 10);
  EXPECT_EQ(p.sym_tol, NumericPolicy{}.sym_tol);
  EXPECT_THROW(io::policy_from_json(Json{{"lmi_toll", 1e-6}}), InputError);
  EXPECT_THROW(io::policy_from_json(Json{{"lmi_tol", -1.0}}), InputError);
  EXPECT_THROW(io::policy_from_json(Json{{"lmi_max_iter", 1.5}}), InputError);
  EXPECT_EQ(io::to_json(io::policy_from_json(io::to_json(p))), io::to_json(p));
}

TEST(PolicyJson, FromEnvironment) {
  const std::string path = testing::TempDir() + "pdom_policy.json";
  {
    std::ofstream os(path);
    os << R"({"cycle_tol": 0.05})";
  }
  setenv("PDOM_NUMERIC_POLICY", path.c_str(), 1);
  EXPECT_EQ(io::policy_from_env().cycle_tol, 0.05);
  unsetenv("PDOM_NUMERIC_POLICY");
  EXPECT_EQ(io::policy_from_env().cycle_tol, NumericPolicy{}.cycle_tol);
}

TEST(Report, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xaf63dc4c8601ec8cULL), "af63dc4c8601ec8c");
}

TEST(Report, ExitCodeAndSummary) {
  RunReport r;
  r.command = "x";
  r.add("a", true, "ok");
  r.warn("b", "note");
  EXPECT_EQ(r.exit_code(), 0);
  r.add("c", false, "bad");
  EXPECT_EQ(r.exit_code(), 1);
  EXPECT_NE(r.summary().find("FAIL  c  bad"), std::string::npos);
  EXPECT_FALSE(r.to_json().contains("wall_time_s"));
  EXPECT_TRUE(r.to_json(true).contains("wall_time_s"));
}

TEST(Report, ReproduceIsDeterministic) {
  const auto a = reproduce::run(1, {}).to_json().dump();
  const auto b = reproduce::run(1, {}).to_json().dump();
  EXPECT_EQ(a, b);
  reproduce::Options other;
  other.seed = 7;
  EXPECT_NE(reproduce::run(1, other).to_json().dump(), a);
}
