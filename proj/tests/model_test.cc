// Copyright 2026 The kpricing Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kpricing/model.h"

#include <cmath>
#include <random>
#include <string>

#include "gtest/gtest.h"
#include "test_util.h"

namespace kpricing {
namespace {

using ::kpricing::testing::TwoProductInstance;
using ::kpricing::testing::TwoProductModel;
using ::kpricing::testing::Vec;

bool MessageHas(const absl::Status& s, const std::string& needle) {
  return std::string(s.message()).find(needle) != std::string::npos;
}

TEST(ValidateModel, AcceptsTwoProductModel) {
  EXPECT_TRUE(ValidateModel(TwoProductModel()).ok());
}

TEST(ValidateModel, TwoProductSymmetricSpectrum) {
  // B + B^T = [[-1, -0.4], [-0.4, -1]]: eigenvalues -1 -+ 0.4.
  EXPECT_NEAR(MaxSymmetricEigenvalue(TwoProductModel().B), -0.6, 1e-12);
}

TEST(ValidateModel, AcceptsNegativeIdentity) {
  DemandModel model{Vec({1, 1}), -Matrix::Identity(2, 2), 0.0};
  EXPECT_TRUE(ValidateModel(model).ok());
}

TEST(ValidateModel, RejectsSkewSymmetric) {
  Matrix B(2, 2);
  B << 0, 1, -1, 0;
  absl::Status s = ValidateModel({Vec({1, 1}), B, 0.0});
  ASSERT_FALSE(s.ok());
  EXPECT_TRUE(MessageHas(s, "NotNegativeDefinite")) << s;
}

TEST(ValidateModel, RejectsSingular) {
  Matrix B(2, 2);
  B << -1, -1, -1, -1;
  absl::Status s = ValidateModel({Vec({1, 1}), B, 0.0});
  ASSERT_FALSE(s.ok());
  EXPECT_TRUE(MessageHas(s, "Singular")) << s;
}

TEST(ValidateModel, RejectsIndefinite) {
  Matrix B(2, 2);
  B << -1, 0, 0, 0.5;
  absl::Status s = ValidateModel({Vec({1, 1}), B, 0.0});
  EXPECT_TRUE(MessageHas(s, "NotNegativeDefinite")) << s;
}

TEST(ValidateModel, RejectsNegativeSigmaAndShapeMismatch) {
  DemandModel model = TwoProductModel();
  model.sigma = -1.0;
  EXPECT_FALSE(ValidateModel(model).ok());
  model = TwoProductModel();
  model.B = Matrix::Identity(3, 3) * -1.0;
  EXPECT_FALSE(ValidateModel(model).ok());
}

TEST(ValidateInstance, ChecksDomain) {
  Instance ok = TwoProductInstance(10);
  EXPECT_TRUE(ValidateInstance(ok).ok());

  Instance bad = ok;
  bad.A(0, 0) = -1.0;
  EXPECT_FALSE(ValidateInstance(bad).ok());
  bad = ok;
  bad.capacity(0) = -1.0;
  EXPECT_FALSE(ValidateInstance(bad).ok());
  bad = ok;
  bad.horizon = 0;
  EXPECT_FALSE(ValidateInstance(bad).ok());
  bad = ok;
  bad.lower = bad.upper;
  EXPECT_FALSE(ValidateInstance(bad).ok());
  bad = ok;
  bad.prior = InformedPrior{Vec({30, 1}), Vec({1, 1}), 0.0};
  EXPECT_FALSE(ValidateInstance(bad).ok());
}

TEST(MeanDemand, Examples) {
  const DemandModel model = TwoProductModel();
  EXPECT_TRUE(MeanDemand(model, Vec({0, 0})).isApprox(Vec({8, 6})));
  // 8 - 10/3 - 2/3 = 4 and 6 - 4/3 - 5/3 = 3.
  Vector d = MeanDemand(model, Vec({20.0 / 3.0, 10.0 / 3.0}));
  EXPECT_NEAR(d(0), 4.0, 1e-14);
  EXPECT_NEAR(d(1), 3.0, 1e-14);
  DemandModel unit{Vec({1, 1}), -Matrix::Identity(2, 2), 0.0};
  EXPECT_EQ(MeanDemand(unit, Vec({1, 1})), Vec({0, 0}));
}

TEST(InvertDemand, Examples) {
  const DemandModel model = TwoProductModel();
  absl::StatusOr<Vector> p = InvertDemand(model, Vec({4, 3}));
  ASSERT_TRUE(p.ok());
  EXPECT_NEAR((*p)(0), 20.0 / 3.0, 1e-12);
  EXPECT_NEAR((*p)(1), 10.0 / 3.0, 1e-12);

  DemandModel unit{Vec({1, 1}), -Matrix::Identity(2, 2), 0.0};
  absl::StatusOr<Vector> q = InvertDemand(unit, Vec({0, 0}));
  ASSERT_TRUE(q.ok());
  EXPECT_TRUE(q->isApprox(Vec({1, 1})));

  DemandModel singular{Vec({1, 1}), Matrix::Zero(2, 2), 0.0};
  EXPECT_FALSE(InvertDemand(singular, Vec({0, 0})).ok());
}

TEST(InvertDemandProperty, RoundTrip) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 4;
    DemandModel model;
    model.alpha = Vector::NullaryExpr(n, [&] { return u(gen); });
    model.B = testing::RandomConcaveB(n, gen);
    const Vector p = Vector::NullaryExpr(n, [&] { return u(gen); });
    absl::StatusOr<Vector> back = InvertDemand(model, MeanDemand(model, p));
    ASSERT_TRUE(back.ok());
    EXPECT_LT((*back - p).lpNorm<Eigen::Infinity>(), 1e-9);
  }
}

TEST(UnconstrainedOptimum, TwoProductClosedForm) {
  absl::StatusOr<UnconstrainedOptimum> opt =
      ComputeUnconstrainedOptimum(TwoProductModel());
  ASSERT_TRUE(opt.ok());
  // Independent oracle: stationarity (B + B^T) p = -alpha solved by Cramer's
  // rule on [[-1, -0.4], [-0.4, -1]] p = -(8, 6).
  const double a = -1.0, b = -0.4, c = -0.4, d = -1.0;
  const double det = a * d - b * c;
  const double p1 = (-8.0 * d - b * -6.0) / det;
  const double p2 = (a * -6.0 - -8.0 * c) / det;
  EXPECT_NEAR(p1, 20.0 / 3.0, 1e-12);
  EXPECT_NEAR(p2, 10.0 / 3.0, 1e-12);
  EXPECT_NEAR(opt->price(0), p1, 1e-8);
  EXPECT_NEAR(opt->price(1), p2, 1e-8);
  EXPECT_NEAR(opt->demand(0), 4.0, 1e-8);
  EXPECT_NEAR(opt->demand(1), 3.0, 1e-8);
  EXPECT_NEAR(opt->revenue, 110.0 / 3.0, 1e-8);
}

TEST(UnconstrainedOptimumProperty, IsStationaryAndMaximal) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 4;
    DemandModel model;
    model.alpha = Vector::NullaryExpr(n, [&] { return u(gen); });
    model.B = testing::RandomConcaveB(n, gen);
    absl::StatusOr<UnconstrainedOptimum> opt =
        ComputeUnconstrainedOptimum(model);
    ASSERT_TRUE(opt.ok());
    const Vector grad =
        model.alpha + (model.B + model.B.transpose()) * opt->price;
    EXPECT_LT(grad.norm(), 1e-9);
    for (int k = 0; k < 10; ++k) {
      const Vector q =
          opt->price + Vector::NullaryExpr(n, [&] { return u(gen); });
      EXPECT_LE(Revenue(model, q), opt->revenue + 1e-9);
    }
  }
}

TEST(SampleNoise, ZeroSigmaConsumesNoRandomness) {
  Rng a(3);
  Rng b(3);
  EXPECT_EQ(SampleNoise(a, TwoProductModel(0.0)), Vec({0, 0}));
  EXPECT_EQ(a(), b());
}

TEST(SampleNoise, GaussianMoments) {
  Rng rng(17);
  const DemandModel model = TwoProductModel(2.0);
  const int N = 200000;
  Vector sum = Vector::Zero(2);
  Vector sq = Vector::Zero(2);
  for (int i = 0; i < N; ++i) {
    const Vector e = SampleNoise(rng, model);
    sum += e;
    sq += e.cwiseProduct(e);
  }
  // Mean within 5 standard errors; variance within 2%.
  EXPECT_LT((sum / N).cwiseAbs().maxCoeff(), 5.0 * 2.0 / std::sqrt(N));
  EXPECT_NEAR(sq(0) / N, 4.0, 0.08);
  EXPECT_NEAR(sq(1) / N, 4.0, 0.08);
}

TEST(SampleNoise, UniformSupportAndVariance) {
  Rng rng(19);
  DemandModel model = TwoProductModel(1.5);
  model.noise = NoiseFamily::kUniform;
  const double half_width = std::sqrt(3.0) * 1.5;
  const int N = 200000;
  double sq = 0.0;
  for (int i = 0; i < N; ++i) {
    const Vector e = SampleNoise(rng, model);
    ASSERT_LE(e.cwiseAbs().maxCoeff(), half_width);
    sq += e(0) * e(0);
  }
  EXPECT_NEAR(sq / N, 2.25, 0.05);
}

}  // namespace
}  // namespace kpricing
