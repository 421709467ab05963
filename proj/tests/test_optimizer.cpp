#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pacnet/optimizer.hpp"
#include "support/oracles.hpp"

using namespace pacnet;

TEST_CASE("param bank registration and lookup") {
  ParamBank bank;
  Param* a = bank.add("layer.w", Tensor({2, 3}));
  Param* b = bank.add("layer.b", Tensor({3}));
  REQUIRE(bank.size() == 2);
  REQUIRE(bank.total_parameter_count() == 9);
  REQUIRE(bank.find("layer.w") == a);
  REQUIRE(bank.find("nope") == nullptr);
  REQUIRE(&bank.get("layer.b") == b);
  REQUIRE_THROWS_AS(bank.get("nope"), DataError);
  REQUIRE_THROWS_AS(bank.add("layer.w", Tensor({1})), DataError);

  a->grad.fill(2.0f);
  b->grad.fill(-1.0f);
  bank.zero_grad();
  for (std::int64_t i = 0; i < a->grad.size(); ++i)
    REQUIRE(a->grad[i] == 0.0f);
  for (std::int64_t i = 0; i < b->grad.size(); ++i)
    REQUIRE(b->grad[i] == 0.0f);
}

TEST_CASE("plain adaptive step matches the hand-computed update") {
  ParamBank bank;
  Tensor init({3});
  init[0] = 1.0f; init[1] = -2.0f; init[2] = 0.5f;
  Param* p = bank.add("w", init);
  p->grad[0] = 0.1f; p->grad[1] = -0.3f; p->grad[2] = 0.0f;

  OptimizerSpec spec;
  spec.learning_rate = 0.01;
  spec.decay_per_epoch = 1.0;
  spec.layerwise_trust_ratio = false;
  optimizer_step(bank, spec, 1);

  for (std::int64_t i = 0; i < 3; ++i) {
    const double g = static_cast<double>(i == 0 ? 0.1f : i == 1 ? -0.3f : 0.0f);
    const double m1 = (1.0 - spec.beta1) * g;
    const double m2 = (1.0 - spec.beta2) * g * g;
    const double bc1 = 1.0 - spec.beta1;
    const double bc2 = 1.0 - spec.beta2;
    const double u = (m1 / bc1) / (std::sqrt(m2 / bc2) + spec.epsilon);
    const double want = static_cast<double>(init[i]) - 0.01 * u;
    REQUIRE(p->value[i] == Catch::Approx(want).margin(1e-6));
    REQUIRE(p->m1[i] == Catch::Approx(m1).margin(1e-9));
    REQUIRE(p->m2[i] == Catch::Approx(m2).margin(1e-12));
  }
  // first-step bias correction makes the update ~sign(g), so entries moved
  // by about one learning rate
  REQUIRE(p->value[0] == Catch::Approx(1.0 - 0.01).epsilon(1e-3));
  REQUIRE(p->value[1] == Catch::Approx(-2.0 + 0.01).epsilon(1e-3));
  REQUIRE(p->value[2] == 0.5f);  // zero gradient, zero moments: unchanged
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  ParamBank bank;
  Tensor init({4});
  for (std::int64_t i = 0; i < 4; ++i) init[i] = static_cast<float>(i) - 1.5f;
  Param* p = bank.add("w", init);

  OptimizerSpec spec;
  for (int step = 1; step <= 5; ++step) optimizer_step(bank, spec, step);
  for (std::int64_t i = 0; i < 4; ++i) REQUIRE(p->value[i] == init[i]);
}

TEST_CASE("zero learning rate is a no-op on values but moments still move") {
  ParamBank bank;
  Tensor init({3});
  init[0] = 0.7f; init[1] = -0.1f; init[2] = 2.0f;
  Param* p = bank.add("w", init);
  p->grad.fill(0.25f);

  OptimizerSpec spec;
  spec.learning_rate = 0.0;
  optimizer_step(bank, spec, 1);
  for (std::int64_t i = 0; i < 3; ++i) REQUIRE(p->value[i] == init[i]);
  REQUIRE(p->m1[0] != 0.0f);
  REQUIRE(p->m2[0] != 0.0f);
}

TEST_CASE("layerwise trust ratio scales the step by |w|/|u|") {
  // two banks, identical except for the trust toggle
  auto build = [] {
    ParamBank bank;
    Tensor init({2});
    init[0] = 3.0f; init[1] = 4.0f;  // |w| = 5
    Param* p = bank.add("w", init);
    p->grad[0] = 0.5f;
    p->grad[1] = 0.0f;
    return bank;
  };

  ParamBank plain = build(), trusty = build();
  OptimizerSpec spec;
  spec.learning_rate = 0.001;
  spec.layerwise_trust_ratio = false;
  optimizer_step(plain, spec, 1);
  spec.layerwise_trust_ratio = true;
  optimizer_step(trusty, spec, 1);

  // reconstruct the raw update from the untrusted run
  const double u0 = (3.0 - static_cast<double>(plain.entry(0).value[0])) /
                    0.001;
  const double u1 = (4.0 - static_cast<double>(plain.entry(0).value[1])) /
                    0.001;
  const double trust = 5.0 / std::sqrt(u0 * u0 + u1 * u1);
  const double want0 = 3.0 - 0.001 * trust * u0;
  const double want1 = 4.0 - 0.001 * trust * u1;
  REQUIRE(trusty.entry(0).value[0] == Catch::Approx(want0).margin(1e-6));
  REQUIRE(trusty.entry(0).value[1] == Catch::Approx(want1).margin(1e-6));
}

TEST_CASE("trust ratio guards degenerate norms") {
  OptimizerSpec spec;
  spec.learning_rate = 0.1;
  spec.layerwise_trust_ratio = true;

  // all-zero parameter tensor: |w| = 0, trust falls back to 1
  ParamBank bank;
  Param* p = bank.add("w", Tensor({2}));
  p->grad.fill(1.0f);
  optimizer_step(bank, spec, 1);
  REQUIRE(p->value.all_finite());
  REQUIRE(p->value[0] != 0.0f);  // the step still happened
}

TEST_CASE("per-epoch decay shrinks the effective learning rate") {
  auto run = [](std::int64_t epoch) {
    ParamBank bank;
    Tensor init({1});
    init[0] = 1.0f;
    Param* p = bank.add("w", init);
    p->grad[0] = 1.0f;
    OptimizerSpec spec;
    spec.learning_rate = 0.1;
    spec.decay_per_epoch = 0.5;
    spec.layerwise_trust_ratio = false;
    optimizer_step(bank, spec, 1, epoch);
    return 1.0 - static_cast<double>(p->value[0]);  // realized step size
  };
  const double step0 = run(0), step2 = run(2);
  REQUIRE(step0 == Catch::Approx(0.1).epsilon(1e-4));
  REQUIRE(step2 == Catch::Approx(0.025).epsilon(1e-4));
}

TEST_CASE("non-finite gradients reject the step before any mutation") {
  ParamBank bank;
  Tensor init({2});
  init[0] = 1.0f; init[1] = 2.0f;
  Param* healthy = bank.add("a", init);
  Param* poisoned = bank.add("b", Tensor({2}, 3.0f));
  healthy->grad.fill(0.5f);
  poisoned->grad[0] = std::numeric_limits<float>::quiet_NaN();

  OptimizerSpec spec;
  REQUIRE_THROWS_AS(optimizer_step(bank, spec, 1), NumericError);
  // nothing moved, including the healthy entry and all moment buffers
  REQUIRE(healthy->value[0] == 1.0f);
  REQUIRE(healthy->value[1] == 2.0f);
  REQUIRE(healthy->m1[0] == 0.0f);
  REQUIRE(healthy->m2[0] == 0.0f);
  REQUIRE(poisoned->value[0] == 3.0f);

  poisoned->grad[0] = std::numeric_limits<float>::infinity();
  REQUIRE_THROWS_AS(optimizer_step(bank, spec, 1), NumericError);
  REQUIRE(healthy->m1[0] == 0.0f);
}

TEST_CASE("optimizer spec validation") {
  ParamBank bank;
  bank.add("w", Tensor({1}, 1.0f));
  OptimizerSpec spec;

  spec.learning_rate = -1e-3;
  REQUIRE_THROWS_AS(optimizer_step(bank, spec, 1), DataError);
  spec.learning_rate = 1e-3;

  spec.beta1 = 1.0;
  REQUIRE_THROWS_AS(optimizer_step(bank, spec, 1), DataError);
  spec.beta1 = 0.9;

  spec.decay_per_epoch = 0.0;
  REQUIRE_THROWS_AS(optimizer_step(bank, spec, 1), DataError);
  spec.decay_per_epoch = 0.999;

  REQUIRE_THROWS_AS(optimizer_step(bank, spec, 0), DataError);
  REQUIRE_NOTHROW(optimizer_step(bank, spec, 1));
}
