#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "inrlab/optim.hpp"

using namespace inrlab;

TEST(Adam, FirstStepHandCase) {
  Parameter w("w", 1, 1);
  w.values[0] = 1.0;
  w.grads[0] = 0.5;
  Adam adam;
  std::vector<Parameter*> ps = {&w};
  adam.step(ps);
  EXPECT_NEAR(w.values[0], 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8), 1e-12);
  EXPECT_EQ(adam.step_count(), 1u);
}

// Two steps worked by hand with beta1 = 0.9, beta2 = 0.999.
TEST(Adam, SecondStepHandCase) {
  Parameter w("w", 1, 1);
  w.values[0] = 0.0;
  Adam adam;
  std::vector<Parameter*> ps = {&w};
  w.grads[0] = 1.0;
  adam.step(ps);
  w.grads[0] = -2.0;
  adam.step(ps);
  const double m = 0.9 * 0.1 + 0.1 * -2.0;             // -0.11
  const double v = 0.999 * 0.001 + 0.001 * 4.0;        // 0.004999
  const double m_hat = m / (1.0 - 0.81), v_hat = v / (1.0 - 0.998001);
  const double w1 = -1e-3 * 1.0 / (1.0 + 1e-8);
  const double expected = w1 - 1e-3 * m_hat / (std::sqrt(v_hat) + 1e-8);
  EXPECT_NEAR(w.values[0], expected, 1e-15);
}

// The first update moves every coordinate by lr regardless of gradient scale,
// as long as the gradient dwarfs eps.
TEST(Adam, FirstStepIsScaleInvariant) {
  for (double scale : {1.0, 1e3, 1e6}) {
    Parameter w("w", 1, 3);
    w.grads = {scale, -2.0 * scale, 0.5 * scale};
    Adam adam;
    std::vector<Parameter*> ps = {&w};
    adam.step(ps);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(std::abs(w.values[i]), 1e-3, 1e-3 * 1e-6);
  }
}

TEST(Adam, TableGroupUsesItsOwnRate) {
  Parameter net("net", 1, 1), table("table", 1, 1, ParamGroup::table);
  net.grads[0] = table.grads[0] = 1.0;
  Adam adam;
  std::vector<Parameter*> ps = {&net, &table};
  adam.step(ps);
  EXPECT_NEAR(net.values[0], -1e-3, 1e-10);
  EXPECT_NEAR(table.values[0], -1e-2, 1e-9);
}

TEST(Adam, GradientsAreNotCleared) {
  Parameter w("w", 1, 2);
  w.grads = {0.1, 0.2};
  Adam adam;
  std::vector<Parameter*> ps = {&w};
  adam.step(ps);
  EXPECT_EQ(w.grads, (Buffer{0.1, 0.2}));
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  Parameter w("trunk.0.weight", 1, 1);
  w.grads[0] = std::nan("");
  Adam adam;
  std::vector<Parameter*> ps = {&w};
  try {
    adam.step(ps);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("trunk.0.weight"), std::string::npos);
  }
  EXPECT_EQ(w.values[0], 0.0);
}

TEST(Adam, CosineScheduleEndpoints) {
  AdamOptions o;
  o.cosine_decay = true;
  o.decay_steps = 10;
  Adam adam(o);
  EXPECT_DOUBLE_EQ(adam.learning_rate(ParamGroup::network), 1e-3);
  Parameter w("w", 1, 1);
  std::vector<Parameter*> ps = {&w};
  for (int i = 0; i < 5; ++i) adam.step(ps);
  EXPECT_NEAR(adam.learning_rate(ParamGroup::network), 0.5e-3, 1e-15);
  for (int i = 0; i < 5; ++i) adam.step(ps);
  EXPECT_NEAR(adam.learning_rate(ParamGroup::table), 0.0, 1e-18);
}

TEST(Adam, MinimizesQuadratic) {
  Parameter w("w", 1, 2);
  w.values = {3.0, -4.0};
  AdamOptions o;
  o.lr = 0.05;
  Adam adam(o);
  std::vector<Parameter*> ps = {&w};
  for (int i = 0; i < 2000; ++i) {
    for (std::size_t k = 0; k < 2; ++k) w.grads[k] = 2.0 * w.values[k];
    adam.step(ps);
  }
  EXPECT_NEAR(w.values[0], 0.0, 1e-3);
  EXPECT_NEAR(w.values[1], 0.0, 1e-3);
}
