#include <gtest/gtest.h>

#include "gradkit/grad_check.hpp"
#include "gradkit/ops.hpp"

namespace gk = gradkit;
using gk::Tape;
using gk::Tensor;
using gk::Var;

TEST(GradCheckTest, LinearFunctionIsExact) {
  auto f = [](Tape& tape, std::span<const Var> in) {
    Var w = tape.constant(Tensor::from_rows({{0.5}, {-1.5}, {2.0}}));
    return gk::sum(gk::matmul(in[0], w));
  };
  auto result = gk::grad_check(f, {Tensor::from_rows({{1, 2, 3}, {-4, 0.5, 6}})});
  EXPECT_LT(result.max_relative_error, 1e-10);
}

TEST(GradCheckTest, SigmoidComposition) {
  auto f = [](Tape&, std::span<const Var> in) {
    return gk::sum(gk::sigmoid(gk::mul(gk::sigmoid(in[0]), in[1])));
  };
  auto result = gk::grad_check(f, {Tensor::row({0.3, -1.2, 2.0}), Tensor::row({1.5, 0.7, -0.4})});
  EXPECT_LT(result.max_relative_error, 1e-6);
  ASSERT_EQ(result.per_input.size(), 2u);
}

TEST(GradCheckTest, DetectsCorruptedGradient) {
  // A cube op whose recorded backward is off by a factor of two.
  auto f = [](Tape& tape, std::span<const Var> in) {
    Var x = in[0];
    Tensor y = x.value();
    for (double& v : y.values()) v = v * v * v;
    Var cube = tape.record("bad_cube", std::move(y), {x}, [x](Tape& t, const Tensor& g) {
      Tensor& buf = t.grad_buffer(x);
      for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i] * 6.0 * x.value()[i] * x.value()[i];
    });
    return gk::sum(cube);
  };
  auto result = gk::grad_check(f, {Tensor::row({0.5, -1.0})});
  EXPECT_GT(result.max_relative_error, 1e-2);
}

TEST(GradCheckTest, ParamStoreVariantRestoresValues) {
  gk::ParamStore store;
  store.add("a", Tensor::row({0.2, -0.3}), gk::ParamGroup::kIntraShared);
  store.add("b", Tensor::row({1.1, 0.4}), gk::ParamGroup::kInter);
  store.add("unused", Tensor::row({9.0}), gk::ParamGroup::kInter);
  const Tensor a = store[0].value;
  auto loss = [&store](Tape& tape) {
    Var x = tape.param(store, "a");
    Var y = tape.param(store, "b");
    return gk::sum(gk::tanh(gk::mul(x, y))) + gk::sum(gk::sigmoid(x));
  };
  auto result = gk::grad_check_params(store, loss);
  EXPECT_LT(result.max_relative_error, 1e-6);
  EXPECT_EQ(result.per_input[2], 0.0);
  EXPECT_EQ(store[0].value, a);
}
