#include <gtest/gtest.h>

#include <cmath>

#include "gradkit/param_store.hpp"
#include "gradkit/tensor.hpp"

using gradkit::Tensor;

TEST(TensorTest, MatrixViewOfRanks) {
  EXPECT_EQ(Tensor({5}).rows(), 1u);
  EXPECT_EQ(Tensor({5}).cols(), 5u);
  EXPECT_EQ(Tensor({3, 4}).rows(), 3u);
  EXPECT_EQ(Tensor({3, 4}).cols(), 4u);
  EXPECT_THROW(Tensor({2, 2, 2}).rows(), gradkit::ShapeError);
}

TEST(TensorTest, FromRowsAndIndexing) {
  Tensor t = Tensor::from_rows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(t.shape(), (gradkit::Shape{2, 3}));
  EXPECT_EQ(t(1, 2), 6.0);
  EXPECT_THROW(Tensor::from_rows({{1, 2}, {3}}), gradkit::ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), gradkit::ShapeError);
}

TEST(TensorTest, ItemRequiresScalar) {
  EXPECT_EQ(Tensor::scalar(2.5).item(), 2.5);
  EXPECT_THROW(Tensor({2}).item(), gradkit::ShapeError);
}

TEST(TensorTest, FiniteCheck) {
  Tensor t = Tensor::row({1, 2});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}

TEST(ParamStoreTest, DuplicateNameRejected) {
  gradkit::ParamStore store;
  store.add("w", Tensor({2, 2}), gradkit::ParamGroup::kInter);
  EXPECT_THROW(store.add("w", Tensor({1}), gradkit::ParamGroup::kInter), std::invalid_argument);
  EXPECT_EQ(store.at("w").first_moment.shape(), store.at("w").value.shape());
  EXPECT_THROW(store.index_of("missing"), std::out_of_range);
}

TEST(ParamStoreTest, InitIsDeterministicPerSeed) {
  std::vector<gradkit::ParamSpec> specs = {{"a", {3, 4}, gradkit::ParamGroup::kIntraShared},
                                           {"b", {1, 7}, gradkit::ParamGroup::kInter}};
  auto s1 = gradkit::init_params(specs, 17);
  auto s2 = gradkit::init_params(specs, 17);
  auto s3 = gradkit::init_params(specs, 18);
  ASSERT_EQ(s1.size(), 2u);
  for (std::size_t i = 0; i < s1.size(); ++i) {
    EXPECT_EQ(s1[i].value, s2[i].value);
    EXPECT_EQ(s1[i].group, specs[i].group);
  }
  EXPECT_FALSE(s1[0].value == s3[0].value);
}

TEST(ParamStoreTest, InitSampleStddev) {
  std::vector<gradkit::ParamSpec> specs = {{"w", {100, 100}, gradkit::ParamGroup::kIntraShared}};
  auto store = gradkit::init_params(specs, 3);
  const auto& v = store[0].value;
  double mean = 0.0;
  for (double x : v.values()) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v.values()) var += (x - mean) * (x - mean);
  const double stddev = std::sqrt(var / static_cast<double>(v.size() - 1));
  EXPECT_NEAR(stddev, 0.1, 0.005);
  EXPECT_NEAR(mean, 0.0, 0.005);
}

TEST(ParamStoreTest, EmptySpecGivesEmptyStore) {
  auto store = gradkit::init_params({}, 1);
  EXPECT_TRUE(store.empty());
}

TEST(ParamStoreTest, DuplicateSpecRejected) {
  std::vector<gradkit::ParamSpec> specs = {{"w", {1}, gradkit::ParamGroup::kInter},
                                           {"w", {2}, gradkit::ParamGroup::kInter}};
  EXPECT_THROW(gradkit::init_params(specs, 1), std::invalid_argument);
}
