#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "nuig/weights_io.hpp"
#include "test_support.hpp"

namespace nuig {
namespace {

std::vector<BuiltinModel> sample_models(std::mt19937_64& rng) {
  std::vector<BuiltinModel> out;
  out.push_back(testing::random_linear(rng, {2, 2}, 3));
  out.push_back(LogisticScalar({3}, testing::random_values(rng, 3), 0.1 / 3.0, 7.25));
  out.push_back(SharpSigmoid1D(300.0, 0.2));
  out.push_back(testing::random_mlp(rng, {4}, 5, 3));
  out.push_back(AffineProbability({2}, {1.0 / 7.0, -2.0 / 9.0}, 0.5));
  return out;
}

TEST(WeightsIo, RoundTripIsBitExact) {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 20; ++round) {
    for (const BuiltinModel& m : sample_models(rng)) {
      const std::string text = model_to_string(m);
      std::istringstream is(text);
      const BuiltinModel back = read_model(is);
      ASSERT_EQ(back.index(), m.index());
      // writing again reproduces the same bytes only if every double survived exactly
      EXPECT_EQ(model_to_string(back), text);
    }
  }
}

TEST(WeightsIo, LoadedModelEvaluatesLikeTheOriginal) {
  std::mt19937_64 rng(4);
  for (const BuiltinModel& m : sample_models(rng)) {
    std::istringstream is(model_to_string(m));
    const BuiltinModel back = read_model(is);
    const DifferentiableModel& a = as_model(m);
    const DifferentiableModel& b = as_model(back);
    for (int i = 0; i < 10; ++i) {
      const Tensor x = testing::random_tensor(rng, a.input_shape(), 0.0, 0.5);
      EXPECT_EQ(a.forward(x, {0}), b.forward(x, {0})) << a.name();
    }
  }
}

TEST(WeightsIo, ParsesDocumentedLayout) {
  std::istringstream is("LogisticScalar\n2\n1 -1\n0 1\n");
  const BuiltinModel m = read_model(is);
  const auto& l = std::get<LogisticScalar>(m);
  EXPECT_EQ(l.input_shape(), (Shape{2}));
  EXPECT_EQ(l.weights()[0], 1.0);
  EXPECT_EQ(l.weights()[1], -1.0);
  EXPECT_EQ(l.bias(), 0.0);
  EXPECT_EQ(l.gain(), 1.0);
}

ErrorKind parse_kind(const std::string& text, std::string* message = nullptr) {
  std::istringstream is(text);
  try {
    read_model(is, "w.txt");
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  ADD_FAILURE() << "expected an error for: " << text;
  return ErrorKind::measurement;
}

TEST(WeightsIo, MismatchedWeightCountIsParseError) {
  std::string msg;
  EXPECT_EQ(parse_kind("LinearSoftmax\n2 3\n1 2 3 4 5 6 7\n", &msg), ErrorKind::parse);
  EXPECT_NE(msg.find("expects 8 parameters, found 7"), std::string::npos) << msg;
}

TEST(WeightsIo, BadFieldReportsLineAndField) {
  std::string msg;
  EXPECT_EQ(parse_kind("SharpSigmoid1D\n1\n300\n0.2 abc\n", &msg), ErrorKind::parse);
  EXPECT_NE(msg.find("w.txt:4, field 2"), std::string::npos) << msg;
}

TEST(WeightsIo, UnknownVariantIsRejected) {
  std::string msg;
  EXPECT_EQ(parse_kind("Inception\n3\n1 2 3\n", &msg), ErrorKind::parse);
  EXPECT_NE(msg.find("unknown model variant 'Inception'"), std::string::npos) << msg;
}

TEST(WeightsIo, BadDimensionLineIsRejected) {
  EXPECT_EQ(parse_kind("MLP2\n4\n1 2\n"), ErrorKind::parse);
  EXPECT_EQ(parse_kind("AffineProbability\n0\n1\n"), ErrorKind::parse);
  EXPECT_EQ(parse_kind(""), ErrorKind::parse);
}

TEST(WeightsIo, MissingFileIsConfigError) {
  try {
    load_model("/nonexistent/weights.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

}  // namespace
}  // namespace nuig
