#include <doctest.h>

#include <cmath>
#include <vector>

#include "br/backbone.hpp"
#include "br/blob.hpp"
#include "br/error.hpp"
#include "br/reghead.hpp"
#include "br/rng.hpp"

using namespace br;

namespace {

HiddenStates states(std::size_t T, std::size_t d, std::vector<float> values, std::vector<std::uint8_t> mask) {
  HiddenStates hs;
  hs.length = T;
  hs.dim = d;
  hs.values = std::move(values);
  hs.mask = std::move(mask);
  return hs;
}

double loss_at(std::span<const double> x, const HeadParams& p, double y, std::span<const double> scale) {
  const double r = head_forward_with_mask(x, p, scale).prediction.rating;
  return (r - y) * (r - y);
}

}  // namespace

TEST_CASE("masked mean pooling") {
  const auto same = states(3, 2, {1, 2, 1, 2, 1, 2}, {1, 1, 1});
  CHECK(masked_mean_pool(same) == std::vector<double>{1, 2});

  const auto one = states(3, 2, {1, 2, 3, 4, 5, 6}, {0, 1, 0});
  CHECK(masked_mean_pool(one) == std::vector<double>{3, 4});

  const auto ex = states(3, 2, {1, 2, 3, 4, 5, 6}, {1, 1, 0});
  CHECK(masked_mean_pool(ex) == std::vector<double>{2, 3});

  const auto none = states(2, 2, {1, 2, 3, 4}, {0, 0});
  CHECK_THROWS_WITH_AS(masked_mean_pool(none), doctest::Contains("no valid tokens"), Error);
}

TEST_CASE("scaled sigmoid") {
  CHECK(scaled_sigmoid(0.0) == 3.0);
  CHECK(scaled_sigmoid(std::log(3.0)) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(scaled_sigmoid(1000.0) < 5.0);
  CHECK(scaled_sigmoid(-1000.0) > 1.0);
}

TEST_CASE("head forward examples") {
  auto p = HeadParams::zeros(8);
  std::vector<double> x(8, 0.3);
  CHECK(head_forward(x, p, HeadMode::eval).prediction.rating == 3.0);
  p.b2 = std::log(3.0);
  CHECK(head_forward(x, p, HeadMode::eval).prediction.rating == doctest::Approx(4.0));

  const auto r = HeadParams::random(8, 3);
  const double a = head_forward(x, r, HeadMode::eval).prediction.rating;
  CHECK(head_forward(x, r, HeadMode::eval).prediction.rating == a);

  x[2] = std::nan("");
  CHECK_THROWS_WITH_AS(head_forward(x, r, HeadMode::eval), doctest::Contains("non-finite activation"), Error);
}

TEST_CASE("train-mode dropout is inverted and seeded") {
  const auto p = HeadParams::random(16, 5, 0.5);
  SplitMix64 r1(1), r2(1);
  std::vector<double> x(16, 0.2);
  const auto a = head_forward(x, p, HeadMode::train, &r1);
  const auto b = head_forward(x, p, HeadMode::train, &r2);
  CHECK(a.prediction.rating == b.prediction.rating);
  CHECK(a.dropout_scale.size() == 8);
  for (double s : a.dropout_scale) CHECK((s == 0.0 || s == 2.0));
}

TEST_CASE("zero error gives zero gradients") {
  const auto p = HeadParams::random(8, 9);
  std::vector<double> x(8, 0.1);
  const std::vector<double> keep(4, 1.0);
  const double y = head_forward_with_mask(x, p, keep).prediction.rating;
  const auto g = head_backward(x, p, y, keep);
  for (double v : g.params.w1) CHECK(v == 0.0);
  for (double v : g.params.w2) CHECK(v == 0.0);
  CHECK(g.params.b2 == 0.0);
  for (double v : g.d_pool) CHECK(v == 0.0);
}

TEST_CASE("analytic gradients match central differences") {
  SplitMix64 rng(2024);
  const double h = 1e-4;
  for (int inst = 0; inst < 20; ++inst) {
    auto p = HeadParams::random(8, rng.next(), 0.25);
    std::vector<double> x(8);
    for (auto& v : x) v = rng.uniform(-1, 1);
    const auto scale = sample_dropout_scale(4, 0.25, rng);
    const double y = rng.uniform(1, 5);
    const auto g = head_backward(x, p, y, scale);
    auto check = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + h;
      const double up = loss_at(x, p, y, scale);
      param = saved - h;
      const double dn = loss_at(x, p, y, scale);
      param = saved;
      const double fd = (up - dn) / (2 * h);
      CHECK(analytic == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
    };
    for (std::size_t i = 0; i < p.w1.size(); ++i) check(p.w1[i], g.params.w1[i]);
    for (std::size_t i = 0; i < p.b1.size(); ++i) check(p.b1[i], g.params.b1[i]);
    for (std::size_t i = 0; i < p.w2.size(); ++i) check(p.w2[i], g.params.w2[i]);
    check(p.b2, g.params.b2);
    for (std::size_t i = 0; i < x.size(); ++i) check(x[i], g.d_pool[i]);
  }
}

TEST_CASE("head parameter count") {
  CHECK(HeadParams::zeros(576).parameter_count() == 166465);
  CHECK(HeadParams::zeros(8).parameter_count() == 8 * 4 + 4 + 4 + 1);
}

TEST_CASE("head blob round trip is exact") {
  const auto p = HeadParams::random(10, 77, 0.1);
  const auto back = HeadParams::from_blob(Blob::deserialize(p.to_blob().serialize()));
  CHECK(back == p);
}

TEST_CASE("head validation") {
  CHECK_THROWS_AS(HeadParams::zeros(7), Error);
  auto p = HeadParams::zeros(4);
  p.w1.pop_back();
  CHECK_THROWS_AS(p.validate(), Error);
}
