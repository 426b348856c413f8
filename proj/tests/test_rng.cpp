#include <cmath>

#include "doctest.h"
#include "sepic/rng.hpp"

using namespace sepic;

TEST_CASE("counter rng is a pure function of its key") {
  const auto a = rng::normal_pair(rng::combine(42, 7, 3, 1));
  const auto b = rng::normal_pair(rng::combine(42, 7, 3, 1));
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  const auto c = rng::normal_pair(rng::combine(42, 7, 3, 2));
  CHECK(a.first != c.first);
}

TEST_CASE("domains separate streams that share a seed") {
  const auto env = rng::derive(99, rng::Domain::environment, 5);
  const auto ctl = rng::derive(99, rng::Domain::controller, 5);
  CHECK(env != ctl);
  CHECK(rng::uniform(env) != rng::uniform(ctl));
}

TEST_CASE("normal draws have roughly standard moments") {
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; i += 2) {
    const auto [a, b] = rng::normal_pair(rng::combine(123, i));
    sum += a + b;
    sum2 += a * a + b * b;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("uniform draws stay inside the unit interval") {
  for (int i = 0; i < 10000; ++i) {
    const double u = rng::uniform(rng::combine(7, i));
    const double v = rng::uniform_open(rng::combine(11, i));
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}
