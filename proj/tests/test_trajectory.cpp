#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles/oracles.hpp"
#include "test_support.hpp"
#include "tfv/error.hpp"
#include "tfv/testkit.hpp"

using namespace tfv;

namespace {

std::vector<Point2> random_walk(testkit::Xorshift64Star& rng, std::size_t n) {
  std::vector<Point2> pts;
  Point2 p{rng.uniform(-3, 3), rng.uniform(-3, 3)};
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back(p);
    p.x += rng.normal();
    p.y += rng.normal();
  }
  return pts;
}

std::vector<oracle::Pt> to_oracle(const std::vector<Point2>& pts) {
  std::vector<oracle::Pt> out;
  for (const auto& p : pts) out.push_back({p.x, p.y});
  return out;
}

Trajectory transform(const Trajectory& t, double th, double s, double dx, double dy) {
  Trajectory out = t;
  for (auto& tp : out.points) {
    const auto p = tp.p;
    tp.p = {s * (std::cos(th) * p.x - std::sin(th) * p.y) + dx, s * (std::sin(th) * p.x + std::cos(th) * p.y) + dy};
  }
  return out;
}

}  // namespace

TEST_CASE("build_trajectory orders frames and rejects unknown cases") {
  ProjectionResult r;
  r.id = "x";
  r.spec.channel = "pressure";
  for (std::uint32_t t : {7u, 2u, 9u, 0u, 1u, 3u, 8u, 4u, 6u, 5u})
    r.coords.emplace(FrameKey{"b", t}, Point2{double(t), -double(t)});
  r.coords.emplace(FrameKey{"a", 0}, Point2{1, 1});
  const auto t = build_trajectory(r, "b");
  REQUIRE(t.size() == 10);
  for (std::uint32_t i = 0; i < 10; ++i) CHECK(t.points[i].t_index == i);
  CHECK(build_trajectory(r, "a").size() == 1);
  CHECK_THROWS_AS(build_trajectory(r, "zz"), Error);
  CHECK_THROWS_AS(build_trajectory(r, "b", "OH"), Error);
}

TEST_CASE("convergence radius") {
  CHECK(convergence_radius(test::make_traj("c", std::vector<Point2>(8, {3, 4}))).radius == 0.0);

  const auto star = test::make_traj("s", {{9, 9}, {0, 0}, {2, 0}, {0, 2}, {-2, 0}, {0, -2}});
  const auto s = convergence_radius(star, 5);
  CHECK(s.tail_mean == Point2{0, 0});
  CHECK(std::abs(s.radius - 1.6) <= 1e-12);

  const auto short_traj = test::make_traj("t", {{0, 0}, {3, 0}, {0, 3}});
  const auto r3 = convergence_radius(short_traj, 5);
  const Point2 mean{1, 1};
  const double expected = (distance({0, 0}, mean) + distance({3, 0}, mean) + distance({0, 3}, mean)) / 3.0;
  CHECK(r3.radius == doctest::Approx(expected).epsilon(1e-14));
  CHECK(convergence_radius(test::make_traj("one", {{5, 5}})).radius == 0.0);
}

TEST_CASE("convergence radius is translation invariant and zero only for coincident tails") {
  testkit::Xorshift64Star rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = test::make_traj("r", random_walk(rng, 2 + rng.uniform_int(0, 10)));
    const auto moved = transform(t, 0.0, 1.0, rng.uniform(-50, 50), rng.uniform(-50, 50));
    const double a = convergence_radius(t).radius, b = convergence_radius(moved).radius;
    REQUIRE(std::abs(a - b) < 1e-9);
    REQUIRE(a > 0.0);
  }
}

TEST_CASE("variant comparison arithmetic") {
  const auto star = test::make_traj("a", {{0, 0}, {2, 0}, {0, 2}, {-2, 0}, {0, -2}});
  const auto half = transform(star, 0, 0.5, 0, 0);
  const std::vector<Trajectory> base{star}, focused{half};
  CHECK(compare_embedding_variants(base, base, 5) == 0.0);
  CHECK(compare_embedding_variants(focused, base, 5) == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(mean_convergence_radius(base, 5) == doctest::Approx(1.6));
  CHECK_THROWS_AS(compare_embedding_variants({}, base, 5), Error);
  const std::vector<Trajectory> other{test::make_traj("b", {{0, 0}})};
  try {
    compare_embedding_variants(other, base, 5);
    FAIL("expected mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CaseSetMismatch);
  }
}

TEST_CASE("dissimilarity of identical trajectories is zero along the diagonal") {
  testkit::Xorshift64Star rng(4);
  const auto t = test::make_traj("a", random_walk(rng, 7));
  const auto r = trajectory_dissimilarity(t, t);
  CHECK(r.value == 0.0);
  REQUIRE(r.path.size() == 7);
  for (std::uint32_t i = 0; i < 7; ++i) CHECK(r.path[i] == std::pair{i, i});
}

TEST_CASE("dissimilarity small worked example") {
  const auto a = test::make_traj("a", {{0, 0}, {1, 0}});
  const auto b = test::make_traj("b", {{0, 0}, {1, 0}, {2, 0}});
  const double expected = oracle::dtw_enumerate(to_oracle({{0, 0}, {1, 0}}), to_oracle({{0, 0}, {1, 0}, {2, 0}}));
  CHECK(expected == 0.5);
  const auto r = trajectory_dissimilarity(a, b);
  CHECK(r.value == expected);
  using P = std::pair<std::uint32_t, std::uint32_t>;
  CHECK(r.path == std::vector<P>{{0, 0}, {1, 1}, {1, 2}});
}

TEST_CASE("dissimilarity equals exhaustive path enumeration") {
  testkit::Xorshift64Star rng(123);
  for (int seed = 0; seed < 200; ++seed) {
    const auto pa = random_walk(rng, 2 + rng.uniform_int(0, 4));
    const auto pb = random_walk(rng, 2 + rng.uniform_int(0, 4));
    const auto a = test::make_traj("a", pa), b = test::make_traj("b", pb);
    const auto ab = trajectory_dissimilarity(a, b);
    const auto ba = trajectory_dissimilarity(b, a);
    REQUIRE(ab.value == oracle::dtw_enumerate(to_oracle(pa), to_oracle(pb)));
    REQUIRE(std::abs(ab.value - ba.value) <= 1e-9);
    REQUIRE(std::abs(path_cost(a, b, ab.path) - ab.value) <= 1e-9);
    REQUIRE(ab.path.front() == std::pair<std::uint32_t, std::uint32_t>{0, 0});
    REQUIRE(ab.path.back() == std::pair<std::uint32_t, std::uint32_t>(pa.size() - 1, pb.size() - 1));
    for (std::size_t i = 1; i < ab.path.size(); ++i) {
      const auto di = ab.path[i].first - ab.path[i - 1].first;
      const auto dj = ab.path[i].second - ab.path[i - 1].second;
      REQUIRE(di <= 1);
      REQUIRE(dj <= 1);
      REQUIRE(di + dj >= 1);
    }
  }
}

TEST_CASE("dissimilarity invariances") {
  testkit::Xorshift64Star rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = test::make_traj("a", random_walk(rng, 3 + rng.uniform_int(0, 20)));
    const auto b = test::make_traj("b", random_walk(rng, 3 + rng.uniform_int(0, 20)));
    const double base = trajectory_dissimilarity(a, b).value;
    const double th = rng.uniform(0, 2 * std::numbers::pi), dx = rng.uniform(-9, 9), dy = rng.uniform(-9, 9);
    const double rigid =
        trajectory_dissimilarity(transform(a, th, 1, dx, dy), transform(b, th, 1, dx, dy)).value;
    REQUIRE(std::abs(rigid - base) <= 1e-6 * base);
    const double s = rng.uniform(0.01, 100);
    const double scaled = trajectory_dissimilarity(transform(a, 0, s, 0, 0), transform(b, 0, s, 0, 0)).value;
    REQUIRE(std::abs(scaled - base) <= 1e-6 * base);
    REQUIRE(base >= 0.0);
  }
}

TEST_CASE("stationary frames hit the motion floor instead of dividing by zero") {
  const auto a = test::make_traj("a", {{0, 0}, {0, 0}, {0, 0}});
  const auto b = test::make_traj("b", {{1, 0}, {1, 0}});
  const auto r = trajectory_dissimilarity(a, b);
  CHECK(std::isfinite(r.value));
  CHECK(r.value == doctest::Approx(3.0 / kMotionFloor));
}

TEST_CASE("short trajectories are rejected") {
  const auto one = test::make_traj("a", {{0, 0}});
  const auto two = test::make_traj("b", {{0, 0}, {1, 1}});
  try {
    trajectory_dissimilarity(one, two);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TrajectoryTooShort);
  }
}

TEST_CASE("top_k_similar ranking") {
  const std::vector<Point2> a{{0, 0}, {1, 0}, {1, 1}, {2, 1}};
  const auto proj = test::make_projection(
      {{"A", a}, {"B", a}, {"C", {{50, 50}, {60, 50}, {60, 70}, {90, 90}}}, {"D", {{0, 0}}}});
  const auto top = top_k_similar(proj, "A", 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0] == SimilarCase{"B", 0.0});
  CHECK(top[1].case_id == "C");
  CHECK(top[1].value > 0.0);
  CHECK(top_k_similar(proj, "A", 10).size() == 2);  // D is too short, A is the target
  CHECK_THROWS_AS(top_k_similar(proj, "nope"), Error);
  CHECK_THROWS_AS(top_k_similar(proj, "D"), Error);
  CHECK_THROWS_AS(top_k_similar(proj, "A", 0), Error);
}

TEST_CASE("top_k_similar matches an exhaustive sort and uses the cache") {
  testkit::Xorshift64Star rng(55);
  std::map<std::string, std::vector<Point2>> cases;
  for (int c = 0; c < 10; ++c) cases["case" + std::to_string(c)] = random_walk(rng, 3 + rng.uniform_int(0, 5));
  const auto proj = test::make_projection(cases);
  DissimilarityCache cache;
  for (const auto& [target, pts] : cases) {
    std::vector<std::pair<double, std::string>> expected;
    for (const auto& [other, opts] : cases)
      if (other != target)
        expected.emplace_back(oracle::dtw_enumerate(to_oracle(pts), to_oracle(opts)), other);
    std::sort(expected.begin(), expected.end());
    const auto got = top_k_similar(proj, target, 6, &cache);
    REQUIRE(got.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
      REQUIRE(got[i].case_id == expected[i].second);
      REQUIRE(std::abs(got[i].value - expected[i].first) <= 1e-9 * std::max(1.0, expected[i].first));
    }
  }
  CHECK(cache.size() == 45);
}

TEST_CASE("similarity matrix is symmetric with a zero diagonal") {
  testkit::Xorshift64Star rng(9);
  const auto proj = test::make_projection(
      {{"a", random_walk(rng, 5)}, {"b", random_walk(rng, 6)}, {"c", random_walk(rng, 4)}, {"d", {{0, 0}}}});
  const auto m = similarity_matrix(proj);
  CHECK(m.case_ids == std::vector<std::string>{"a", "b", "c"});
  CHECK(m.excluded == std::vector<std::string>{"d"});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(m.at(i, i) == 0.0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(m.at(i, j) == m.at(j, i));
  }
  const auto csv = format_similarity_csv(m);
  CHECK(csv.rfind("case_id,a,b,c\n", 0) == 0);
}
