#include "lord/sphere.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "lord/errors.hpp"
#include "lord/rng.hpp"

using namespace lord;

namespace {

// independent scalar evaluation of the discrete Watson weight
std::vector<double> watson_oracle(const std::vector<Vec3>& dirs, double kappa, const Vec3& q) {
  std::vector<double> w(dirs.size());
  double sum = 0.0;
  for (size_t i = 0; i < dirs.size(); ++i) {
    const double t = dirs[i].x * q.x + dirs[i].y * q.y + dirs[i].z * q.z;
    w[i] = std::exp(kappa * t * t);
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

constexpr double kPi = std::numbers::pi;

}  // namespace

TEST_CASE("generate_directions basics") {
  SUBCASE("n = 1 canonicalizes to the pole for any seed") {
    for (std::uint64_t seed : {0ull, 7ull, 123456789ull}) {
      const auto d = DirectionSet::generate(1, seed);
      CHECK(d.size() == 1);
      CHECK(d[0].x == doctest::Approx(0.0).epsilon(1e-15));
      CHECK(d[0].y == doctest::Approx(0.0).epsilon(1e-15));
      CHECK(d[0].z == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
  SUBCASE("n = 0 rejected") { CHECK_THROWS_AS(DirectionSet::generate(0), std::invalid_argument); }
  SUBCASE("n = 3 pairwise projective angles exceed 40 degrees") {
    const auto d = DirectionSet::generate(3, 0);
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j)
        CHECK(projective_angle(d[i], d[j]) > 40.0 * kPi / 180.0);
  }
  SUBCASE("n = 100 minimum pairwise angle at least 10 degrees") {
    const auto d = DirectionSet::generate(100);
    double min_angle = kPi;  // exhaustive scan
    for (int i = 0; i < 100; ++i)
      for (int j = i + 1; j < 100; ++j)
        min_angle = std::min(min_angle, projective_angle(d[i], d[j]));
    CHECK(min_angle >= 10.0 * kPi / 180.0);
  }
  SUBCASE("invariants: unit norm, canonical representative, determinism") {
    const auto a = DirectionSet::generate(60);
    const auto b = DirectionSet::generate(60);
    CHECK(a.same_as(b));
    for (int i = 0; i < a.size(); ++i) {
      CHECK(std::fabs(norm(a[i]) - 1.0) <= 1e-12);
      CHECK(a[i].z >= 0.0);
    }
  }
}

TEST_CASE("DirectionSet validation") {
  CHECK_THROWS_AS(DirectionSet({{0, 0, 1}, {0, 0, -1}}), std::invalid_argument);
  CHECK_THROWS_AS(DirectionSet({{0, 0, 0}}), std::invalid_argument);
  // non-unit inputs are normalized
  const DirectionSet d({{2, 0, 0}, {0, 3, 0}});
  CHECK(norm(d[0]) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("direction table serialization round trip") {
  const auto d = DirectionSet::generate(17);
  std::stringstream ss;
  d.save(ss);
  const auto back = DirectionSet::load(ss);
  CHECK(back.same_as(d, 0.0));  // 17 significant digits reproduce doubles exactly
}

TEST_CASE("watson_weights") {
  const auto dirs = DirectionSet::generate(20);
  SUBCASE("kappa 0 gives the uniform row") {
    const auto w = watson_weights(dirs, 0.0, {0.3, 0.4, std::sqrt(1 - 0.25)});
    for (double v : w) CHECK(v == doctest::Approx(1.0 / 20).epsilon(1e-14));
  }
  SUBCASE("peak at the query direction, antipodally symmetric") {
    const int k = 7;
    const auto w_pos = watson_weights(dirs, 15.0, dirs[k]);
    const auto w_neg = watson_weights(dirs, 15.0, -dirs[k]);
    for (int i = 0; i < dirs.size(); ++i) {
      CHECK(w_pos[i] == doctest::Approx(w_neg[i]).epsilon(1e-14));
      if (i != k) CHECK(w_pos[k] > w_pos[i]);
    }
  }
  SUBCASE("midway query weights the two nearest directions equally") {
    const DirectionSet six({{1, 0, 0},
                            {0, 1, 0},
                            {0, 0, 1},
                            {std::sqrt(0.5), std::sqrt(0.5), 0},
                            {std::sqrt(0.5), 0, std::sqrt(0.5)},
                            {0, std::sqrt(0.5), std::sqrt(0.5)}});
    const Vec3 mid = normalized(six[0] + six[1]);
    const auto w = watson_weights(six, 15.0, mid);
    CHECK(std::fabs(w[0] - w[1]) <= 1e-12);
    const auto oracle = watson_oracle(six.dirs(), 15.0, mid);
    for (int i = 0; i < 6; ++i) CHECK(w[i] == doctest::Approx(oracle[i]).epsilon(1e-13));
  }
  SUBCASE("weights sum to one and match the scalar oracle") {
    Rng rng(3);
    for (double kappa : {0.0, 1.0, 15.0, 30.0}) {
      const Vec3 q = normalized({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
      const auto w = watson_weights(dirs, kappa, q);
      double sum = 0.0;
      for (double v : w) sum += v;
      CHECK(std::fabs(sum - 1.0) <= 1e-12);
      const auto oracle = watson_oracle(dirs.dirs(), kappa, q);
      for (int i = 0; i < dirs.size(); ++i)
        CHECK(w[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
    }
  }
  SUBCASE("non-unit query rejected") {
    CHECK_THROWS_AS(watson_weights(dirs, 1.0, {1.0, 1.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(watson_weights(dirs, -1.0, {0, 0, 1}), std::invalid_argument);
  }
}

TEST_CASE("watson table row stochastic for all kappas") {
  const auto dirs = DirectionSet::generate(30);
  for (double kappa : {0.0, 1.0, 15.0, 30.0}) {
    const auto table = WatsonTable::build(dirs, kappa);
    for (int m = 0; m < table.n; ++m) {
      double sum = 0.0;
      for (int i = 0; i < table.n; ++i) {
        sum += table(m, i);
        CHECK(table(m, i) >= 0.0);
      }
      CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("watson weights depend only on the squared dot product") {
  auto base = DirectionSet::generate(12).dirs();
  const auto w_ref = watson_weights(DirectionSet(base), 15.0, {0, 0, 1});
  base[5] = -base[5];  // negate one line representative
  const auto w_neg = watson_weights(DirectionSet(base), 15.0, {0, 0, 1});
  for (size_t i = 0; i < w_ref.size(); ++i)
    CHECK(w_ref[i] == doctest::Approx(w_neg[i]).epsilon(1e-15));
}

TEST_CASE("directional_smooth") {
  const auto dirs = DirectionSet::generate(100);
  SUBCASE("constant signals are preserved exactly") {
    const auto table = WatsonTable::build(dirs, 15.0);
    std::vector<double> c(100, 3.25);
    const auto out = directional_smooth(c, table);
    for (double v : out) CHECK(v == doctest::Approx(3.25).epsilon(1e-13));
  }
  SUBCASE("kappa 0 averages the signal") {
    const auto table = WatsonTable::build(dirs, 0.0);
    std::vector<double> s(100);
    Rng rng(5);
    double mean = 0.0;
    for (auto& v : s) {
      v = rng.uniform();
      mean += v;
    }
    mean /= 100.0;
    const auto out = directional_smooth(s, table);
    for (double v : out) CHECK(v == doctest::Approx(mean).epsilon(1e-12));
  }
  SUBCASE("delta signal peaks at its direction and decays with angle") {
    const auto table = WatsonTable::build(dirs, 15.0);
    std::vector<double> s(100, 0.0);
    s[7] = 1.0;
    const auto out = directional_smooth(s, table);
    // scalar oracle: out(m) = Gamma_15(nu_7, nu_m)
    for (int m = 0; m < 100; ++m) {
      const auto oracle = watson_oracle(dirs.dirs(), 15.0, dirs[m]);
      CHECK(out[m] == doctest::Approx(oracle[7]).epsilon(1e-12));
      if (m != 7) CHECK(out[7] > out[m]);
    }
    // monotone against angle for clearly separated pairs
    for (int m1 = 0; m1 < 100; ++m1)
      for (int m2 = 0; m2 < 100; ++m2) {
        const double a1 = projective_angle(dirs[7], dirs[m1]);
        const double a2 = projective_angle(dirs[7], dirs[m2]);
        if (a2 - a1 > 10.0 * kPi / 180.0) CHECK(out[m1] > out[m2]);
      }
  }
  SUBCASE("peak value nondecreasing in kappa") {
    std::vector<double> s(100, 0.0);
    s[7] = 1.0;
    double prev = -1.0;
    for (double kappa : {0.0, 5.0, 15.0, 30.0}) {
      const auto out = directional_smooth(s, WatsonTable::build(dirs, kappa));
      CHECK(out[7] >= prev);
      prev = out[7];
    }
  }
  SUBCASE("length mismatch rejected") {
    const auto table = WatsonTable::build(dirs, 1.0);
    std::vector<double> bad(99, 0.0);
    CHECK_THROWS_AS(directional_smooth(bad, table), std::invalid_argument);
  }
}

TEST_CASE("funk_radon") {
  const auto dirs = DirectionSet::generate(100);
  SUBCASE("isotropic signal maps to all ones") {
    std::vector<double> s(100, 2.0);
    const auto odf = funk_radon(s, dirs);
    for (double v : odf) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("single fiber: ODF peaks along the axis") {
    const Vec3 axis = normalized({0.3, -0.5, 0.81});
    std::vector<double> s(100);
    for (int i = 0; i < 100; ++i) {
      const double d = dot(dirs[i], axis);
      s[i] = std::exp(-4.0 * d * d);  // disc orthogonal to the axis
    }
    const auto odf = funk_radon(s, dirs);
    // independent band-average oracle
    const double band = std::sin(kFrtBandHalfwidth);
    int best = 0;
    double best_v = -1.0;
    for (int m = 0; m < 100; ++m) {
      double acc = 0.0;
      int cnt = 0;
      for (int i = 0; i < 100; ++i)
        if (std::fabs(dot(dirs[i], dirs[m])) <= band) {
          acc += s[i];
          ++cnt;
        }
      REQUIRE(cnt > 0);
      if (acc / cnt > best_v) {
        best_v = acc / cnt;
        best = m;
      }
    }
    CHECK(argmax_index(odf) == best);
    CHECK(projective_angle(dirs[argmax_index(odf)], axis) < 10.0 * kPi / 180.0);
  }
  SUBCASE("crossing fibers: local maxima near both axes") {
    const Vec3 a1{1, 0, 0}, a2{0, 1, 0};
    std::vector<double> s(100);
    for (int i = 0; i < 100; ++i) {
      const double d1 = dot(dirs[i], a1), d2 = dot(dirs[i], a2);
      s[i] = std::exp(-4.0 * d1 * d1) + std::exp(-4.0 * d2 * d2);
    }
    const auto odf = funk_radon(s, dirs);
    double best1 = 0.0, best2 = 0.0;
    for (int m = 0; m < 100; ++m) {
      if (projective_angle(dirs[m], a1) < 15.0 * kPi / 180.0) best1 = std::max(best1, odf[m]);
      if (projective_angle(dirs[m], a2) < 15.0 * kPi / 180.0) best2 = std::max(best2, odf[m]);
    }
    CHECK(best1 > 0.9);
    CHECK(best2 > 0.9);
  }
  SUBCASE("rotation closed set: FRT commutes with the permutation") {
    // 3 tilted base directions replicated by 90-degree rotations about z
    std::vector<Vec3> base = {normalized({0.9, 0.1, 0.42}), normalized({0.2, 0.65, 0.73}),
                              normalized({0.55, -0.4, 0.55})};
    std::vector<Vec3> all;
    for (int r = 0; r < 4; ++r) {
      const double c = std::cos(r * kPi / 2), sn = std::sin(r * kPi / 2);
      for (const auto& b : base) all.push_back({c * b.x - sn * b.y, sn * b.x + c * b.y, b.z});
    }
    const DirectionSet set(all);
    // permutation induced by the 90-degree rotation
    std::vector<int> perm(set.size());
    for (int i = 0; i < set.size(); ++i) {
      const Vec3 r{-set[i].y, set[i].x, set[i].z};
      int match = -1;
      for (int j = 0; j < set.size(); ++j)
        if (projective_angle(set[j], r) < 1e-9) match = j;
      REQUIRE(match >= 0);
      perm[i] = match;
    }
    Rng rng(11);
    std::vector<double> s(set.size());
    for (auto& v : s) v = rng.uniform();
    std::vector<double> s_rot(set.size());
    for (int i = 0; i < set.size(); ++i) s_rot[perm[i]] = s[i];
    const auto odf = funk_radon(s, set, 0.6);
    const auto odf_rot = funk_radon(s_rot, set, 0.6);
    for (int i = 0; i < set.size(); ++i)
      CHECK(odf_rot[perm[i]] == doctest::Approx(odf[i]).epsilon(1e-12));
  }
  SUBCASE("empty band reported with the direction") {
    // all directions cluster near the pole, so no equatorial band has members
    const DirectionSet tiny(
        {{0, 0, 1}, normalized({0.1, 0, 1.0}), normalized({0, 0.1, 1.0})});
    std::vector<double> s(3, 1.0);
    CHECK_THROWS_AS(funk_radon(s, tiny, 0.05), numerical_error);
  }
}

TEST_CASE("gfa") {
  SUBCASE("constant signal has zero anisotropy") {
    std::vector<double> s(64, 0.7);
    CHECK(gfa(s) == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("scale invariance") {
    Rng rng(2);
    std::vector<double> s(50);
    for (auto& v : s) v = rng.uniform(0.1, 1.0);
    std::vector<double> s2(s);
    for (auto& v : s2) v *= 2.0;
    CHECK(gfa(s2) == doctest::Approx(gfa(s)).epsilon(1e-13));
  }
  SUBCASE("delta signal approaches 1") {
    std::vector<double> s(100, 0.0);
    s[3] = 1.0;
    // oracle: population std / rms = sqrt((N-1)/N) for a delta
    const double expected = std::sqrt(99.0) / 10.0;
    CHECK(gfa(s) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(gfa(s) == doctest::Approx(0.99498743710662).epsilon(1e-11));
  }
  SUBCASE("errors") {
    std::vector<double> zero(10, 0.0);
    CHECK_THROWS_AS(gfa(zero), numerical_error);
    std::vector<double> one(1, 1.0);
    CHECK_THROWS_AS(gfa(one), std::invalid_argument);
  }
}

TEST_CASE("principal axis recovers a fiber direction precisely") {
  const auto dirs = DirectionSet::generate(100);
  const Vec3 axis = normalized({std::cos(0.4), std::sin(0.4), 0.0});
  std::vector<double> s(100);
  for (int i = 0; i < 100; ++i) {
    const double d = dot(dirs[i], axis);
    s[i] = std::exp(-4.0 * d * d);
  }
  const auto odf = funk_radon(s, dirs);
  const Vec3 peak = principal_axis(odf, dirs);
  CHECK(projective_angle(peak, axis) < 3.0 * kPi / 180.0);
}

TEST_CASE("antipodal invariance of smoothing and FRT") {
  auto base = DirectionSet::generate(40).dirs();
  const DirectionSet ref(base);
  auto flipped = base;
  for (size_t i = 0; i < flipped.size(); i += 3) flipped[i] = -flipped[i];
  const DirectionSet neg(flipped);
  Rng rng(9);
  std::vector<double> s(40);
  for (auto& v : s) v = rng.uniform();
  const auto sm_ref = directional_smooth(s, WatsonTable::build(ref, 15.0));
  const auto sm_neg = directional_smooth(s, WatsonTable::build(neg, 15.0));
  const auto fr_ref = funk_radon(s, ref, 0.25);
  const auto fr_neg = funk_radon(s, neg, 0.25);
  for (int i = 0; i < 40; ++i) {
    CHECK(sm_ref[i] == doctest::Approx(sm_neg[i]).epsilon(1e-13));
    CHECK(fr_ref[i] == doctest::Approx(fr_neg[i]).epsilon(1e-13));
  }
}
