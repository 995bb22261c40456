#include "lord/phantom.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "lord/errors.hpp"

using namespace lord;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("single_fiber_signal") {
  const auto dirs = DirectionSet::generate(100);
  SUBCASE("disc shape: maximal orthogonal to the tangent, antipodal") {
    const Vec3 t{0, 0, 1};
    const auto s = single_fiber_signal(t, dirs);
    int best = argmax_index(s);
    CHECK(std::fabs(dot(dirs[best], t)) < 0.35);  // near the equator
    // antipodal consistency by construction: value depends on (nu.t)^2
    for (int i = 0; i < 100; ++i) {
      const double d = dot(dirs[i], t);
      CHECK(s[i] == doctest::Approx(std::exp(-4.0 * d * d)).epsilon(1e-14));
    }
  }
  SUBCASE("FRT of the signal peaks along the tangent") {
    const Vec3 t = normalized({0.6, -0.7, 0.4});
    const auto s = single_fiber_signal(t, dirs);
    const auto odf = funk_radon(s, dirs);
    CHECK(projective_angle(dirs[argmax_index(odf)], t) < 10.0 * kPi / 180.0);
  }
  SUBCASE("rotation-closed set: rotated tangent permutes the signal") {
    std::vector<Vec3> base = {normalized({0.9, 0.1, 0.42}), normalized({0.2, 0.65, 0.73}),
                              normalized({0.55, -0.4, 0.55})};
    std::vector<Vec3> all;
    for (int r = 0; r < 4; ++r) {
      const double c = std::cos(r * kPi / 2), sn = std::sin(r * kPi / 2);
      for (const auto& b : base) all.push_back({c * b.x - sn * b.y, sn * b.x + c * b.y, b.z});
    }
    const DirectionSet set(all);
    const Vec3 t = normalized({0.3, 0.5, 0.81});
    const Vec3 t_rot{-t.y, t.x, t.z};  // rotated by 90 degrees about z
    const auto s = single_fiber_signal(t, set);
    const auto s_rot = single_fiber_signal(t_rot, set);
    for (int i = 0; i < set.size(); ++i) {
      const Vec3 r{-set[i].y, set[i].x, set[i].z};
      int match = -1;
      for (int j = 0; j < set.size(); ++j)
        if (projective_angle(set[j], r) < 1e-9) match = j;
      REQUIRE(match >= 0);
      CHECK(s_rot[match] == doctest::Approx(s[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("synthesize") {
  auto dirs = std::make_shared<DirectionSet>(DirectionSet::generate(20));
  SUBCASE("all-isotropic blueprint gives a constant image") {
    Blueprint bp(4, 4);
    SynthesisOptions opts;
    opts.iso_level = 0.3;
    const auto img = synthesize(bp, dirs, opts);
    CHECK(img.dims() == GridDims{12, 12, 3});
    for (double v : img.data()) CHECK(v == 0.3);
  }
  SUBCASE("crossing cell has two FRT maxima") {
    Blueprint bp(4, 4);
    bp.add_fiber(1, 1, {1, 0, 0});
    bp.add_fiber(1, 1, {0, 1, 0});
    SynthesisOptions opts;
    const auto img = synthesize(bp, std::make_shared<DirectionSet>(DirectionSet::generate(100)),
                                opts);
    std::span<const double> sig(img.voxel(4, 4, 1), 100);
    const auto odf = funk_radon(sig, img.directions());
    double best_x = 0, best_y = 0;
    for (int m = 0; m < 100; ++m) {
      if (projective_angle(img.directions()[m], {1, 0, 0}) < 15 * kPi / 180)
        best_x = std::max(best_x, odf[m]);
      if (projective_angle(img.directions()[m], {0, 1, 0}) < 15 * kPi / 180)
        best_y = std::max(best_y, odf[m]);
    }
    CHECK(best_x > 0.9);
    CHECK(best_y > 0.9);
  }
  SUBCASE("noise is reproducible per seed") {
    Blueprint bp(3, 3);
    bp.add_fiber(1, 1, {1, 0, 0});
    SynthesisOptions opts;
    opts.noise_amplitude = 0.1;
    opts.seed = 77;
    const auto a = synthesize(bp, dirs, opts);
    const auto b = synthesize(bp, dirs, opts);
    for (size_t i = 0; i < a.data().size(); ++i) CHECK(a.data()[i] == b.data()[i]);
    opts.seed = 78;
    const auto c = synthesize(bp, dirs, opts);
    bool differs = false;
    for (size_t i = 0; i < a.data().size(); ++i) differs = differs || a.data()[i] != c.data()[i];
    CHECK(differs);
  }
  SUBCASE("weights add linearly before noise") {
    Blueprint one(2, 2), two(2, 2), sum(2, 2);
    one.add_fiber(0, 0, {1, 0, 0}, 0.4);
    two.add_fiber(0, 0, {0, 1, 0}, 0.6);
    sum.add_fiber(0, 0, {1, 0, 0}, 0.4);
    sum.add_fiber(0, 0, {0, 1, 0}, 0.6);
    SynthesisOptions opts;
    const auto ia = synthesize(one, dirs, opts);
    const auto ib = synthesize(two, dirs, opts);
    const auto is = synthesize(sum, dirs, opts);
    for (int n = 0; n < 20; ++n)
      CHECK(is.value(0, 0, 0, n) ==
            doctest::Approx(ia.value(0, 0, 0, n) + ib.value(0, 0, 0, n)).epsilon(1e-14));
  }
}

TEST_CASE("blueprint text format round trip") {
  Blueprint bp(20, 20);
  bp.add_fiber(3, 4, normalized({0.6, 0.8, 0}), 0.75);
  bp.add_fiber(3, 4, {0, 0, 1}, 1.0);
  bp.add_fiber(10, 11, {1, 0, 0}, 0.5);
  std::stringstream ss;
  bp.save(ss);
  const auto back = Blueprint::load(ss);
  REQUIRE(back.cell(3, 4).size() == 2);
  REQUIRE(back.cell(10, 11).size() == 1);
  CHECK(norm(back.cell(3, 4)[0].tangent - bp.cell(3, 4)[0].tangent) == 0.0);
  CHECK(back.cell(10, 11)[0].weight == 0.5);
  std::stringstream commented("# header\n1 1 1 0 0 1.0\n\n");
  const auto c = Blueprint::load(commented);
  CHECK(c.has_fiber(1, 1));
  std::stringstream bad("1 2 3\n");
  CHECK_THROWS_AS(Blueprint::load(bad), io_error);
}

TEST_CASE("builtin experiments") {
  SUBCASE("unknown names list the valid ones") {
    try {
      builtin_experiment("nope");
      FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
      const std::string msg = e.what();
      for (const auto& name : experiment_names())
        CHECK(msg.find(name) != std::string::npos);
    }
  }
  SUBCASE("pairs share dimensions and direction sets") {
    for (const auto& name : experiment_names()) {
      const auto pair = builtin_experiment(name, 24, 1);
      CHECK(pair.moving.dims() == pair.target.dims());
      CHECK(pair.moving.directions().same_as(pair.target.directions(), 0.0));
    }
  }
  SUBCASE("straight_wavy_bounded has the advertised structure") {
    const auto pair = builtin_experiment("straight_wavy_bounded", 24, 1);
    // moving: straight horizontal tract through the middle row band
    CHECK(pair.moving_bp.has_fiber(10, 10));
    const auto& fibers = pair.moving_bp.cell(10, 10);
    REQUIRE(!fibers.empty());
    CHECK(std::fabs(fibers[0].tangent.x) > 0.99);
    // boundary verticals cross the tract in both images
    CHECK(pair.moving_bp.cell(2, 10).size() >= 2);
    CHECK(pair.target_bp.cell(2, 10).size() >= 2);
    // target tract is wavy: fiber cells off the center row
    bool off_center = false;
    for (int i = 4; i < 16; ++i)
      off_center = off_center || pair.target_bp.has_fiber(i, 12) || pair.target_bp.has_fiber(i, 8);
    CHECK(off_center);
  }
  SUBCASE("sheared_30_45 target center crossing is orthogonal, rotated 45 degrees") {
    const auto pair = builtin_experiment("sheared_30_45", 100, 1);
    const int cx = pair.target.dims().nx / 2, cy = pair.target.dims().ny / 2;
    std::span<const double> sig(pair.target.voxel(cx, cy, 1), 100);
    const auto odf = funk_radon(sig, pair.target.directions());
    // strongest response along both diagonals
    double d1 = 0, d2 = 0;
    const Vec3 diag1 = normalized({1, 1, 0}), diag2 = normalized({1, -1, 0});
    for (int m = 0; m < 100; ++m) {
      if (projective_angle(pair.target.directions()[m], diag1) < 12 * kPi / 180)
        d1 = std::max(d1, odf[m]);
      if (projective_angle(pair.target.directions()[m], diag2) < 12 * kPi / 180)
        d2 = std::max(d2, odf[m]);
    }
    CHECK(d1 > 0.85);
    CHECK(d2 > 0.85);
  }
}

TEST_CASE("synthetic_warp") {
  const GridDims dims{12, 36, 20};
  SUBCASE("zero magnitude is the identity") {
    const auto ffd = synthetic_warp(dims, 10.0, 0.0, 5);
    REQUIRE(ffd.num_levels() == 1);
    for (const auto& c : ffd.level(0).coeffs) CHECK(norm(c) == 0.0);
  }
  SUBCASE("paper-scale magnitude passes the guard") {
    const auto ffd = synthetic_warp(dims, 10.0, 0.4, 6);
    const auto probes = guard_probes(dims, ffd.level(0));
    CHECK(check_diffeomorphism(ffd, probes).pass);
    // displacements actually reach a meaningful fraction of the spacing
    double maxdisp = 0.0;
    for (const auto& c : ffd.level(0).coeffs) maxdisp = std::max(maxdisp, norm(c));
    CHECK(maxdisp > 2.0);
  }
  SUBCASE("deterministic per seed") {
    const auto a = synthetic_warp(dims, 10.0, 0.4, 7);
    const auto b = synthetic_warp(dims, 10.0, 0.4, 7);
    for (size_t i = 0; i < a.level(0).coeffs.size(); ++i)
      CHECK(norm(a.level(0).coeffs[i] - b.level(0).coeffs[i]) == 0.0);
  }
  SUBCASE("invalid magnitude rejected") {
    CHECK_THROWS_AS(synthetic_warp(dims, 10.0, 0.7, 5), std::invalid_argument);
  }
}

TEST_CASE("sweep phantom carries crossing directional content") {
  const auto img = sweep_phantom({16, 48, 24}, 48, 9);
  CHECK(img.dims() == GridDims{16, 48, 24});
  // some voxel on the straight tract shows a y-dominant fiber
  int fiber_voxels = 0;
  for (int z = 0; z < 24; ++z)
    for (int y = 0; y < 48; ++y) {
      std::span<const double> sig(img.voxel(8, y, z), 48);
      if (gfa(sig) > 0.3) ++fiber_voxels;
    }
  CHECK(fiber_voxels > 100);
}
