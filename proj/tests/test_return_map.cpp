#include <cmath>
#include <numbers>

#include "doctest.h"
#include "dscat/return_map.hpp"

using namespace dscat;

namespace {

constexpr double kPi = std::numbers::pi;

SystemConfig free_config() {
  SystemConfig c;
  c.e0 = 0.0;
  return c;
}

double phase_distance(double a, double b) {
  const double d = std::abs(wrap_phase(a) - wrap_phase(b));
  return std::min(d, 2.0 * kPi - d);
}

}  // namespace

TEST_SUITE("return_map") {
  TEST_CASE("phase wrapping and canonical points") {
    CHECK(wrap_phase(-0.5) == doctest::Approx(2.0 * kPi - 0.5));
    CHECK(wrap_phase(2.0 * kPi) == 0.0);
    const SectionPoint a = canonical_point(-1.5, 1.0, 0.8);
    CHECK(a.p == 1.5);
    CHECK(a.tau == doctest::Approx(0.8 + kPi));
    const SectionPoint b = canonical_point(1.5, 10.0, 0.8);
    CHECK(b.tau == doctest::Approx(8.0 - 2.0 * kPi));
    CHECK(mirror({1.0, 1.0}).tau == doctest::Approx(2.0 * kPi - 1.0));
  }

  TEST_CASE("without driver amplitude h+ is the energy") {
    const SystemConfig c = free_config();
    for (double tau : {0.0, 1.0, 4.0}) {
      const ReturnOutcome o = return_map(c, {1.0, tau}, Direction::Forward);
      REQUIRE(o.kind == ReturnKind::Returns);
      CHECK(o.next.p == doctest::Approx(1.0).epsilon(1e-8));
      CHECK(std::abs(h_plus(c, {1.0, tau}) - 0.5) < 1e-8);
      CHECK(std::abs(h_minus(c, {1.0, tau}) - 0.5) < 1e-8);
      CHECK(o.turning_x > 0.0);
    }
    CHECK(h_plus(c, {1e-3, 0.0}) < 1e-6);
    CHECK(return_map(c, {1.2, 0.0}, Direction::Forward).kind == ReturnKind::Escapes);
    CHECK_THROWS_AS(h_plus(c, {1.2, 0.0}), NotInRPlus);
  }

  TEST_CASE("forward and backward maps are inverse") {
    SystemConfig c;
    for (const SectionPoint pt : {SectionPoint{1.0, 3.5}, SectionPoint{0.4, 4.0}, SectionPoint{1.8, 3.0}}) {
      const ReturnOutcome f = return_map(c, pt, Direction::Forward);
      REQUIRE(f.kind == ReturnKind::Returns);
      const ReturnOutcome b = return_map(c, f.next, Direction::Backward);
      REQUIRE(b.kind == ReturnKind::Returns);
      CHECK(std::abs(b.next.p - pt.p) < 1e-6);
      CHECK(phase_distance(b.next.tau, pt.tau) < 1e-6);
      CHECK(b.return_time == doctest::Approx(f.return_time).epsilon(1e-6));
      CHECK(classify(c, f.next).backward == BackwardClass::Rminus);
    }
  }

  TEST_CASE("time-reversal conjugacy") {
    SystemConfig c;
    for (const SectionPoint pt : {SectionPoint{1.0, 3.5}, SectionPoint{0.6, 2.0}, SectionPoint{1.5, 4.5}}) {
      const ReturnOutcome f = return_map(c, pt, Direction::Forward);
      const ReturnOutcome b = return_map(c, mirror(pt), Direction::Backward);
      REQUIRE(f.kind == b.kind);
      if (f.kind != ReturnKind::Returns) continue;
      const SectionPoint m = mirror(b.next);
      CHECK(std::abs(m.p - f.next.p) < 1e-6);
      CHECK(phase_distance(m.tau, f.next.tau) < 1e-6);
      CHECK(std::abs(f.turning_x + b.turning_x) < 1e-6);
      CHECK(std::abs(f.return_time - b.return_time) < 1e-6);
    }
  }

  TEST_CASE("h+ is continuous inside R+") {
    SystemConfig c;
    const double base = h_plus(c, {1.0, 3.5});
    double prev = 1.0;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
      const double d = std::abs(h_plus(c, {1.0 + eps, 3.5}) - base);
      CHECK(d < prev);
      prev = d;
    }
    CHECK(prev < 1e-3);
  }

  TEST_CASE("h+ rises toward the escape energy near the boundary") {
    SystemConfig c;
    double prev = 0.0;
    for (double p : {2.0, 2.125, 2.1875, 2.21875, 2.2265625}) {
      const double h = h_plus(c, {p, kPi});
      CHECK(h > prev);
      CHECK(h < c.escape_energy());
      prev = h;
    }
    CHECK(prev > c.escape_energy() - 0.01);
  }

  TEST_CASE("boundary bisection") {
    const SystemConfig c = free_config();
    const BoundaryEstimate e = boundary_bisect(c, 0.0, 0.5, 2.0, Direction::Forward, 1e-6);
    CHECK(std::abs(e.p_boundary - std::sqrt(2.0 * 0.588)) < 1e-4);
    CHECK(e.p_inside < e.p_outside);
    CHECK(e.p_outside - e.p_inside <= 1e-6);

    const BoundaryEstimate coarse = boundary_bisect(c, 0.0, 0.5, 2.0, Direction::Forward, 1e-4);
    CHECK(coarse.p_inside <= e.p_inside);
    CHECK(e.p_outside <= coarse.p_outside);

    CHECK_THROWS_AS(boundary_bisect(c, 0.0, 0.2, 0.5, Direction::Forward, 1e-3), SameClassEndpoints);

    SystemConfig d;
    const BoundaryEstimate driven = boundary_bisect(d, kPi, 1.0, 3.0, Direction::Forward, 1e-4);
    double t = 0.0;
    for (const auto& s : driven.inside_sequence) {
      CHECK(s.return_time >= t);
      t = s.return_time;
    }
    CHECK(t > 100.0);
  }

  TEST_CASE("Q_n membership") {
    const SystemConfig c = free_config();
    for (int n = 1; n <= 3; ++n) CHECK(qn_membership(c, {1.0, 0.0}, n) == Membership::False);
    CHECK(qn_membership(c, {1.2, 0.0}, 1) == Membership::True);
    CHECK(qn_membership(c, {1.2, 0.0}, 2) == Membership::False);
    CHECK_THROWS_AS(qn_membership(c, {1.0, 0.0}, 0), ValidationError);
    CHECK(escape_iterate(c, {1.2, 0.0}, 5) == 1);
    CHECK(escape_iterate(c, {1.0, 0.0}, 5) == 0);

    SystemConfig d;
    for (int i = 0; i < 12; ++i) {
      const SectionPoint pt{0.15 * i, 3.0 + 0.2 * i};
      int hits = 0;
      for (int n = 1; n <= 4; ++n) hits += qn_membership(d, pt, n) == Membership::True;
      CHECK(hits <= 1);
      const int k = escape_iterate(d, pt, 4);
      if (k > 0) CHECK(qn_membership(d, pt, k) == Membership::True);
    }
  }

  TEST_CASE("classified grid agrees with the oracles") {
    SystemConfig c;
    const auto cells = classify_grid(c, 0.2, 2.0, 4, 3, 4);
    REQUIRE(cells.size() == 12);
    for (const auto& g : cells) {
      CHECK(g.q_n == escape_iterate(c, g.pt, 4));
      CHECK((g.cls.forward == ForwardClass::Rplus) == std::isfinite(g.h_plus));
      CHECK((g.cls.backward == BackwardClass::Rminus) == std::isfinite(g.h_minus));
    }
  }

  TEST_CASE("area preservation") {
    CHECK(convex_hull_area({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}}) == doctest::Approx(1.0));
    CHECK(convex_hull_area({{0, 0}, {1, 1}}) == 0.0);

    const AreaReport free = area_check(free_config(), {0.8, 1.0, 1e-3}, 2000);
    CHECK(std::abs(free.ratio - 1.0) < 0.01);

    SystemConfig c;
    const AreaReport a = area_check(c, {1.0, 3.5, 0.05}, 2000, 3);
    CHECK(std::abs(a.ratio - 1.0) < 0.01);
    CHECK(a.source_area == doctest::Approx(kPi * 0.0025).epsilon(0.05));
    const AreaReport b = area_check(c, {1.0, 3.5, 0.05}, 4000, 4);
    CHECK(std::abs(a.ratio - b.ratio) < 0.01);

    CHECK_THROWS_AS(area_check(c, {2.2, kPi, 0.2}, 200), RegionNotInRPlus);
  }

  TEST_CASE("finite pulse is rejected") {
    SystemConfig c;
    c.driver = DriverKind::F1Finite;
    CHECK_THROWS_AS(return_map(c, {1.0, 0.0}, Direction::Forward), ValidationError);
  }
}
