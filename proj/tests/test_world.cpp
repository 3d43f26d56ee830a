#include "helpers.hpp"
#include "oracles.hpp"

#include "visor/world.hpp"
#include "visor/world_io.hpp"

#include <doctest.h>

#include <algorithm>

using namespace visor;

TEST_SUITE("world") {

TEST_CASE("generation is bit-deterministic") {
  const GridWorld a = generate_world(7);
  const GridWorld b = generate_world(7);
  CHECK(a == b);
  CHECK(world_to_json(a).dump() == world_to_json(b).dump());
  CHECK_FALSE(generate_world(8) == a);
}

TEST_CASE("invalid configs are rejected") {
  WorldConfig one_room;
  one_room.rooms = 1;
  CHECK_THROWS_AS(generate_world(7, one_room), InvalidConfig);
  WorldConfig tiny;
  tiny.width = 20;
  CHECK_THROWS_AS(generate_world(7, tiny), InvalidConfig);
  WorldConfig few_objects;
  few_objects.objects = 3;
  CHECK_THROWS_AS(generate_world(7, few_objects), InvalidConfig);
}

TEST_CASE("free-cell count agrees with an independent flood fill") {
  for (std::uint64_t seed : {7u, 8u, 21u, 99u}) {
    const GridWorld w = generate_world(seed);
    const auto cells = testing::free_cells(w);
    REQUIRE_FALSE(cells.empty());
    const int filled = oracle::flood_fill(w, cells.front().x, cells.front().y);
    CHECK(filled == free_cell_count(w));
    CHECK(flood_fill_count(w, cells.front()) == filled);
    CHECK(is_free_space_connected(w));
  }
}

TEST_CASE("generated worlds satisfy their structural invariants") {
  const GridWorld w = generate_world(7);
  CHECK(w.width() == 48);
  CHECK(w.height() == 48);
  CHECK(w.rooms().size() >= 2);
  CHECK(w.objects().size() >= 4);
  for (const auto& o : w.objects()) {
    CHECK(w.object_at(w.cell_of(o.anchor)) == o.id);
    CHECK(w.room_of(o.anchor) != nullptr);
  }
  // The outer frame is solid.
  for (int x = 0; x < w.width(); ++x) {
    CHECK_FALSE(w.is_free({x, 0}));
    CHECK_FALSE(w.is_free({x, w.height() - 1}));
  }
}

TEST_CASE("geodesic basics") {
  const GridWorld room = testing::open_room(10, 10);
  const Vec2 a = room.center({3, 3});
  CHECK(*geodesic_distance(room, a, a) == 0.0);
  CHECK(*geodesic_distance(room, a, room.center({4, 3})) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(*geodesic_distance(room, a, room.center({4, 4})) == doctest::Approx(std::sqrt(2.0) * 0.25).epsilon(1e-12));

  const GridWorld sealed = testing::ascii_world({
      "#########",
      "#...#...#",
      "#...#...#",
      "#...#...#",
      "#########",
  });
  CHECK_FALSE(geodesic_distance(sealed, sealed.center({1, 1}), sealed.center({6, 2})).has_value());
}

TEST_CASE("no corner cutting") {
  const GridWorld w = testing::ascii_world({
      "....",
      ".#..",
      "....",
  });
  // (0,0) -> (1,1) is blocked; (0,0) -> (2,0) cannot clip the pillar diagonally.
  CHECK(*geodesic_distance(w, w.center({0, 0}), w.center({2, 2})) == doctest::Approx(4 * 0.25));
  CHECK_FALSE(w.is_free({1, 1}));
  CHECK_FALSE(diagonal_clear(w, {0, 1}, {1, 0}));
  CHECK(diagonal_clear(w, {2, 0}, {3, 1}));
}

TEST_CASE("geodesic distance matches an independent shortest-path oracle on random mazes") {
  Rng rng(1234);
  int compared = 0, unreachable = 0;
  for (int m = 0; m < 50; ++m) {
    const GridWorld w = testing::random_maze(20, 20, 0.3, rng);
    const auto cells = testing::free_cells(w);
    REQUIRE(cells.size() > 2);
    const auto a = cells[rng.uniform_int(0, static_cast<int>(cells.size()) - 1)];
    const auto b = cells[rng.uniform_int(0, static_cast<int>(cells.size()) - 1)];
    const auto ref = oracle::grid_distances(w, a.x, a.y);
    const double want = ref[b.y * 20 + b.x];
    const auto got = geodesic_distance(w, w.center(a), w.center(b));
    if (std::isfinite(want)) {
      REQUIRE(got.has_value());
      CHECK(std::abs(*got - want) < 1e-9);
      // Whole field, not just the sampled pair.
      const DistanceField field = geodesic_field(w, w.center(a));
      for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) {
          const double r = ref[y * 20 + x];
          const double f = field.at({x, y});
          CHECK((std::isfinite(r) ? std::abs(r - f) < 1e-9 : !std::isfinite(f)));
        }
      ++compared;
    } else {
      CHECK_FALSE(got.has_value());
      ++unreachable;
    }
  }
  CHECK(compared > 25);
  MESSAGE(compared << " reachable pairs, " << unreachable << " unreachable");
}

TEST_CASE("geodesic is symmetric, dominates Euclidean distance and obeys the triangle inequality") {
  const GridWorld w = generate_world(11);
  const auto cells = testing::free_cells(w);
  Rng rng(5);
  for (int k = 0; k < 30; ++k) {
    const Vec2 a = w.center(cells[rng.uniform_int(0, static_cast<int>(cells.size()) - 1)]);
    const Vec2 b = w.center(cells[rng.uniform_int(0, static_cast<int>(cells.size()) - 1)]);
    const Vec2 c = w.center(cells[rng.uniform_int(0, static_cast<int>(cells.size()) - 1)]);
    const double ab = *geodesic_distance(w, a, b);
    const double ba = *geodesic_distance(w, b, a);
    const double bc = *geodesic_distance(w, b, c);
    const double ac = *geodesic_distance(w, a, c);
    CHECK(std::abs(ab - ba) < 1e-9);
    CHECK(ab >= (a - b).norm() - 1e-9);
    CHECK(ac <= ab + bc + 1e-9);
  }
}

TEST_CASE("apply_action kinematics") {
  const GridWorld w = testing::open_room(10, 10);
  const Pose p{1.125, 1.125, 0.0};
  const Pose f = apply_action(w, p, LowLevelAction::Forward);
  CHECK(f.x == doctest::Approx(1.375));
  CHECK(f.y == doctest::Approx(1.125));
  CHECK(apply_action(w, p, LowLevelAction::TurnLeft).heading == doctest::Approx(deg2rad(15.0)));
  CHECK(apply_action(w, p, LowLevelAction::TurnRight).heading == doctest::Approx(deg2rad(345.0)));
  bool blocked = false;
  const Pose west{0.375, 1.125, kPi};
  const Pose stay = apply_action(w, west, LowLevelAction::Forward, &blocked);
  CHECK(blocked);
  CHECK(stay == west);
}

TEST_CASE("plan_to_actions: straight ahead") {
  const GridWorld w = testing::open_room(16, 16);
  const Pose from{1.125, 2.125, 0.0};
  const auto actions = plan_to_actions(w, from, {2.125, 2.125});
  CHECK(actions == std::vector<LowLevelAction>(4, LowLevelAction::Forward));
}

TEST_CASE("plan_to_actions: target behind needs a 180 degree turn") {
  const GridWorld w = testing::open_room(16, 16);
  const Pose from{2.125, 2.125, 0.0};
  const auto actions = plan_to_actions(w, from, {1.125, 2.125});
  const auto first_forward = std::find(actions.begin(), actions.end(), LowLevelAction::Forward);
  REQUIRE(first_forward != actions.end());
  const auto turns = std::distance(actions.begin(), first_forward);
  CHECK(turns == kTurnAroundSteps);
  CHECK(std::all_of(actions.begin(), first_forward, [&](LowLevelAction a) { return a == actions.front(); }));
}

TEST_CASE("plan_to_actions replays to the target on random pairs") {
  int checked = 0;
  double worst_slack = 0.0;
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    const GridWorld w = generate_world(seed);
    const auto cells = testing::clear_cells(w);
    Rng rng(seed);
    for (int k = 0; k < 20; ++k) {
      const auto a = cells[rng.uniform_int(0, static_cast<int>(cells.size()) - 1)];
      const auto b = cells[rng.uniform_int(0, static_cast<int>(cells.size()) - 1)];
      Pose pose{w.center(a).x(), w.center(a).y(), deg2rad(15.0 * rng.uniform_int(0, 23))};
      const auto actions = plan_to_actions(w, pose, w.center(b));
      int forwards = 0;
      for (auto act : actions) {
        REQUIRE(act != LowLevelAction::Stop);
        bool blocked = false;
        pose = apply_action(w, pose, act, &blocked);
        CHECK_FALSE(blocked);
        forwards += act == LowLevelAction::Forward;
      }
      CHECK((pose.position() - w.center(b)).norm() < kArrivalTolerance);
      const double geo = *geodesic_distance(w, w.center(a), w.center(b));
      const double slack = forwards * kForwardStep - geo;
      worst_slack = std::max(worst_slack, slack);
      CHECK(slack <= 2 * w.resolution() + 1e-9);
      ++checked;
    }
  }
  MESSAGE(checked << " plans, worst path slack " << worst_slack << " m");
}

TEST_CASE("unreachable plan throws") {
  const GridWorld sealed = testing::ascii_world({
      "#########",
      "#...#...#",
      "#...#...#",
      "#########",
  });
  CHECK_THROWS_AS(plan_to_actions(sealed, {0.375, 0.375, 0.0}, sealed.center({6, 2})), Unreachable);
}

TEST_CASE("world JSON round trip") {
  const GridWorld w = generate_world(7);
  const auto doc = world_to_json(w);
  const GridWorld back = world_from_json(doc);
  CHECK(back == w);
  CHECK(world_to_json(back).dump() == doc.dump());
  auto bad = doc;
  bad["version"] = 99;
  CHECK_THROWS_AS(world_from_json(bad), Error);
}

TEST_CASE("object descriptions") {
  const GridWorld w = generate_world(7);
  for (const auto& o : w.objects()) CHECK(matches(w, o, describe(o)));
  for (const auto& o : w.objects())
    for (const auto& other : w.objects())
      if (other.id != o.id) CHECK(oracle::satisfies(w, other, describe(o)) == matches(w, other, describe(o)));
}

}  // TEST_SUITE
