#include <doctest.h>

#include <set>
#include <sstream>

#include "oracles.hpp"
#include "rmnav/errors.hpp"
#include "rmnav/gridworld.hpp"
#include "rmnav/observe.hpp"

using namespace rmnav;

namespace {

ScenarioSpec openSpec(int L = 10) {
  ScenarioSpec s;
  s.L = L;
  s.start = {2, 2};
  s.goal = {L + 1, L + 1};
  return s;
}

ScenarioSpec bundled(const std::string& name) {
  return loadScenario(std::string(RMNAV_SCENARIO_DIR) + "/" + name + ".txt");
}

}  // namespace

TEST_CASE("grid has a two-cell wall ring around an open centre") {
  const Grid g = Grid::build(openSpec());
  CHECK(g.side() == 14);
  int walls = 0;
  for (int r = 0; r < 14; ++r)
    for (int c = 0; c < 14; ++c) {
      const bool ring = r < 2 || c < 2 || r >= 12 || c >= 12;
      CHECK((g.at({r, c}) == CellKind::Wall) == ring);
      walls += g.at({r, c}) == CellKind::Wall;
    }
  CHECK(walls == 196 - 100);
  CHECK(g.at(g.goal()) == CellKind::Goal);
  CHECK(g.maxSteps() == 400);
}

TEST_CASE("invalid specs are rejected") {
  ScenarioSpec s = openSpec();
  s.obstacles.push_back({CellKind::SolidObstacle, s.goal});
  CHECK_THROWS_AS(Grid::build(s), InvalidSpec);

  s = openSpec();
  s.L = 2;
  CHECK_THROWS_AS(Grid::build(s), InvalidSpec);

  s = openSpec();
  s.start = {1, 5};
  CHECK_THROWS_AS(Grid::build(s), InvalidSpec);

  s = openSpec();
  s.goal = s.start;
  CHECK_THROWS_AS(Grid::build(s), InvalidSpec);

  s = openSpec();
  s.obstacles.push_back({CellKind::DeceptiveObstacle, {0, 0}});
  CHECK_THROWS_AS(Grid::build(s), InvalidSpec);
}

TEST_CASE("action codes round-trip") {
  for (int c = 0; c < 4; ++c) CHECK(toCode(actionFromCode(c)) == c);
  CHECK_THROWS_AS(actionFromCode(4), BadParam);
  CHECK_THROWS_AS(actionFromCode(-1), BadParam);
  CHECK(moved({5, 5}, Action::Up) == Cell{4, 5});
  CHECK(moved({5, 5}, Action::Left) == Cell{5, 4});
}

TEST_CASE("step dynamics") {
  ScenarioSpec s = openSpec();
  s.obstacles = {{CellKind::SolidObstacle, {5, 7}},
                 {CellKind::DeceptiveObstacle, {6, 5}},
                 {CellKind::PliableObstacle, {4, 5}}};
  const Grid g = Grid::build(s);

  auto o = step(g, {{5, 5}, 3}, Action::Right);
  CHECK(o.next.position == Cell{5, 6});
  CHECK(o.next.t == 4);
  CHECK(o.event == StepEvent::Moved);

  o = step(g, {{5, 6}, 0}, Action::Right);
  CHECK(o.event == StepEvent::Collision);
  CHECK(o.next.position == Cell{5, 6});

  o = step(g, {{2, 5}, 0}, Action::Up);
  CHECK(o.event == StepEvent::BlockedByWall);
  CHECK(o.next.position == Cell{2, 5});
  CHECK(o.next.t == 1);

  o = step(g, {{5, 5}, 0}, Action::Down);
  CHECK(o.event == StepEvent::PassedThroughDeceptive);
  CHECK(o.next.position == Cell{6, 5});

  o = step(g, {{5, 5}, 0}, Action::Up);
  CHECK(o.event == StepEvent::PassedThroughPliable);
  CHECK(o.next.position == Cell{4, 5});

  o = step(g, {{11, 10}, 0}, Action::Right);
  CHECK(o.event == StepEvent::ReachedGoal);
  CHECK(o.next.position == g.goal());
}

TEST_CASE("step is deterministic") {
  const Grid g = Grid::build(bundled("sealed_deceptive"));
  for (int r = 2; r < 12; ++r)
    for (int c = 2; c < 12; ++c)
      for (Action a : kAllActions) {
        const auto x = step(g, {{r, c}, 7}, a);
        const auto y = step(g, {{r, c}, 7}, a);
        CHECK(x.next == y.next);
        CHECK(x.event == y.event);
      }
}

TEST_CASE("image rendering geometry") {
  ScenarioSpec s = openSpec();
  s.obstacles = {{CellKind::SolidObstacle, {4, 4}},
                 {CellKind::PliableObstacle, {4, 6}},
                 {CellKind::DeceptiveObstacle, {4, 8}}};
  const Grid g = Grid::build(s);
  const AgentState a{{6, 6}, 0};
  const Image img = renderImage(g, a);
  REQUIRE(img.width == 100);
  REQUIRE(img.height == 100);
  const int b = cellBlockSize(14);
  CHECK(b == 7);
  // Each cell reads back as a uniform block of its own gray level.
  for (int r = 0; r < 14; ++r)
    for (int c = 0; c < 14; ++c) {
      const Cell cell{r, c};
      const std::uint8_t want = cell == a.position ? kAgentGray : grayLevel(g.at(cell));
      for (int y = 0; y < b; ++y)
        for (int x = 0; x < b; ++x) REQUIRE(img.at(r * b + y, c * b + x) == want);
    }
  for (int i = 98; i < 100; ++i)
    for (int j = 0; j < 100; ++j) {
      CHECK(img.at(i, j) == kMarginGray);
      CHECK(img.at(j, i) == kMarginGray);
    }
  CHECK(grayLevel(CellKind::DeceptiveObstacle) == grayLevel(CellKind::SolidObstacle));
  std::set<int> levels{kAgentGray};
  for (CellKind k : {CellKind::Empty, CellKind::SolidObstacle, CellKind::PliableObstacle, CellKind::Goal})
    levels.insert(grayLevel(k));
  CHECK(levels.size() == 5);
}

TEST_CASE("empty interior renders one gray level") {
  const Grid g = Grid::build(openSpec());
  const Image img = renderImage(g, {{2, 2}, 0});
  std::set<int> interior;
  for (int r = 2; r < 12; ++r)
    for (int c = 2; c < 12; ++c)
      if (Cell{r, c} != g.goal() && Cell{r, c} != Cell{2, 2}) interior.insert(img.at(r * 7 + 3, c * 7 + 3));
  CHECK(interior == std::set<int>{grayLevel(CellKind::Empty)});
}

TEST_CASE("oversized grid cannot be rendered") {
  const Grid g = Grid::build(openSpec(97));
  CHECK_THROWS_AS(renderImage(g, {{2, 2}, 0}), GridTooLarge);
}

TEST_CASE("pgm output") {
  const Grid g = Grid::build(openSpec());
  std::ostringstream out;
  writePgm(renderImage(g, {{2, 2}, 0}), out);
  const std::string s = out.str();
  CHECK(s.rfind("P5\n100 100\n255\n", 0) == 0);
  CHECK(s.size() == std::string("P5\n100 100\n255\n").size() + 10000);
}

TEST_CASE("scenario files round-trip") {
  for (const char* name : {"open_room", "deceptive_corridor", "sealed_deceptive"}) {
    const ScenarioSpec a = bundled(name);
    std::istringstream in(formatScenario(a));
    const ScenarioSpec b = parseScenario(in);
    CHECK(formatScenario(b) == formatScenario(a));
    CHECK(b.name == name);
  }
  std::istringstream bad("L=10\nstart=2,2\ngoal=5,5\nboulder 3,3\n");
  CHECK_THROWS_AS(parseScenario(bad), FormatError);
  std::istringstream missing("L=10\nstart=2,2\n");
  CHECK_THROWS_AS(parseScenario(missing), FormatError);
}

TEST_CASE("bundled scenarios match their reachability taxonomy") {
  auto deceptiveOpen = [](CellKind k) { return k != CellKind::Wall && k != CellKind::SolidObstacle; };
  auto deceptiveShut = [](CellKind k) { return k == CellKind::Empty || k == CellKind::Goal; };
  for (const char* name : {"open_room", "deceptive_corridor", "sealed_deceptive"}) {
    CAPTURE(name);
    const ScenarioSpec spec = bundled(name);
    REQUIRE(spec.baselineSolvable.has_value());
    const Grid g = Grid::build(spec);
    const auto through = oracle::bfs(g, g.start(), g.goal(), deceptiveOpen);
    const auto around = oracle::bfs(g, g.start(), g.goal(), deceptiveShut);
    CHECK(through.has_value());
    CHECK(around.has_value() == *spec.baselineSolvable);
    CHECK(bfsDistance(g, g.start(), g.goal(), true) == through);
    CHECK(bfsDistance(g, g.start(), g.goal(), false) == around);
  }
  // The sealed room is enterable only through deceptive cells.
  const Grid sealed = Grid::build(bundled("sealed_deceptive"));
  CHECK_FALSE(oracle::bfs(sealed, sealed.start(), sealed.goal(), deceptiveShut).has_value());
}

TEST_CASE("observation encodings only use the four codes") {
  for (const char* name : {"open_room", "deceptive_corridor", "sealed_deceptive"}) {
    const Grid g = Grid::build(bundled(name));
    for (int r = 2; r < 12; ++r)
      for (int c = 2; c < 12; ++c) {
        if (isObstacle(g.at({r, c}))) continue;
        const Observation o = globalObservation(g, {{r, c}, 0});
        for (double v : o.values) REQUIRE((v == 0.0 || v == 10.0 || v == 20.0 || v == 30.0));
      }
  }
}
