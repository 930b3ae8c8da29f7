#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "rmnav/errors.hpp"
#include "rmnav/observe.hpp"

using namespace rmnav;

namespace {

Grid grid(std::vector<ObstacleSpec> obstacles = {}, Cell start = {2, 2}, Cell goal = {11, 11}) {
  ScenarioSpec s;
  s.L = 10;
  s.start = start;
  s.goal = goal;
  s.obstacles = std::move(obstacles);
  return Grid::build(s);
}

std::vector<std::vector<double>> randomSamples(std::mt19937_64& rng, int n, int dim) {
  std::normal_distribution<double> nd;
  std::vector<double> scale(dim);
  for (auto& s : scale) s = std::exp(nd(rng));
  std::vector<std::vector<double>> out(n, std::vector<double>(dim));
  for (auto& row : out)
    for (int j = 0; j < dim; ++j) row[j] = scale[j] * nd(rng);
  return out;
}

}  // namespace

TEST_CASE("global observation") {
  const Grid g = grid();
  const Observation o = globalObservation(g, {{5, 5}, 0});
  CHECK(o.values.size() == 196);
  CHECK(std::count(o.values.begin(), o.values.end(), 10.0) == 1);
  CHECK(std::count(o.values.begin(), o.values.end(), 20.0) == 1);
  for (double v : o.values) CHECK((v == 0.0 || v == 10.0 || v == 20.0 || v == 30.0));

  const Observation p = globalObservation(g, {{5, 6}, 0});
  int diff = 0;
  for (std::size_t i = 0; i < o.values.size(); ++i) diff += o.values[i] != p.values[i];
  CHECK(diff == 2);
}

TEST_CASE("goal-conditioned observation") {
  const Grid g = grid({{CellKind::SolidObstacle, {5, 7}}});
  const Observation o = goalConditionedObservation(g, {{5, 5}, 0}, 5);
  REQUIRE(o.values.size() == 26);
  // Solid obstacle two columns right of the agent: patch row 2, column 4.
  CHECK(o.values[2 * 5 + 4] == 30.0);
  CHECK(o.values[2 * 5 + 2] == 10.0);
  CHECK(o.values.back() == doctest::Approx(std::hypot(6.0, 6.0)));

  const Observation atGoal = goalConditionedObservation(g, {g.goal(), 0}, 5);
  CHECK(atGoal.values.back() == 0.0);

  CHECK_THROWS_AS(goalConditionedObservation(g, {{5, 5}, 0}, 4), InvalidPatch);
}

TEST_CASE("patch cells beyond the grid read as blocked") {
  const Grid g = grid();
  const auto p = localPatch(g, {{2, 2}, 0}, 7, false);
  // Row 0 of a 7x7 patch centred on (2,2) covers world row -1.
  for (int c = 0; c < 7; ++c) CHECK(p[c] == 30.0);
}

TEST_CASE("goal beacon marks the clamped goal direction") {
  const Grid g = grid();
  const auto with = localPatch(g, {{5, 5}, 0}, 5, true);
  const auto without = localPatch(g, {{5, 5}, 0}, 5, false);
  CHECK(with[4 * 5 + 4] == 20.0);
  CHECK(without[4 * 5 + 4] == 0.0);
}

TEST_CASE("goal-conditioned observation is translation covariant") {
  const Grid a = grid({{CellKind::SolidObstacle, {5, 6}}}, {2, 2}, {8, 9});
  const Grid b = grid({{CellKind::SolidObstacle, {7, 7}}}, {4, 3}, {10, 10});
  const Observation oa = goalConditionedObservation(a, {{4, 5}, 0}, 3);
  const Observation ob = goalConditionedObservation(b, {{6, 6}, 0}, 3);
  CHECK(oa.values == ob.values);
}

TEST_CASE("partial-global observation") {
  const Grid g = grid({{CellKind::SolidObstacle, {9, 9}}});
  SeenMask seen(g.side());
  const AgentState start{{2, 2}, 0};
  seen.reveal(start.position, 5);
  const Observation first = partialGlobalObservation(g, start, 5, seen);
  CHECK(first.values.size() == 196 + 25);
  CHECK(first.values[9 * 14 + 9] == 0.0);

  seen.reveal({8, 8}, 5);
  const Observation later = partialGlobalObservation(g, {{3, 3}, 1}, 5, seen);
  CHECK(later.values[9 * 14 + 9] == 30.0);

  const Grid open = grid();
  SeenMask none(open.side());
  const AgentState s{{6, 6}, 0};
  const Observation pg = partialGlobalObservation(open, s, 5, none);
  auto expected = globalObservation(open, s).values;
  const auto patch = localPatch(open, s, 5, true);
  expected.insert(expected.end(), patch.begin(), patch.end());
  CHECK(pg.values == expected);

  CHECK_THROWS_AS(partialGlobalObservation(open, s, 5, SeenMask(10)), MaskShapeMismatch);
}

TEST_CASE("observation dimension contracts") {
  for (int L : {5, 10, 20})
    for (int patch : {3, 5}) {
      if (patch >= L) continue;
      ScenarioSpec s;
      s.L = L;
      s.start = {2, 2};
      s.goal = {L + 1, L + 1};
      const Grid g = Grid::build(s);
      SeenMask seen(g.side());
      for (ObservationKind k : {ObservationKind::GlobalVisibility, ObservationKind::GoalConditioned,
                                ObservationKind::PartialGlobal, ObservationKind::Visual}) {
        ObservationSpec spec{k, patch, true, true};
        CHECK(buildObservation(spec, g, {{2, 2}, 0}, seen).values.size() == spec.length(L));
      }
    }
}

TEST_CASE("costmap layers") {
  const Grid g = grid({{CellKind::SolidObstacle, {5, 6}}});
  const AgentState s{{5, 5}, 0};
  const Costmap c0 = buildCostmap(g, s, 5, 2.0, 0.0);
  for (std::size_t i = 0; i < c0.combined.size(); ++i) CHECK(c0.combined[i] == 2.0 * c0.scan[i]);

  const Costmap c = buildCostmap(g, s, 5, 1.0, 0.05);
  for (std::size_t i = 0; i < c.combined.size(); ++i) CHECK(c.combined[i] == 1.0 * c.scan[i] + 0.05 * c.distance[i]);

  // Centred on the goal the distance layer is rotation symmetric.
  const Costmap d = buildCostmap(g, {g.goal(), 0}, 3, 0.0, 1.0);
  CHECK(d.combined[4] == 0.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(d.combined[i * 3 + j] == doctest::Approx(d.combined[j * 3 + (2 - i)]));

  // The obstacle dominates when alpha1 exceeds alpha2 times the largest distance.
  const Costmap e = buildCostmap(g, s, 3, 1.0, 0.1);
  const double maxD = *std::max_element(e.distance.begin(), e.distance.end());
  REQUIRE(1.0 > 0.1 * maxD);
  const auto argmax = std::max_element(e.combined.begin(), e.combined.end()) - e.combined.begin();
  CHECK(argmax == 1 * 3 + 2);

  std::ostringstream csv;
  writeCostmapCsv(c, csv);
  CHECK(csv.str().rfind("row,col,scan,distance,combined\n", 0) == 0);
}

TEST_CASE("PCA basics") {
  // Points on a line: one component reconstructs them exactly.
  std::vector<std::vector<double>> line;
  for (int i = 0; i < 10; ++i) line.push_back({1.0 + 2.0 * i, -1.0 + 0.5 * i, 3.0 - i});
  const PcaModel m = pcaFit(line, 1);
  for (const auto& x : line) {
    const auto s = pcaScores(m, x);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(m.mean[j] + s[0] * m.components[0][j] - x[j]) < 1e-8);
  }

  std::mt19937_64 rng(3);
  const auto samples = randomSamples(rng, 100, 9);
  const PcaModel p = pcaFit(samples, 5);
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b) {
      double dot = 0.0;
      for (int j = 0; j < 9; ++j) dot += p.components[a][j] * p.components[b][j];
      CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) < 1e-8);
    }
  Costmap meanMap;
  meanMap.patch = 3;
  meanMap.combined = p.mean;
  const Observation proj = pcaProject(p, meanMap, 3.5);
  REQUIRE(proj.values.size() == 6);
  for (int i = 0; i < 5; ++i) CHECK(std::abs(proj.values[i]) < 1e-8);
  CHECK(proj.values[5] == 3.5);

  const auto eig = oracle::covarianceEigenvalues(samples);
  double top5 = 0.0;
  for (int i = 0; i < 5; ++i) top5 += eig[i];
  CHECK(std::abs(p.explainedVariance() - top5) < 1e-6);
  CHECK(oracle::largestPrincipalAngle(p.components, oracle::topComponents(samples, 5)) < 1e-6);

  CHECK_THROWS_AS(pcaFit(std::vector<std::vector<double>>(4, {1.0, 2.0}), 1), DegenerateData);
  CHECK_THROWS_AS(pcaFit(samples, 10), BadParam);
}

TEST_CASE("PCA preserves inner products up to the discarded variance") {
  std::mt19937_64 rng(5);
  const auto samples = randomSamples(rng, 60, 8);
  const int k = 4;
  const PcaModel m = pcaFit(samples, k);
  double discarded = 0.0;
  for (std::size_t i = k; i < m.eigenvalues.size(); ++i) discarded += m.eigenvalues[i];
  // Sum of squared residual norms equals (n-1) * discarded variance.
  double residual = 0.0;
  for (const auto& x : samples) {
    const auto s = pcaScores(m, x);
    double full = 0.0, kept = 0.0;
    for (int j = 0; j < m.dim; ++j) full += (x[j] - m.mean[j]) * (x[j] - m.mean[j]);
    for (double v : s) kept += v * v;
    residual += full - kept;
  }
  CHECK(residual == doctest::Approx(discarded * (samples.size() - 1)).epsilon(1e-9));
}

TEST_CASE("PCA model round-trips through text") {
  std::mt19937_64 rng(9);
  const PcaModel m = pcaFit(randomSamples(rng, 30, 6), 3);
  std::stringstream io;
  savePca(m, io);
  const PcaModel r = loadPca(io);
  CHECK(r.k == m.k);
  CHECK(r.mean == m.mean);
  CHECK(r.components == m.components);
  std::istringstream junk("nope");
  CHECK_THROWS_AS(loadPca(junk), FormatError);
}

TEST_CASE("observation kinds parse from names and aliases") {
  CHECK(parseKind("goal") == ObservationKind::GoalConditioned);
  CHECK(parseKind("global_visibility") == ObservationKind::GlobalVisibility);
  CHECK(parseKind(kindName(ObservationKind::PartialGlobal)) == ObservationKind::PartialGlobal);
  CHECK_THROWS_AS(parseKind("sonar"), FormatError);
}
