#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "rmnav/gridworld.hpp"
#include "rmnav/observe.hpp"

namespace rmnav {

/// Unit-cost Dijkstra distance field from `goal` over cells the expert is
/// willing to enter (Solid, Deceptive, Pliable and Wall are impassable).
/// Unreached cells hold -1.
std::vector<int> expertDistanceField(const Grid& grid, Cell goal);

/// Every action lying on some shortest path from `from` to the grid goal.
std::vector<Action> optimalActions(const Grid& grid, const std::vector<int>& field, Cell from);

/// One shortest-path action; ties broken uniformly at random with `rng`.
Action shortestPathPolicy(const Grid& grid, const AgentState& state, std::mt19937_64& rng);

struct Trajectory {
  std::string scenarioId;
  std::uint64_t seed = 0;
  Cell start;
  Cell goal;
  std::vector<std::vector<double>> observations;
  std::vector<int> actions;
  std::size_t size() const { return actions.size(); }
};

struct DemoParams {
  int L = 10;
  ObservationSpec observation;
};

struct DemonstrationSet {
  ObservationKind kind = ObservationKind::GoalConditioned;
  DemoParams params;
  std::vector<Trajectory> trajectories;
  std::size_t sampleCount() const;
  std::size_t inputDim() const;
};

/// Rolls the expert out on `grid` from `start`, recording observations.
Trajectory expertTrajectory(const Grid& grid, Cell start, const ObservationSpec& obs, std::mt19937_64& rng);

/// N demonstrations on obstacle-free L x L grids with random start/goal pairs
/// (distinct, Euclidean separation >= L/2). Deterministic given `seed`.
DemonstrationSet generateDemos(int N, const DemoParams& params, std::uint64_t seed);

void writeDemos(const DemonstrationSet& demos, std::ostream& out);
DemonstrationSet readDemos(std::istream& in);
void saveDemos(const DemonstrationSet& demos, const std::filesystem::path& path);
DemonstrationSet loadDemos(const std::filesystem::path& path);

}  // namespace rmnav
