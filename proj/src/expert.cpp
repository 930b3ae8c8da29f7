#include "rmnav/expert.hpp"

#include <fstream>
#include <functional>
#include <queue>

#include <nlohmann/json.hpp>

#include "rmnav/errors.hpp"
#include "rmnav/rng.hpp"

namespace rmnav {

namespace {

bool expertCanEnter(CellKind k) { return k == CellKind::Empty || k == CellKind::Goal; }

}  // namespace

std::vector<int> expertDistanceField(const Grid& grid, Cell goal) {
  const int side = grid.side();
  auto idx = [side](Cell c) { return static_cast<std::size_t>(c.row) * side + c.col; };
  std::vector<int> dist(static_cast<std::size_t>(side) * side, -1);
  using Entry = std::pair<int, int>;  // (distance, flat index)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  dist[idx(goal)] = 0;
  open.push({0, static_cast<int>(idx(goal))});
  while (!open.empty()) {
    const auto [d, flat] = open.top();
    open.pop();
    if (d > dist[static_cast<std::size_t>(flat)]) continue;
    const Cell c{flat / side, flat % side};
    for (Action a : kAllActions) {
      const Cell n = moved(c, a);
      if (!grid.inBounds(n) || !expertCanEnter(grid.at(n))) continue;
      const int nd = d + 1;
      int& slot = dist[idx(n)];
      if (slot < 0 || nd < slot) {
        slot = nd;
        open.push({nd, static_cast<int>(idx(n))});
      }
    }
  }
  return dist;
}

std::vector<Action> optimalActions(const Grid& grid, const std::vector<int>& field, Cell from) {
  const int side = grid.side();
  const int here = field[static_cast<std::size_t>(from.row) * side + from.col];
  std::vector<Action> out;
  if (here <= 0) return out;
  for (Action a : kAllActions) {
    const Cell n = moved(from, a);
    if (!grid.inBounds(n)) continue;
    if (field[static_cast<std::size_t>(n.row) * side + n.col] == here - 1) out.push_back(a);
  }
  return out;
}

Action shortestPathPolicy(const Grid& grid, const AgentState& state, std::mt19937_64& rng) {
  const auto field = expertDistanceField(grid, grid.goal());
  const auto options = optimalActions(grid, field, state.position);
  if (options.empty()) throw Unreachable("goal unreachable from current cell");
  return options[uniformIndex(rng, options.size())];
}

std::size_t DemonstrationSet::sampleCount() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.size();
  return n;
}

std::size_t DemonstrationSet::inputDim() const { return params.observation.length(params.L); }

Trajectory expertTrajectory(const Grid& grid, Cell start, const ObservationSpec& obs, std::mt19937_64& rng) {
  const auto field = expertDistanceField(grid, grid.goal());
  Trajectory traj;
  traj.scenarioId = grid.name();
  traj.start = start;
  traj.goal = grid.goal();
  AgentState state{start, 0};
  SeenMask seen(grid.side());
  seen.reveal(start, obs.patch);
  while (state.position != grid.goal()) {
    if (state.t >= grid.maxSteps()) throw Unreachable("expert exceeded step cap");
    const auto options = optimalActions(grid, field, state.position);
    if (options.empty()) throw Unreachable("goal unreachable from start");
    const Action a = options[uniformIndex(rng, options.size())];
    traj.observations.push_back(buildObservation(obs, grid, state, seen).values);
    traj.actions.push_back(toCode(a));
    state = step(grid, state, a).next;
    seen.reveal(state.position, obs.patch);
  }
  return traj;
}

DemonstrationSet generateDemos(int N, const DemoParams& params, std::uint64_t seed) {
  if (N < 1) throw BadParam("need at least one demonstration");
  DemonstrationSet set;
  set.kind = params.observation.kind;
  set.params = params;
  set.trajectories.resize(static_cast<std::size_t>(N));
  const int L = params.L;
  std::vector<Cell> central;
  for (int r = 2; r < L + 2; ++r)
    for (int c = 2; c < L + 2; ++c) central.push_back({r, c});

  // Each trajectory owns a derived stream, so the loop order is irrelevant.
  for (int i = 0; i < N; ++i) {
    std::mt19937_64 rng(deriveSeed(seed, static_cast<std::uint64_t>(i)));
    Cell start, goal;
    do {
      start = central[uniformIndex(rng, central.size())];
      goal = central[uniformIndex(rng, central.size())];
    } while (start == goal || euclidean(start, goal) < L / 2.0);
    ScenarioSpec spec;
    spec.name = "demo-" + std::to_string(i);
    spec.L = L;
    spec.start = start;
    spec.goal = goal;
    const Grid grid = Grid::build(spec);
    Trajectory t = expertTrajectory(grid, start, params.observation, rng);
    t.seed = deriveSeed(seed, static_cast<std::uint64_t>(i));
    set.trajectories[static_cast<std::size_t>(i)] = std::move(t);
  }
  return set;
}

// JSON-Lines persistence ----------------------------------------------------

void writeDemos(const DemonstrationSet& demos, std::ostream& out) {
  for (const auto& t : demos.trajectories) {
    nlohmann::json j;
    j["scenario"] = t.scenarioId;
    j["seed"] = t.seed;
    j["kind"] = kindName(demos.kind);
    j["L"] = demos.params.L;
    j["patch"] = demos.params.observation.patch;
    j["goal_beacon"] = demos.params.observation.goalBeacon;
    j["visual_distance"] = demos.params.observation.visualDistance;
    j["start"] = {t.start.row, t.start.col};
    j["goal"] = {t.goal.row, t.goal.col};
    j["observations"] = t.observations;
    j["actions"] = t.actions;
    out << j.dump() << '\n';
  }
}

DemonstrationSet readDemos(std::istream& in) {
  DemonstrationSet set;
  std::string line;
  bool first = true;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      ObservationSpec obs;
      obs.kind = parseKind(j.at("kind").get<std::string>());
      obs.patch = j.at("patch").get<int>();
      obs.goalBeacon = j.value("goal_beacon", true);
      obs.visualDistance = j.value("visual_distance", true);
      const int L = j.at("L").get<int>();
      if (first) {
        set.kind = obs.kind;
        set.params = {L, obs};
        first = false;
      } else if (obs.kind != set.kind || L != set.params.L || obs.patch != set.params.observation.patch) {
        throw FormatError("demo line " + std::to_string(lineNo) + " mixes observation kinds or grid parameters");
      }
      Trajectory t;
      t.scenarioId = j.at("scenario").get<std::string>();
      t.seed = j.at("seed").get<std::uint64_t>();
      t.start = {j.at("start")[0].get<int>(), j.at("start")[1].get<int>()};
      t.goal = {j.at("goal")[0].get<int>(), j.at("goal")[1].get<int>()};
      t.observations = j.at("observations").get<std::vector<std::vector<double>>>();
      t.actions = j.at("actions").get<std::vector<int>>();
      if (t.observations.size() != t.actions.size())
        throw FormatError("demo line " + std::to_string(lineNo) + ": observation/action count mismatch");
      for (int a : t.actions)
        if (!isActionCode(a)) throw FormatError("demo line " + std::to_string(lineNo) + ": bad action code");
      set.trajectories.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("demo line " + std::to_string(lineNo) + ": " + e.what());
    }
  }
  return set;
}

void saveDemos(const DemonstrationSet& demos, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  writeDemos(demos, out);
}

DemonstrationSet loadDemos(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return readDemos(in);
}

}  // namespace rmnav
