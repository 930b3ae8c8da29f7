#include "rmnav/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "rmnav/errors.hpp"

namespace rmnav {

bool isActionCode(int code) { return code >= 0 && code < kNumActions; }

Action actionFromCode(int code) {
  if (!isActionCode(code)) throw BadParam("action code out of range: " + std::to_string(code));
  return static_cast<Action>(code);
}

std::string_view actionName(Action a) {
  switch (a) {
    case Action::Up: return "up";
    case Action::Right: return "right";
    case Action::Down: return "down";
    case Action::Left: return "left";
  }
  return "?";
}

Cell moved(Cell c, Action a) {
  switch (a) {
    case Action::Up: return {c.row - 1, c.col};
    case Action::Right: return {c.row, c.col + 1};
    case Action::Down: return {c.row + 1, c.col};
    case Action::Left: return {c.row, c.col - 1};
  }
  return c;
}

int chebyshev(Cell a, Cell b) { return std::max(std::abs(a.row - b.row), std::abs(a.col - b.col)); }
int manhattan(Cell a, Cell b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); }
double euclidean(Cell a, Cell b) { return std::hypot(double(a.row - b.row), double(a.col - b.col)); }

double observationCode(CellKind kind) {
  switch (kind) {
    case CellKind::Empty: return kCodeEmpty;
    case CellKind::Goal: return kCodeGoal;
    case CellKind::Wall:
    case CellKind::SolidObstacle:
    case CellKind::PliableObstacle:
    case CellKind::DeceptiveObstacle: return kCodeBlocked;
  }
  return kCodeBlocked;
}

bool isObstacle(CellKind kind) {
  return kind == CellKind::SolidObstacle || kind == CellKind::PliableObstacle ||
         kind == CellKind::DeceptiveObstacle;
}

bool isPassable(CellKind kind) { return kind != CellKind::Wall && kind != CellKind::SolidObstacle; }

// Grid ---------------------------------------------------------------------

Grid Grid::build(const ScenarioSpec& spec) {
  if (spec.L < 3) throw InvalidSpec("L must be at least 3, got " + std::to_string(spec.L));
  Grid g;
  g.L_ = spec.L;
  g.name_ = spec.name;
  const int side = g.side();
  g.cells_.assign(static_cast<std::size_t>(side) * side, CellKind::Empty);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c)
      if (!g.inCentral({r, c})) g.cells_[static_cast<std::size_t>(r) * side + c] = CellKind::Wall;

  auto describe = [](Cell c) { return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")"; };
  if (!g.inCentral(spec.start)) throw InvalidSpec("start " + describe(spec.start) + " outside central region");
  if (!g.inCentral(spec.goal)) throw InvalidSpec("goal " + describe(spec.goal) + " outside central region");
  if (spec.start == spec.goal) throw InvalidSpec("start and goal coincide");

  for (const auto& o : spec.obstacles) {
    if (!isObstacle(o.kind)) throw InvalidSpec("obstacle entry with non-obstacle kind");
    if (!g.inCentral(o.at)) throw InvalidSpec("obstacle " + describe(o.at) + " outside central region");
    if (o.at == spec.start) throw InvalidSpec("start " + describe(o.at) + " lies on an obstacle");
    if (o.at == spec.goal) throw InvalidSpec("goal " + describe(o.at) + " lies on an obstacle");
    g.cells_[static_cast<std::size_t>(o.at.row) * side + o.at.col] = o.kind;
  }
  g.start_ = spec.start;
  g.goal_ = spec.goal;
  g.cells_[static_cast<std::size_t>(spec.goal.row) * side + spec.goal.col] = CellKind::Goal;
  return g;
}

bool Grid::inBounds(Cell c) const { return c.row >= 0 && c.col >= 0 && c.row < side() && c.col < side(); }

bool Grid::inCentral(Cell c) const { return c.row >= 2 && c.col >= 2 && c.row < L_ + 2 && c.col < L_ + 2; }

CellKind Grid::at(Cell c) const {
  if (!inBounds(c)) return CellKind::Wall;
  return cells_[static_cast<std::size_t>(c.row) * side() + c.col];
}

std::vector<Cell> Grid::obstacleCells() const {
  std::vector<Cell> out;
  for (int r = 0; r < side(); ++r)
    for (int c = 0; c < side(); ++c)
      if (isObstacle(at({r, c}))) out.push_back({r, c});
  return out;
}

// Dynamics -----------------------------------------------------------------

std::string_view stepEventName(StepEvent e) {
  switch (e) {
    case StepEvent::Moved: return "moved";
    case StepEvent::BlockedByWall: return "blocked_by_wall";
    case StepEvent::Collision: return "collision";
    case StepEvent::PassedThroughPliable: return "passed_pliable";
    case StepEvent::PassedThroughDeceptive: return "passed_deceptive";
    case StepEvent::ReachedGoal: return "reached_goal";
  }
  return "?";
}

StepOutcome step(const Grid& grid, const AgentState& state, Action action) {
  const Cell target = moved(state.position, action);
  StepOutcome out;
  out.next = {state.position, state.t + 1};
  switch (grid.at(target)) {
    case CellKind::Wall: out.event = StepEvent::BlockedByWall; return out;
    case CellKind::SolidObstacle: out.event = StepEvent::Collision; return out;
    case CellKind::PliableObstacle: out.event = StepEvent::PassedThroughPliable; break;
    case CellKind::DeceptiveObstacle: out.event = StepEvent::PassedThroughDeceptive; break;
    case CellKind::Goal: out.event = StepEvent::ReachedGoal; break;
    case CellKind::Empty: out.event = StepEvent::Moved; break;
  }
  out.next.position = target;
  return out;
}

// Rendering ----------------------------------------------------------------

std::uint8_t grayLevel(CellKind kind) {
  switch (kind) {
    case CellKind::Empty: return 255;
    case CellKind::PliableObstacle: return 64;
    case CellKind::Goal: return 128;
    case CellKind::Wall:
    case CellKind::SolidObstacle:
    case CellKind::DeceptiveObstacle: return 0;
  }
  return 0;
}

int cellBlockSize(int side) { return kImageSide / side; }

Image renderImage(const Grid& grid, const AgentState& state) {
  const int side = grid.side();
  if (side > kImageSide) throw GridTooLarge("grid side " + std::to_string(side) + " exceeds 100 pixels");
  const int block = cellBlockSize(side);
  Image img{kImageSide, kImageSide, std::vector<std::uint8_t>(kImageSide * kImageSide, kMarginGray)};
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const Cell cell{r, c};
      const std::uint8_t level = cell == state.position ? kAgentGray : grayLevel(grid.at(cell));
      for (int pr = r * block; pr < (r + 1) * block; ++pr)
        std::fill_n(img.pixels.begin() + pr * kImageSide + c * block, block, level);
    }
  }
  return img;
}

void writePgm(const Image& image, std::ostream& out) {
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

// Scenario files -----------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

Cell parseCell(const std::string& text, int lineNo) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw FormatError("line " + std::to_string(lineNo) + ": expected <row>,<col>");
  try {
    std::size_t used = 0;
    const std::string rs = trim(text.substr(0, comma));
    const std::string cs = trim(text.substr(comma + 1));
    const int r = std::stoi(rs, &used);
    if (used != rs.size()) throw std::invalid_argument(rs);
    const int c = std::stoi(cs, &used);
    if (used != cs.size()) throw std::invalid_argument(cs);
    return {r, c};
  } catch (const std::logic_error&) {
    throw FormatError("line " + std::to_string(lineNo) + ": bad coordinate '" + text + "'");
  }
}

}  // namespace

ScenarioSpec parseScenario(std::istream& in) {
  ScenarioSpec spec;
  bool haveL = false, haveStart = false, haveGoal = false;
  std::string raw;
  int lineNo = 0;
  while (std::getline(in, raw)) {
    ++lineNo;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (const auto eq = line.find('='); eq != std::string::npos) {
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key == "L") {
        try {
          spec.L = std::stoi(value);
        } catch (const std::logic_error&) {
          throw FormatError("line " + std::to_string(lineNo) + ": bad L");
        }
        haveL = true;
      } else if (key == "start") {
        spec.start = parseCell(value, lineNo);
        haveStart = true;
      } else if (key == "goal") {
        spec.goal = parseCell(value, lineNo);
        haveGoal = true;
      } else if (key == "name") {
        spec.name = value;
      } else if (key == "baseline_solvable") {
        if (value != "true" && value != "false")
          throw FormatError("line " + std::to_string(lineNo) + ": baseline_solvable must be true|false");
        spec.baselineSolvable = value == "true";
      } else {
        throw FormatError("line " + std::to_string(lineNo) + ": unknown key '" + key + "'");
      }
      continue;
    }
    const auto space = line.find_first_of(" \t");
    if (space == std::string::npos) throw FormatError("line " + std::to_string(lineNo) + ": expected '<kind> <r>,<c>'");
    const std::string kind = line.substr(0, space);
    ObstacleSpec o;
    if (kind == "solid") o.kind = CellKind::SolidObstacle;
    else if (kind == "pliable") o.kind = CellKind::PliableObstacle;
    else if (kind == "deceptive") o.kind = CellKind::DeceptiveObstacle;
    else throw FormatError("line " + std::to_string(lineNo) + ": unknown obstacle kind '" + kind + "'");
    o.at = parseCell(trim(line.substr(space)), lineNo);
    spec.obstacles.push_back(o);
  }
  if (!haveL || !haveStart || !haveGoal) throw FormatError("scenario needs L=, start= and goal= headers");
  return spec;
}

ScenarioSpec loadScenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open scenario file " + path.string());
  ScenarioSpec spec = parseScenario(in);
  if (spec.name == "scenario") spec.name = path.stem().string();
  return spec;
}

std::string formatScenario(const ScenarioSpec& spec) {
  std::ostringstream out;
  out << "name=" << spec.name << '\n';
  out << "L=" << spec.L << '\n';
  out << "start=" << spec.start.row << ',' << spec.start.col << '\n';
  out << "goal=" << spec.goal.row << ',' << spec.goal.col << '\n';
  if (spec.baselineSolvable) out << "baseline_solvable=" << (*spec.baselineSolvable ? "true" : "false") << '\n';
  for (const auto& o : spec.obstacles) {
    const char* kind = o.kind == CellKind::SolidObstacle ? "solid" : o.kind == CellKind::PliableObstacle ? "pliable" : "deceptive";
    out << kind << ' ' << o.at.row << ',' << o.at.col << '\n';
  }
  return out.str();
}

std::optional<int> bfsDistance(const Grid& grid, Cell from, Cell to, bool deceptivePassable) {
  const int side = grid.side();
  std::vector<int> dist(static_cast<std::size_t>(side) * side, -1);
  auto idx = [side](Cell c) { return static_cast<std::size_t>(c.row) * side + c.col; };
  auto open = [&](Cell c) {
    const CellKind k = grid.at(c);
    if (k == CellKind::Wall || k == CellKind::SolidObstacle) return false;
    if (k == CellKind::DeceptiveObstacle || k == CellKind::PliableObstacle) return deceptivePassable;
    return true;
  };
  std::queue<Cell> frontier;
  dist[idx(from)] = 0;
  frontier.push(from);
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop();
    if (c == to) return dist[idx(c)];
    for (Action a : kAllActions) {
      const Cell n = moved(c, a);
      if (!grid.inBounds(n) || dist[idx(n)] >= 0 || !open(n)) continue;
      dist[idx(n)] = dist[idx(c)] + 1;
      frontier.push(n);
    }
  }
  return std::nullopt;
}

}  // namespace rmnav
