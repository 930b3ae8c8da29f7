#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rmnav {

enum class CellKind : std::uint8_t {
  Empty,
  Wall,
  SolidObstacle,
  PliableObstacle,
  DeceptiveObstacle,
  Goal,
};

// Integer codes are the only wire representation of an action.
enum class Action : int { Up = 0, Right = 1, Down = 2, Left = 3 };

inline constexpr int kNumActions = 4;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::Up, Action::Right, Action::Down, Action::Left};

constexpr int toCode(Action a) { return static_cast<int>(a); }
bool isActionCode(int code);
/// Throws std::invalid_argument for codes outside 0..3.
Action actionFromCode(int code);
std::string_view actionName(Action a);

struct Cell {
  int row = 0;
  int col = 0;
  auto operator<=>(const Cell&) const = default;
};

Cell moved(Cell c, Action a);
int chebyshev(Cell a, Cell b);
int manhattan(Cell a, Cell b);
double euclidean(Cell a, Cell b);

// Observation codes for the tabular encodings.
inline constexpr double kCodeEmpty = 0.0;
inline constexpr double kCodeAgent = 10.0;
inline constexpr double kCodeGoal = 20.0;
inline constexpr double kCodeBlocked = 30.0;

double observationCode(CellKind kind);
bool isObstacle(CellKind kind);  // solid, pliable or deceptive
bool isPassable(CellKind kind);  // what the dynamics let the agent enter

struct ObstacleSpec {
  CellKind kind = CellKind::SolidObstacle;
  Cell at;
};

struct ScenarioSpec {
  std::string name = "scenario";
  int L = 10;
  Cell start;
  Cell goal;
  std::vector<ObstacleSpec> obstacles;
  std::optional<bool> baselineSolvable;
};

// (L+4)x(L+4) world: a two-cell ring of Wall around an L x L central region.
// Immutable once built.
class Grid {
 public:
  static Grid build(const ScenarioSpec& spec);

  int L() const { return L_; }
  int side() const { return L_ + 4; }
  Cell start() const { return start_; }
  Cell goal() const { return goal_; }
  const std::string& name() const { return name_; }

  bool inBounds(Cell c) const;
  bool inCentral(Cell c) const;
  CellKind at(Cell c) const;
  std::vector<Cell> obstacleCells() const;

  // Step cap for episodes on this grid.
  int maxSteps() const { return 4 * L_ * L_; }

 private:
  Grid() = default;
  int L_ = 0;
  Cell start_;
  Cell goal_;
  std::string name_;
  std::vector<CellKind> cells_;
};

struct AgentState {
  Cell position;
  int t = 0;
  bool operator==(const AgentState&) const = default;
};

enum class StepEvent {
  Moved,
  BlockedByWall,
  Collision,
  PassedThroughPliable,
  PassedThroughDeceptive,
  ReachedGoal,
};
std::string_view stepEventName(StepEvent e);

struct StepOutcome {
  AgentState next;
  StepEvent event = StepEvent::Moved;
};

/// Four-neighbour dynamics. Walls are no-ops, solid obstacles are
/// collisions (position unchanged), pliable and deceptive cells are entered.
StepOutcome step(const Grid& grid, const AgentState& state, Action action);

// Pixel rendering ----------------------------------------------------------

inline constexpr int kImageSide = 100;

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
  std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
};

std::uint8_t grayLevel(CellKind kind);
inline constexpr std::uint8_t kAgentGray = 192;
inline constexpr std::uint8_t kMarginGray = 0;

int cellBlockSize(int side);
Image renderImage(const Grid& grid, const AgentState& state);
void writePgm(const Image& image, std::ostream& out);

// Scenario files -----------------------------------------------------------

ScenarioSpec parseScenario(std::istream& in);
ScenarioSpec loadScenario(const std::filesystem::path& path);
std::string formatScenario(const ScenarioSpec& spec);

// Breadth-first reachability over the true grid. Solid obstacles and walls
// are always impassable; deceptive (and pliable) cells only when allowed.
std::optional<int> bfsDistance(const Grid& grid, Cell from, Cell to, bool deceptivePassable);

}  // namespace rmnav
