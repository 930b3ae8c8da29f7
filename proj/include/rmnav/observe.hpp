#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rmnav/gridworld.hpp"

namespace rmnav {

enum class ObservationKind { GlobalVisibility, GoalConditioned, PartialGlobal, Visual };

std::string_view kindName(ObservationKind kind);
/// Accepts the canonical names plus the short CLI aliases global|goal|partial|visual.
ObservationKind parseKind(std::string_view text);

struct ObservationMeta {
  int L = 0;
  int patch = 0;  // L'
  int k = 0;      // PCA length, 0 when unused
};

struct Observation {
  ObservationKind kind = ObservationKind::GoalConditioned;
  std::vector<double> values;
  ObservationMeta meta;
};

// How a policy sees the world. Shared by demo generation, training and the
// runner so the three always agree.
struct ObservationSpec {
  ObservationKind kind = ObservationKind::GoalConditioned;
  int patch = 5;
  bool goalBeacon = true;
  bool visualDistance = true;  // Visual: append agent->goal distance

  std::size_t length(int L) const;
};

// Cells ever covered by a local patch during the current episode.
class SeenMask {
 public:
  SeenMask() = default;
  SeenMask(int side) : side_(side), seen_(static_cast<std::size_t>(side) * side, false) {}

  int side() const { return side_; }
  bool seen(Cell c) const;
  void reveal(Cell center, int patch);
  std::size_t count() const;

 private:
  int side_ = 0;
  std::vector<bool> seen_;
};

void requireOddPatch(int patch);

/// L'xL' agent-centred window, row-major; cells outside the grid read as 30.
/// With `goalBeacon`, a goal outside the window is marked (code 20) on the
/// window cell found by clamping the goal offset into the window, if Empty.
std::vector<double> localPatch(const Grid& grid, const AgentState& state, int patch, bool goalBeacon);

Observation globalObservation(const Grid& grid, const AgentState& state);
Observation goalConditionedObservation(const Grid& grid, const AgentState& state, int patch,
                                       bool goalBeacon = true);
Observation partialGlobalObservation(const Grid& grid, const AgentState& state, int patch, const SeenMask& seen,
                                     bool goalBeacon = true);
Observation visualObservation(const Grid& grid, const AgentState& state, bool withDistance);

Observation buildObservation(const ObservationSpec& spec, const Grid& grid, const AgentState& state,
                             const SeenMask& seen);

// Costmap ------------------------------------------------------------------

struct Costmap {
  int patch = 0;
  double alpha1 = 1.0;
  double alpha2 = 0.05;
  std::vector<double> scan;      // 1 where the window cell reads 30
  std::vector<double> distance;  // Euclidean cell distance to the goal
  std::vector<double> combined;  // alpha1*scan + alpha2*distance
};

inline constexpr double kDefaultAlpha1 = 1.0;
inline constexpr double kDefaultAlpha2 = 0.05;

Costmap buildCostmap(const Grid& grid, const AgentState& state, int patch, double alpha1 = kDefaultAlpha1,
                     double alpha2 = kDefaultAlpha2);
void writeCostmapCsv(const Costmap& costmap, std::ostream& out);

// PCA ----------------------------------------------------------------------

struct PcaModel {
  int k = 0;
  int dim = 0;
  std::vector<double> mean;
  std::vector<std::vector<double>> components;  // k rows of length dim, orthonormal
  std::vector<double> eigenvalues;              // all dim eigenvalues, descending
  double explainedVariance() const;              // sum of the top k
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Returns eigenvalues
/// in descending order; eigenvectors are the matching rows of `vectors`, each
/// with its largest-magnitude entry positive.
void symmetricEigen(std::vector<double> matrix, int n, std::vector<double>& values,
                    std::vector<std::vector<double>>& vectors);

PcaModel pcaFit(std::span<const std::vector<double>> samples, int k);
std::vector<double> pcaScores(const PcaModel& model, std::span<const double> sample);
Observation pcaProject(const PcaModel& model, const Costmap& costmap, double goalDistance);

void savePca(const PcaModel& model, std::ostream& out);
PcaModel loadPca(std::istream& in);

}  // namespace rmnav
