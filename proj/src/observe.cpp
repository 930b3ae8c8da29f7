#include "rmnav/observe.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>

#include "rmnav/errors.hpp"

namespace rmnav {

std::string_view kindName(ObservationKind kind) {
  switch (kind) {
    case ObservationKind::GlobalVisibility: return "global_visibility";
    case ObservationKind::GoalConditioned: return "goal_conditioned";
    case ObservationKind::PartialGlobal: return "partial_global";
    case ObservationKind::Visual: return "visual";
  }
  return "?";
}

ObservationKind parseKind(std::string_view text) {
  if (text == "global_visibility" || text == "global") return ObservationKind::GlobalVisibility;
  if (text == "goal_conditioned" || text == "goal") return ObservationKind::GoalConditioned;
  if (text == "partial_global" || text == "partial") return ObservationKind::PartialGlobal;
  if (text == "visual") return ObservationKind::Visual;
  throw FormatError("unknown observation kind '" + std::string(text) + "'");
}

std::size_t ObservationSpec::length(int L) const {
  const std::size_t side = static_cast<std::size_t>(L) + 4;
  const std::size_t p = static_cast<std::size_t>(patch) * patch;
  switch (kind) {
    case ObservationKind::GlobalVisibility: return side * side;
    case ObservationKind::GoalConditioned: return p + 1;
    case ObservationKind::PartialGlobal: return side * side + p;
    case ObservationKind::Visual: return kImageSide * kImageSide + (visualDistance ? 1 : 0);
  }
  return 0;
}

// SeenMask -----------------------------------------------------------------

bool SeenMask::seen(Cell c) const {
  if (c.row < 0 || c.col < 0 || c.row >= side_ || c.col >= side_) return false;
  return seen_[static_cast<std::size_t>(c.row) * side_ + c.col];
}

void SeenMask::reveal(Cell center, int patch) {
  const int h = patch / 2;
  for (int r = center.row - h; r <= center.row + h; ++r)
    for (int c = center.col - h; c <= center.col + h; ++c)
      if (r >= 0 && c >= 0 && r < side_ && c < side_) seen_[static_cast<std::size_t>(r) * side_ + c] = true;
}

std::size_t SeenMask::count() const { return static_cast<std::size_t>(std::count(seen_.begin(), seen_.end(), true)); }

// Observations -------------------------------------------------------------

void requireOddPatch(int patch) {
  if (patch < 1 || patch % 2 == 0) throw InvalidPatch("patch size must be odd and positive, got " + std::to_string(patch));
}

std::vector<double> localPatch(const Grid& grid, const AgentState& state, int patch, bool goalBeacon) {
  requireOddPatch(patch);
  if (patch >= grid.L()) throw InvalidPatch("patch size must be smaller than L");
  const int h = patch / 2;
  const Cell pos = state.position;
  std::vector<double> out(static_cast<std::size_t>(patch) * patch);
  for (int dr = -h; dr <= h; ++dr) {
    for (int dc = -h; dc <= h; ++dc) {
      const Cell c{pos.row + dr, pos.col + dc};
      out[static_cast<std::size_t>(dr + h) * patch + (dc + h)] = c == pos ? kCodeAgent : observationCode(grid.at(c));
    }
  }
  if (goalBeacon) {
    const int gr = grid.goal().row - pos.row;
    const int gc = grid.goal().col - pos.col;
    if (std::abs(gr) > h || std::abs(gc) > h) {
      const int br = std::clamp(gr, -h, h);
      const int bc = std::clamp(gc, -h, h);
      double& cell = out[static_cast<std::size_t>(br + h) * patch + (bc + h)];
      if (cell == kCodeEmpty) cell = kCodeGoal;
    }
  }
  return out;
}

Observation globalObservation(const Grid& grid, const AgentState& state) {
  const int side = grid.side();
  Observation obs{ObservationKind::GlobalVisibility, {}, {grid.L(), 0, 0}};
  obs.values.resize(static_cast<std::size_t>(side) * side);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c)
      obs.values[static_cast<std::size_t>(r) * side + c] = observationCode(grid.at({r, c}));
  obs.values[static_cast<std::size_t>(state.position.row) * side + state.position.col] = kCodeAgent;
  return obs;
}

Observation goalConditionedObservation(const Grid& grid, const AgentState& state, int patch, bool goalBeacon) {
  Observation obs{ObservationKind::GoalConditioned, localPatch(grid, state, patch, goalBeacon), {grid.L(), patch, 0}};
  obs.values.push_back(euclidean(state.position, grid.goal()));
  return obs;
}

Observation partialGlobalObservation(const Grid& grid, const AgentState& state, int patch, const SeenMask& seen,
                                     bool goalBeacon) {
  if (seen.side() != grid.side())
    throw MaskShapeMismatch("seen mask side " + std::to_string(seen.side()) + " != grid side " +
                            std::to_string(grid.side()));
  Observation obs = globalObservation(grid, state);
  obs.kind = ObservationKind::PartialGlobal;
  obs.meta.patch = patch;
  const int side = grid.side();
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c)
      if (isObstacle(grid.at({r, c})) && !seen.seen({r, c})) obs.values[static_cast<std::size_t>(r) * side + c] = kCodeEmpty;
  const auto local = localPatch(grid, state, patch, goalBeacon);
  obs.values.insert(obs.values.end(), local.begin(), local.end());
  return obs;
}

Observation visualObservation(const Grid& grid, const AgentState& state, bool withDistance) {
  const Image img = renderImage(grid, state);
  Observation obs{ObservationKind::Visual, std::vector<double>(img.pixels.begin(), img.pixels.end()), {grid.L(), 0, 0}};
  if (withDistance) obs.values.push_back(euclidean(state.position, grid.goal()));
  return obs;
}

Observation buildObservation(const ObservationSpec& spec, const Grid& grid, const AgentState& state,
                             const SeenMask& seen) {
  switch (spec.kind) {
    case ObservationKind::GlobalVisibility: return globalObservation(grid, state);
    case ObservationKind::GoalConditioned: return goalConditionedObservation(grid, state, spec.patch, spec.goalBeacon);
    case ObservationKind::PartialGlobal: return partialGlobalObservation(grid, state, spec.patch, seen, spec.goalBeacon);
    case ObservationKind::Visual: return visualObservation(grid, state, spec.visualDistance);
  }
  return {};
}

// Costmap ------------------------------------------------------------------

Costmap buildCostmap(const Grid& grid, const AgentState& state, int patch, double alpha1, double alpha2) {
  requireOddPatch(patch);
  if (alpha1 < 0 || alpha2 < 0) throw BadParam("costmap weights must be non-negative");
  const int h = patch / 2;
  Costmap cm;
  cm.patch = patch;
  cm.alpha1 = alpha1;
  cm.alpha2 = alpha2;
  const std::size_t n = static_cast<std::size_t>(patch) * patch;
  cm.scan.resize(n);
  cm.distance.resize(n);
  cm.combined.resize(n);
  for (int i = 0; i < patch; ++i) {
    for (int j = 0; j < patch; ++j) {
      const Cell world{state.position.row + i - h, state.position.col + j - h};
      const std::size_t at = static_cast<std::size_t>(i) * patch + j;
      cm.scan[at] = observationCode(grid.at(world)) == kCodeBlocked ? 1.0 : 0.0;
      cm.distance[at] = euclidean(world, grid.goal());
      cm.combined[at] = alpha1 * cm.scan[at] + alpha2 * cm.distance[at];
    }
  }
  return cm;
}

void writeCostmapCsv(const Costmap& costmap, std::ostream& out) {
  out << "row,col,scan,distance,combined\n";
  out << std::setprecision(17);
  for (int i = 0; i < costmap.patch; ++i)
    for (int j = 0; j < costmap.patch; ++j) {
      const std::size_t at = static_cast<std::size_t>(i) * costmap.patch + j;
      out << i << ',' << j << ',' << costmap.scan[at] << ',' << costmap.distance[at] << ',' << costmap.combined[at]
          << '\n';
    }
}

// PCA ----------------------------------------------------------------------

void symmetricEigen(std::vector<double> a, int n, std::vector<double>& values,
                    std::vector<std::vector<double>>& vectors) {
  auto A = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };
  std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
  auto V = [&](int i, int j) -> double& { return v[static_cast<std::size_t>(i) * n + j]; };
  for (int i = 0; i < n; ++i) V(i, i) = 1.0;

  double total = 0.0;
  for (double x : a) total += x * x;
  const double eps = 1e-30 * std::max(total, 1e-300);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
    if (off <= eps) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return A(x, x) > A(y, y); });
  values.assign(n, 0.0);
  vectors.assign(n, std::vector<double>(n));
  for (int r = 0; r < n; ++r) {
    const int col = order[r];
    values[r] = A(col, col);
    auto& vec = vectors[r];
    for (int k = 0; k < n; ++k) vec[k] = V(k, col);
    const auto big = std::max_element(vec.begin(), vec.end(), [](double x, double y) { return std::abs(x) < std::abs(y); });
    if (*big < 0)
      for (double& x : vec) x = -x;
  }
}

double PcaModel::explainedVariance() const {
  return std::accumulate(eigenvalues.begin(), eigenvalues.begin() + std::min<std::size_t>(k, eigenvalues.size()), 0.0);
}

PcaModel pcaFit(std::span<const std::vector<double>> samples, int k) {
  if (samples.size() < 2) throw BadParam("pcaFit needs at least 2 samples");
  const int dim = static_cast<int>(samples.front().size());
  for (const auto& s : samples)
    if (static_cast<int>(s.size()) != dim) throw DimensionMismatch("pcaFit samples have differing lengths");
  if (k < 1 || k > std::min<int>(static_cast<int>(samples.size()), dim))
    throw BadParam("pcaFit requires 1 <= k <= min(samples, dim)");
  const bool identical = std::all_of(samples.begin(), samples.end(), [&](const auto& s) { return s == samples.front(); });
  if (identical) throw DegenerateData("all PCA samples are identical");

  PcaModel model;
  model.k = k;
  model.dim = dim;
  model.mean.assign(dim, 0.0);
  for (const auto& s : samples)
    for (int j = 0; j < dim; ++j) model.mean[j] += s[j];
  for (double& m : model.mean) m /= static_cast<double>(samples.size());

  std::vector<double> cov(static_cast<std::size_t>(dim) * dim, 0.0);
  std::vector<double> centered(dim);
  for (const auto& s : samples) {
    for (int j = 0; j < dim; ++j) centered[j] = s[j] - model.mean[j];
    for (int i = 0; i < dim; ++i)
      for (int j = i; j < dim; ++j) cov[static_cast<std::size_t>(i) * dim + j] += centered[i] * centered[j];
  }
  const double denom = static_cast<double>(samples.size() - 1);
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j) {
      cov[static_cast<std::size_t>(i) * dim + j] /= denom;
      cov[static_cast<std::size_t>(j) * dim + i] = cov[static_cast<std::size_t>(i) * dim + j];
    }

  std::vector<std::vector<double>> vectors;
  symmetricEigen(std::move(cov), dim, model.eigenvalues, vectors);
  model.components.assign(vectors.begin(), vectors.begin() + k);
  return model;
}

std::vector<double> pcaScores(const PcaModel& model, std::span<const double> sample) {
  if (static_cast<int>(sample.size()) != model.dim)
    throw DimensionMismatch("sample length " + std::to_string(sample.size()) + " != PCA dim " + std::to_string(model.dim));
  std::vector<double> out(model.k, 0.0);
  for (int c = 0; c < model.k; ++c)
    for (int j = 0; j < model.dim; ++j) out[c] += (sample[j] - model.mean[j]) * model.components[c][j];
  return out;
}

Observation pcaProject(const PcaModel& model, const Costmap& costmap, double goalDistance) {
  Observation obs{ObservationKind::GoalConditioned, pcaScores(model, costmap.combined), {0, costmap.patch, model.k}};
  obs.values.push_back(goalDistance);
  return obs;
}

void savePca(const PcaModel& model, std::ostream& out) {
  out << "RMNAV-PCA 1\n" << model.k << ' ' << model.dim << '\n' << std::setprecision(17);
  auto row = [&](const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
    out << '\n';
  };
  row(model.mean);
  for (const auto& c : model.components) row(c);
  row(model.eigenvalues);
}

PcaModel loadPca(std::istream& in) {
  std::string magic;
  int version = 0;
  PcaModel model;
  if (!(in >> magic >> version) || magic != "RMNAV-PCA" || version != 1) throw FormatError("not a PCA model file");
  if (!(in >> model.k >> model.dim) || model.k < 1 || model.dim < model.k) throw FormatError("bad PCA header");
  auto row = [&](std::vector<double>& v) {
    v.resize(model.dim);
    for (double& x : v)
      if (!(in >> x)) throw FormatError("truncated PCA model file");
  };
  row(model.mean);
  model.components.resize(model.k);
  for (auto& c : model.components) row(c);
  row(model.eigenvalues);
  return model;
}

}  // namespace rmnav
