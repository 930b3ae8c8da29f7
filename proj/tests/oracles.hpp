#pragma once

// Independent reference implementations used to check the library.

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rmnav/changepoint.hpp"
#include "rmnav/gridworld.hpp"
#include "rmnav/policy.hpp"

namespace oracle {

using rmnav::Cell;
using rmnav::Grid;

/// Plain BFS over cells for which `passable` holds.
std::optional<int> bfs(const Grid& grid, Cell from, Cell to, const std::function<bool(rmnav::CellKind)>& passable);

/// H(mean) - mean(H) evaluated in 50-digit decimal arithmetic.
double mutualInformation(const rmnav::MemberProbs& rows);
double entropy(std::span<const double> p);

/// Top-k eigenvectors (columns, length dim) of the sample covariance from a
/// dense self-adjoint eigensolver.
std::vector<std::vector<double>> topComponents(std::span<const std::vector<double>> samples, int k);
std::vector<double> covarianceEigenvalues(std::span<const std::vector<double>> samples);

/// Largest principal angle (radians) between span(a) and span(b); rows are
/// basis vectors, each set orthonormal.
double largestPrincipalAngle(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b);

/// Exact run-length posterior after all of `xs`, by enumerating every
/// segmentation (2^(n-1) of them). Index r is P(the last run holds r points).
std::vector<double> runLengthPosterior(std::span<const double> xs, const rmnav::DetectorConfig& config);

/// First step (1-based) at which the exact posterior meets the firing rule,
/// or 0 if none within xs.
int firstFiring(std::span<const double> xs, const rmnav::DetectorConfig& config);

/// Central finite-difference gradient of the member's mean NLL on `batch`.
std::vector<double> finiteDifferenceGradient(rmnav::PolicyMember member, std::span<const std::vector<double>> feats,
                                             std::span<const int> actions, std::span<const std::size_t> batch,
                                             double step);

}  // namespace oracle
