#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "rmnav/policy.hpp"

namespace rmnav {

// Predictive uncertainty of one step split into its two parts (nats):
//   totalEntropy     H = entropy of the member-mean distribution
//   expectedEntropy  E = mean of the per-member entropies   (aleatoric)
//   mutualInfo       I = H - E                               (epistemic)
struct UncertaintyRecord {
  int t = 0;
  MemberProbs memberProbs;
  double totalEntropy = 0.0;
  double expectedEntropy = 0.0;
  double mutualInfo = 0.0;
};

/// -sum p ln p with 0 ln 0 = 0. Throws NotSimplex when |sum - 1| > 1e-6 or
/// any entry < -1e-9.
double entropy(std::span<const double> p);
double entropy(const Probs& p);

UncertaintyRecord decompose(const MemberProbs& rows, int t = 0);

/// Batch decomposition, parallel over matrices.
std::vector<UncertaintyRecord> decomposeBatch(std::span<const MemberProbs> batch);
std::vector<UncertaintyRecord> decomposeBatchSerial(std::span<const MemberProbs> batch);

std::vector<double> uncertaintySeries(std::span<const UncertaintyRecord> log);

/// CSV with header `t,I,H,Ebar`.
void writeSeriesCsv(std::span<const UncertaintyRecord> log, std::ostream& out);

}  // namespace rmnav
