#include "rmnav/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <ostream>

#include "rmnav/errors.hpp"

namespace rmnav {

namespace {

constexpr double kLogFloor = 1e-12;

void requireSimplex(std::span<const double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= -1e-9)) throw NotSimplex("negative or non-finite probability entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw NotSimplex("probabilities sum to " + std::to_string(sum));
}

double entropyUnchecked(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(std::clamp(v, kLogFloor, 1.0));
  return h;
}

}  // namespace

double entropy(std::span<const double> p) {
  requireSimplex(p);
  return entropyUnchecked(p);
}

double entropy(const Probs& p) { return entropy(std::span<const double>(p)); }

UncertaintyRecord decompose(const MemberProbs& rows, int t) {
  if (rows.size() < 2) throw BadParam("decomposition needs at least two member rows");
  UncertaintyRecord rec;
  rec.t = t;
  rec.memberProbs = rows;
  double expected = 0.0;
  for (const auto& r : rows) expected += entropy(r);
  rec.expectedEntropy = expected / static_cast<double>(rows.size());
  const Probs mean = meanProbs(rows);
  rec.totalEntropy = entropyUnchecked(mean);
  rec.mutualInfo = rec.totalEntropy - rec.expectedEntropy;
  return rec;
}

std::vector<UncertaintyRecord> decomposeBatch(std::span<const MemberProbs> batch) {
  std::vector<UncertaintyRecord> out(batch.size());
  std::exception_ptr failure;
  const long n = static_cast<long>(batch.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    try {
      out[i] = decompose(batch[i], static_cast<int>(i));
    } catch (...) {
#pragma omp critical(rmnav_decompose_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<UncertaintyRecord> decomposeBatchSerial(std::span<const MemberProbs> batch) {
  std::vector<UncertaintyRecord> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(decompose(batch[i], static_cast<int>(i)));
  return out;
}

std::vector<double> uncertaintySeries(std::span<const UncertaintyRecord> log) {
  std::vector<double> out;
  out.reserve(log.size());
  for (const auto& r : log) out.push_back(r.mutualInfo);
  return out;
}

void writeSeriesCsv(std::span<const UncertaintyRecord> log, std::ostream& out) {
  out << "t,I,H,Ebar\n" << std::setprecision(17);
  for (const auto& r : log) out << r.t << ',' << r.mutualInfo << ',' << r.totalEntropy << ',' << r.expectedEntropy << '\n';
}

}  // namespace rmnav
