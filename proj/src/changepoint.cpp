#include "rmnav/changepoint.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "rmnav/errors.hpp"

namespace rmnav {

namespace {
constexpr double kPruneWeight = 1e-15;
}

void DetectorConfig::validate() const {
  if (!(hazard > 0.0 && hazard < 1.0)) throw BadParam("hazard must lie in (0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw BadParam("tau must lie in (0, 1]");
  if (r0 < 1) throw BadParam("r0 must be at least 1");
  if (rMax < 10) throw BadParam("Rmax must be at least 10");
  if (rMax <= r0) throw BadParam("Rmax must exceed r0");
  if (!(prior.kappa0 > 0 && prior.alpha0 > 0 && prior.beta0 > 0) || !std::isfinite(prior.mu0))
    throw BadParam("prior needs kappa0, alpha0, beta0 > 0 and finite mu0");
}

void RunStats::push(double x) {
  n += 1.0;
  const double d = x - mean;
  mean += d / n;
  m2 += d * (x - mean);
}

double logPredictive(const NormalGammaPrior& prior, const RunStats& run, double x) {
  const double kn = prior.kappa0 + run.n;
  const double mun = (prior.kappa0 * prior.mu0 + run.n * run.mean) / kn;
  const double an = prior.alpha0 + 0.5 * run.n;
  const double bn = prior.beta0 + 0.5 * run.m2 +
                    prior.kappa0 * run.n * (run.mean - prior.mu0) * (run.mean - prior.mu0) / (2.0 * kn);
  const double nu = 2.0 * an;
  const double scale2 = bn * (kn + 1.0) / (an * kn);
  const double z = (x - mun) * (x - mun) / (nu * scale2);
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi * scale2) -
         0.5 * (nu + 1.0) * std::log1p(z);
}

RunLengthPosterior::RunLengthPosterior(const DetectorConfig& config) : config_(config) {
  config_.validate();
  reset();
}

void RunLengthPosterior::reset() {
  weights_.assign(1, 1.0);
  runs_.assign(1, RunStats{});
  history_.clear();
  t_ = 0;
  lastDiscarded_ = 0.0;
}

TriggerDecision RunLengthPosterior::update(double x) {
  if (!std::isfinite(x)) throw NonFinite("detector input must be finite");
  const double h = config_.hazard;
  const std::size_t cap = static_cast<std::size_t>(config_.rMax);
  const std::size_t old = weights_.size();

  // Log-domain terms, then one shared shift before exponentiating.
  std::vector<double> logGrowth(old);
  std::vector<double> logChange(old);
  const double logPrior = logPredictive(config_.prior, RunStats{}, x);
  for (std::size_t r = 0; r < old; ++r) {
    const double lw = weights_[r] > 0.0 ? std::log(weights_[r]) : -INFINITY;
    logGrowth[r] = lw + std::log1p(-h) + logPredictive(config_.prior, runs_[r], x);
    logChange[r] = lw + std::log(h) + logPrior;
  }
  double shift = -INFINITY;
  for (std::size_t r = 0; r < old; ++r) shift = std::max({shift, logGrowth[r], logChange[r]});

  const std::size_t size = std::min(old + 1, cap + 1);
  std::vector<double> next(size, 0.0);
  std::vector<RunStats> nextRuns(size);
  std::vector<double> contribution(size, -1.0);
  for (std::size_t r = 0; r < old; ++r) {
    const std::size_t to = std::min(r + 1, cap);
    const double w = std::exp(logGrowth[r] - shift);
    next[to] += w;
    // A run pushed past the cap merges into the cap slot; keep the stats of
    // whichever contributor carries more weight.
    if (w > contribution[to]) {
      contribution[to] = w;
      nextRuns[to] = runs_[r];
      nextRuns[to].push(x);
    }
  }
  double change = 0.0;
  for (std::size_t r = 0; r < old; ++r) change += std::exp(logChange[r] - shift);
  next[1] += change;
  if (contribution[1] < 0.0) {
    nextRuns[1] = RunStats{};
    nextRuns[1].push(x);
  }

  double total = std::accumulate(next.begin(), next.end(), 0.0);
  for (double& w : next) w /= total;
  lastDiscarded_ = 0.0;
  while (next.size() > 2 && next.back() < kPruneWeight) {
    lastDiscarded_ += next.back();
    next.pop_back();
    nextRuns.pop_back();
  }
  if (lastDiscarded_ > 0.0) {
    total = std::accumulate(next.begin(), next.end(), 0.0);
    for (double& w : next) w /= total;
  }
  weights_ = std::move(next);
  runs_ = std::move(nextRuns);

  ++t_;
  history_.push_back(x);
  while (history_.size() > cap + 1) history_.pop_front();

  TriggerDecision d;
  d.t = t_;
  if (t_ <= config_.r0) return d;
  const std::size_t limit = std::min<std::size_t>(static_cast<std::size_t>(config_.r0), weights_.size() - 1);
  std::size_t best = 1;
  for (std::size_t r = 1; r <= limit; ++r) {
    d.shortRunMass += weights_[r];
    if (weights_[r] > weights_[best]) best = r;
  }
  d.mapRunLength = static_cast<int>(best);
  if (d.shortRunMass < config_.tau) return d;
  const std::size_t before = history_.size() - best;
  d.meanAfter = std::accumulate(history_.end() - static_cast<long>(best), history_.end(), 0.0) / static_cast<double>(best);
  d.meanBefore = std::accumulate(history_.begin(), history_.begin() + static_cast<long>(before), 0.0) /
                 static_cast<double>(before);
  d.fired = d.meanAfter > d.meanBefore;
  return d;
}

RunLengthPosterior initDetector(const DetectorConfig& config) { return RunLengthPosterior(config); }

void resetAfterFeedback(RunLengthPosterior& detector) { detector.reset(); }

}  // namespace rmnav
