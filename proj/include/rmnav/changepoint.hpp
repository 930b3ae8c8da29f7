#pragma once

#include <deque>
#include <vector>

namespace rmnav {

// Normal-Gamma prior on the (mean, precision) of a run's Gaussian
// observation model.
struct NormalGammaPrior {
  double mu0 = 0.05;
  double kappa0 = 1.0;
  double alpha0 = 2.0;
  double beta0 = 0.001;
};

struct DetectorConfig {
  double hazard = 1.0 / 50.0;
  double tau = 0.9;  // short-run posterior mass needed to fire
  int r0 = 2;        // a run of length <= r0 counts as "just changed"
  int rMax = 500;
  NormalGammaPrior prior;
  void validate() const;
};

// Sufficient statistics of one run (Welford form).
struct RunStats {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;
  void push(double x);
};

/// Log density of the Student-t posterior predictive for a run.
double logPredictive(const NormalGammaPrior& prior, const RunStats& run, double x);

struct TriggerDecision {
  bool fired = false;
  int t = 0;                 // observations since the last reset
  int mapRunLength = 0;      // most probable run length among 1..r0
  double shortRunMass = 0.0;  // P(run length <= r0)
  double meanBefore = 0.0;   // mean of the observations preceding that run
  double meanAfter = 0.0;    // mean of the observations inside that run
};

// Online run-length posterior. weights()[r] is the probability that the
// current run holds the last r observations; r ranges over 0..min(t, rMax).
class RunLengthPosterior {
 public:
  explicit RunLengthPosterior(const DetectorConfig& config);

  TriggerDecision update(double x);
  void reset();

  const DetectorConfig& config() const { return config_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<RunStats>& runs() const { return runs_; }
  int t() const { return t_; }
  double lastDiscardedMass() const { return lastDiscarded_; }

 private:
  DetectorConfig config_;
  std::vector<double> weights_;
  std::vector<RunStats> runs_;
  std::deque<double> history_;
  int t_ = 0;
  double lastDiscarded_ = 0.0;
};

RunLengthPosterior initDetector(const DetectorConfig& config);
void resetAfterFeedback(RunLengthPosterior& detector);

}  // namespace rmnav
