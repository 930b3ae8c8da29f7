#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "rmnav/expert.hpp"
#include "rmnav/gridworld.hpp"
#include "rmnav/observe.hpp"

namespace rmnav {

using Probs = std::array<double, kNumActions>;
using MemberProbs = std::vector<Probs>;  // one row per member (or dropout pass)

struct Architecture {
  std::vector<int> hidden{64, 64};
  double dropout = 0.0;
  // Visual inputs: the 100x100 image prefix is reduced to 25x25 by 4x4 mean
  // pooling before the dense layers; trailing values pass through.
  bool poolVisual = false;
  // Lower bound on the per-feature standardisation scale.
  double scaleFloor = 1.0;
};

struct TrainHyper {
  int epochs = 200;
  int batchSize = 32;
  double learningRate = 0.05;
  Architecture arch;
};

struct TrainReport {
  double initialNll = 0.0;
  double finalNll = 0.0;
  std::size_t samples = 0;
};

// A softmax classifier from observation vectors to action probabilities:
// standardised features -> ReLU dense layers (with optional dropout) -> softmax.
// All weights live in one flat parameter vector.
class PolicyMember {
 public:
  PolicyMember() = default;
  PolicyMember(int inputDim, Architecture arch, std::uint64_t seed);

  int inputDim() const { return inputDim_; }
  int featureDim() const { return featureDim_; }
  const Architecture& architecture() const { return arch_; }
  std::uint64_t seed() const { return seed_; }

  std::span<double> parameters() { return theta_; }
  std::span<const double> parameters() const { return theta_; }
  std::span<const double> featureMean() const { return mean_; }
  std::span<const double> featureScale() const { return scale_; }

  /// Pooling only (no standardisation).
  std::vector<double> rawFeatures(std::span<const double> obs) const;
  /// Pooled and standardised network input.
  std::vector<double> features(std::span<const double> obs) const;
  void fitStandardizer(std::span<const std::vector<double>> rawFeatureRows);

  Probs predict(std::span<const double> obs) const;
  /// One forward pass with dropout active; `rng` drives the masks.
  Probs predictStochastic(std::span<const double> obs, std::mt19937_64& rng) const;

  // Feature-space training primitives. `batch` rows are standardised
  // features; the gradient is of the mean negative log-likelihood.
  Probs forward(std::span<const double> feat, std::mt19937_64* dropoutRng) const;
  double lossAndGradient(std::span<const std::vector<double>> feats, std::span<const int> actions,
                         std::span<const std::size_t> batch, std::span<double> grad,
                         std::mt19937_64* dropoutRng) const;
  double meanNll(std::span<const std::vector<double>> feats, std::span<const int> actions) const;

  // Serialization helpers.
  void setStandardizer(std::vector<double> mean, std::vector<double> scale);
  void setParameters(std::vector<double> theta);

 private:
  struct LayerView {
    int in = 0, out = 0;
    std::size_t w = 0, b = 0;  // offsets into theta_
  };
  void layout();

  int inputDim_ = 0;
  int featureDim_ = 0;
  Architecture arch_;
  std::uint64_t seed_ = 0;
  std::vector<LayerView> layers_;
  std::vector<double> theta_;
  std::vector<double> mean_;
  std::vector<double> scale_;
};

/// Bootstrap-resamples trajectories (with replacement, same count) and fits
/// one member by minibatch SGD on the log-likelihood of the expert actions.
PolicyMember trainMember(const DemonstrationSet& demos, std::uint64_t seed, const TrainHyper& hyper,
                         TrainReport* report = nullptr);

enum class PolicyMode { Ensemble, McDropout };

struct EnsemblePolicy {
  PolicyMode mode = PolicyMode::Ensemble;
  int dropoutSamples = 30;  // M, McDropout only
  int L = 10;
  ObservationSpec observation;
  std::vector<PolicyMember> members;
  std::vector<TrainReport> reports;  // not serialized

  int K() const { return static_cast<int>(members.size()); }
  std::size_t inputDim() const { return members.empty() ? 0 : static_cast<std::size_t>(members.front().inputDim()); }
  int rows() const { return mode == PolicyMode::Ensemble ? K() : dropoutSamples; }
  void validate() const;
};

/// K members, each with its own derived seed and bootstrap. Members are
/// trained in parallel (OpenMP); the result is identical to the serial path.
EnsemblePolicy trainEnsemble(const DemonstrationSet& demos, int K, std::uint64_t seed, const TrainHyper& hyper);
EnsemblePolicy trainEnsembleSerial(const DemonstrationSet& demos, int K, std::uint64_t seed, const TrainHyper& hyper);
/// Single member trained with dropout p; predictions use M stochastic passes.
EnsemblePolicy trainDropoutPolicy(const DemonstrationSet& demos, int M, std::uint64_t seed, const TrainHyper& hyper);

/// K x 4 (Ensemble) or M x 4 (McDropout) matrix. McDropout draws one value
/// from `rng` and derives every pass's mask stream from it.
MemberProbs predictMembers(const EnsemblePolicy& policy, std::span<const double> obs, std::mt19937_64& rng);
MemberProbs predictMembersSerial(const EnsemblePolicy& policy, std::span<const double> obs, std::mt19937_64& rng);
MemberProbs predictMembers(const EnsemblePolicy& policy, const Observation& obs, std::mt19937_64& rng);

Probs meanProbs(const MemberProbs& rows);
/// Argmax of the member-mean; ties go to the lowest action code.
Action act(const MemberProbs& rows);
Action act(const EnsemblePolicy& policy, const Observation& obs, std::mt19937_64& rng);

void savePolicy(const EnsemblePolicy& policy, std::ostream& out);
EnsemblePolicy loadPolicy(std::istream& in);
void savePolicy(const EnsemblePolicy& policy, const std::filesystem::path& path);
EnsemblePolicy loadPolicy(const std::filesystem::path& path);

}  // namespace rmnav
