#include "rmnav/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rmnav/errors.hpp"
#include "rmnav/rng.hpp"

namespace rmnav {

static_assert(std::endian::native == std::endian::little, "model files are written as little-endian doubles");

namespace {

constexpr int kPoolFactor = 4;
constexpr int kPooledSide = kImageSide / kPoolFactor;

struct Trace {
  std::vector<std::vector<double>> acts;   // acts[0] is the input
  std::vector<std::vector<double>> deriv;  // d(act)/d(pre) per hidden layer
  Probs probs{};
};

void softmaxInPlace(std::span<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

}  // namespace

// PolicyMember ---------------------------------------------------------------

PolicyMember::PolicyMember(int inputDim, Architecture arch, std::uint64_t seed)
    : inputDim_(inputDim), arch_(std::move(arch)), seed_(seed) {
  if (inputDim < 1) throw DimensionMismatch("policy input dimension must be positive");
  if (arch_.dropout < 0.0 || arch_.dropout >= 1.0) throw BadParam("dropout rate must be in [0, 1)");
  for (int w : arch_.hidden)
    if (w < 1) throw BadParam("hidden widths must be positive");
  if (arch_.poolVisual) {
    if (inputDim < kImageSide * kImageSide) throw DimensionMismatch("visual pooling needs a 100x100 image prefix");
    featureDim_ = kPooledSide * kPooledSide + (inputDim - kImageSide * kImageSide);
  } else {
    featureDim_ = inputDim;
  }
  layout();
  mean_.assign(featureDim_, 0.0);
  scale_.assign(featureDim_, 1.0);

  std::mt19937_64 rng(deriveSeed(seed, 0x5eed));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    const bool last = l + 1 == layers_.size();
    std::normal_distribution<double> init(0.0, std::sqrt((last ? 1.0 : 2.0) / L.in));
    for (std::size_t i = 0; i < static_cast<std::size_t>(L.in) * L.out; ++i) theta_[L.w + i] = init(rng);
  }
}

void PolicyMember::layout() {
  layers_.clear();
  std::size_t offset = 0;
  int in = featureDim_;
  std::vector<int> widths = arch_.hidden;
  widths.push_back(kNumActions);
  for (int out : widths) {
    LayerView v{in, out, offset, offset + static_cast<std::size_t>(in) * out};
    offset = v.b + static_cast<std::size_t>(out);
    layers_.push_back(v);
    in = out;
  }
  theta_.assign(offset, 0.0);
}

std::vector<double> PolicyMember::rawFeatures(std::span<const double> obs) const {
  if (static_cast<int>(obs.size()) != inputDim_)
    throw DimensionMismatch("observation length " + std::to_string(obs.size()) + " != policy input " +
                            std::to_string(inputDim_));
  if (!arch_.poolVisual) return {obs.begin(), obs.end()};
  std::vector<double> out(static_cast<std::size_t>(featureDim_), 0.0);
  constexpr double norm = 1.0 / (kPoolFactor * kPoolFactor);
  for (int r = 0; r < kImageSide; ++r)
    for (int c = 0; c < kImageSide; ++c)
      out[static_cast<std::size_t>(r / kPoolFactor) * kPooledSide + c / kPoolFactor] += obs[static_cast<std::size_t>(r) * kImageSide + c] * norm;
  std::copy(obs.begin() + kImageSide * kImageSide, obs.end(), out.begin() + kPooledSide * kPooledSide);
  return out;
}

std::vector<double> PolicyMember::features(std::span<const double> obs) const {
  auto f = rawFeatures(obs);
  for (int i = 0; i < featureDim_; ++i) f[i] = (f[i] - mean_[i]) / scale_[i];
  return f;
}

void PolicyMember::fitStandardizer(std::span<const std::vector<double>> rows) {
  mean_.assign(featureDim_, 0.0);
  std::vector<double> sq(featureDim_, 0.0);
  for (const auto& r : rows)
    for (int i = 0; i < featureDim_; ++i) mean_[i] += r[i];
  const double n = static_cast<double>(std::max<std::size_t>(rows.size(), 1));
  for (double& m : mean_) m /= n;
  for (const auto& r : rows)
    for (int i = 0; i < featureDim_; ++i) sq[i] += (r[i] - mean_[i]) * (r[i] - mean_[i]);
  scale_.resize(featureDim_);
  for (int i = 0; i < featureDim_; ++i) scale_[i] = std::max(std::sqrt(sq[i] / n), arch_.scaleFloor);
}

void PolicyMember::setStandardizer(std::vector<double> mean, std::vector<double> scale) {
  if (static_cast<int>(mean.size()) != featureDim_ || static_cast<int>(scale.size()) != featureDim_)
    throw DimensionMismatch("standardizer size mismatch");
  mean_ = std::move(mean);
  scale_ = std::move(scale);
}

void PolicyMember::setParameters(std::vector<double> theta) {
  if (theta.size() != theta_.size()) throw DimensionMismatch("parameter count mismatch");
  theta_ = std::move(theta);
}

namespace {

// Shared forward pass; fills `trace` when given (training), otherwise only
// produces probabilities.
template <class Layers>
Probs runForward(const Layers& layers, std::span<const double> theta, std::span<const double> feat, double dropout,
                 std::mt19937_64* rng, Trace* trace) {
  std::vector<double> in(feat.begin(), feat.end());
  if (trace) {
    trace->acts.assign(1, in);
    trace->deriv.clear();
  }
  const bool drop = rng != nullptr && dropout > 0.0;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    std::vector<double> z(static_cast<std::size_t>(L.out));
    for (int o = 0; o < L.out; ++o) {
      const double* w = theta.data() + L.w + static_cast<std::size_t>(o) * L.in;
      double acc = theta[L.b + o];
      for (int i = 0; i < L.in; ++i) acc += w[i] * in[i];
      z[o] = acc;
    }
    if (l + 1 == layers.size()) {
      softmaxInPlace(z);
      Probs p{};
      std::copy(z.begin(), z.end(), p.begin());
      if (trace) trace->probs = p;
      return p;
    }
    std::vector<double> d(z.size());
    for (std::size_t o = 0; o < z.size(); ++o) {
      double m = z[o] > 0.0 ? 1.0 : 0.0;
      if (drop) m *= u01(*rng) < dropout ? 0.0 : 1.0 / (1.0 - dropout);
      d[o] = m;
      z[o] = z[o] <= 0.0 ? 0.0 : z[o] * m;  // NaN passes through
    }
    if (trace) {
      trace->acts.push_back(z);
      trace->deriv.push_back(std::move(d));
    }
    in = std::move(z);
  }
  return {};
}

}  // namespace

Probs PolicyMember::forward(std::span<const double> feat, std::mt19937_64* dropoutRng) const {
  return runForward(layers_, theta_, feat, arch_.dropout, dropoutRng, nullptr);
}

Probs PolicyMember::predict(std::span<const double> obs) const { return forward(features(obs), nullptr); }

Probs PolicyMember::predictStochastic(std::span<const double> obs, std::mt19937_64& rng) const {
  return forward(features(obs), &rng);
}

double PolicyMember::lossAndGradient(std::span<const std::vector<double>> feats, std::span<const int> actions,
                                     std::span<const std::size_t> batch, std::span<double> grad,
                                     std::mt19937_64* dropoutRng) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  Trace tr;
  for (std::size_t idx : batch) {
    runForward(layers_, theta_, feats[idx], arch_.dropout, dropoutRng, &tr);
    const int y = actions[idx];
    loss -= std::log(std::max(tr.probs[y], 1e-300));
    std::vector<double> delta(tr.probs.begin(), tr.probs.end());
    delta[y] -= 1.0;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const auto& L = layers_[l];
      const auto& a = tr.acts[l];
      for (int o = 0; o < L.out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        double* g = grad.data() + L.w + static_cast<std::size_t>(o) * L.in;
        for (int i = 0; i < L.in; ++i) g[i] += d * a[i];
        grad[L.b + o] += d;
      }
      if (l == 0) break;
      const auto& dv = tr.deriv[l - 1];
      std::vector<double> prev(static_cast<std::size_t>(L.in), 0.0);
      for (int o = 0; o < L.out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* w = theta_.data() + L.w + static_cast<std::size_t>(o) * L.in;
        for (int i = 0; i < L.in; ++i) prev[i] += w[i] * d;
      }
      for (int i = 0; i < L.in; ++i) prev[i] *= dv[i];
      delta = std::move(prev);
    }
  }
  const double n = static_cast<double>(batch.size());
  for (double& g : grad) g /= n;
  return loss / n;
}

double PolicyMember::meanNll(std::span<const std::vector<double>> feats, std::span<const int> actions) const {
  double loss = 0.0;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const Probs p = forward(feats[i], nullptr);
    loss -= std::log(std::max(p[actions[i]], 1e-300));
  }
  return feats.empty() ? 0.0 : loss / static_cast<double>(feats.size());
}

// Training -------------------------------------------------------------------

PolicyMember trainMember(const DemonstrationSet& demos, std::uint64_t seed, const TrainHyper& hyper,
                         TrainReport* report) {
  if (demos.trajectories.empty() || demos.sampleCount() == 0) throw BadParam("empty demonstration set");
  if (hyper.epochs < 0 || hyper.batchSize < 1 || !(hyper.learningRate > 0)) throw BadParam("bad training hyper-parameters");
  const int inputDim = static_cast<int>(demos.trajectories.front().observations.front().size());
  for (const auto& t : demos.trajectories)
    for (const auto& o : t.observations)
      if (static_cast<int>(o.size()) != inputDim)
        throw DimensionMismatch("demonstration observations have differing lengths (" + std::to_string(o.size()) +
                                " vs " + std::to_string(inputDim) + ")");

  std::mt19937_64 rng(seed);
  PolicyMember member(inputDim, hyper.arch, seed);

  const std::size_t n = demos.trajectories.size();
  std::vector<std::vector<double>> feats;
  std::vector<int> actions;
  for (std::size_t draw = 0; draw < n; ++draw) {
    const auto& t = demos.trajectories[uniformIndex(rng, n)];
    for (std::size_t s = 0; s < t.size(); ++s) {
      feats.push_back(member.rawFeatures(t.observations[s]));
      actions.push_back(t.actions[s]);
    }
  }
  member.fitStandardizer(feats);
  for (auto& f : feats)
    for (int i = 0; i < member.featureDim(); ++i) f[i] = (f[i] - member.featureMean()[i]) / member.featureScale()[i];

  const double initial = member.meanNll(feats, actions);
  std::vector<std::size_t> order(feats.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(member.parameters().size());
  auto theta = member.parameters();
  const bool dropout = hyper.arch.dropout > 0.0;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(hyper.batchSize)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(hyper.batchSize));
      const double loss = member.lossAndGradient(feats, actions, std::span(order).subspan(b, e - b), grad,
                                                 dropout ? &rng : nullptr);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << b / hyper.batchSize << " (seed " << seed
            << ", lr " << hyper.learningRate << ")";
        throw NonFiniteLoss(msg.str());
      }
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= hyper.learningRate * grad[i];
    }
  }
  const double final = member.meanNll(feats, actions);
  if (!std::isfinite(final)) throw NonFiniteLoss("non-finite loss after training (seed " + std::to_string(seed) + ")");
  if (report) *report = {initial, final, feats.size()};
  return member;
}

void EnsemblePolicy::validate() const {
  if (members.empty()) throw BadParam("policy has no members");
  if (mode == PolicyMode::Ensemble && K() < 2) throw BadParam("ensemble mode needs K >= 2");
  if (mode == PolicyMode::McDropout && (K() != 1 || dropoutSamples < 2))
    throw BadParam("MC-dropout mode needs exactly one member and M >= 2");
  for (const auto& m : members)
    if (m.inputDim() != members.front().inputDim()) throw DimensionMismatch("members disagree on input dimension");
}

namespace {

EnsemblePolicy shell(const DemonstrationSet& demos, int K, PolicyMode mode) {
  if (K < 1) throw BadParam("need at least one member");
  EnsemblePolicy p;
  p.mode = mode;
  p.L = demos.params.L;
  p.observation = demos.params.observation;
  p.members.resize(static_cast<std::size_t>(K));
  p.reports.resize(static_cast<std::size_t>(K));
  return p;
}

}  // namespace

EnsemblePolicy trainEnsemble(const DemonstrationSet& demos, int K, std::uint64_t seed, const TrainHyper& hyper) {
  EnsemblePolicy p = shell(demos, K, PolicyMode::Ensemble);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < K; ++k) {
    try {
      p.members[k] = trainMember(demos, deriveSeed(seed, static_cast<std::uint64_t>(k)), hyper, &p.reports[k]);
    } catch (...) {
#pragma omp critical(rmnav_train_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  p.validate();
  return p;
}

EnsemblePolicy trainEnsembleSerial(const DemonstrationSet& demos, int K, std::uint64_t seed, const TrainHyper& hyper) {
  EnsemblePolicy p = shell(demos, K, PolicyMode::Ensemble);
  for (int k = 0; k < K; ++k)
    p.members[k] = trainMember(demos, deriveSeed(seed, static_cast<std::uint64_t>(k)), hyper, &p.reports[k]);
  p.validate();
  return p;
}

EnsemblePolicy trainDropoutPolicy(const DemonstrationSet& demos, int M, std::uint64_t seed, const TrainHyper& hyper) {
  EnsemblePolicy p = shell(demos, 1, PolicyMode::McDropout);
  p.dropoutSamples = M;
  p.members[0] = trainMember(demos, deriveSeed(seed, 0), hyper, &p.reports[0]);
  p.validate();
  return p;
}

// Prediction -----------------------------------------------------------------

MemberProbs predictMembers(const EnsemblePolicy& policy, std::span<const double> obs, std::mt19937_64& rng) {
  const int rows = policy.rows();
  MemberProbs out(static_cast<std::size_t>(rows));
  if (policy.mode == PolicyMode::Ensemble) {
    // Dimension errors surface before entering the parallel region.
    const auto feat0 = policy.members.front().features(obs);
    out[0] = policy.members.front().forward(feat0, nullptr);
#pragma omp parallel for schedule(static)
    for (int k = 1; k < rows; ++k) out[k] = policy.members[k].predict(obs);
    return out;
  }
  const std::uint64_t base = rng();
  const auto feat = policy.members.front().features(obs);
#pragma omp parallel for schedule(static)
  for (int m = 0; m < rows; ++m) {
    std::mt19937_64 passRng(deriveSeed(base, static_cast<std::uint64_t>(m)));
    out[m] = policy.members.front().forward(feat, &passRng);
  }
  return out;
}

MemberProbs predictMembersSerial(const EnsemblePolicy& policy, std::span<const double> obs, std::mt19937_64& rng) {
  const int rows = policy.rows();
  MemberProbs out(static_cast<std::size_t>(rows));
  if (policy.mode == PolicyMode::Ensemble) {
    for (int k = 0; k < rows; ++k) out[k] = policy.members[k].predict(obs);
    return out;
  }
  const std::uint64_t base = rng();
  const auto feat = policy.members.front().features(obs);
  for (int m = 0; m < rows; ++m) {
    std::mt19937_64 passRng(deriveSeed(base, static_cast<std::uint64_t>(m)));
    out[m] = policy.members.front().forward(feat, &passRng);
  }
  return out;
}

MemberProbs predictMembers(const EnsemblePolicy& policy, const Observation& obs, std::mt19937_64& rng) {
  if (obs.kind != policy.observation.kind)
    throw DimensionMismatch("observation kind " + std::string(kindName(obs.kind)) + " does not match policy kind " +
                            std::string(kindName(policy.observation.kind)));
  return predictMembers(policy, std::span<const double>(obs.values), rng);
}

Probs meanProbs(const MemberProbs& rows) {
  Probs m{};
  for (const auto& r : rows)
    for (int a = 0; a < kNumActions; ++a) m[a] += r[a];
  for (double& v : m) v /= static_cast<double>(rows.size());
  return m;
}

Action act(const MemberProbs& rows) {
  const Probs m = meanProbs(rows);
  int best = 0;
  for (int a = 1; a < kNumActions; ++a)
    if (m[a] > m[best]) best = a;
  return static_cast<Action>(best);
}

Action act(const EnsemblePolicy& policy, const Observation& obs, std::mt19937_64& rng) {
  return act(predictMembers(policy, obs, rng));
}

// Model files ------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'R', 'M', 'N', 'A', 'V', 'P', 'O', 'L'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("truncated policy file");
  return v;
}

void putDoubles(std::ostream& out, std::span<const double> v) {
  put<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> getDoubles(std::istream& in, std::size_t expected) {
  const auto n = get<std::uint64_t>(in);
  if (n != expected) throw FormatError("policy file block has unexpected length");
  std::vector<double> v(n);
  if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double))))
    throw FormatError("truncated policy file");
  return v;
}

}  // namespace

void savePolicy(const EnsemblePolicy& policy, std::ostream& out) {
  policy.validate();
  const auto& arch = policy.members.front().architecture();
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, policy.mode == PolicyMode::Ensemble ? 0 : 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(policy.K()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(policy.dropoutSamples));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(policy.observation.kind));
  put<std::int32_t>(out, policy.L);
  put<std::int32_t>(out, policy.observation.patch);
  put<std::uint8_t>(out, policy.observation.goalBeacon ? 1 : 0);
  put<std::uint8_t>(out, policy.observation.visualDistance ? 1 : 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(policy.inputDim()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.hidden.size()));
  for (int w : arch.hidden) put<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  put<double>(out, arch.dropout);
  put<std::uint8_t>(out, arch.poolVisual ? 1 : 0);
  put<double>(out, arch.scaleFloor);
  for (const auto& m : policy.members) {
    put<std::uint64_t>(out, m.seed());
    putDoubles(out, m.featureMean());
    putDoubles(out, m.featureScale());
    putDoubles(out, m.parameters());
  }
}

EnsemblePolicy loadPolicy(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw FormatError("not a policy file");
  if (get<std::uint32_t>(in) != kVersion) throw FormatError("unsupported policy file version");
  EnsemblePolicy p;
  const auto mode = get<std::uint32_t>(in);
  if (mode > 1) throw FormatError("bad policy mode");
  p.mode = mode == 0 ? PolicyMode::Ensemble : PolicyMode::McDropout;
  const auto K = get<std::uint32_t>(in);
  p.dropoutSamples = static_cast<int>(get<std::uint32_t>(in));
  const auto kind = get<std::uint32_t>(in);
  if (kind > 3) throw FormatError("bad observation kind");
  p.observation.kind = static_cast<ObservationKind>(kind);
  p.L = get<std::int32_t>(in);
  p.observation.patch = get<std::int32_t>(in);
  p.observation.goalBeacon = get<std::uint8_t>(in) != 0;
  p.observation.visualDistance = get<std::uint8_t>(in) != 0;
  const auto inputDim = static_cast<int>(get<std::uint32_t>(in));
  Architecture arch;
  arch.hidden.resize(get<std::uint32_t>(in));
  for (int& w : arch.hidden) w = static_cast<int>(get<std::uint32_t>(in));
  arch.dropout = get<double>(in);
  arch.poolVisual = get<std::uint8_t>(in) != 0;
  arch.scaleFloor = get<double>(in);
  if (K == 0 || K > 100000) throw FormatError("bad member count");
  for (std::uint32_t k = 0; k < K; ++k) {
    const auto seed = get<std::uint64_t>(in);
    PolicyMember m(inputDim, arch, seed);
    auto mean = getDoubles(in, static_cast<std::size_t>(m.featureDim()));
    auto scale = getDoubles(in, static_cast<std::size_t>(m.featureDim()));
    m.setStandardizer(std::move(mean), std::move(scale));
    m.setParameters(getDoubles(in, m.parameters().size()));
    p.members.push_back(std::move(m));
  }
  p.validate();
  return p;
}

void savePolicy(const EnsemblePolicy& policy, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  savePolicy(policy, out);
}

EnsemblePolicy loadPolicy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open policy file " + path.string());
  return loadPolicy(in);
}

}  // namespace rmnav
