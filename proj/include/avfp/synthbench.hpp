#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "avfp/catalog.hpp"
#include "avfp/feature_store.hpp"
#include "avfp/rng.hpp"

namespace avfp {

inline constexpr int kSinusoidsPerDim = 4;

// Motion signature of one synthetic identity: per dimension a sum of four
// sinusoids (frequencies in Hz), followed by an identity-specific mixing
// of the dimensions, plus white noise of level sigma.
struct IdentitySignature {
  Eigen::MatrixXd frequency;  // D x 4
  Eigen::MatrixXd phase;      // D x 4, radians
  Eigen::MatrixXd amplitude;  // D x 4
  Eigen::MatrixXd mixing;     // D x D
  Eigen::VectorXd rest;       // D, rest pose the motion oscillates around
  double sigma = 0.0;

  int dim() const { return static_cast<int>(frequency.rows()); }
  // Noise-free trajectory of `frames` frames starting at time `offset` (s).
  Eigen::MatrixXd trajectory(int frames, double offset, double fps) const;
};

struct SignatureOptions {
  double min_frequency = 0.5;
  double max_frequency = 4.0;
  double sigma = 0.1;
  // Smallest allowed mean absolute frequency difference between identities.
  double min_distance = 0.1;
  // Mixing = I + sum_k c_k U_k over `style_rank` basis matrices U_k shared by
  // all identities, with identity coefficients c_k ~ N(0, style_scale^2).
  // Rank 0 draws a fully random mixing matrix per identity instead.
  int style_rank = 2;
  double style_scale = 1.5;
  // Per-dimension standard deviation of the identity's rest pose.
  double rest_scale = 0.7;
};

// Draws `count` mutually distinct signatures.
std::vector<IdentitySignature> draw_signatures(int count, int dim, const SignatureOptions& options, Rng& rng);

struct SynthOptions {
  int identities = 20;
  int videos_per_id = 10;
  int min_frames = 64;
  int max_frames = 100;
  int dim = 32;
  double fps = kDefaultFps;
  SignatureOptions signature;
  // Cross-reenactments per driver: targets (capped at identities - 1) and clips.
  int cross_targets = kTargetsPerDriver;
  int cross_clips = 5;
  Dataset dataset = Dataset::CremaD;
  std::vector<Generator> generators{Generator::Gaga};
  std::string id_prefix = "s";
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthCorpus {
  Catalog catalog;
  FeatureStore store{FeatureKind::Embedding, 1};
  std::vector<IdentitySignature> signatures;
};

// Self-reenactments for every clip of every identity and cross-reenactments
// from build_cross_assignments. A video's features are its driver's
// trajectory for that clip plus fresh noise; the target never enters the
// features. Soft-biometrics are assigned by seeded balanced cycling,
// independent of the signatures. Every generator renders the same
// trajectories with independent noise.
SynthCorpus synth_corpus(const SynthOptions& options);

enum class ShiftKind { GeneratorShift, DatasetShift };
std::string_view to_string(ShiftKind k);

struct ShiftTransform {
  ShiftKind kind = ShiftKind::GeneratorShift;
  int smoothing_width = 0;      // centered moving average; <= 1 disables
  Eigen::VectorXd style_bias;   // added to every frame; empty disables
  double amplitude_scale = 1.0;
  // New frame count drawn uniformly per video; the sequence is resampled
  // by linear interpolation over the same time span.
  std::optional<std::pair<int, int>> frame_range;
  double noise_sigma = 0.0;     // fresh Gaussian noise

  bool is_identity() const;
};

// Moving-average smoothing plus a style bias drawn from `style_seed` and
// fresh rendering noise.
ShiftTransform generator_shift(int dim, int smoothing_width, double bias_scale, std::uint64_t style_seed,
                               double noise_sigma = 0.0);
// Amplitude rescale plus a frame-count change.
ShiftTransform dataset_shift(double amplitude_scale, int min_frames, int max_frames);

// Shifts used by the benchmark corpus and the end-to-end checks.
ShiftTransform default_generator_shift(int dim, std::uint64_t style_seed);
ShiftTransform default_dataset_shift();

FeatureSequence shift_sequence(const FeatureSequence& seq, const ShiftTransform& transform, Rng& rng);

// Applies the transform to every sequence; each video gets its own noise
// stream derived from `seed` and its id.
FeatureStore apply_shift(const FeatureStore& store, const ShiftTransform& transform, std::uint64_t seed);

// Multi-generator, two-dataset corpus for experiment matrices. The first
// generator renders trajectories unchanged and each further one applies its
// own generator shift; every dataset after the first is also
// dataset-shifted.
struct BenchmarkOptions {
  int identities_per_dataset = 20;
  int videos_per_id = 10;
  int dim = 32;
  int cross_clips = 5;
  double sigma = 0.1;
  std::vector<Dataset> datasets{Dataset::CremaD, Dataset::Ravdess};
  std::vector<Generator> generators{Generator::Gaga, Generator::Live, Generator::Huny};
  std::uint64_t seed = 1;
};

SynthCorpus synth_benchmark(const BenchmarkOptions& options);

// Mean distance between self videos of the same identity and of different
// identities, one generator. Each video is described by its frame
// covariance (Frobenius distance), which ignores the random clip start.
std::pair<double, double> separability(const SynthCorpus& corpus, Generator generator);

}  // namespace avfp
