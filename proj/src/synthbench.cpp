#include "avfp/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

namespace avfp {

Eigen::MatrixXd IdentitySignature::trajectory(int frames, double offset, double fps) const {
  const int D = dim();
  Eigen::MatrixXd s(frames, D);
  for (int t = 0; t < frames; ++t) {
    const double time = offset + t / fps;
    for (int j = 0; j < D; ++j) {
      double v = 0.0;
      for (int k = 0; k < kSinusoidsPerDim; ++k) {
        v += amplitude(j, k) * std::sin(2.0 * std::numbers::pi * frequency(j, k) * time + phase(j, k));
      }
      s(t, j) = v;
    }
  }
  Eigen::MatrixXd out = s * mixing.transpose();
  if (rest.size() == D) out.rowwise() += rest.transpose();
  return out;
}

std::vector<IdentitySignature> draw_signatures(int count, int dim, const SignatureOptions& options, Rng& rng) {
  if (count < 0 || dim < 1) throw Error("invalid signature sizes");
  if (!(options.sigma >= 0.0)) throw Error("noise level must be non-negative");
  if (!(options.min_frequency > 0.0 && options.max_frequency > options.min_frequency)) {
    throw Error("invalid frequency range");
  }
  if (options.style_rank < 0) throw Error("style rank must be non-negative");
  std::vector<Eigen::MatrixXd> basis;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int k = 0; k < options.style_rank; ++k) {
    Eigen::MatrixXd u(dim, dim);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) u(i, j) = rng.normal() * scale;
    }
    basis.push_back(std::move(u));
  }
  std::vector<IdentitySignature> out;
  constexpr int kAttempts = 1000;
  while (static_cast<int>(out.size()) < count) {
    IdentitySignature s;
    for (int attempt = 0;; ++attempt) {
      if (attempt == kAttempts) throw Error("cannot draw distinct signatures; lower min_distance");
      s.frequency.resize(dim, kSinusoidsPerDim);
      s.phase.resize(dim, kSinusoidsPerDim);
      s.amplitude.resize(dim, kSinusoidsPerDim);
      for (int j = 0; j < dim; ++j) {
        for (int k = 0; k < kSinusoidsPerDim; ++k) {
          s.frequency(j, k) = rng.uniform(options.min_frequency, options.max_frequency);
          s.phase(j, k) = rng.uniform(0.0, 2.0 * std::numbers::pi);
          s.amplitude(j, k) = rng.uniform(0.5, 1.5);
        }
      }
      bool distinct = true;
      for (const auto& other : out) {
        const double d = (other.frequency - s.frequency).cwiseAbs().mean();
        distinct = distinct && d >= options.min_distance;
      }
      if (distinct) break;
    }
    if (basis.empty()) {
      s.mixing.resize(dim, dim);
      for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) s.mixing(i, j) = rng.normal() * scale;
      }
    } else {
      s.mixing = Eigen::MatrixXd::Identity(dim, dim);
      for (const auto& u : basis) s.mixing += options.style_scale * rng.normal() * u;
    }
    s.rest = Eigen::VectorXd::Zero(dim);
    if (options.rest_scale > 0.0) {
      for (int j = 0; j < dim; ++j) s.rest[j] = options.rest_scale * rng.normal();
    }
    s.sigma = options.sigma;
    out.push_back(std::move(s));
  }
  return out;
}

void SynthOptions::validate() const {
  if (identities < 2) throw Error("a synthetic corpus needs at least 2 identities");
  if (videos_per_id < 1) throw Error("videos_per_id must be at least 1");
  if (min_frames < 1 || max_frames < min_frames) throw Error("invalid frame range");
  if (dim < 1) throw Error("feature dimension must be positive");
  if (!(fps > 0.0)) throw Error("fps must be positive");
  if (cross_targets < 0 || cross_clips < 0) throw Error("cross-reenactment sizes must be non-negative");
  if (cross_clips > videos_per_id) throw Error("cross_clips exceeds videos_per_id");
  if (generators.empty()) throw Error("at least one generator is required");
}

namespace {

std::string identity_name(const std::string& prefix, int i, int n) {
  const int width = n >= 100 ? 3 : 2;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*d", width, i + 1);
  return prefix + buf;
}

// Balanced soft-biometrics: identities in a seeded order cycle through
// every value of each attribute.
void assign_attributes(std::vector<IdentityRecord>& ids, std::uint64_t seed) {
  std::vector<std::size_t> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const Gender genders[] = {Gender::Female, Gender::Male};
  const Ethnicity ethnicities[] = {Ethnicity::AfricanAmerican, Ethnicity::Asian, Ethnicity::Caucasian,
                                   Ethnicity::Hispanic};
  const AgeRange ages[] = {AgeRange::Age20To30, AgeRange::Age31To45, AgeRange::Age46To60};
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    IdentityRecord& r = ids[order[pos]];
    r.gender = genders[pos % 2];
    r.ethnicity = ethnicities[pos % 4];
    r.age_range = ages[pos % 3];
  }
}

struct Clip {
  Eigen::MatrixXd trajectory;
};

FrameMatrix with_noise(const Eigen::MatrixXd& trajectory, double sigma, Rng& rng) {
  FrameMatrix out(trajectory.rows(), trajectory.cols());
  for (Eigen::Index t = 0; t < trajectory.rows(); ++t) {
    for (Eigen::Index j = 0; j < trajectory.cols(); ++j) {
      out(t, j) = static_cast<float>(trajectory(t, j) + sigma * rng.normal());
    }
  }
  return out;
}

}  // namespace

SynthCorpus synth_corpus(const SynthOptions& options) {
  options.validate();
  const int n = options.identities;
  Rng rng(Rng::mix(options.seed, 0));
  SynthCorpus corpus;
  corpus.signatures = draw_signatures(n, options.dim, options.signature, rng);

  std::vector<IdentityRecord> ids;
  for (int i = 0; i < n; ++i) {
    IdentityRecord r;
    r.id = identity_name(options.id_prefix, i, n);
    r.dataset = options.dataset;
    ids.push_back(r);
  }
  assign_attributes(ids, Rng::mix(options.seed, 1));

  // Per (identity, clip): frame count and start time from a dedicated stream.
  std::map<std::pair<std::string, int>, Clip> clips;
  std::vector<AvatarVideo> videos;
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < options.videos_per_id; ++c) {
      Rng clip_rng(Rng::mix(options.seed, hash_string(ids[i].id) + static_cast<std::uint64_t>(c) + 2));
      const int frames =
          options.min_frames + static_cast<int>(clip_rng.below(options.max_frames - options.min_frames + 1));
      const double offset = clip_rng.uniform(0.0, 10.0);
      clips[{ids[i].id, c}] = {corpus.signatures[i].trajectory(frames, offset, options.fps)};
      for (Generator g : options.generators) {
        videos.push_back({make_video_id(g, ids[i].id, ids[i].id, c), ids[i].id, ids[i].id, g, c, options.dataset});
      }
    }
  }
  std::map<std::string, int> index_of;
  for (int i = 0; i < n; ++i) index_of[ids[i].id] = i;

  Catalog self_only(ids, videos);
  const int targets = std::min(options.cross_targets, n - 1);
  corpus.catalog = targets > 0 && options.cross_clips > 0
                       ? build_cross_assignments(self_only, targets, options.cross_clips, Rng::mix(options.seed, 3))
                       : self_only;

  corpus.store = FeatureStore(FeatureKind::Embedding, options.dim, options.fps);
  for (const auto& v : corpus.catalog.videos()) {
    const IdentitySignature& sig = corpus.signatures[index_of.at(v.driver)];
    Rng noise(Rng::mix(options.seed, hash_string(v.video_id)));
    FeatureSequence seq;
    seq.video_id = v.video_id;
    seq.kind = FeatureKind::Embedding;
    seq.fps = options.fps;
    seq.frames = with_noise(clips.at({v.driver, v.source_clip}).trajectory, sig.sigma, noise);
    corpus.store.put(std::move(seq));
  }
  return corpus;
}

std::string_view to_string(ShiftKind k) {
  return k == ShiftKind::GeneratorShift ? "generator_shift" : "dataset_shift";
}

bool ShiftTransform::is_identity() const {
  return smoothing_width <= 1 && (style_bias.size() == 0 || style_bias.isZero(0.0)) && amplitude_scale == 1.0 &&
         !frame_range && noise_sigma == 0.0;
}

ShiftTransform generator_shift(int dim, int smoothing_width, double bias_scale, std::uint64_t style_seed,
                               double noise_sigma) {
  ShiftTransform t;
  t.noise_sigma = noise_sigma;
  t.kind = ShiftKind::GeneratorShift;
  t.smoothing_width = smoothing_width;
  Rng rng(style_seed);
  t.style_bias.resize(dim);
  for (int j = 0; j < dim; ++j) t.style_bias[j] = bias_scale * rng.normal();
  return t;
}

ShiftTransform dataset_shift(double amplitude_scale, int min_frames, int max_frames) {
  ShiftTransform t;
  t.kind = ShiftKind::DatasetShift;
  t.amplitude_scale = amplitude_scale;
  t.frame_range = std::make_pair(min_frames, max_frames);
  return t;
}

ShiftTransform default_generator_shift(int dim, std::uint64_t style_seed) {
  return generator_shift(dim, 5, 1.0, style_seed, 0.3);
}

ShiftTransform default_dataset_shift() { return dataset_shift(0.5, 95, 120); }

FeatureSequence shift_sequence(const FeatureSequence& seq, const ShiftTransform& transform, Rng& rng) {
  if (transform.is_identity()) return seq;
  if (!(transform.amplitude_scale > 0.0) || !std::isfinite(transform.amplitude_scale)) {
    throw Error("amplitude scale must be positive");
  }
  if (transform.style_bias.size() != 0 && transform.style_bias.size() != seq.dim()) {
    throw Error("style bias dimension does not match the sequence");
  }
  Eigen::MatrixXd x = seq.frames.cast<double>();
  if (transform.frame_range) {
    const auto [lo, hi] = *transform.frame_range;
    if (lo < 1 || hi < lo) throw Error("invalid frame range");
    const int L = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
    const Eigen::Index T = x.rows();
    Eigen::MatrixXd y(L, x.cols());
    for (int i = 0; i < L; ++i) {
      const double pos = L == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(T - 1) / (L - 1);
      const auto i0 = static_cast<Eigen::Index>(std::floor(pos));
      const Eigen::Index i1 = std::min<Eigen::Index>(i0 + 1, T - 1);
      const double w = pos - static_cast<double>(i0);
      y.row(i) = (1.0 - w) * x.row(i0) + w * x.row(i1);
    }
    x = std::move(y);
  }
  if (transform.amplitude_scale != 1.0) x *= transform.amplitude_scale;
  if (transform.smoothing_width > 1) {
    const int half_lo = (transform.smoothing_width - 1) / 2;
    const int half_hi = transform.smoothing_width / 2;
    Eigen::MatrixXd y(x.rows(), x.cols());
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      const Eigen::Index a = std::max<Eigen::Index>(0, t - half_lo);
      const Eigen::Index b = std::min<Eigen::Index>(x.rows() - 1, t + half_hi);
      y.row(t) = x.middleRows(a, b - a + 1).colwise().mean();
    }
    x = std::move(y);
  }
  if (transform.style_bias.size() != 0) x.rowwise() += transform.style_bias.transpose();
  if (transform.noise_sigma > 0.0) {
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(t, j) += transform.noise_sigma * rng.normal();
    }
  }
  FeatureSequence out;
  out.video_id = seq.video_id;
  out.kind = seq.kind;
  out.fps = seq.fps;
  out.frames = x.cast<float>();
  return out;
}

FeatureStore apply_shift(const FeatureStore& store, const ShiftTransform& transform, std::uint64_t seed) {
  FeatureStore out(store.kind(), store.dim(), store.fps());
  for (const auto& [id, seq] : store.sequences()) {
    Rng rng(Rng::mix(seed, hash_string(id)));
    out.put(shift_sequence(seq, transform, rng));
  }
  return out;
}

SynthCorpus synth_benchmark(const BenchmarkOptions& options) {
  if (options.datasets.empty() || options.generators.empty()) throw Error("benchmark needs datasets and generators");
  SynthCorpus out;
  out.store = FeatureStore(FeatureKind::Embedding, options.dim);
  std::vector<IdentityRecord> identities;
  std::vector<AvatarVideo> videos;
  for (std::size_t di = 0; di < options.datasets.size(); ++di) {
    const Dataset d = options.datasets[di];
    SynthOptions so;
    so.identities = options.identities_per_dataset;
    so.videos_per_id = options.videos_per_id;
    so.dim = options.dim;
    so.cross_clips = options.cross_clips;
    so.signature.sigma = options.sigma;
    so.dataset = d;
    so.generators = options.generators;
    so.id_prefix = d == Dataset::CremaD ? "c" : "r";
    so.seed = Rng::mix(options.seed, 100 + di);
    SynthCorpus part = synth_corpus(so);

    const std::optional<ShiftTransform> data_shift =
        di == 0 ? std::nullopt : std::optional<ShiftTransform>(default_dataset_shift());
    std::map<Generator, ShiftTransform> gen_shift;
    for (std::size_t gi = 1; gi < options.generators.size(); ++gi) {
      gen_shift[options.generators[gi]] = default_generator_shift(options.dim, Rng::mix(options.seed, 200 + gi));
    }
    for (const auto& v : part.catalog.videos()) {
      FeatureSequence seq = part.store.get(v.video_id);
      Rng rng(Rng::mix(options.seed, hash_string(v.video_id) ^ 0x5348494654ULL));
      if (data_shift) seq = shift_sequence(seq, *data_shift, rng);
      auto it = gen_shift.find(v.generator);
      if (it != gen_shift.end()) seq = shift_sequence(seq, it->second, rng);
      out.store.put(std::move(seq));
    }
    identities.insert(identities.end(), part.catalog.identities().begin(), part.catalog.identities().end());
    videos.insert(videos.end(), part.catalog.videos().begin(), part.catalog.videos().end());
    out.signatures.insert(out.signatures.end(), part.signatures.begin(), part.signatures.end());
  }
  out.catalog = Catalog(std::move(identities), std::move(videos));
  return out;
}

std::pair<double, double> separability(const SynthCorpus& corpus, Generator generator) {
  std::vector<std::pair<std::string, Eigen::MatrixXd>> desc;
  for (const auto& v : corpus.catalog.videos()) {
    if (!v.is_self() || v.generator != generator) continue;
    const Eigen::MatrixXd x = corpus.store.get(v.video_id).frames.cast<double>();
    const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
    desc.emplace_back(v.driver, c.transpose() * c / static_cast<double>(x.rows()));
  }
  double within = 0.0, between = 0.0;
  std::size_t nw = 0, nb = 0;
  for (std::size_t i = 0; i < desc.size(); ++i) {
    for (std::size_t j = i + 1; j < desc.size(); ++j) {
      const double d = (desc[i].second - desc[j].second).norm();
      if (desc[i].first == desc[j].first) {
        within += d;
        ++nw;
      } else {
        between += d;
        ++nb;
      }
    }
  }
  if (nw == 0 || nb == 0) throw Error("separability needs two videos of one identity and two identities");
  return {within / static_cast<double>(nw), between / static_cast<double>(nb)};
}

}  // namespace avfp
