#include "lfvg/embedding_space.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cstdio>
#include <numeric>

#include "lfvg/params.hpp"
#include "lfvg/rng.hpp"

namespace lfvg {

namespace {

constexpr double kClutterSpread = 0.3;

/// rows × cols matrix with orthonormal columns (rows ≥ cols).
Matrix orthonormal_columns(Index rows, Index cols, Rng& rng) {
  const Eigen::MatrixXd g = rng.normal_matrix(rows, cols);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  // Fix the sign ambiguity of QR so the basis is a deterministic function of g.
  const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Index c = 0; c < cols; ++c) {
    if (r(c, c) < 0) q.col(c) *= -1.0;
  }
  return q;
}

struct World {
  Matrix video_map;  // D_v × L
  Matrix image_map;  // D_q × L
  Matrix text_map;   // D_q × L
  Vector clutter;    // D_q, unit norm
};

World make_world(const AlignmentConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, {tag(Stream::world)}));
  World w;
  w.video_map = orthonormal_columns(cfg.video_dim, cfg.latent_dim, rng);
  // Both candidate text maps are always drawn so that the random stream does
  // not depend on the configuration flags.
  const Matrix joint = orthonormal_columns(cfg.query_dim, std::min<Index>(cfg.query_dim, 2 * cfg.latent_dim), rng);
  const Matrix delta = rng.normal_matrix(cfg.query_dim, cfg.latent_dim, 1.0 / std::sqrt(double(cfg.query_dim)));
  w.image_map = joint.leftCols(cfg.latent_dim);
  if (cfg.orthogonal_text_map) {
    w.text_map = joint.middleCols(cfg.latent_dim, cfg.latent_dim);
  } else {
    w.text_map = w.image_map + cfg.align_noise_sigma * delta;
  }
  w.clutter = rng.normal_vector(cfg.query_dim);
  w.clutter.normalize();
  return w;
}

/// Event lengths summing to `segments`, each at least `min_len`, with the
/// surplus split by Dirichlet(1) stick-breaking weights.
std::vector<Index> event_lengths(Index segments, Index events, Rng& rng) {
  const Index min_len = segments >= 2 * events ? 2 : 1;
  const Index surplus = segments - min_len * events;
  std::vector<double> w(events);
  for (auto& x : w) x = rng.exponential();
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<Index> len(events, min_len);
  std::vector<std::pair<double, Index>> remainders;
  Index assigned = 0;
  for (Index e = 0; e < events; ++e) {
    const double share = surplus * w[e] / total;
    const Index whole = static_cast<Index>(std::floor(share));
    len[e] += whole;
    assigned += whole;
    remainders.emplace_back(share - whole, e);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (Index i = 0; i < surplus - assigned; ++i) ++len[remainders[i].second];
  return len;
}

Vector unit_vector(Index dim, Rng& rng) {
  Vector v = rng.normal_vector(dim);
  return v / v.norm();
}

std::string video_id(Index global_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "v%06ld", static_cast<long>(global_index));
  return buf;
}

}  // namespace

void AlignmentConfig::validate() const {
  if (latent_dim < 2 || video_dim < 2 || query_dim < 2) {
    throw InvalidInputError("alignment config: dimensions must be at least 2");
  }
  if (video_dim < latent_dim || query_dim < latent_dim) {
    throw InvalidInputError("alignment config: feature dims must be at least the latent dim");
  }
  if (orthogonal_text_map && query_dim < 2 * latent_dim) {
    throw InvalidInputError("alignment config: orthogonal text map needs query_dim >= 2*latent_dim");
  }
  if (!(align_noise_sigma >= 0.0) || !(obs_noise_sigma >= 0.0)) {
    throw InvalidInputError("alignment config: noise scales must be nonnegative");
  }
  if (!(clutter_rate >= 0.0 && clutter_rate <= 1.0)) {
    throw InvalidInputError("alignment config: clutter_rate must be in [0,1]");
  }
  if (!(min_duration_s > 0.0 && max_duration_s >= min_duration_s)) {
    throw InvalidInputError("alignment config: invalid duration range");
  }
}

void VideoRecord::validate() const {
  const std::string what = "video " + id;
  require_nonempty(segment_features, what + " segment features");
  require_nonempty(frame_features, what + " frame features");
  require_finite(segment_features, what + " segment features");
  require_finite(frame_features, what + " frame features");
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) throw InvalidInputError(what + ": bad duration");
  if (static_cast<Index>(frame_times.size()) != frame_features.rows()) {
    throw InvalidInputError(what + ": frame_times size does not match frame count");
  }
  for (std::size_t i = 0; i < frame_times.size(); ++i) {
    if (!(frame_times[i] >= 0.0 && frame_times[i] <= duration_s)) {
      throw InvalidInputError(what + ": frame time outside [0, duration]");
    }
    if (i > 0 && frame_times[i] < frame_times[i - 1]) {
      throw InvalidInputError(what + ": frame_times not nondecreasing");
    }
  }
  for (const auto& e : hidden_events) e.interval.validate(what + " hidden event");
}

std::optional<std::size_t> Dataset::find_video(const std::string& id) const {
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (videos[i].id == id) return i;
  }
  return std::nullopt;
}

void Dataset::validate() const {
  for (const auto& v : videos) v.validate();
  for (const auto& q : queries) {
    if (!find_video(q.video_id)) {
      throw InvalidInputError("query " + q.id + ": unknown video " + q.video_id);
    }
    if (!q.feature.allFinite() || q.feature.size() == 0) {
      throw InvalidInputError("query " + q.id + ": non-finite feature");
    }
    q.gt_interval.validate("query " + q.id);
  }
}

Dataset generate_synthetic_dataset(const AlignmentConfig& cfg, const SyntheticShape& shape) {
  cfg.validate();
  if (shape.n_videos < 1 || shape.segments_per_video < 1 || shape.events_per_video < 1 ||
      shape.frames_per_segment < 1 || shape.first_video < 0) {
    throw InvalidInputError("synthetic dataset: counts must be positive");
  }
  if (shape.events_per_video > shape.segments_per_video) {
    throw InvalidInputError("synthetic dataset: more events than segments");
  }
  const World world = make_world(cfg);
  const Index T = shape.segments_per_video;
  const Index F = shape.frames_per_segment;
  const Index E = shape.events_per_video;
  const double sigma = cfg.obs_noise_sigma;

  Dataset d;
  d.provenance = Provenance::synthetic;
  for (Index i = 0; i < shape.n_videos; ++i) {
    const Index gi = shape.first_video + i;
    Rng rng(derive_seed(cfg.seed, {tag(Stream::video), static_cast<std::uint64_t>(gi)}));
    Rng clutter_rng(derive_seed(cfg.seed, {tag(Stream::clutter), static_cast<std::uint64_t>(gi)}));
    Rng query_rng(derive_seed(cfg.seed, {tag(Stream::query), static_cast<std::uint64_t>(gi)}));

    VideoRecord v;
    v.id = video_id(gi);
    v.duration_s = rng.uniform(cfg.min_duration_s, cfg.max_duration_s);
    const auto lengths = event_lengths(T, E, rng);
    std::vector<Vector> concepts;
    for (Index e = 0; e < E; ++e) concepts.push_back(unit_vector(cfg.latent_dim, rng));

    v.segment_features.resize(T, cfg.video_dim);
    v.frame_features.resize(T * F, cfg.query_dim);
    v.frame_times.resize(static_cast<std::size_t>(T * F));
    Index t = 0;
    for (Index e = 0; e < E; ++e) {
      const Vector seg_mean = world.video_map * concepts[e];
      const Vector frame_mean = world.image_map * concepts[e];
      const Index first = t;
      for (Index s = 0; s < lengths[e]; ++s, ++t) {
        v.segment_features.row(t) = (seg_mean + rng.normal_vector(cfg.video_dim, sigma)).transpose();
        for (Index j = 0; j < F; ++j) {
          const Index m = t * F + j;
          v.frame_times[m] = (static_cast<double>(t) + (j + 0.5) / F) / T * v.duration_s;
          Vector frame = frame_mean + rng.normal_vector(cfg.query_dim, sigma);
          if (clutter_rng.uniform() < cfg.clutter_rate) {
            frame = world.clutter +
                    clutter_rng.normal_vector(cfg.query_dim, kClutterSpread / std::sqrt(double(cfg.query_dim)));
          }
          v.frame_features.row(m) = frame.transpose();
        }
      }
      const TemporalInterval iv{static_cast<double>(first) / T, static_cast<double>(t) / T};
      v.hidden_events.push_back({iv, e});

      QueryRecord q;
      q.id = v.id + "/q" + std::to_string(e);
      q.video_id = v.id;
      q.feature = world.text_map * concepts[e] + query_rng.normal_vector(cfg.query_dim, sigma);
      q.feature.normalize();
      q.gt_interval = iv;
      d.queries.push_back(std::move(q));
    }
    d.videos.push_back(std::move(v));
  }
  return d;
}

double alignment_score(const Dataset& d) {
  if (d.queries.empty()) throw InvalidInputError("alignment_score: dataset has no queries");
  double total = 0.0;
  for (const auto& q : d.queries) {
    const auto vi = d.find_video(q.video_id);
    if (!vi) throw InvalidInputError("alignment_score: query " + q.id + " has unknown video");
    const auto& v = d.videos[*vi];
    Vector mean = Vector::Zero(v.frame_features.cols());
    Index count = 0;
    for (Index m = 0; m < v.num_frames(); ++m) {
      const double t = v.frame_times[m] / v.duration_s;
      if (t >= q.gt_interval.start && t <= q.gt_interval.end) {
        mean += v.frame_features.row(m).transpose();
        ++count;
      }
    }
    if (count == 0) throw InvalidInputError("alignment_score: query " + q.id + " covers no frames");
    total += cosine(q.feature, mean / count);
  }
  return total / static_cast<double>(d.queries.size());
}

std::uint64_t TrainingView::content_hash() const {
  std::uint64_t h = fnv1a(nullptr, 0);
  for (const auto& v : data_->videos) {
    h = fnv1a(v.id.data(), v.id.size(), h);
    h = fnv1a(&v.duration_s, sizeof v.duration_s, h);
    h = fnv1a(v.segment_features.data(), sizeof(double) * v.segment_features.size(), h);
    h = fnv1a(v.frame_features.data(), sizeof(double) * v.frame_features.size(), h);
    h = fnv1a(v.frame_times.data(), sizeof(double) * v.frame_times.size(), h);
  }
  return h;
}

FeatureMatrix pool_to_length(const FeatureMatrix& f, Index max_len) {
  if (max_len < 1) throw InvalidInputError("pool_to_length: max_len must be positive");
  const Index T = f.rows();
  if (T <= max_len) return f;
  FeatureMatrix out(max_len, f.cols());
  for (Index i = 0; i < max_len; ++i) {
    const Index lo = i * T / max_len;
    const Index hi = std::max(lo + 1, (i + 1) * T / max_len);
    out.row(i) = f.middleRows(lo, hi - lo).colwise().mean();
  }
  return out;
}

}  // namespace lfvg
