#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lfvg/interval.hpp"
#include "lfvg/tensor.hpp"

namespace lfvg {

/// Parameters of the synthetic joint vision-language space.
///
/// A video is a sequence of events; each event carries a unit-norm latent
/// concept z. Segment features are V·z, frame features I·z and text
/// features (I + σ_a·Δ)·z, each plus N(0, σ_o²) per coordinate. V and I have
/// orthonormal columns, so cosine geometry of the latent space carries over;
/// Δ has N(0, 1/D_q) entries, so σ_a = 1 gives a perturbation as large as
/// the image map itself.
struct AlignmentConfig {
  Index latent_dim = 16;
  Index video_dim = 32;
  Index query_dim = 32;
  double align_noise_sigma = 0.1;
  double obs_noise_sigma = 0.05;
  std::uint64_t seed = 0;
  /// Probability that a sampled frame is uninformative clutter (blur, black
  /// frames): a generic direction shared across the dataset rather than the
  /// event concept.
  double clutter_rate = 0.25;
  /// Draw the text map orthogonal to the image map instead of I + σ_a·Δ.
  bool orthogonal_text_map = false;
  double min_duration_s = 20.0;
  double max_duration_s = 40.0;

  void validate() const;
};

struct HiddenEvent {
  TemporalInterval interval;
  Index concept_index = 0;
  friend bool operator==(const HiddenEvent&, const HiddenEvent&) = default;
};

struct VideoRecord {
  std::string id;
  double duration_s = 0.0;
  FeatureMatrix segment_features;  ///< T × D_v
  FeatureMatrix frame_features;    ///< M × D_q
  std::vector<double> frame_times; ///< M timestamps in seconds, nondecreasing
  std::vector<HiddenEvent> hidden_events;

  Index num_segments() const { return segment_features.rows(); }
  Index num_frames() const { return frame_features.rows(); }
  void validate() const;
};

struct QueryRecord {
  std::string id;
  std::string video_id;
  Vector feature;  ///< D_q
  TemporalInterval gt_interval;
};

enum class Provenance { synthetic, imported };

struct Dataset {
  std::vector<VideoRecord> videos;
  std::vector<QueryRecord> queries;
  Provenance provenance = Provenance::synthetic;

  /// Index of the video with this id, or nullopt.
  std::optional<std::size_t> find_video(const std::string& id) const;
  void validate() const;
};

/// Size of a synthetic dataset. Video i of the dataset uses the random
/// stream of global index first_video + i, so two calls with the same world
/// seed and disjoint index ranges give disjoint videos of one world.
struct SyntheticShape {
  Index n_videos = 200;
  Index segments_per_video = 32;
  Index events_per_video = 5;
  Index frames_per_segment = 3;
  Index first_video = 0;
};

Dataset generate_synthetic_dataset(const AlignmentConfig& cfg, const SyntheticShape& shape);

/// Mean cosine between each query feature and the mean frame feature of the
/// event it describes.
double alignment_score(const Dataset& d);

/// Frame-level and segment-level content of a video, without annotations.
struct VideoView {
  const std::string& id;
  double duration_s;
  const FeatureMatrix& segment_features;
  const FeatureMatrix& frame_features;
  const std::vector<double>& frame_times;
};

inline VideoView view_of(const VideoRecord& v) {
  return VideoView{v.id, v.duration_s, v.segment_features, v.frame_features, v.frame_times};
}

/// Read access to a dataset for training. Videos come back stripped of
/// annotations; queries and ground-truth events are reachable only through
/// counted accessors so the zero-shot contract can be audited.
class TrainingView {
 public:
  explicit TrainingView(const Dataset& d) : data_(&d) {}

  std::size_t num_videos() const { return data_->videos.size(); }
  VideoView video(std::size_t i) const { return view_of(data_->videos.at(i)); }

  const std::vector<HiddenEvent>& ground_truth_events(std::size_t i) const {
    ++gt_accesses_;
    return data_->videos.at(i).hidden_events;
  }
  const std::vector<QueryRecord>& queries() const {
    ++query_accesses_;
    return data_->queries;
  }

  std::size_t query_accesses() const { return query_accesses_; }
  std::size_t ground_truth_accesses() const { return gt_accesses_; }

  /// Hash of everything training can see without counted access.
  std::uint64_t content_hash() const;

 private:
  const Dataset* data_;
  mutable std::atomic<std::size_t> query_accesses_{0};
  mutable std::atomic<std::size_t> gt_accesses_{0};
};

/// Average-pools a sequence to at most `max_len` rows (identity when shorter).
FeatureMatrix pool_to_length(const FeatureMatrix& f, Index max_len);

}  // namespace lfvg
