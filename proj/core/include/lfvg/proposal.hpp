#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lfvg/interval.hpp"
#include "lfvg/tensor.hpp"

namespace lfvg {

/// R_ij = cos(f_i, f_j). Throws InvalidInputError naming a zero-norm row.
Matrix similarity_matrix(const FeatureMatrix& f);

struct KMeansResult {
  std::vector<Index> labels;
  Matrix centroids;
  double inertia = 0.0;
  /// Inertia after each assignment and each update step of the winning
  /// restart, in order; nonincreasing.
  std::vector<double> inertia_history;
  int iterations = 0;
};

struct KMeansOptions {
  int restarts = 10;
  int max_iterations = 100;
};

/// Lloyd's algorithm with k-means++ seeding; the restart with the lowest
/// inertia is kept. Ties in assignment go to the lowest cluster index.
KMeansResult kmeans_cluster(const FeatureMatrix& f, Index k, std::uint64_t seed,
                            const KMeansOptions& opts = {});

/// Inclusive segment span.
struct SegmentSpan {
  Index first = 0;
  Index last = 0;
  Index length() const { return last - first + 1; }
  friend bool operator==(const SegmentSpan&, const SegmentSpan&) = default;
  friend auto operator<=>(const SegmentSpan&, const SegmentSpan&) = default;
};

/// Maximal runs of equal labels, in temporal order.
std::vector<SegmentSpan> events_from_labels(const std::vector<Index>& labels);

struct TemporalProposal {
  SegmentSpan span;
  TemporalInterval interval;  ///< (first / T, (last + 1) / T)
  Index merged_from = 1;
};

TemporalProposal make_proposal(SegmentSpan span, Index T, Index merged_from = 1);

/// Every window of m adjacent events, m = 1..max_merge, as one proposal.
/// Spans shorter than min_len are dropped; spans covering the whole video are
/// dropped when any other proposal survives; duplicate spans are removed.
/// Ordered by window size, then start.
std::vector<TemporalProposal> merge_consecutive(const std::vector<SegmentSpan>& events,
                                                Index max_merge, Index min_len, Index T);

struct ProposalConfig {
  Index k = 5;
  Index max_merge = 2;
  Index min_len = 2;
};

/// k-means on segment features, contiguous runs, then merged windows. Never
/// returns an empty list: if every candidate is filtered out, the whole
/// video is returned as a single proposal.
std::vector<TemporalProposal> generate_proposals(const FeatureMatrix& segment_features,
                                                 const ProposalConfig& cfg, std::uint64_t seed);

}  // namespace lfvg
