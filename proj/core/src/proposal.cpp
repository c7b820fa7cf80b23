#include "lfvg/proposal.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "lfvg/rng.hpp"

namespace lfvg {

Matrix similarity_matrix(const FeatureMatrix& f) {
  require_nonempty(f, "similarity_matrix");
  require_finite(f, "similarity_matrix");
  const Vector norms = f.rowwise().norm();
  for (Index i = 0; i < f.rows(); ++i) {
    if (!(norms[i] > 0.0)) {
      throw InvalidInputError("similarity_matrix: row " + std::to_string(i) + " has zero norm");
    }
  }
  const Matrix unit = norms.cwiseInverse().asDiagonal() * f;
  Matrix r = unit * unit.transpose();
  r = r.cwiseMax(-1.0).cwiseMin(1.0);
  return r;
}

namespace {

Index count_distinct_rows(const FeatureMatrix& f) {
  std::set<std::vector<double>> rows;
  for (Index i = 0; i < f.rows(); ++i) {
    rows.emplace(f.row(i).data(), f.row(i).data() + f.cols());
  }
  return static_cast<Index>(rows.size());
}

double assign(const FeatureMatrix& f, const Matrix& centroids, std::vector<Index>& labels) {
  double inertia = 0.0;
  for (Index i = 0; i < f.rows(); ++i) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < centroids.rows(); ++c) {
      const double d = (f.row(i) - centroids.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    labels[i] = best;
    inertia += best_d;
  }
  return inertia;
}

double inertia_of(const FeatureMatrix& f, const Matrix& centroids, const std::vector<Index>& labels) {
  double s = 0.0;
  for (Index i = 0; i < f.rows(); ++i) s += (f.row(i) - centroids.row(labels[i])).squaredNorm();
  return s;
}

Matrix kmeans_pp_seed(const FeatureMatrix& f, Index k, Rng& rng) {
  const Index n = f.rows();
  Matrix c(k, f.cols());
  c.row(0) = f.row(static_cast<Index>(rng.uniform_index(n)));
  Vector d2(n);
  for (Index i = 0; i < n; ++i) d2[i] = (f.row(i) - c.row(0)).squaredNorm();
  for (Index j = 1; j < k; ++j) {
    const double u = rng.uniform() * d2.sum();
    Index pick = -1;
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      pick = i;
      acc += d2[i];
      if (u < acc) break;
    }
    c.row(j) = f.row(pick);
    for (Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], (f.row(i) - c.row(j)).squaredNorm());
  }
  return c;
}

}  // namespace

KMeansResult kmeans_cluster(const FeatureMatrix& f, Index k, std::uint64_t seed,
                            const KMeansOptions& opts) {
  require_nonempty(f, "kmeans_cluster");
  require_finite(f, "kmeans_cluster");
  if (k < 1) throw InvalidInputError("kmeans_cluster: k must be at least 1");
  if (k > count_distinct_rows(f)) {
    throw InvalidInputError("kmeans_cluster: k exceeds the number of distinct rows");
  }
  Rng rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < std::max(1, opts.restarts); ++restart) {
    KMeansResult run;
    run.centroids = kmeans_pp_seed(f, k, rng);
    run.labels.assign(static_cast<std::size_t>(f.rows()), -1);
    std::vector<Index> next(run.labels.size());
    for (int it = 0; it < opts.max_iterations; ++it) {
      const double after_assign = assign(f, run.centroids, next);
      run.inertia_history.push_back(after_assign);
      ++run.iterations;
      if (next == run.labels) break;
      run.labels = next;
      // Update; an empty cluster keeps its previous centroid.
      Matrix sums = Matrix::Zero(k, f.cols());
      std::vector<Index> counts(static_cast<std::size_t>(k), 0);
      for (Index i = 0; i < f.rows(); ++i) {
        sums.row(run.labels[i]) += f.row(i);
        ++counts[run.labels[i]];
      }
      for (Index c = 0; c < k; ++c) {
        if (counts[c] > 0) run.centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);
      }
      run.inertia_history.push_back(inertia_of(f, run.centroids, run.labels));
    }
    run.inertia = inertia_of(f, run.centroids, run.labels);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

std::vector<SegmentSpan> events_from_labels(const std::vector<Index>& labels) {
  std::vector<SegmentSpan> runs;
  for (Index i = 0; i < static_cast<Index>(labels.size()); ++i) {
    if (i == 0 || labels[i] != labels[i - 1]) {
      runs.push_back({i, i});
    } else {
      runs.back().last = i;
    }
  }
  return runs;
}

TemporalProposal make_proposal(SegmentSpan span, Index T, Index merged_from) {
  if (span.first < 0 || span.last < span.first || span.last >= T) {
    throw InvalidInputError("make_proposal: span outside [0, T)");
  }
  TemporalProposal p;
  p.span = span;
  p.interval = {static_cast<double>(span.first) / T, static_cast<double>(span.last + 1) / T};
  p.merged_from = merged_from;
  return p;
}

std::vector<TemporalProposal> merge_consecutive(const std::vector<SegmentSpan>& events,
                                                Index max_merge, Index min_len, Index T) {
  std::vector<TemporalProposal> out;
  std::set<SegmentSpan> seen;
  const Index E = static_cast<Index>(events.size());
  for (Index m = 1; m <= std::min(max_merge, E); ++m) {
    for (Index i = 0; i + m <= E; ++i) {
      const SegmentSpan span{events[i].first, events[i + m - 1].last};
      if (span.length() < min_len) continue;
      if (!seen.insert(span).second) continue;
      out.push_back(make_proposal(span, T, m));
    }
  }
  const auto is_full = [T](const TemporalProposal& p) {
    return p.span.first == 0 && p.span.last == T - 1;
  };
  const bool has_partial = std::any_of(out.begin(), out.end(), [&](const auto& p) { return !is_full(p); });
  if (has_partial) out.erase(std::remove_if(out.begin(), out.end(), is_full), out.end());
  return out;
}

std::vector<TemporalProposal> generate_proposals(const FeatureMatrix& segment_features,
                                                 const ProposalConfig& cfg, std::uint64_t seed) {
  const Index T = segment_features.rows();
  if (T < cfg.k) throw InvalidInputError("generate_proposals: video has fewer segments than k");
  const auto km = kmeans_cluster(segment_features, cfg.k, seed);
  const auto events = events_from_labels(km.labels);
  auto proposals = merge_consecutive(events, cfg.max_merge, cfg.min_len, T);
  if (proposals.empty()) {
    proposals.push_back(make_proposal({0, T - 1}, T, static_cast<Index>(events.size())));
  }
  return proposals;
}

}  // namespace lfvg
