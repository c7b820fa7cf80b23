// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lfvg/embedding_space.hpp"
#include "lfvg/evaluation.hpp"
#include "lfvg/feature_store.hpp"
#include "lfvg/gradcheck.hpp"
#include "lfvg/grounding.hpp"
#include "lfvg/layers.hpp"
#include "lfvg/losses.hpp"
#include "lfvg/ops.hpp"
#include "lfvg/proposal.hpp"
#include "lfvg/pseudo_query.hpp"
#include "lfvg/training.hpp"
#include "lfvg_cli/cli.hpp"

namespace fs = std::filesystem;
using namespace lfvg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  char timing[32];
  std::snprintf(timing, sizeof timing, "%.1f s", seconds_since(t0));
  std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << name << "  [" << o.detail << "; "
            << timing << "]" << std::endl;
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Matrix random_matrix(Index r, Index c, std::uint64_t seed) { return Rng(seed).normal_matrix(r, c, 1.0); }

Vector random_vector(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

// ---------------------------------------------------------------- 1

Outcome metric_oracles() {
  Rng rng(2024);
  int sets = 0;
  double worst = 0.0;
  for (; sets < 60; ++sets) {
    const int n = 5 + static_cast<int>(rng.uniform_index(40));
    std::vector<TemporalInterval> pred(n), gt(n);
    for (int i = 0; i < n; ++i) {
      auto draw = [&] {
        // Coarse grid values make touching, nested, zero-length and
        // identical intervals common.
        auto v = [&] { return rng.uniform() < 0.5 ? static_cast<double>(rng.uniform_index(5)) / 4.0 : rng.uniform(); };
        double a = v(), b = v();
        if (a > b) std::swap(a, b);
        return TemporalInterval{a, b};
      };
      gt[i] = draw();
      const double r = rng.uniform();
      pred[i] = r < 0.1 ? gt[i] : r < 0.2 ? TemporalInterval{gt[i].start, gt[i].start} : draw();
    }
    std::vector<double> got(n), want(n);
    for (int i = 0; i < n; ++i) {
      got[i] = tiou(pred[i], gt[i]);
      // Oracle: measure of the union as |A| + |B| − |A ∩ B|; empty union scores 0.
      const double inter = std::max(0.0, std::min(pred[i].end, gt[i].end) - std::max(pred[i].start, gt[i].start));
      const double uni = pred[i].length() + gt[i].length() - inter;
      want[i] = uni > 0.0 ? inter / uni : 0.0;
      worst = std::max(worst, std::abs(got[i] - want[i]));
    }
    for (double th : {0.3, 0.5, 0.7}) {
      int hits = 0;
      for (double w : want) hits += w > th;
      worst = std::max(worst, std::abs(recall_at(got, th) - 100.0 * hits / n));
    }
    double sum = 0.0;
    for (double w : want) sum += w;
    worst = std::max(worst, std::abs(mean_iou(got) - 100.0 * sum / n));
  }
  // Hand-computed fixed cases.
  const double fixed[][5] = {{0.0, 0.5, 0.25, 0.75, 1.0 / 3.0}, {0.2, 0.4, 0.2, 0.4, 1.0}, {0.0, 0.2, 0.5, 0.9, 0.0},
                             {0.3, 0.3, 0.3, 0.3, 0.0},         {0.1, 0.1, 0.0, 1.0, 0.0}, {0.0, 1.0, 0.25, 0.5, 0.25}};
  for (const auto& c : fixed) worst = std::max(worst, std::abs(tiou({c[0], c[1]}, {c[2], c[3]}) - c[4]));
  return {worst <= 1e-9, std::to_string(sets) + " sets, max abs err " + fmt("%.2e", worst)};
}

// ---------------------------------------------------------------- 2

using BlockFn = std::function<Matrix(const Params&, const Matrix&, Vector*, const Matrix*, Matrix*)>;

// L = Σ C ⊙ block(x) over parameters and input jointly.
double check_block(const Params& params, const Matrix& x, const BlockFn& block, std::uint64_t seed) {
  Params layout = params;
  layout.add("input", x.rows(), x.cols(), ParamInit::zeros);
  const Index np = params.size();
  const Matrix probe = block(params, x, nullptr, nullptr, nullptr);
  const Matrix C = random_matrix(probe.rows(), probe.cols(), seed ^ 0x5eedULL);
  Vector theta(layout.size());
  theta << params.values(), Eigen::Map<const Vector>(x.data(), x.size());
  DifferentiableLoss loss = [&](const Vector& th, bool with_grad) {
    Params p = params;
    p.values() = th.head(np);
    const Matrix xi = Eigen::Map<const Matrix>(th.data() + np, x.rows(), x.cols());
    LossAndGrad r;
    if (!with_grad) {
      r.loss = (C.array() * block(p, xi, nullptr, nullptr, nullptr).array()).sum();
      return r;
    }
    Vector g = p.zero_grads();
    Matrix dx;
    r.loss = (C.array() * block(p, xi, &g, &C, &dx).array()).sum();
    r.grad.resize(th.size());
    r.grad << g, Eigen::Map<const Vector>(dx.data(), dx.size());
    return r;
  };
  return check_gradients(loss, theta, 1e-5, &layout).max_relative_error;
}

TemporalInterval random_target(std::uint64_t seed) {
  Rng rng(seed);
  double a = rng.uniform(), b = rng.uniform();
  if (a > b) std::swap(a, b);
  if (b - a < 0.1) b = std::min(1.0, a + 0.3);
  return {a, b};
}

GroundingConfig toy_grounding() {
  GroundingConfig g;
  g.video_dim = 4;
  g.query_dim = 4;
  g.hidden = 8;
  g.gru_hidden = 4;
  g.gru_layers = 1;
  g.fusion_layers = 1;
  g.fusion_heads = 2;
  g.t_max = 16;
  return g;
}

SelectorConfig toy_selector() {
  SelectorConfig sc;
  sc.dim = 4;
  sc.ffn_dim = 8;
  return sc;
}

Outcome gradient_suite() {
  constexpr int kSeeds = 20;
  std::map<std::string, double> worst;
  auto record = [&](const std::string& name, double e) { worst[name] = std::max(worst[name], e); };

  for (int s = 0; s < kSeeds; ++s) {
    {
      Params p;
      Linear lin(p, "lin", 3, 4);
      p.initialize(s);
      record("linear", check_block(p, random_matrix(5, 3, 10 + s),
                                   [&](const Params& pp, const Matrix& x, Vector* g, const Matrix* dy, Matrix* dx) {
                                     if (dy) *dx = lin.backward(pp, *g, x, *dy);
                                     return lin.forward(pp, x);
                                   },
                                   s));
    }
    for (Activation a : {Activation::relu, Activation::tanh, Activation::sigmoid}) {
      Params p;
      Mlp mlp(p, "mlp", {3, 4, 2}, a, Activation::sigmoid);
      p.initialize(s);
      record("mlp", check_block(p, random_matrix(5, 3, 20 + s),
                                [&](const Params& pp, const Matrix& x, Vector* g, const Matrix* dy, Matrix* dx) {
                                  Mlp::Cache c;
                                  Matrix y = mlp.forward(pp, x, &c);
                                  if (dy) *dx = mlp.backward(pp, *g, c, *dy);
                                  return y;
                                },
                                s));
    }
    {
      Params p;
      LayerNorm ln(p, "ln", 4);
      p.initialize(s);
      p.values() += random_vector(p.size(), 30 + s) * 0.3;
      record("layer norm", check_block(p, random_matrix(3, 4, 40 + s),
                                       [&](const Params& pp, const Matrix& x, Vector* g, const Matrix* dy, Matrix* dx) {
                                         LayerNorm::Cache c;
                                         Matrix y = ln.forward(pp, x, &c);
                                         if (dy) *dx = ln.backward(pp, *g, c, *dy);
                                         return y;
                                       },
                                       s));
    }
    {
      Params p;
      MultiHeadAttention att(p, "att", 4, 4, 4, 6, 2);
      p.initialize(s);
      record("self-attention",
             check_block(p, random_matrix(3, 4, 50 + s),
                         [&](const Params& pp, const Matrix& x, Vector* g, const Matrix* dy, Matrix* dx) {
                           MultiHeadAttention::Cache c;
                           Matrix y = att.forward(pp, x, x, x, &c);
                           if (dy) {
                             const auto d = att.backward(pp, *g, c, *dy);
                             *dx = d.dq + d.dk + d.dv;
                           }
                           return y;
                         },
                         s));
    }
    {
      Params p;
      MultiHeadAttention att(p, "att", 4, 3, 3, 4, 2);
      p.initialize(s);
      const Matrix kv = random_matrix(2, 3, 60 + s);
      record("cross-attention",
             check_block(p, random_matrix(3, 4, 70 + s),
                         [&](const Params& pp, const Matrix& x, Vector* g, const Matrix* dy, Matrix* dx) {
                           MultiHeadAttention::Cache c;
                           Matrix y = att.forward(pp, x, kv, kv, &c);
                           if (dy) *dx = att.backward(pp, *g, c, *dy).dq;
                           return y;
                         },
                         s));
    }
    {
      Params p;
      BiGru gru(p, "gru", 2, 3, 2);
      p.initialize(s);
      record("bigru", check_block(p, random_matrix(4, 2, 80 + s),
                                  [&](const Params& pp, const Matrix& x, Vector* g, const Matrix* dy, Matrix* dx) {
                                    BiGru::Cache c;
                                    Matrix y = gru.forward(pp, x, &c);
                                    if (dy) *dx = gru.backward(pp, *g, c, *dy);
                                    return y;
                                  },
                                  s));
    }
    {
      Params p;
      TransformerEncoderLayer layer(p, "enc", 4, 2, 8);
      p.initialize(s);
      record("encoder layer", check_block(p, random_matrix(3, 4, 90 + s),
                                          [&](const Params& pp, const Matrix& x, Vector* g, const Matrix* dy,
                                              Matrix* dx) {
                                            TransformerEncoderLayer::Cache c;
                                            Matrix y = layer.forward(pp, x, &c);
                                            if (dy) *dx = layer.backward(pp, *g, c, *dy);
                                            return y;
                                          },
                                          s));
    }

    // Full training loss through the grounding model.
    {
      const GroundingModel m(toy_grounding(), s);
      const Matrix f = random_matrix(4 + s % 4, 4, 100 + s);
      const Vector q = random_vector(4, 200 + s).normalized();
      const TemporalInterval target = random_target(300 + s);
      DifferentiableLoss loss = [&](const Vector& th, bool with_grad) {
        GroundingModel mm = m;
        mm.params().values() = th;
        LossAndGrad r;
        Vector g = mm.params().zero_grads();
        r.loss = grounding_loss(mm, f, q, target, 1.0, 1.0, with_grad ? &g : nullptr).total;
        if (with_grad) r.grad = std::move(g);
        return r;
      };
      record("grounding loss", check_gradients(loss, m.params().values(), 1e-5, &m.params()).max_relative_error);
    }

    // Selector and grounding model jointly; straight-through selection with
    // pinned Gumbel noise, forward value anchored at θ₀.
    for (bool hard : {false, true}) {
      const GroundingModel m0(toy_grounding(), s);
      const SelectionTransformer sel0(toy_selector(), 1000 + s);
      const Index nm = m0.params().size(), ns = sel0.params().size();
      CandidateSet c;
      c.q = random_matrix(5, 4, 400 + s);
      c.q.rowwise().normalize();
      c.source_frame_indices.assign(5, 0);
      const Vector noise = random_vector(5, 500 + s);
      const Matrix f = random_matrix(5, 4, 600 + s);
      const TemporalInterval target = random_target(700 + s);
      SelectOptions opts;
      opts.hard = hard;
      opts.gumbel_noise = &noise;
      const auto at0 = sel0.select(c, opts, nullptr);
      const Vector anchor = at0.soft_weights;
      if (hard) {
        opts.anchor_soft = &anchor;
        opts.anchor_index = at0.selected_index;
      }
      Params layout;
      for (const Params* p : {&m0.params(), &sel0.params()}) {
        for (const auto& spec : p->specs()) layout.add(spec.name, spec.rows, spec.cols, spec.init);
      }
      Vector theta(nm + ns);
      theta << m0.params().values(), sel0.params().values();
      DifferentiableLoss loss = [&](const Vector& th, bool with_grad) {
        GroundingModel m = m0;
        SelectionTransformer sel = sel0;
        m.params().values() = th.head(nm);
        sel.params().values() = th.tail(ns);
        SelectionTransformer::Cache cache;
        const Vector q = sel.select(c, opts, nullptr, &cache).q_tilde;
        LossAndGrad r;
        Vector gm = m.params().zero_grads();
        Vector dq;
        r.loss = grounding_loss(m, f, q, target, 1.0, 1.0, with_grad ? &gm : nullptr, with_grad ? &dq : nullptr).total;
        if (with_grad) {
          Vector gs = sel.params().zero_grads();
          sel.backward(gs, cache, dq);
          r.grad.resize(nm + ns);
          r.grad << gm, gs;
        }
        return r;
      };
      record(hard ? "loss through straight-through selector" : "loss through soft selector",
             check_gradients(loss, theta, 1e-5, &layout).max_relative_error);
    }
  }
  double overall = 0.0;
  std::string which;
  for (const auto& [name, e] : worst) {
    if (e >= overall) overall = e, which = name;
  }
  return {overall <= 1e-4, std::to_string(worst.size()) + " blocks x " + std::to_string(kSeeds) +
                               " seeds, max rel err " + fmt("%.2e", overall) + " (" + which + ")"};
}

// ---------------------------------------------------------------- 3

Outcome loss_formulas() {
  Vector uniform = Vector::Constant(4, 0.25);
  Vector mask(4);
  mask << 0, 1, 1, 0;
  const double att_err = std::abs(loss_att(uniform, mask) - std::log(4.0));
  double reg_err = 0.0;
  reg_err = std::max(reg_err, std::abs(loss_reg({0.3, 0.6}, {0.3, 0.6}) - 0.0));
  reg_err = std::max(reg_err, std::abs(loss_reg({0.4, 0.7}, {0.2, 0.7}) - 0.02));
  // The 1.5 entry lies on the linear branch, past any difference of two
  // normalized times, so it is checked on the per-coordinate term.
  reg_err = std::max(reg_err, std::abs(smooth_l1(2.0) - 1.5));
  reg_err = std::max(reg_err, std::abs(smooth_l1(-2.0) - 1.5));
  reg_err = std::max(reg_err, std::abs(smooth_l1(0.2) - 0.02));
  reg_err = std::max(reg_err, std::abs(smooth_l1(0.0) - 0.0));
  return {att_err <= 1e-9 && reg_err <= 1e-12,
          "att err " + fmt("%.1e", att_err) + ", reg err " + fmt("%.1e", reg_err)};
}

// ---------------------------------------------------------------- 4

std::set<std::pair<Index, Index>> enumerate_windows(const std::vector<SegmentSpan>& ev, Index max_merge, Index min_len,
                                                    Index T) {
  std::set<std::pair<Index, Index>> all;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    for (Index m = 1; m <= max_merge && i + static_cast<std::size_t>(m) <= ev.size(); ++m) {
      const Index first = ev[i].first, last = ev[i + m - 1].last;
      if (last - first + 1 >= min_len) all.insert({first, last});
    }
  }
  const bool partial =
      std::any_of(all.begin(), all.end(), [&](const auto& s) { return !(s.first == 0 && s.second == T - 1); });
  if (partial) all.erase({0, T - 1});
  return all;
}

Outcome proposal_correctness() {
  AlignmentConfig c;
  c.obs_noise_sigma = 0.0;
  c.seed = 21;
  SyntheticShape shape;
  shape.n_videos = 100;
  const Dataset d = generate_synthetic_dataset(c, shape);
  ProposalConfig pc;
  pc.k = shape.events_per_video;
  int exact = 0;
  bool inertia_ok = true;
  for (std::size_t i = 0; i < d.videos.size(); ++i) {
    const auto& v = d.videos[i];
    const Index T = v.num_segments();
    std::set<std::pair<Index, Index>> base, truth;
    for (const auto& p : generate_proposals(v.segment_features, pc, i)) {
      if (p.merged_from == 1) base.insert({p.span.first, p.span.last});
    }
    for (const auto& e : v.hidden_events) {
      truth.insert({static_cast<Index>(std::llround(e.interval.start * T)),
                    static_cast<Index>(std::llround(e.interval.end * T)) - 1});
    }
    exact += base == truth;
  }
  // Inertia per Lloyd iteration, on noisy videos so that every k is feasible.
  c.obs_noise_sigma = 0.05;
  shape.n_videos = 30;
  for (const auto& v : generate_synthetic_dataset(c, shape).videos) {
    for (Index k : {2, 5, 8}) {
      const auto r = kmeans_cluster(v.segment_features, k, 100 + k);
      for (std::size_t it = 1; it < r.inertia_history.size(); ++it) {
        inertia_ok = inertia_ok && r.inertia_history[it] <= r.inertia_history[it - 1];
      }
    }
  }
  // Every event list of length ≤ 5 over T = 9, under every small policy.
  const Index T = 9;
  int lists = 0, mismatches = 0;
  std::function<void(std::vector<SegmentSpan>&, Index)> rec = [&](std::vector<SegmentSpan>& ev, Index next) {
    if (next == T) {
      ++lists;
      for (Index mm = 1; mm <= 5; ++mm) {
        for (Index ml = 1; ml <= 3; ++ml) {
          std::set<std::pair<Index, Index>> got;
          const auto ps = merge_consecutive(ev, mm, ml, T);
          for (const auto& p : ps) got.insert({p.span.first, p.span.last});
          mismatches += got != enumerate_windows(ev, mm, ml, T) || got.size() != ps.size();
        }
      }
      return;
    }
    if (ev.size() == 5) return;
    for (Index last = next; last < T; ++last) {
      ev.push_back({next, last});
      rec(ev, last + 1);
      ev.pop_back();
    }
  };
  std::vector<SegmentSpan> ev;
  rec(ev, 0);
  std::ostringstream s;
  s << exact << "/100 exact, inertia " << (inertia_ok ? "nonincreasing" : "INCREASED") << ", " << mismatches
    << " merge mismatches over " << lists << " lists";
  return {exact >= 95 && inertia_ok && mismatches == 0, s.str()};
}

// ---------------------------------------------------------------- 5

Outcome perturbation_contract() {
  bool exact_norm = true;
  double step_err = 0.0, unit_err = 0.0;
  for (int s = 0; s < 200; ++s) {
    const Vector q = random_vector(16, s) * (0.1 + s % 7);
    const Vector eps = random_vector(16, 1000 + s);
    const Vector zero = perturb_with_noise(q, 0.0, eps);
    exact_norm = exact_norm && zero == q / q.norm();
    const double xi = 1e-4 * (1 + s % 5) * (s % 3 == 0 ? 1000.0 : 1.0);
    const double mag = (perturbation_step(q, xi, eps) - q).norm();
    step_err = std::max(step_err, std::abs(mag - xi * q.norm()));
    unit_err = std::max(unit_err, std::abs(perturb_with_noise(q, xi, eps).norm() - 1.0));
    Rng rng(s);
    unit_err = std::max(unit_err, std::abs(perturb(q, xi, rng).norm() - 1.0));
  }
  std::ostringstream o;
  o << "xi=0 " << (exact_norm ? "exact" : "NOT exact") << ", step err " << fmt("%.1e", step_err) << ", unit err "
    << fmt("%.1e", unit_err);
  return {exact_norm && step_err <= 1e-9 && unit_err <= 1e-6, o.str()};
}

// ---------------------------------------------------------------- 6

Outcome zero_shot_contract() {
  AlignmentConfig w;
  SyntheticShape shape;
  shape.n_videos = 20;
  shape.segments_per_video = 16;
  shape.events_per_video = 3;
  const Dataset d = generate_synthetic_dataset(w, shape);
  TrainConfig cfg = desk_preset();
  cfg.epochs = 2;
  cfg.hidden = 16;
  cfg.gru_hidden = 8;
  const TrainingView view(d);
  train(view, cfg);
  std::ostringstream s;
  s << "query accesses " << view.query_accesses() << ", ground-truth accesses " << view.ground_truth_accesses();
  return {view.query_accesses() == 0 && view.ground_truth_accesses() == 0, s.str()};
}

// ---------------------------------------------------------------- 7–9

const std::vector<std::uint64_t> kRunSeeds{0, 1, 2};

void log_run(const std::string& variant, std::uint64_t seed, const EvalResult& r) {
  std::cerr << "  " << variant << " seed " << seed << ": mIoU " << fmt("%.2f", r.miou) << std::endl;
}

std::string summarize(const AblationReport& r) {
  std::ostringstream s;
  for (std::size_t i = 0; i < r.variants.size(); ++i) {
    s << (i ? ", " : "") << r.variants[i].name << " " << fmt("%.2f", r.variants[i].mean_miou);
  }
  return s.str();
}

Outcome end_to_end(RunCache& cache, double& elapsed) {
  const auto t0 = Clock::now();
  const BenchmarkConfig bench;
  const TrainConfig base = desk_preset();
  double miou = 0.0, baseline = 0.0;
  for (const auto seed : kRunSeeds) {
    TrainConfig cfg = base;
    cfg.seed = seed;
    const auto trained = cache.get_or_train(cfg, bench.train_split(seed));
    const Dataset test = bench.test_split(seed);
    const EvalResult r = evaluate(trained->model, test);
    log_run("language-free", seed, r);
    miou += r.miou / kRunSeeds.size();
    baseline += random_baseline_miou(test, 10000, seed) / kRunSeeds.size();
  }
  elapsed = seconds_since(t0);
  const bool fast = elapsed < 600.0;
  return {miou >= 2.0 * baseline && fast, "mIoU " + fmt("%.2f", miou) + " vs 2B = " + fmt("%.2f", 2.0 * baseline) +
                                              " (ratio " + fmt("%.2f", miou / baseline) + ")" +
                                              (fast ? "" : ", over 10 min")};
}

Outcome ablation_orderings(RunCache& cache, double shared_seconds) {
  const auto t0 = Clock::now();
  const BenchmarkConfig bench;
  const TrainConfig base = desk_preset();
  std::string detail;
  bool ok = true;
  for (auto suite : {AblationSuite::losses, AblationSuite::selection, AblationSuite::upper_bound}) {
    const AblationReport r = run_ablation(suite, base, bench, kRunSeeds, &cache, log_run);
    ok = ok && r.all_orderings_hold();
    detail += (detail.empty() ? "" : "; ") + summarize(r);
    for (const auto& o : r.orderings) {
      if (!o.holds) detail += " [violated: " + o.description + "]";
    }
  }
  // Runs reused from criterion 7 count toward this budget too.
  const double total = seconds_since(t0) + shared_seconds;
  const bool fast = total < 45.0 * 60.0;
  return {ok && fast, detail + "; " + fmt("%.0f s including reused runs", total) + (fast ? "" : ", over 45 min")};
}

Outcome alignment_sensitivity(RunCache& cache) {
  const AblationReport r = run_ablation(AblationSuite::alignment, desk_preset(), BenchmarkConfig{}, kRunSeeds, &cache,
                                        log_run);
  std::string detail = summarize(r);
  for (const auto& o : r.orderings) {
    if (!o.holds) detail += " [violated: " + o.description + "]";
  }
  return {r.all_orderings_hold(), detail};
}

// ---------------------------------------------------------------- 10

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Every file under `a` except run manifests (which record wall time) must
// have a byte-identical twin under `b`.
bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().filename() == "run_manifest.json") continue;
    ++files;
    const fs::path twin = b / fs::relative(e.path(), a);
    if (!fs::exists(twin) || slurp(e.path()) != slurp(twin)) {
      why = "differs: " + fs::relative(e.path(), a).string();
      return false;
    }
  }
  return files > 0;
}

Outcome reproducibility() {
  const fs::path dir = fs::temp_directory_path() / "lfvg_acceptance_replay";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args) {
    const int code = cli::run(args, sink, sink);
    if (code != 0) throw std::runtime_error("lfvg " + args[0] + " exited " + std::to_string(code) + ": " + sink.str());
  };
  auto replay = [&](const fs::path& manifest, const fs::path& out) {
    run({"replay", "--manifest", manifest.string(), "--out", out.string()});
  };
  const std::string store = (dir / "store").string();
  run({"synth", "--out", store, "--videos", "12", "--segments", "16", "--events", "3", "--seed", "9"});
  run({"train", "--data", store, "--out", (dir / "ck").string(), "--epochs", "2", "--hidden", "16", "--batch-size",
       "16", "--quiet", "--seed", "4"});
  run({"proposals", "--data", store, "--out", (dir / "p.json").string(), "--seed", "2"});
  run({"eval", "--checkpoint", (dir / "ck").string(), "--data", store, "--out", (dir / "e.json").string()});

  int replays = 0;
  std::string why;
  bool ok = true;
  replay(dir / "store" / "run_manifest.json", dir / "store2");
  ok = ok && same_tree(dir / "store", dir / "store2", why) && ++replays;
  replay(dir / "ck" / "run_manifest.json", dir / "ck2");
  ok = ok && same_tree(dir / "ck", dir / "ck2", why) && ++replays;
  for (const char* name : {"p.json", "e.json"}) {
    replay(dir / (std::string(name) + ".manifest.json"), dir / (std::string("again_") + name));
    const bool same = slurp(dir / name) == slurp(dir / (std::string("again_") + name));
    if (!same) why = std::string("differs: ") + name;
    ok = ok && same && ++replays;
  }

  // Export/import round trip.
  AlignmentConfig w;
  w.seed = 17;
  SyntheticShape shape;
  shape.n_videos = 8;
  const Dataset d = generate_synthetic_dataset(w, shape);
  export_feature_store(d, dir / "rt");
  const Dataset back = import_feature_store(dir / "rt");
  double worst = 0.0;
  auto compare = [&](const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Index i = 0; i < a.size(); ++i) {
      const double x = a.data()[i];
      worst = std::max(worst, std::abs(x - b.data()[i]) / std::max(std::abs(x), 1e-30));
    }
    return true;
  };
  bool shapes = back.videos.size() == d.videos.size() && back.queries.size() == d.queries.size();
  for (std::size_t i = 0; shapes && i < d.videos.size(); ++i) {
    shapes = compare(d.videos[i].segment_features, back.videos[i].segment_features) &&
             compare(d.videos[i].frame_features, back.videos[i].frame_features) && d.videos[i].id == back.videos[i].id;
  }
  for (std::size_t i = 0; shapes && i < d.queries.size(); ++i) {
    shapes = compare(d.queries[i].feature.transpose(), back.queries[i].feature.transpose()) &&
             d.queries[i].id == back.queries[i].id;
  }
  // Round to nearest float32: relative error at most 2^-24.
  const bool within = shapes && worst <= std::ldexp(1.0, -24);
  fs::remove_all(dir);
  return {ok && within, std::to_string(replays) + "/4 replays bit-identical" + (why.empty() ? "" : " (" + why + ")") +
                            ", store round trip rel err " + fmt("%.2e", worst)};
}

}  // namespace

int main() {
  std::cout << "acceptance: 10 criteria" << std::endl;
  criterion(1, "metric oracle equivalence", metric_oracles);
  criterion(2, "gradient suite", gradient_suite);
  criterion(3, "loss formulas", loss_formulas);
  criterion(4, "proposal correctness", proposal_correctness);
  criterion(5, "perturbation contract", perturbation_contract);
  criterion(6, "zero-shot contract", zero_shot_contract);

  RunCache cache;
  double shared = 0.0;
  criterion(7, "end-to-end transfer", [&] { return end_to_end(cache, shared); });
  criterion(8, "ablation orderings", [&] { return ablation_orderings(cache, shared); });
  criterion(9, "alignment sensitivity", [&] { return alignment_sensitivity(cache); });
  criterion(10, "reproducibility", reproducibility);
  std::cout << "acceptance: " << 10 - failures << "/10 passed (" << cache.trainings() << " trainings, "
            << cache.hits() << " reused)" << std::endl;
  return failures;
}
