#include "lfvg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>

#include "lfvg/rng.hpp"

namespace lfvg {

using nlohmann::json;

double tiou(const TemporalInterval& pred, const TemporalInterval& gt) {
  pred.validate("tiou prediction");
  gt.validate("tiou ground truth");
  const double inter = std::max(0.0, std::min(pred.end, gt.end) - std::max(pred.start, gt.start));
  const double uni = std::max(pred.end, gt.end) - std::min(pred.start, gt.start);
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double recall_at(std::span<const double> tious, double threshold) {
  if (tious.empty()) throw InvalidInputError("recall_at: empty list");
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidInputError("recall_at: threshold outside (0,1)");
  const auto hits = std::count_if(tious.begin(), tious.end(), [&](double t) { return t > threshold; });
  return 100.0 * static_cast<double>(hits) / static_cast<double>(tious.size());
}

double mean_iou(std::span<const double> tious) {
  if (tious.empty()) throw InvalidInputError("mean_iou: empty list");
  double s = 0.0;
  for (double t : tious) s += t;
  return 100.0 * s / static_cast<double>(tious.size());
}

EvalResult summarize(std::vector<double> tious) {
  EvalResult r;
  for (double th : kRecallThresholds) r.recall_at[th] = recall_at(tious, th);
  r.miou = mean_iou(tious);
  r.n_queries = tious.size();
  r.tious = std::move(tious);
  return r;
}

EvalResult evaluate(const IntervalPredictor& predict, const Dataset& d) {
  if (d.queries.empty()) throw InvalidInputError("evaluate: dataset has no queries");
  std::vector<std::string> missing;
  for (const auto& q : d.queries) {
    if (!d.find_video(q.video_id)) missing.push_back(q.id + " -> " + q.video_id);
  }
  if (!missing.empty()) {
    std::string msg = "evaluate: queries reference missing videos:";
    for (const auto& m : missing) msg += " " + m;
    throw EvaluationError(msg);
  }
  std::vector<double> tious;
  tious.reserve(d.queries.size());
  for (const auto& q : d.queries) {
    const auto& v = d.videos[*d.find_video(q.video_id)];
    const Vector feature = q.feature.normalized();
    const TemporalInterval pred = predict(v, feature);
    if (!pred.valid()) throw EvaluationError("evaluate: prediction for " + q.id + " is not a valid interval");
    tious.push_back(tiou(pred, q.gt_interval));
  }
  return summarize(std::move(tious));
}

EvalResult evaluate(const GroundingModel& model, const Dataset& d) {
  return evaluate(
      [&](const VideoRecord& v, const Vector& q) {
        return model.forward(pool_to_length(v.segment_features, model.config().t_max), q).prediction;
      },
      d);
}

double random_baseline_miou(const Dataset& d, std::size_t draws, std::uint64_t seed) {
  if (d.queries.empty()) throw InvalidInputError("random_baseline_miou: dataset has no queries");
  if (draws == 0) throw InvalidInputError("random_baseline_miou: draws must be positive");
  Rng rng(derive_seed(seed, {tag(Stream::random_baseline)}));
  std::vector<double> tious;
  tious.reserve(draws);
  for (std::size_t i = 0; i < draws; ++i) {
    const auto& q = d.queries[rng.uniform_index(d.queries.size())];
    const double a = rng.uniform();
    const double b = rng.uniform();
    tious.push_back(tiou({std::min(a, b), std::max(a, b)}, q.gt_interval));
  }
  return mean_iou(tious);
}

json to_json(const EvalResult& r) {
  json recall = json::object();
  for (const auto& [th, v] : r.recall_at) {
    char key[16];
    std::snprintf(key, sizeof key, "R@%.1f", th);
    recall[key] = v;
  }
  return json{{"recall", recall}, {"miou", r.miou}, {"n_queries", r.n_queries}};
}

std::string format_table(const EvalResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%8s %8s %8s %8s %8s\n%8.2f %8.2f %8.2f %8.2f %8zu\n", "R@0.3", "R@0.5",
                "R@0.7", "mIoU", "queries", r.recall_at.at(0.3), r.recall_at.at(0.5), r.recall_at.at(0.7),
                r.miou, r.n_queries);
  return buf;
}

// ---------------------------------------------------------------- benchmark

namespace {

SyntheticShape shape_of(const BenchmarkConfig& b, Index n, Index first) {
  SyntheticShape s;
  s.n_videos = n;
  s.segments_per_video = b.segments;
  s.events_per_video = b.events;
  s.frames_per_segment = b.frames_per_segment;
  s.first_video = first;
  return s;
}

}  // namespace

Dataset BenchmarkConfig::train_split(std::uint64_t seed) const {
  AlignmentConfig w = world;
  w.seed = seed;
  return generate_synthetic_dataset(w, shape_of(*this, n_train, 0));
}

Dataset BenchmarkConfig::test_split(std::uint64_t seed) const {
  AlignmentConfig w = world;
  w.seed = seed;
  return generate_synthetic_dataset(w, shape_of(*this, n_test, n_train));
}

json to_json(const BenchmarkConfig& b) {
  return json{{"latent_dim", b.world.latent_dim},
              {"video_dim", b.world.video_dim},
              {"query_dim", b.world.query_dim},
              {"align_noise", b.world.align_noise_sigma},
              {"obs_noise", b.world.obs_noise_sigma},
              {"clutter_rate", b.world.clutter_rate},
              {"n_train", b.n_train},
              {"n_test", b.n_test},
              {"segments", b.segments},
              {"events", b.events},
              {"frames_per_segment", b.frames_per_segment}};
}

BenchmarkConfig benchmark_config_from_json(const json& j, const BenchmarkConfig& base) {
  BenchmarkConfig b = base;
  const json known = to_json(base);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) throw InvalidInputError("benchmark config: unknown key '" + it.key() + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    get("latent_dim", b.world.latent_dim);
    get("video_dim", b.world.video_dim);
    get("query_dim", b.world.query_dim);
    get("align_noise", b.world.align_noise_sigma);
    get("obs_noise", b.world.obs_noise_sigma);
    get("clutter_rate", b.world.clutter_rate);
    get("n_train", b.n_train);
    get("n_test", b.n_test);
    get("segments", b.segments);
    get("events", b.events);
    get("frames_per_segment", b.frames_per_segment);
  } catch (const json::exception& e) {
    throw InvalidInputError(std::string("benchmark config: ") + e.what());
  }
  b.world.validate();
  return b;
}

AblationSuite ablation_suite_from_string(const std::string& s) {
  if (s == "losses") return AblationSuite::losses;
  if (s == "selection") return AblationSuite::selection;
  if (s == "n-frames" || s == "n_frames") return AblationSuite::n_frames;
  if (s == "upper-bound" || s == "upper_bound") return AblationSuite::upper_bound;
  if (s == "alignment") return AblationSuite::alignment;
  throw InvalidInputError("unknown ablation suite '" + s + "'");
}

std::string to_string(AblationSuite s) {
  switch (s) {
    case AblationSuite::losses: return "losses";
    case AblationSuite::selection: return "selection";
    case AblationSuite::n_frames: return "n-frames";
    case AblationSuite::upper_bound: return "upper-bound";
    case AblationSuite::alignment: return "alignment";
  }
  return "?";
}

bool AblationReport::all_orderings_hold() const {
  return std::all_of(orderings.begin(), orderings.end(), [](const auto& o) { return o.holds; });
}

const VariantResult& AblationReport::variant(const std::string& name) const {
  for (const auto& v : variants) {
    if (v.name == name) return v;
  }
  throw InvalidInputError("ablation report: no variant '" + name + "'");
}

std::shared_ptr<const TrainResult> RunCache::get_or_train(const TrainConfig& cfg, const Dataset& train_data,
                                                          const ProgressCallback& progress) {
  const TrainingView view(train_data);
  const auto key = std::make_pair(config_hash(cfg), view.content_hash());
  if (auto it = runs_.find(key); it != runs_.end()) {
    ++hits_;
    return it->second;
  }
  auto result = std::make_shared<const TrainResult>(train(view, cfg, progress));
  ++trainings_;
  runs_.emplace(key, result);
  return result;
}

namespace {

struct Variant {
  std::string name;
  TrainConfig cfg;
  BenchmarkConfig bench;
};

std::uint64_t combined_hash(const TrainConfig& c, const BenchmarkConfig& b) {
  const std::string s = to_json(c).dump() + to_json(b).dump();
  return fnv1a(s.data(), s.size());
}

std::string format_sigma(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "align=%.1f", s);
  return buf;
}

}  // namespace

AblationReport run_ablation(AblationSuite suite, const TrainConfig& base, const BenchmarkConfig& bench,
                            const std::vector<std::uint64_t>& seeds, RunCache* cache,
                            const AblationProgress& progress) {
  if (seeds.size() < 3) throw InvalidInputError("run_ablation: at least 3 seeds are required");
  base.validate();
  std::vector<Variant> variants;
  // Each variant is built from base by changing one field; `reset` undoes it
  // so the controlled hash can be compared.
  std::vector<std::function<void(TrainConfig&, BenchmarkConfig&)>> reset;
  auto add = [&](std::string name, auto modify, auto undo) {
    Variant v{std::move(name), base, bench};
    modify(v.cfg, v.bench);
    variants.push_back(std::move(v));
    reset.push_back(undo);
  };
  const auto undo_losses = [&](TrainConfig& c, BenchmarkConfig&) {
    c.lambda = base.lambda;
    c.reg_weight = base.reg_weight;
  };
  switch (suite) {
    case AblationSuite::losses:
      add("reg-only", [](TrainConfig& c, BenchmarkConfig&) { c.reg_weight = 1.0, c.lambda = 0.0; }, undo_losses);
      add("att-only", [](TrainConfig& c, BenchmarkConfig&) { c.reg_weight = 0.0, c.lambda = 1.0; }, undo_losses);
      add("both", [](TrainConfig& c, BenchmarkConfig&) { c.reg_weight = 1.0, c.lambda = 1.0; }, undo_losses);
      break;
    case AblationSuite::selection: {
      const auto undo = [&](TrainConfig& c, BenchmarkConfig&) { c.selection = base.selection; };
      add("random", [](TrainConfig& c, BenchmarkConfig&) { c.selection = SelectionStrategy::random; }, undo);
      add("transformer", [](TrainConfig& c, BenchmarkConfig&) { c.selection = SelectionStrategy::transformer; },
          undo);
      break;
    }
    case AblationSuite::n_frames: {
      const auto undo = [&](TrainConfig& c, BenchmarkConfig&) { c.n_candidates = base.n_candidates; };
      for (Index n : {1, 2, 4, 8, 9, 16}) {
        add("N=" + std::to_string(n), [n](TrainConfig& c, BenchmarkConfig&) { c.n_candidates = n; }, undo);
      }
      break;
    }
    case AblationSuite::upper_bound: {
      const auto undo = [&](TrainConfig& c, BenchmarkConfig&) { c.mode = base.mode; };
      add("language-free", [](TrainConfig& c, BenchmarkConfig&) { c.mode = TrainMode::language_free; }, undo);
      add("upper-bound", [](TrainConfig& c, BenchmarkConfig&) { c.mode = TrainMode::upper_bound; }, undo);
      break;
    }
    case AblationSuite::alignment: {
      const auto undo = [&](TrainConfig&, BenchmarkConfig& b) {
        b.world.align_noise_sigma = bench.world.align_noise_sigma;
      };
      for (double s : {0.0, 0.5, 1.0, 2.0}) {
        add(format_sigma(s), [s](TrainConfig&, BenchmarkConfig& b) { b.world.align_noise_sigma = s; }, undo);
      }
      break;
    }
  }

  RunCache local_cache;
  RunCache& runs = cache ? *cache : local_cache;
  AblationReport report;
  report.suite = to_string(suite);
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    const Variant& v = variants[vi];
    VariantResult vr;
    vr.name = v.name;
    TrainConfig controlled_cfg = v.cfg;
    BenchmarkConfig controlled_bench = v.bench;
    reset[vi](controlled_cfg, controlled_bench);
    vr.controlled_hash = combined_hash(controlled_cfg, controlled_bench);
    if (!report.variants.empty() && vr.controlled_hash != report.variants.front().controlled_hash) {
      throw ContractViolation("run_ablation: variant " + v.name + " differs in more than the varied field");
    }
    for (const auto seed : seeds) {
      TrainConfig cfg = v.cfg;
      cfg.seed = seed;
      const Dataset train_data = v.bench.train_split(seed);
      const Dataset test_data = v.bench.test_split(seed);
      const auto trained = runs.get_or_train(cfg, train_data);
      EvalResult er = evaluate(trained->model, test_data);
      if (progress) progress(v.name, seed, er);
      vr.seeds.push_back(seed);
      vr.runs.push_back(std::move(er));
    }
    double sum = 0.0;
    for (const auto& r : vr.runs) sum += r.miou;
    vr.mean_miou = sum / static_cast<double>(vr.runs.size());
    double ss = 0.0;
    for (const auto& r : vr.runs) ss += (r.miou - vr.mean_miou) * (r.miou - vr.mean_miou);
    vr.sd_miou = vr.runs.size() > 1 ? std::sqrt(ss / static_cast<double>(vr.runs.size() - 1)) : 0.0;
    report.variants.push_back(std::move(vr));
  }

  auto m = [&](const std::string& name) { return report.variant(name).mean_miou; };
  switch (suite) {
    case AblationSuite::losses:
      report.orderings.push_back({"mIoU(both) > mIoU(reg-only)", m("both") > m("reg-only")});
      report.orderings.push_back({"mIoU(reg-only) > mIoU(att-only)", m("reg-only") > m("att-only")});
      break;
    case AblationSuite::selection:
      report.orderings.push_back({"mIoU(transformer) > mIoU(random)", m("transformer") > m("random")});
      break;
    case AblationSuite::n_frames:
      break;
    case AblationSuite::upper_bound:
      report.orderings.push_back(
          {"mIoU(upper-bound) >= mIoU(language-free) - 2.0", m("upper-bound") >= m("language-free") - 2.0});
      break;
    case AblationSuite::alignment:
      for (std::size_t i = 0; i + 1 < report.variants.size(); ++i) {
        const auto& a = report.variants[i];
        const auto& b = report.variants[i + 1];
        report.orderings.push_back({"mIoU(" + a.name + ") >= mIoU(" + b.name + ")", a.mean_miou >= b.mean_miou});
      }
      break;
  }
  return report;
}

json to_json(const AblationReport& r) {
  json variants = json::array();
  for (const auto& v : r.variants) {
    json runs = json::array();
    for (std::size_t i = 0; i < v.runs.size(); ++i) {
      json run = to_json(v.runs[i]);
      run["seed"] = v.seeds[i];
      runs.push_back(std::move(run));
    }
    variants.push_back({{"name", v.name},
                        {"mean_miou", v.mean_miou},
                        {"sd_miou", v.sd_miou},
                        {"controlled_hash", v.controlled_hash},
                        {"runs", std::move(runs)}});
  }
  json orderings = json::array();
  for (const auto& o : r.orderings) orderings.push_back({{"check", o.description}, {"holds", o.holds}});
  return json{{"suite", r.suite}, {"variants", std::move(variants)}, {"orderings", std::move(orderings)}};
}

std::string format_table(const AblationReport& r) {
  std::ostringstream os;
  char buf[256];
  os << "suite: " << r.suite << '\n';
  std::snprintf(buf, sizeof buf, "%-16s %8s %8s %8s %16s\n", "variant", "R@0.3", "R@0.5", "R@0.7", "mIoU (mean±sd)");
  os << buf;
  for (const auto& v : r.variants) {
    double r3 = 0, r5 = 0, r7 = 0;
    for (const auto& run : v.runs) {
      r3 += run.recall_at.at(0.3);
      r5 += run.recall_at.at(0.5);
      r7 += run.recall_at.at(0.7);
    }
    const double n = static_cast<double>(v.runs.size());
    std::snprintf(buf, sizeof buf, "%-16s %8.2f %8.2f %8.2f %9.2f ± %4.2f\n", v.name.c_str(), r3 / n, r5 / n,
                  r7 / n, v.mean_miou, v.sd_miou);
    os << buf;
  }
  for (const auto& o : r.orderings) os << (o.holds ? "[ok]   " : "[FAIL] ") << o.description << '\n';
  return os.str();
}

std::string to_csv(const AblationReport& r) {
  std::ostringstream os;
  os << "variant,seed,r03,r05,r07,miou\n";
  char buf[256];
  for (const auto& v : r.variants) {
    for (std::size_t i = 0; i < v.runs.size(); ++i) {
      const auto& run = v.runs[i];
      std::snprintf(buf, sizeof buf, "%s,%llu,%.6f,%.6f,%.6f,%.6f\n", v.name.c_str(),
                    static_cast<unsigned long long>(v.seeds[i]), run.recall_at.at(0.3), run.recall_at.at(0.5),
                    run.recall_at.at(0.7), run.miou);
      os << buf;
    }
  }
  return os.str();
}

}  // namespace lfvg
