#include "lfvg_cli/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lfvg/checkpoint.hpp"
#include "lfvg/error.hpp"
#include "lfvg/evaluation.hpp"
#include "lfvg/feature_store.hpp"
#include "lfvg/proposal.hpp"
#include "lfvg/training.hpp"

#ifndef LFVG_BUILD_ID
#define LFVG_BUILD_ID "unknown"
#endif

namespace lfvg::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OrderingFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr const char* kManifestName = "run_manifest.json";

// Options whose values are filesystem paths; made absolute in manifests.
const std::set<std::string> kPathOptions = {"--out", "--data", "--checkpoint", "--config", "--query-blob",
                                            "--csv", "--manifest"};

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw UsageError("cannot write " + tmp.string());
    out << text;
    if (!out) throw UsageError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw UsageError("cannot finalize " + path.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::uint64_t resolve_seed(const CLI::Option* flag, std::uint64_t value) {
  if (flag->count() > 0) return value;
  if (const char* env = std::getenv("LFVG_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      return v;
    } catch (const std::exception&) {
      throw UsageError(std::string("LFVG_SEED is not an unsigned integer: ") + env);
    }
  }
  return 0;
}

/// The invocation with paths made absolute and the resolved seed spelled
/// out, so that it no longer depends on the working directory or the
/// environment.
std::vector<std::string> resolved_argv(const std::vector<std::string>& args, std::optional<std::uint64_t> seed) {
  std::vector<std::string> out;
  bool has_seed = false;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string a = args[i];
    std::optional<std::string> value;
    if (const auto eq = a.find('='); a.rfind("--", 0) == 0 && eq != std::string::npos) {
      value = a.substr(eq + 1);
      a = a.substr(0, eq);
    } else if (kPathOptions.count(a) || a == "--seed") {
      if (i + 1 < args.size()) value = args[++i];
    }
    if (a == "--seed") {
      has_seed = true;
      if (seed) value = std::to_string(*seed);
    }
    out.push_back(a);
    if (value) out.push_back(kPathOptions.count(a) ? fs::absolute(*value).lexically_normal().string() : *value);
  }
  if (seed && !has_seed) {
    out.push_back("--seed");
    out.push_back(std::to_string(*seed));
  }
  return out;
}

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json config;
  std::optional<std::uint64_t> seed;
  json inputs = json::object();
  json outputs = json::object();
};

void write_manifest(const fs::path& path, const Manifest& m, double seconds) {
  const std::string canonical = m.config.dump();
  json j{{"format", "lfvg-run-manifest"},
         {"version", 1},
         {"command", m.command},
         {"argv", m.argv},
         {"config", m.config},
         {"config_hash", hex64(fnv1a(canonical.data(), canonical.size()))},
         {"build", LFVG_BUILD_ID},
         {"inputs", m.inputs},
         {"outputs", m.outputs},
         {"duration_s", seconds}};
  j["seed"] = m.seed ? json(*m.seed) : json(nullptr);
  write_json(path, j);
}

fs::path manifest_for_file(const fs::path& output) { return output.string() + ".manifest.json"; }

std::string abs_string(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

// ---------------------------------------------------------------- training flags

struct TrainFlags {
  std::string preset = "desk";
  std::string config_path;
  std::string mode;
  std::string selection;
  Index epochs = 0, batch_size = 0, k = 0, max_merge = 0, min_len = 0, n_candidates = 0, hidden = 0;
  double lambda = 0, reg_weight = 0, lr = 0, xi = 0, tau = 0, clip_norm = 0;
  bool soft = false;
  std::vector<std::pair<CLI::Option*, std::function<void(TrainConfig&)>>> setters;

  void add(CLI::App* app) {
    app->add_option("--preset", preset, "Hyperparameter preset")->check(CLI::IsMember({"desk", "paper"}));
    app->add_option("--config", config_path, "Training config JSON; flags override it");
    auto bind = [&](auto& field, const char* flag, const char* help, auto apply) {
      setters.emplace_back(app->add_option(flag, field, help), apply);
    };
    bind(mode, "--mode", "language-free or upper-bound",
         [this](TrainConfig& c) { c.mode = train_mode_from_string(dashes_to_underscores(mode)); });
    bind(selection, "--selection", "transformer or random",
         [this](TrainConfig& c) { c.selection = selection_from_string(selection); });
    bind(epochs, "--epochs", "Training epochs", [this](TrainConfig& c) { c.epochs = epochs; });
    bind(batch_size, "--batch-size", "Minibatch size", [this](TrainConfig& c) { c.batch_size = batch_size; });
    bind(lr, "--lr", "Adam learning rate", [this](TrainConfig& c) { c.learning_rate = lr; });
    bind(lambda, "--lambda", "Weight of the attention loss", [this](TrainConfig& c) { c.lambda = lambda; });
    bind(reg_weight, "--reg-weight", "Weight of the regression loss",
         [this](TrainConfig& c) { c.reg_weight = reg_weight; });
    bind(k, "--k", "Clusters per video", [this](TrainConfig& c) { c.k = k; });
    bind(max_merge, "--max-merge", "Adjacent events merged at most", [this](TrainConfig& c) { c.max_merge = max_merge; });
    bind(min_len, "--min-len", "Shortest proposal in segments", [this](TrainConfig& c) { c.min_len = min_len; });
    bind(n_candidates, "--n-frames", "Candidate frames per proposal",
         [this](TrainConfig& c) { c.n_candidates = n_candidates; });
    bind(xi, "--xi", "Perturbation scale", [this](TrainConfig& c) { c.xi = xi; });
    bind(tau, "--tau", "Gumbel-softmax temperature", [this](TrainConfig& c) { c.tau = tau; });
    bind(clip_norm, "--clip-norm", "Global gradient-norm clip (0 disables)",
         [this](TrainConfig& c) { c.clip_norm = clip_norm; });
    bind(hidden, "--hidden", "Grounding model width", [this](TrainConfig& c) { c.hidden = hidden; });
    setters.emplace_back(app->add_flag("--soft", soft, "Soft instead of straight-through selection"),
                         [](TrainConfig& c) { c.hard = false; });
  }

  static std::string dashes_to_underscores(std::string s) {
    for (auto& ch : s) {
      if (ch == '-') ch = '_';
    }
    return s;
  }

  TrainConfig resolve(std::uint64_t seed) const {
    TrainConfig c = lfvg::preset(preset);
    if (!config_path.empty()) c = train_config_from_json(read_json(config_path), c);
    for (const auto& [opt, apply] : setters) {
      if (opt->count() > 0) apply(c);
    }
    c.seed = seed;
    c.validate();
    return c;
  }
};

void write_loss_csv(const fs::path& path, const std::vector<StepLoss>& curve) {
  std::ostringstream s;
  s << "step,epoch,loss_reg,loss_att,total\n" << std::setprecision(17);
  for (const auto& l : curve) s << l.step << ',' << l.epoch << ',' << l.loss_reg << ',' << l.loss_att << ',' << l.total << '\n';
  write_text_atomic(path, s.str());
}

const VideoRecord& find_video(const Dataset& d, const std::string& id) {
  const auto i = d.find_video(id);
  if (!i) throw UsageError("no video '" + id + "' in the store");
  return d.videos[*i];
}

// ---------------------------------------------------------------- commands

struct SynthArgs {
  std::string out;
  SyntheticShape shape;
  AlignmentConfig world;
  Index dim = 0;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* dim_opt = nullptr;
};

Manifest cmd_synth(const SynthArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  AlignmentConfig w = a.world;
  if (a.dim_opt->count() > 0) w.video_dim = w.query_dim = a.dim;
  w.seed = resolve_seed(a.seed_opt, a.seed);
  const Dataset d = generate_synthetic_dataset(w, a.shape);
  try {
    export_feature_store(d, a.out);
  } catch (const fs::filesystem_error& e) {
    throw UsageError(std::string("cannot write store: ") + e.what());
  }
  out << "wrote " << d.videos.size() << " videos and " << d.queries.size() << " queries to " << a.out << "\n";

  Manifest m{"synth", resolved_argv(args, w.seed), {}, w.seed};
  m.config = json{{"latent_dim", w.latent_dim},
                  {"video_dim", w.video_dim},
                  {"query_dim", w.query_dim},
                  {"align_noise_sigma", w.align_noise_sigma},
                  {"obs_noise_sigma", w.obs_noise_sigma},
                  {"clutter_rate", w.clutter_rate},
                  {"orthogonal_text_map", w.orthogonal_text_map},
                  {"min_duration_s", w.min_duration_s},
                  {"max_duration_s", w.max_duration_s},
                  {"seed", w.seed},
                  {"videos", a.shape.n_videos},
                  {"segments", a.shape.segments_per_video},
                  {"events", a.shape.events_per_video},
                  {"frames_per_segment", a.shape.frames_per_segment},
                  {"first_video", a.shape.first_video}};
  m.outputs = json{{"store", abs_string(a.out)}};
  return m;
}

void cmd_import_check(const std::string& data, std::ostream& out) {
  const Dataset d = import_feature_store(data);
  Index tmin = std::numeric_limits<Index>::max(), tmax = 0;
  std::size_t frames = 0;
  for (const auto& v : d.videos) {
    tmin = std::min(tmin, v.num_segments());
    tmax = std::max(tmax, v.num_segments());
    frames += static_cast<std::size_t>(v.num_frames());
  }
  json j{{"videos", d.videos.size()},
         {"queries", d.queries.size()},
         {"frames", frames},
         {"segment_dim", d.videos.empty() ? 0 : d.videos[0].segment_features.cols()},
         {"query_dim", d.videos.empty() ? 0 : d.videos[0].frame_features.cols()},
         {"segments_min", d.videos.empty() ? 0 : tmin},
         {"segments_max", tmax}};
  bool has_events = !d.videos.empty();
  for (const auto& v : d.videos) has_events = has_events && !v.hidden_events.empty();
  if (!d.queries.empty() && has_events) j["alignment_score"] = alignment_score(d);
  out << j.dump(2) << "\n";
}

struct ProposalArgs {
  std::string data, video, out;
  ProposalConfig cfg;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  bool no_similarity = false;
};

Manifest cmd_proposals(const ProposalArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  const std::uint64_t seed = resolve_seed(a.seed_opt, a.seed);
  const Dataset d = import_feature_store(a.data);
  json videos = json::array();
  for (std::size_t i = 0; i < d.videos.size(); ++i) {
    const auto& v = d.videos[i];
    if (!a.video.empty() && v.id != a.video) continue;
    json entry{{"video_id", v.id}, {"T", v.num_segments()}};
    if (!a.no_similarity) {
      const Matrix r = similarity_matrix(v.segment_features);
      json rows = json::array();
      for (Index t = 0; t < r.rows(); ++t) {
        const Vector row = r.row(t).transpose();
        rows.push_back(std::vector<double>(row.data(), row.data() + row.size()));
      }
      entry["similarity"] = std::move(rows);
    }
    json props = json::array();
    // Same per-video clustering stream as training.
    for (const auto& p : generate_proposals(v.segment_features, a.cfg, derive_seed(seed, {tag(Stream::kmeans), i}))) {
      props.push_back({{"first", p.span.first},
                       {"last", p.span.last},
                       {"start", p.interval.start},
                       {"end", p.interval.end},
                       {"merged_from", p.merged_from}});
    }
    entry["proposals"] = std::move(props);
    videos.push_back(std::move(entry));
  }
  if (!a.video.empty() && videos.empty()) throw UsageError("no video '" + a.video + "' in the store");
  const json result{{"k", a.cfg.k}, {"max_merge", a.cfg.max_merge}, {"min_len", a.cfg.min_len}, {"videos", videos}};
  Manifest m{"proposals", resolved_argv(args, seed),
             json{{"k", a.cfg.k}, {"max_merge", a.cfg.max_merge}, {"min_len", a.cfg.min_len}, {"seed", seed}}, seed};
  m.inputs = json{{"store", abs_string(a.data)}};
  if (a.out.empty()) {
    out << result.dump(2) << "\n";
  } else {
    write_json(a.out, result);
    m.outputs = json{{"proposals", abs_string(a.out)}};
    out << "wrote proposals for " << videos.size() << " videos to " << a.out << "\n";
  }
  return m;
}

struct TrainArgs {
  std::string data, out;
  TrainFlags flags;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  bool quiet = false;
};

Manifest cmd_train(const TrainArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const std::uint64_t seed = resolve_seed(a.seed_opt, a.seed);
  const TrainConfig cfg = a.flags.resolve(seed);
  const Dataset d = import_feature_store(a.data);
  ProgressCallback progress;
  if (!a.quiet) {
    progress = [&](const EpochSummary& s) {
      err << "epoch " << s.epoch + 1 << "/" << cfg.epochs << " loss " << s.mean_loss << "\n";
    };
  }
  const TrainResult r = cfg.mode == TrainMode::upper_bound ? train_upper_bound(d, cfg, progress) : train(d, cfg, progress);
  save_checkpoint(a.out, r.model, cfg);
  write_loss_csv(fs::path(a.out) / "loss.csv", r.curve);
  out << "trained " << r.curve.size() << " steps on " << r.samples_per_epoch << " pairs per epoch; checkpoint "
      << a.out << "\n";
  Manifest m{"train", resolved_argv(args, seed), to_json(cfg), seed};
  m.inputs = json{{"store", abs_string(a.data)}};
  m.outputs = json{{"checkpoint", abs_string(a.out)}, {"loss_csv", abs_string(fs::path(a.out) / "loss.csv")}};
  return m;
}

struct InferArgs {
  std::string checkpoint, data, video, query, query_blob, out;
  Index row = 0;
};

Manifest cmd_infer(const InferArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  const Checkpoint c = load_checkpoint(a.checkpoint);
  const Dataset d = import_feature_store(a.data);
  Vector q;
  std::string video_id = a.video;
  if (!a.query.empty()) {
    const auto it = std::find_if(d.queries.begin(), d.queries.end(), [&](const QueryRecord& r) { return r.id == a.query; });
    if (it == d.queries.end()) throw UsageError("no query '" + a.query + "' in the store");
    q = it->feature;
    if (video_id.empty()) video_id = it->video_id;
  } else if (!a.query_blob.empty()) {
    const Matrix m = read_blob(a.query_blob);
    if (a.row < 0 || a.row >= m.rows()) throw UsageError("query row out of range for " + a.query_blob);
    q = m.row(a.row).transpose();
  } else {
    throw UsageError("a query feature is required (--query or --query-blob)");
  }
  if (video_id.empty()) throw UsageError("--video is required with --query-blob");
  if (!(q.norm() > 0.0) || !q.allFinite()) throw UsageError("query feature must be finite and nonzero");
  q.normalize();
  const VideoRecord& v = find_video(d, video_id);
  const GroundingOutput o = c.model.forward(pool_to_length(v.segment_features, c.model.config().t_max), q);
  json result{{"video_id", v.id},
              {"t_s", o.prediction.start},
              {"t_e", o.prediction.end},
              {"t_s_seconds", o.prediction.start * v.duration_s},
              {"t_e_seconds", o.prediction.end * v.duration_s},
              {"attention", std::vector<double>(o.attention.data(), o.attention.data() + o.attention.size())}};
  out << result.dump(2) << "\n";
  Manifest m{"infer", resolved_argv(args, std::nullopt), to_json(c.config), std::nullopt};
  m.inputs = json{{"checkpoint", abs_string(a.checkpoint)}, {"store", abs_string(a.data)}};
  if (!a.out.empty()) {
    write_json(a.out, result);
    m.outputs = json{{"prediction", abs_string(a.out)}};
  }
  return m;
}

struct EvalArgs {
  std::string checkpoint, data, out;
  bool oracle = false;
  std::size_t draws = 10000;
};

Manifest cmd_eval(const EvalArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  const Dataset d = import_feature_store(a.data);
  if (d.queries.empty()) throw UsageError("store has no queries to evaluate");
  EvalResult r;
  Manifest m{"eval", resolved_argv(args, std::nullopt), json::object(), std::nullopt};
  if (a.oracle) {
    // Test double: answers every query with its ground truth.
    std::size_t next = 0;
    r = evaluate([&](const VideoRecord&, const Vector&) { return d.queries.at(next++).gt_interval; }, d);
    m.config = json{{"predictor", "oracle"}};
  } else {
    if (a.checkpoint.empty()) throw UsageError("--checkpoint is required unless --oracle is given");
    const Checkpoint c = load_checkpoint(a.checkpoint);
    r = evaluate(c.model, d);
    m.config = json{{"predictor", "checkpoint"}, {"train_config", to_json(c.config)}};
    m.inputs["checkpoint"] = abs_string(a.checkpoint);
  }
  const double baseline = random_baseline_miou(d, a.draws, 0);
  json result = to_json(r);
  result["random_baseline_miou"] = baseline;
  result["miou_over_baseline"] = r.miou / baseline;
  m.config["baseline_draws"] = a.draws;
  m.inputs["store"] = abs_string(a.data);
  out << format_table(r) << "random baseline mIoU " << baseline << "\n";
  if (!a.out.empty()) {
    write_json(a.out, result);
    m.outputs = json{{"result", abs_string(a.out)}};
  }
  return m;
}

struct AblateArgs {
  std::string suite, out, csv;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  TrainFlags flags;
  BenchmarkConfig bench;
  Index dim = 0;
  CLI::Option* dim_opt = nullptr;
  bool assert_orderings = false;
  bool quiet = false;
};

Manifest cmd_ablate(AblateArgs a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const AblationSuite suite = ablation_suite_from_string(a.suite);
  if (a.dim_opt->count() > 0) a.bench.world.video_dim = a.bench.world.query_dim = a.dim;
  const TrainConfig base = a.flags.resolve(0);
  AblationProgress progress;
  if (!a.quiet) {
    progress = [&](const std::string& v, std::uint64_t s, const EvalResult& r) {
      err << v << " seed " << s << " mIoU " << r.miou << "\n";
    };
  }
  RunCache cache;
  const AblationReport report = run_ablation(suite, base, a.bench, a.seeds, &cache, progress);
  out << format_table(report);
  Manifest m{"ablate", resolved_argv(args, std::nullopt),
             json{{"suite", to_string(suite)}, {"seeds", a.seeds}, {"train", to_json(base)}, {"benchmark", to_json(a.bench)}},
             std::nullopt};
  if (!a.out.empty()) {
    write_json(a.out, to_json(report));
    m.outputs["report"] = abs_string(a.out);
  }
  if (!a.csv.empty()) {
    write_text_atomic(a.csv, to_csv(report));
    m.outputs["csv"] = abs_string(a.csv);
  }
  if (a.assert_orderings && !report.all_orderings_hold()) {
    std::string failed;
    for (const auto& o : report.orderings) {
      if (!o.holds) failed += (failed.empty() ? "" : "; ") + o.description;
    }
    // The manifest is still written so the run can be inspected and replayed.
    m.config["orderings_failed"] = failed;
  }
  return m;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Language-free video grounding on embedding-space features", "lfvg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("lfvg ") + LFVG_BUILD_ID);

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic feature store");
  s_synth->add_option("--out", synth.out, "Output store directory")->required();
  s_synth->add_option("--videos", synth.shape.n_videos, "Number of videos")->capture_default_str();
  s_synth->add_option("--segments", synth.shape.segments_per_video, "Segments per video")->capture_default_str();
  s_synth->add_option("--events", synth.shape.events_per_video, "Events per video")->capture_default_str();
  s_synth->add_option("--frames-per-segment", synth.shape.frames_per_segment, "Frames per segment")
      ->capture_default_str();
  s_synth->add_option("--first-video", synth.shape.first_video, "Global index of the first video")
      ->capture_default_str();
  synth.dim_opt = s_synth->add_option("--dim", synth.dim, "Video and query feature dimension");
  s_synth->add_option("--video-dim", synth.world.video_dim, "Segment feature dimension")->capture_default_str();
  s_synth->add_option("--query-dim", synth.world.query_dim, "Frame/text feature dimension")->capture_default_str();
  s_synth->add_option("--latent", synth.world.latent_dim, "Latent concept dimension")->capture_default_str();
  s_synth->add_option("--align-noise", synth.world.align_noise_sigma, "Text map misalignment")->capture_default_str();
  s_synth->add_option("--obs-noise", synth.world.obs_noise_sigma, "Observation noise")->capture_default_str();
  s_synth->add_option("--clutter", synth.world.clutter_rate, "Clutter frame rate")->capture_default_str();
  s_synth->add_flag("--orthogonal-text", synth.world.orthogonal_text_map, "Orthogonal text map");
  synth.seed_opt = s_synth->add_option("--seed", synth.seed, "World seed (default: LFVG_SEED or 0)");

  std::string check_data;
  auto* s_check = app.add_subcommand("import-check", "Validate a feature store and summarize it");
  s_check->add_option("--data", check_data, "Store directory")->required();

  ProposalArgs prop;
  auto* s_prop = app.add_subcommand("proposals", "Dump self-similarity and temporal proposals as JSON");
  s_prop->add_option("--data", prop.data, "Store directory")->required();
  s_prop->add_option("--video", prop.video, "Only this video");
  s_prop->add_option("--out", prop.out, "Output JSON (default: stdout)");
  s_prop->add_option("--k", prop.cfg.k, "Clusters per video")->capture_default_str();
  s_prop->add_option("--max-merge", prop.cfg.max_merge, "Adjacent events merged at most")->capture_default_str();
  s_prop->add_option("--min-len", prop.cfg.min_len, "Shortest proposal in segments")->capture_default_str();
  s_prop->add_flag("--no-similarity", prop.no_similarity, "Omit the similarity matrix");
  prop.seed_opt = s_prop->add_option("--seed", prop.seed, "Clustering seed (default: LFVG_SEED or 0)");

  TrainArgs tr;
  auto* s_train = app.add_subcommand("train", "Train a grounding model without language annotations");
  s_train->add_option("--data", tr.data, "Store directory")->required();
  s_train->add_option("--out", tr.out, "Checkpoint directory")->required();
  tr.flags.add(s_train);
  tr.seed_opt = s_train->add_option("--seed", tr.seed, "Run seed (default: LFVG_SEED or 0)");
  s_train->add_flag("--quiet", tr.quiet, "No per-epoch progress");

  InferArgs inf;
  auto* s_infer = app.add_subcommand("infer", "Ground one query feature in one video");
  s_infer->add_option("--checkpoint", inf.checkpoint, "Checkpoint directory")->required();
  s_infer->add_option("--data", inf.data, "Store directory")->required();
  s_infer->add_option("--video", inf.video, "Video id (default: the query's video)");
  auto* q_opt = s_infer->add_option("--query", inf.query, "Query id in the store");
  auto* qb_opt = s_infer->add_option("--query-blob", inf.query_blob, "Standalone feature blob");
  q_opt->excludes(qb_opt);
  s_infer->add_option("--row", inf.row, "Row of the blob")->capture_default_str();
  s_infer->add_option("--out", inf.out, "Also write the JSON here");

  EvalArgs ev;
  auto* s_eval = app.add_subcommand("eval", "Evaluate on the queries of a store");
  s_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory");
  s_eval->add_option("--data", ev.data, "Store directory")->required();
  s_eval->add_option("--out", ev.out, "Result JSON");
  s_eval->add_flag("--oracle", ev.oracle, "Evaluate the ground-truth test double instead of a model");
  s_eval->add_option("--baseline-draws", ev.draws, "Monte Carlo draws for the random baseline")
      ->capture_default_str();

  AblateArgs ab;
  auto* s_ablate = app.add_subcommand("ablate", "Run an ablation suite on the synthetic benchmark");
  s_ablate->add_option("--suite", ab.suite, "losses, selection, n-frames, upper-bound or alignment")->required();
  s_ablate->add_option("--seeds", ab.seeds, "Comma-separated run seeds (at least 3)")->delimiter(',');
  s_ablate->add_option("--out", ab.out, "Report JSON");
  s_ablate->add_option("--csv", ab.csv, "Per-run CSV");
  s_ablate->add_flag("--assert-orderings", ab.assert_orderings, "Exit 1 if an expected ordering fails");
  s_ablate->add_flag("--quiet", ab.quiet, "No per-run progress");
  ab.flags.add(s_ablate);
  s_ablate->add_option("--train-videos", ab.bench.n_train, "Training videos")->capture_default_str();
  s_ablate->add_option("--test-videos", ab.bench.n_test, "Test videos")->capture_default_str();
  s_ablate->add_option("--segments", ab.bench.segments, "Segments per video")->capture_default_str();
  s_ablate->add_option("--events", ab.bench.events, "Events per video")->capture_default_str();
  ab.dim_opt = s_ablate->add_option("--dim", ab.dim, "Video and query feature dimension");
  s_ablate->add_option("--latent", ab.bench.world.latent_dim, "Latent concept dimension")->capture_default_str();
  s_ablate->add_option("--align-noise", ab.bench.world.align_noise_sigma, "Text map misalignment")
      ->capture_default_str();
  s_ablate->add_option("--obs-noise", ab.bench.world.obs_noise_sigma, "Observation noise")->capture_default_str();

  std::string replay_manifest, replay_out;
  auto* s_replay = app.add_subcommand("replay", "Re-run a command from its run manifest");
  s_replay->add_option("--manifest", replay_manifest, "run manifest JSON")->required();
  s_replay->add_option("--out", replay_out, "Write outputs here instead of the recorded path");

  std::vector<const char*> argv{"lfvg"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const auto started = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count(); };
  try {
    if (*s_synth) {
      write_manifest(fs::path(synth.out) / kManifestName, cmd_synth(synth, args, out), elapsed());
    } else if (*s_check) {
      cmd_import_check(check_data, out);
    } else if (*s_prop) {
      const Manifest m = cmd_proposals(prop, args, out);
      if (!prop.out.empty()) write_manifest(manifest_for_file(prop.out), m, elapsed());
    } else if (*s_train) {
      write_manifest(fs::path(tr.out) / kManifestName, cmd_train(tr, args, out, err), elapsed());
    } else if (*s_infer) {
      const Manifest m = cmd_infer(inf, args, out);
      if (!inf.out.empty()) write_manifest(manifest_for_file(inf.out), m, elapsed());
    } else if (*s_eval) {
      const Manifest m = cmd_eval(ev, args, out);
      if (!ev.out.empty()) write_manifest(manifest_for_file(ev.out), m, elapsed());
    } else if (*s_ablate) {
      const Manifest m = cmd_ablate(ab, args, out, err);
      if (!ab.out.empty()) write_manifest(manifest_for_file(ab.out), m, elapsed());
      if (m.config.contains("orderings_failed")) {
        throw OrderingFailure("expected ordering failed: " + m.config["orderings_failed"].get<std::string>());
      }
    } else if (*s_replay) {
      const json m = read_json(replay_manifest);
      if (!m.contains("argv") || !m["argv"].is_array()) throw UsageError("manifest has no argv");
      auto replay_args = m["argv"].get<std::vector<std::string>>();
      if (!replay_out.empty()) {
        const auto it = std::find(replay_args.begin(), replay_args.end(), "--out");
        if (it == replay_args.end() || it + 1 == replay_args.end()) {
          throw UsageError("recorded command has no --out to redirect");
        }
        *(it + 1) = abs_string(replay_out);
      }
      return run(replay_args, out, err);
    }
  } catch (const NumericError& e) {
    err << "numeric failure at step " << e.step() << ": " << e.what() << "\n";
    return kExitNumeric;
  } catch (const OrderingFailure& e) {
    err << e.what() << "\n";
    return kExitFailure;
  } catch (const ContractViolation& e) {
    err << "internal contract violation: " << e.what() << "\n";
    return kExitFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace lfvg::cli
