#include "lfvg/checkpoint.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "lfvg/feature_store.hpp"

namespace lfvg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "lfvg-checkpoint";
constexpr int kVersion = 1;

json grounding_json(const GroundingConfig& g) {
  return json{{"video_dim", g.video_dim},     {"query_dim", g.query_dim},         {"hidden", g.hidden},
              {"gru_hidden", g.gru_hidden},   {"gru_layers", g.gru_layers},       {"fusion_layers", g.fusion_layers},
              {"fusion_heads", g.fusion_heads}, {"t_max", g.t_max}};
}

GroundingConfig grounding_from_json(const json& j) {
  GroundingConfig g;
  g.video_dim = j.at("video_dim").get<Index>();
  g.query_dim = j.at("query_dim").get<Index>();
  g.hidden = j.at("hidden").get<Index>();
  g.gru_hidden = j.at("gru_hidden").get<Index>();
  g.gru_layers = j.at("gru_layers").get<Index>();
  g.fusion_layers = j.at("fusion_layers").get<Index>();
  g.fusion_heads = j.at("fusion_heads").get<Index>();
  g.t_max = j.at("t_max").get<Index>();
  return g;
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const GroundingModel& model, const TrainConfig& cfg) {
  std::error_code ec;
  fs::create_directories(dir / "params", ec);
  if (ec) throw InvalidInputError("save_checkpoint: cannot create " + dir.string() + ": " + ec.message());
  json table = json::array();
  const Params& p = model.params();
  for (std::size_t i = 0; i < p.specs().size(); ++i) {
    const ParamSpec& s = p.specs()[i];
    const std::string file = "params/" + s.name + ".bin";
    write_blob(dir / file, Matrix(p.view(ParamHandle{i})));
    table.push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}, {"file", file}});
  }
  const json header{{"format", kFormat},
                    {"version", kVersion},
                    {"mode", to_string(cfg.mode)},
                    {"config", to_json(cfg)},
                    {"config_hash", hex(config_hash(cfg))},
                    {"grounding", grounding_json(model.config())},
                    {"parameters", std::move(table)}};
  const fs::path tmp = dir / "header.json.tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw InvalidInputError("save_checkpoint: cannot write " + tmp.string());
    out << header.dump(2) << '\n';
    if (!out) throw InvalidInputError("save_checkpoint: write failed for " + tmp.string());
  }
  fs::rename(tmp, dir / "header.json", ec);
  if (ec) throw InvalidInputError("save_checkpoint: cannot finalize header: " + ec.message());
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path header_path = dir / "header.json";
  std::ifstream in(header_path);
  if (!in) throw LoadError("checkpoint: cannot open " + header_path.string());
  json header;
  try {
    header = json::parse(in);
    if (header.at("format").get<std::string>() != kFormat) throw LoadError("checkpoint: unexpected format");
    if (header.at("version").get<int>() != kVersion) throw LoadError("checkpoint: unsupported version");
  } catch (const json::exception& e) {
    throw LoadError("checkpoint: malformed header " + header_path.string() + ": " + e.what());
  }
  Checkpoint c;
  try {
    c.config = train_config_from_json(header.at("config"), TrainConfig{});
    const GroundingConfig g = grounding_from_json(header.at("grounding"));
    c.model = GroundingModel(g, 0);
    c.config_hash = std::stoull(header.at("config_hash").get<std::string>(), nullptr, 16);
  } catch (const json::exception& e) {
    throw LoadError(std::string("checkpoint: malformed header: ") + e.what());
  } catch (const InvalidInputError& e) {
    throw LoadError(std::string("checkpoint: ") + e.what());
  }
  if (c.config_hash != config_hash(c.config)) throw LoadError("checkpoint: config hash does not match config");

  Params& p = c.model.params();
  std::set<std::string> seen;
  try {
    for (const auto& entry : header.at("parameters")) {
      const auto name = entry.at("name").get<std::string>();
      ParamHandle h;
      try {
        h = p.find(name);
      } catch (const InvalidInputError&) {
        throw LoadError("checkpoint: unknown parameter '" + name + "'");
      }
      Matrix m;
      try {
        m = read_blob(dir / entry.at("file").get<std::string>());
      } catch (const Error& e) {
        throw LoadError("checkpoint: parameter '" + name + "': " + e.what());
      }
      if (entry.at("rows").get<Index>() != m.rows() || entry.at("cols").get<Index>() != m.cols()) {
        throw LoadError("checkpoint: parameter '" + name + "' disagrees with its header entry");
      }
      auto view = p.mutable_view(h);
      if (m.rows() != view.rows() || m.cols() != view.cols()) {
        throw LoadError("checkpoint: parameter '" + name + "' has shape " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()) + ", expected " + std::to_string(view.rows()) + "x" +
                        std::to_string(view.cols()));
      }
      view = m;
      seen.insert(name);
    }
  } catch (const json::exception& e) {
    throw LoadError(std::string("checkpoint: malformed parameter table: ") + e.what());
  }
  for (const auto& s : p.specs()) {
    if (!seen.count(s.name)) throw LoadError("checkpoint: missing parameter '" + s.name + "'");
  }
  return c;
}

}  // namespace lfvg
