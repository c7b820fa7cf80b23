#include "lfvg/feature_store.hpp"

#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <vector>

namespace lfvg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

std::string rel(const fs::path& p) { return p.generic_string(); }

}  // namespace

void write_blob(const fs::path& path, const Matrix& m) {
  std::vector<unsigned char> bytes;
  bytes.reserve(kBlobHeaderBytes + 4 * static_cast<std::size_t>(m.size()));
  bytes.insert(bytes.end(), kBlobMagic, kBlobMagic + 4);
  put_u32(bytes, kBlobVersion);
  put_u32(bytes, static_cast<std::uint32_t>(m.rows()));
  put_u32(bytes, static_cast<std::uint32_t>(m.cols()));
  for (Index i = 0; i < m.size(); ++i) {
    const float f = static_cast<float>(m.data()[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(bytes, bits);
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error("write failed: " + path.string());
}

Matrix read_blob(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("missing blob " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < kBlobHeaderBytes) throw LoadError("truncated blob header in " + path.string());
  if (std::memcmp(bytes.data(), kBlobMagic, 4) != 0) throw LoadError("bad magic in " + path.string());
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kBlobVersion) {
    throw LoadError("unsupported blob version " + std::to_string(version) + " in " + path.string());
  }
  const std::uint32_t rows = get_u32(bytes.data() + 8);
  const std::uint32_t cols = get_u32(bytes.data() + 12);
  const std::size_t n = std::size_t(rows) * cols;
  if (bytes.size() != kBlobHeaderBytes + 4 * n) {
    throw LoadError("blob size does not match header shape in " + path.string());
  }
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bits = get_u32(bytes.data() + kBlobHeaderBytes + 4 * i);
    float f;
    std::memcpy(&f, &bits, 4);
    m.data()[i] = f;
  }
  if (!m.allFinite()) throw LoadError("non-finite value in " + path.string());
  return m;
}

void export_feature_store(const Dataset& d, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "lfvg-feature-store";
  manifest["version"] = kBlobVersion;
  manifest["source"] = d.provenance == Provenance::synthetic ? "synthetic" : "imported";
  json videos = json::array();
  for (const auto& v : d.videos) {
    const fs::path seg = fs::path("videos") / (v.id + ".segments.bin");
    const fs::path frm = fs::path("videos") / (v.id + ".frames.bin");
    write_blob(dir / seg, v.segment_features);
    write_blob(dir / frm, v.frame_features);
    json jv;
    jv["id"] = v.id;
    jv["duration_s"] = v.duration_s;
    jv["num_segments"] = v.num_segments();
    jv["num_frames"] = v.num_frames();
    jv["segment_blob"] = rel(seg);
    jv["frame_blob"] = rel(frm);
    jv["frame_times"] = v.frame_times;
    if (!v.hidden_events.empty()) {
      json ev = json::array();
      for (const auto& e : v.hidden_events) {
        ev.push_back({{"start", e.interval.start}, {"end", e.interval.end}, {"concept", e.concept_index}});
      }
      jv["hidden_events"] = std::move(ev);
    }
    videos.push_back(std::move(jv));
  }
  manifest["videos"] = std::move(videos);

  json queries = json::array();
  if (!d.queries.empty()) {
    const Index dim = d.queries.front().feature.size();
    Matrix feats(static_cast<Index>(d.queries.size()), dim);
    for (std::size_t i = 0; i < d.queries.size(); ++i) {
      const auto& q = d.queries[i];
      if (q.feature.size() != dim) throw InvalidInputError("query " + q.id + ": dimension mismatch");
      feats.row(static_cast<Index>(i)) = q.feature.transpose();
      const auto vi = d.find_video(q.video_id);
      if (!vi) throw InvalidInputError("query " + q.id + ": unknown video " + q.video_id);
      const double dur = d.videos[*vi].duration_s;
      queries.push_back({{"id", q.id},
                         {"video_id", q.video_id},
                         {"gt_start_s", q.gt_interval.start * dur},
                         {"gt_end_s", q.gt_interval.end * dur},
                         {"feature_blob", "queries.bin"},
                         {"row", i}});
    }
    write_blob(dir / "queries.bin", feats);
  }
  manifest["queries"] = std::move(queries);

  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) throw Error("cannot write manifest in " + dir.string());
  os << manifest.dump(2) << '\n';
}

namespace {

template <typename T>
T field(const json& j, const char* key, const std::string& record) {
  if (!j.contains(key)) throw LoadError(record + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw LoadError(record + ": bad field '" + key + "': " + e.what());
  }
}

}  // namespace

Dataset import_feature_store(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream is(manifest_path);
  if (!is) throw LoadError("missing manifest " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(is);
  } catch (const json::exception& e) {
    throw LoadError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }

  Dataset d;
  d.provenance = Provenance::imported;
  std::unordered_map<std::string, Matrix> blob_cache;
  auto load = [&](const std::string& name) -> const Matrix& {
    auto it = blob_cache.find(name);
    if (it == blob_cache.end()) it = blob_cache.emplace(name, read_blob(dir / name)).first;
    return it->second;
  };

  for (const auto& jv : manifest.value("videos", json::array())) {
    VideoRecord v;
    v.id = field<std::string>(jv, "id", "video <unnamed>");
    const std::string rec = "video " + v.id;
    v.duration_s = field<double>(jv, "duration_s", rec);
    const auto T = field<Index>(jv, "num_segments", rec);
    const auto M = field<Index>(jv, "num_frames", rec);
    try {
      v.segment_features = read_blob(dir / field<std::string>(jv, "segment_blob", rec));
      v.frame_features = read_blob(dir / field<std::string>(jv, "frame_blob", rec));
    } catch (const LoadError& e) {
      throw LoadError(rec + ": " + e.what());
    }
    if (v.segment_features.rows() != T) {
      throw LoadError(rec + ": segment blob has " + std::to_string(v.segment_features.rows()) +
                      " rows, manifest says " + std::to_string(T));
    }
    if (v.frame_features.rows() != M) {
      throw LoadError(rec + ": frame blob has " + std::to_string(v.frame_features.rows()) +
                      " rows, manifest says " + std::to_string(M));
    }
    v.frame_times = field<std::vector<double>>(jv, "frame_times", rec);
    if (jv.contains("hidden_events")) {
      for (const auto& je : jv["hidden_events"]) {
        HiddenEvent e;
        e.interval = {field<double>(je, "start", rec), field<double>(je, "end", rec)};
        e.concept_index = je.value("concept", Index{0});
        v.hidden_events.push_back(e);
      }
    }
    if (!d.videos.empty()) {
      if (v.segment_features.cols() != d.videos.front().segment_features.cols() ||
          v.frame_features.cols() != d.videos.front().frame_features.cols()) {
        throw LoadError(rec + ": feature dimension differs from earlier videos");
      }
    }
    try {
      v.validate();
    } catch (const InvalidInputError& e) {
      throw LoadError(e.what());
    }
    d.videos.push_back(std::move(v));
  }

  for (const auto& jq : manifest.value("queries", json::array())) {
    QueryRecord q;
    q.id = field<std::string>(jq, "id", "query <unnamed>");
    const std::string rec = "query " + q.id;
    q.video_id = field<std::string>(jq, "video_id", rec);
    const auto vi = d.find_video(q.video_id);
    if (!vi) throw LoadError(rec + ": unknown video " + q.video_id);
    const double dur = d.videos[*vi].duration_s;
    q.gt_interval = {field<double>(jq, "gt_start_s", rec) / dur, field<double>(jq, "gt_end_s", rec) / dur};
    if (!q.gt_interval.valid()) throw LoadError(rec + ": invalid ground-truth interval");
    const Matrix* blob = nullptr;
    try {
      blob = &load(field<std::string>(jq, "feature_blob", rec));
    } catch (const LoadError& e) {
      throw LoadError(rec + ": " + e.what());
    }
    const auto row = field<Index>(jq, "row", rec);
    if (row < 0 || row >= blob->rows()) throw LoadError(rec + ": row out of range");
    q.feature = blob->row(row).transpose();
    if (!(q.feature.norm() > 0.0)) throw LoadError(rec + ": zero-norm feature");
    if (q.feature.size() != d.videos[*vi].frame_features.cols()) {
      throw LoadError(rec + ": feature dimension differs from frame features");
    }
    d.queries.push_back(std::move(q));
  }
  return d;
}

}  // namespace lfvg
