#include "pyrexpose/manifest.hpp"

#include <fstream>

#include "json.hpp"
#include "pyrexpose/error.hpp"
#include "pyrexpose/image_io.hpp"

namespace pyrexpose {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "TRAIN";
    case Split::kVal: return "VAL";
    case Split::kTest: return "TEST";
  }
  return "TRAIN";
}

Split split_from_string(const std::string& s) {
  if (s == "TRAIN" || s == "train") return Split::kTrain;
  if (s == "VAL" || s == "val") return Split::kVal;
  if (s == "TEST" || s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + s + "'");
}

std::vector<ManifestEntry> DatasetManifest::select(Split split) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(e);
  return out;
}

DatasetManifest load_manifest(const fs::path& path, bool validate) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open manifest");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": invalid manifest JSON: " + e.what());
  }
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  DatasetManifest m;
  try {
    for (const auto& e : doc.at("entries")) {
      ManifestEntry entry;
      entry.input_path = resolve(e.at("input_path").get<std::string>());
      entry.target_path = resolve(e.at("target_path").get<std::string>());
      entry.relative_ev = e.value("relative_ev", 0.0f);
      entry.split = split_from_string(e.value("split", std::string("TRAIN")));
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": malformed manifest entry: " + e.what());
  }

  if (validate) {
    for (const auto& e : m.entries) {
      for (const auto& p : {e.input_path, e.target_path})
        if (!fs::exists(p)) throw IoError(path.string() + ": missing file " + p.string());
      const Image a = load_image(e.input_path), b = load_image(e.target_path);
      if (!a.same_shape(b)) {
        throw IoError(path.string() + ": dimension mismatch between " + e.input_path.string() + " and " +
                      e.target_path.string());
      }
    }
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"input_path", e.input_path.string()},
                       {"target_path", e.target_path.string()},
                       {"relative_ev", e.relative_ev},
                       {"split", to_string(e.split)}});
  }
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot write manifest");
  out << json{{"entries", entries}}.dump(2) << "\n";
}

}  // namespace pyrexpose
