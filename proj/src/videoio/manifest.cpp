#include "skipclip/videoio/manifest.hpp"

#include <fstream>
#include <iterator>
#include <set>

#include <json.hpp>

#include "skipclip/errors.hpp"
#include "skipclip/numerics/skt.hpp"

namespace skipclip::videoio {

using nlohmann::json;

std::string to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split parse_split(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "test") return Split::kTest;
  throw DataError("manifest field 'split' must be \"train\" or \"test\", got \"" + text + "\"");
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw DataError("manifest: unknown field '" + where + key + "'");
}

std::size_t positive(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw DataError("manifest: missing field '" + where + key + "'");
  const json& v = obj.at(key);
  if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0)
    throw DataError("manifest: field '" + where + key + "' must be a positive integer");
  return v.get<std::size_t>();
}

}  // namespace

DatasetManifest parse_manifest(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("manifest: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw DataError("manifest: top level must be an object");
  reject_unknown(doc, {"split", "seed", "entries"}, "");
  for (const char* key : {"split", "seed", "entries"})
    if (!doc.contains(key)) throw DataError(std::string("manifest: missing field '") + key + "'");
  if (!doc["split"].is_string()) throw DataError("manifest: field 'split' must be a string");
  if (!doc["seed"].is_number_unsigned()) throw DataError("manifest: field 'seed' must be an unsigned integer");
  if (!doc["entries"].is_array()) throw DataError("manifest: field 'entries' must be an array");

  DatasetManifest m;
  m.split = parse_split(doc["split"].get<std::string>());
  m.seed = doc["seed"].get<std::uint64_t>();
  for (std::size_t i = 0; i < doc["entries"].size(); ++i) {
    const json& e = doc["entries"][i];
    const std::string where = "entries[" + std::to_string(i) + "].";
    if (!e.is_object()) throw DataError("manifest: '" + where + "' must be an object");
    reject_unknown(e, {"path", "n", "c", "h", "w", "motion_class"}, where);
    if (!e.contains("path") || !e["path"].is_string())
      throw DataError("manifest: field '" + where + "path' must be a string");
    ManifestEntry entry;
    entry.path = e["path"].get<std::string>();
    entry.n = positive(e, "n", where);
    entry.c = positive(e, "c", where);
    entry.h = positive(e, "h", where);
    entry.w = positive(e, "w", where);
    if (e.contains("motion_class") && !e["motion_class"].is_null()) {
      if (!e["motion_class"].is_number_unsigned())
        throw DataError("manifest: field '" + where + "motion_class' must be a non-negative integer");
      entry.motion_class = e["motion_class"].get<std::size_t>();
    } else if (m.split == Split::kTest) {
      throw DataError("manifest: field '" + where + "motion_class' is required on the test split");
    }
    m.entries.push_back(std::move(entry));
  }
  return m;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  json doc;
  doc["split"] = to_string(manifest.split);
  doc["seed"] = manifest.seed;
  doc["entries"] = json::array();
  for (const auto& e : manifest.entries) {
    json j{{"path", e.path}, {"n", e.n}, {"c", e.c}, {"h", e.h}, {"w", e.w}};
    if (e.motion_class) j["motion_class"] = *e.motion_class;
    doc["entries"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  DatasetManifest m = parse_manifest(std::string(std::istreambuf_iterator<char>(in), {}));
  const auto base = path.parent_path();
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    const auto file = base / e.path;
    if (!std::filesystem::exists(file))
      throw DataError("manifest: entries[" + std::to_string(i) + "].path does not resolve: " + file.string());
    const numerics::Shape header = numerics::peek_skt_shape(file);
    const numerics::Shape recorded{e.n, e.c, e.h, e.w};
    if (header != recorded)
      throw DataError("manifest: entries[" + std::to_string(i) + "] records shape " +
                      numerics::shape_string(recorded) + " but " + e.path + " holds " +
                      numerics::shape_string(header));
  }
  return m;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << manifest_to_json(manifest);
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  Dataset ds;
  ds.manifest = read_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  for (const auto& e : ds.manifest.entries) {
    Video v = load_video(base / e.path);
    v.id = std::filesystem::path(e.path).stem().string();
    v.motion_class = e.motion_class;
    validate_video(v);
    ds.videos.push_back(std::move(v));
  }
  return ds;
}

}  // namespace skipclip::videoio
