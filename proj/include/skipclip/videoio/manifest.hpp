#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "skipclip/videoio/video.hpp"

namespace skipclip::videoio {

enum class Split { kTrain, kTest };

std::string to_string(Split split);
Split parse_split(const std::string& text);

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  std::size_t n = 0, c = 0, h = 0, w = 0;
  std::optional<std::size_t> motion_class;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  Split split = Split::kTrain;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Parses and schema-checks a manifest document. Does not touch video files.
DatasetManifest parse_manifest(const std::string& json_text);
std::string manifest_to_json(const DatasetManifest& manifest);

/// Reads, schema-checks, and cross-checks every entry against its SKT1 header.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// A manifest with its videos loaded into memory.
struct Dataset {
  DatasetManifest manifest;
  std::vector<Video> videos;

  std::size_t size() const { return videos.size(); }
};

Dataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace skipclip::videoio
