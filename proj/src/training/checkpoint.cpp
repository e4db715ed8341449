#include "skipclip/training/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "skipclip/errors.hpp"
#include "skipclip/numerics/skt.hpp"

namespace skipclip::training {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "skipclip-checkpoint-1";

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

std::uint64_t parse_hex64(const std::string& s) {
  std::uint64_t v = 0;
  std::istringstream is(s);
  is >> std::hex >> v;
  if (!is) throw DataError("checkpoint: malformed fingerprint '" + s + "'");
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::string blob;
  json tensors = json::array();
  auto put = [&](const std::string& name, const numerics::Tensor& t) {
    const std::string bytes = numerics::encode_skt(t);
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", blob.size()}, {"bytes", bytes.size()}});
    blob += bytes;
  };
  for (const auto& e : ckpt.params.entries()) put("param/" + e.name, e.tensor);
  for (const auto& e : ckpt.adam.m.entries()) put("adam.m/" + e.name, e.tensor);
  for (const auto& e : ckpt.adam.v.entries()) put("adam.v/" + e.name, e.tensor);

  json manifest{{"format", kFormat},
                {"fingerprint", hex64(ckpt.fingerprint)},
                {"epoch", ckpt.epoch},
                {"adam_step", ckpt.adam.step},
                {"rng_state", ckpt.rng_state},
                {"config", ckpt.config_json},
                {"tensors", std::move(tensors)}};
  {
    std::ofstream out(dir / "tensors.bin", std::ios::binary | std::ios::trunc);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw DataError("cannot write " + (dir / "tensors.bin").string());
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << manifest.dump(2) << "\n";
  if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir, std::optional<std::uint64_t> expected_fingerprint) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw DataError("cannot open checkpoint manifest in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint manifest: ") + e.what());
  }
  std::ifstream bf(dir / "tensors.bin", std::ios::binary);
  if (!bf) throw DataError("cannot open checkpoint payload in " + dir.string());
  const std::string blob(std::istreambuf_iterator<char>(bf), {});

  Checkpoint ckpt;
  try {
    if (manifest.at("format").get<std::string>() != kFormat) throw DataError("checkpoint: unsupported format");
    ckpt.fingerprint = parse_hex64(manifest.at("fingerprint").get<std::string>());
    if (expected_fingerprint && *expected_fingerprint != ckpt.fingerprint)
      throw ConfigError("checkpoint fingerprint mismatch: " + dir.string() + " was built for architecture " +
                        hex64(ckpt.fingerprint) + " but the current encoder config is " +
                        hex64(*expected_fingerprint) + "; refusing to load parameters into a different architecture");
    ckpt.epoch = manifest.at("epoch").get<std::size_t>();
    ckpt.adam.step = manifest.at("adam_step").get<std::uint64_t>();
    ckpt.rng_state = manifest.at("rng_state").get<std::string>();
    ckpt.config_json = manifest.at("config").get<std::string>();
    for (const auto& t : manifest.at("tensors")) {
      const std::string name = t.at("name").get<std::string>();
      const std::size_t offset = t.at("offset").get<std::size_t>(), bytes = t.at("bytes").get<std::size_t>();
      if (offset + bytes > blob.size()) throw DataError("checkpoint: tensor '" + name + "' exceeds payload");
      numerics::Tensor tensor = numerics::decode_skt(std::string_view(blob).substr(offset, bytes));
      if (tensor.shape() != t.at("shape").get<numerics::Shape>())
        throw DataError("checkpoint: tensor '" + name + "' shape disagrees with its record");
      const auto slash = name.find('/');
      const std::string kind = name.substr(0, slash), pname = name.substr(slash + 1);
      if (kind == "param")
        ckpt.params.add(pname, std::move(tensor));
      else if (kind == "adam.m")
        ckpt.adam.m.add(pname, std::move(tensor));
      else if (kind == "adam.v")
        ckpt.adam.v.add(pname, std::move(tensor));
      else
        throw DataError("checkpoint: unknown tensor group '" + kind + "'");
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint manifest: ") + e.what());
  }
  return ckpt;
}

}  // namespace skipclip::training
