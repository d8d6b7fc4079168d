#include "mtad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mtad/config.hpp"

namespace mtad {

using nlohmann::json;

namespace {

constexpr const char* kMagic = "MTADCKPT\n";
constexpr const char* kFormat = "mtad-checkpoint";

void append_double(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double read_double(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

}  // namespace

std::string parameter_blob(const ModelParams& params) {
  std::string out;
  out.reserve(static_cast<std::size_t>(params.parameter_count()) * 8);
  params.for_each([&](const char*, const Tensor& t) {
    for (Index i = 0; i < t.size(); ++i) append_double(out, t.data().data()[i]);
  });
  return out;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  ckpt.model.validate();
  check_params(ckpt.params, ckpt.model);
  if (ckpt.norm.k() != ckpt.model.k || ckpt.norm.max.size() != ckpt.model.k)
    throw ConfigError("checkpoint: normalization statistics cover " + std::to_string(ckpt.norm.k()) +
                      " features but the model has k = " + std::to_string(ckpt.model.k));

  json header;
  header["format"] = kFormat;
  header["version"] = kCheckpointVersion;
  header["model_config"] = to_json(ckpt.model);
  header["norm_stats"] = {{"min", vector_json(ckpt.norm.min)}, {"max", vector_json(ckpt.norm.max)}};
  header["metadata"] = {{"epoch", ckpt.meta.epoch}, {"final_loss", ckpt.meta.final_loss}, {"seed", ckpt.meta.seed}};
  json manifest = json::array();
  Index offset = 0;
  ckpt.params.for_each([&](const char* name, const Tensor& t) {
    manifest.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}, {"count", t.size()}});
    offset += t.size();
  });
  header["tensors"] = manifest;

  const std::string text = header.dump();
  std::string out = kMagic;
  out += std::to_string(text.size()) + "\n";
  out += text;
  out += parameter_blob(ckpt.params);
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  auto corrupt = [](const std::string& msg) { return CorruptCheckpointError("checkpoint: " + msg); };
  const std::size_t magic_len = std::strlen(kMagic);
  if (bytes.compare(0, magic_len, kMagic) != 0) throw corrupt("missing file signature");
  const std::size_t newline = bytes.find('\n', magic_len);
  if (newline == std::string::npos || newline == magic_len || newline - magic_len > 12)
    throw corrupt("malformed header length");
  std::size_t header_len = 0;
  for (std::size_t i = magic_len; i < newline; ++i) {
    if (bytes[i] < '0' || bytes[i] > '9') throw corrupt("malformed header length");
    header_len = header_len * 10 + static_cast<std::size_t>(bytes[i] - '0');
  }
  const std::size_t header_start = newline + 1;
  if (bytes.size() < header_start + header_len) throw corrupt("file truncated inside the header");

  json header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(header_start),
                            bytes.begin() + static_cast<std::ptrdiff_t>(header_start + header_len), nullptr, false);
  if (header.is_discarded() || !header.is_object()) throw corrupt("header is not valid JSON");
  if (header.value("format", "") != kFormat) throw corrupt("unexpected format tag");
  if (!header.contains("version") || !header["version"].is_number_integer()) throw corrupt("missing version");
  if (header["version"].get<int>() != kCheckpointVersion)
    throw CheckpointVersionError("checkpoint: version " + header["version"].dump() + " is not supported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");

  Checkpoint ckpt;
  std::vector<json> manifest;
  try {
    ckpt.model = model_config_from_json(header.at("model_config"));
    const json& norm = header.at("norm_stats");
    ckpt.norm.min = vector_from(norm.at("min"));
    ckpt.norm.max = vector_from(norm.at("max"));
    const json& meta = header.at("metadata");
    ckpt.meta.epoch = meta.at("epoch").get<Index>();
    ckpt.meta.final_loss = meta.at("final_loss").get<double>();
    ckpt.meta.seed = meta.at("seed").get<std::uint64_t>();
    manifest = header.at("tensors").get<std::vector<json>>();
  } catch (const json::exception& e) {
    throw corrupt(std::string("malformed header field: ") + e.what());
  }
  ckpt.model.validate();
  if (ckpt.norm.min.size() != ckpt.model.k || ckpt.norm.max.size() != ckpt.model.k)
    throw ConfigError("checkpoint: normalization statistics do not match k = " + std::to_string(ckpt.model.k));

  const auto expected = param_shapes(ckpt.model);
  if (manifest.size() != expected.size())
    throw corrupt("manifest lists " + std::to_string(manifest.size()) + " tensors, expected " +
                  std::to_string(expected.size()));

  const std::size_t blob_start = header_start + header_len;
  const std::size_t blob_len = bytes.size() - blob_start;
  ckpt.params = make_params(ckpt.model);
  std::size_t i = 0;
  ckpt.params.for_each([&](const char* name, Tensor& t) {
    const json& entry = manifest[i];
    std::string entry_name;
    Shape shape;
    Index offset = 0, count = 0;
    try {
      entry_name = entry.at("name").get<std::string>();
      shape = entry.at("shape").get<Shape>();
      offset = entry.at("offset").get<Index>();
      count = entry.at("count").get<Index>();
    } catch (const json::exception& e) {
      throw corrupt(std::string("malformed manifest entry: ") + e.what());
    }
    if (entry_name != name) throw corrupt("manifest entry " + std::to_string(i) + " is " + entry_name + ", expected " + name);
    if (shape != expected[i].shape)
      throw ConfigError("checkpoint: tensor " + entry_name + " has shape " + shape_string(shape) +
                        " but its model config implies " + shape_string(expected[i].shape));
    if (count != t.size() || offset < 0) throw corrupt("manifest entry " + entry_name + " has an inconsistent count");
    const auto end = static_cast<std::size_t>(offset + count) * 8;
    if (end > blob_len) throw corrupt("file truncated inside tensor " + entry_name);
    const char* p = bytes.data() + blob_start + static_cast<std::size_t>(offset) * 8;
    for (Index v = 0; v < count; ++v) t.data().data()[v] = read_double(p + 8 * v);
    ++i;
  });
  if (static_cast<std::size_t>(ckpt.params.parameter_count()) * 8 != blob_len)
    throw corrupt("parameter section has " + std::to_string(blob_len) + " bytes, expected " +
                  std::to_string(ckpt.params.parameter_count() * 8));
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint: cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("checkpoint: failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return deserialize_checkpoint(buffer.str());
  } catch (const CorruptCheckpointError& e) {
    throw CorruptCheckpointError(path.string() + ": " + e.what());
  }
}

void require_compatible(const Checkpoint& ckpt, Index features) {
  if (features != ckpt.model.k)
    throw ConfigError("checkpoint expects k = " + std::to_string(ckpt.model.k) + " features but the data has " +
                      std::to_string(features));
}

}  // namespace mtad
