#include "jetssm/checkpoint.hpp"

#include <cstring>

#include <json.hpp>

#include "jetssm/errors.hpp"
#include "jetssm/ioutil.hpp"
#include "jetssm/serdes.hpp"

namespace jetssm {

using nlohmann::json;

namespace {
constexpr char kMagic[4] = {'J', 'S', 'S', 'M'};
constexpr int kFormatVersion = 1;
}  // namespace

Checkpoint snapshot_model(const Model& model, NormStats feature_stats, NormStats target_stats,
                          bool targets_standardized, std::uint64_t train_seed) {
  Checkpoint ckpt;
  ckpt.format_version = kFormatVersion;
  ckpt.kind = model.kind();
  ckpt.config = model.config();
  for (const auto& arr : model.params().items()) {
    ParamArray copy;
    copy.name = arr.name;
    copy.shape = arr.shape;
    copy.value = arr.value;
    copy.trainable = arr.trainable;
    ckpt.arrays.push_back(std::move(copy));
  }
  ckpt.feature_stats = std::move(feature_stats);
  ckpt.target_stats = std::move(target_stats);
  ckpt.targets_standardized = targets_standardized;
  ckpt.train_seed = train_seed;
  return ckpt;
}

std::unique_ptr<Model> restore_model(const Checkpoint& ckpt) {
  std::unique_ptr<Model> model = make_model(ckpt.kind, ckpt.config, ckpt.config.seed);
  auto& store = model->params();
  for (const auto& arr : ckpt.arrays) {
    ParamArray* dst = store.find(arr.name);
    if (!dst)
      throw IncompatibilityError("checkpoint array '" + arr.name +
                                 "' has no counterpart in a " + to_string(ckpt.kind) + " model");
    if (dst->shape != arr.shape || dst->count() != arr.value.size())
      throw IncompatibilityError("checkpoint array '" + arr.name + "' holds " +
                                 std::to_string(arr.value.size()) + " values, model expects " +
                                 std::to_string(dst->count()));
    dst->value = arr.value;
  }
  for (const auto& arr : store.items())
    if (std::none_of(ckpt.arrays.begin(), ckpt.arrays.end(),
                     [&](const ParamArray& a) { return a.name == arr.name; }))
      throw IncompatibilityError("checkpoint is missing array '" + arr.name + "'");
  return model;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json header;
  header["format_version"] = ckpt.format_version;
  header["model_kind"] = to_string(ckpt.kind);
  header["config"] = ckpt.config;
  header["feature_stats"] = ckpt.feature_stats;
  header["target_stats"] = ckpt.target_stats;
  header["targets_standardized"] = ckpt.targets_standardized;
  header["train_seed"] = ckpt.train_seed;
  header["tool"] = "jetssm";
  json arrays = json::array();
  for (const auto& arr : ckpt.arrays) {
    json a;
    a["name"] = arr.name;
    a["shape"] = arr.shape;
    a["trainable"] = arr.trainable;
    arrays.push_back(a);
  }
  header["arrays"] = arrays;

  const std::string header_str = header.dump();
  std::string bytes;
  bytes.append(kMagic, 4);
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  auto put_u64 = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  put_u32(static_cast<std::uint32_t>(ckpt.format_version));
  put_u64(header_str.size());
  bytes += header_str;
  for (const auto& arr : ckpt.arrays) {
    const std::size_t off = bytes.size();
    bytes.resize(off + arr.value.size() * sizeof(double));
    std::memcpy(bytes.data() + off, arr.value.data(), arr.value.size() * sizeof(double));
  }
  write_file_atomic(path, bytes);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IncompatibilityError("not a jetssm checkpoint: " + path);
  auto get_u32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
    return v;
  };
  auto get_u64 = [&](std::size_t off) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
    return v;
  };
  const std::uint32_t version = get_u32(4);
  if (version != kFormatVersion)
    throw IncompatibilityError("unrecognized checkpoint format_version " +
                               std::to_string(version));
  const std::uint64_t header_len = get_u64(8);
  if (bytes.size() < 16 + header_len)
    throw IoError("truncated checkpoint header: " + path);

  json header;
  try {
    header = json::parse(bytes.substr(16, header_len));
  } catch (const json::exception& e) {
    throw IncompatibilityError("bad checkpoint header: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  ckpt.format_version = static_cast<int>(version);
  ckpt.kind = model_kind_from_string(header.at("model_kind").get<std::string>());
  ckpt.config = header.at("config").get<ModelConfig>();
  ckpt.feature_stats = header.at("feature_stats").get<NormStats>();
  ckpt.target_stats = header.at("target_stats").get<NormStats>();
  ckpt.targets_standardized = header.at("targets_standardized").get<bool>();
  ckpt.train_seed = header.at("train_seed").get<std::uint64_t>();

  std::size_t off = 16 + header_len;
  for (const auto& a : header.at("arrays")) {
    ParamArray arr;
    arr.name = a.at("name").get<std::string>();
    arr.shape = a.at("shape").get<std::vector<std::size_t>>();
    arr.trainable = a.at("trainable").get<bool>();
    std::size_t count = 1;
    for (std::size_t s : arr.shape) count *= s;
    if (bytes.size() < off + count * sizeof(double))
      throw IoError("truncated checkpoint data for array '" + arr.name + "'");
    arr.value.resize(count);
    std::memcpy(arr.value.data(), bytes.data() + off, count * sizeof(double));
    off += count * sizeof(double);
    ckpt.arrays.push_back(std::move(arr));
  }
  return ckpt;
}

}  // namespace jetssm
