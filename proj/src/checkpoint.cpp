#include "mrca/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace mrca {

namespace {

constexpr char kMagic[] = "MRCA-CKPT 1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

using json = nlohmann::json;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

template <typename Vec>
void put_floats(std::string& out, const Vec& v) {
  static_assert(sizeof(typename Vec::Scalar) == 4);
  const auto* p = reinterpret_cast<const char*>(v.data());
  out.append(p, static_cast<std::size_t>(v.size()) * 4);
}

json layout_json(const ParamLayout& layout) {
  json blocks = json::array();
  for (const auto& b : layout.blocks())
    blocks.push_back({{"name", std::string(b.name)}, {"rows", b.rows}, {"cols", b.cols}});
  return blocks;
}

}  // namespace

std::uint64_t fnv1a64(const char* data, std::size_t n, std::uint64_t h) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

json normalizer_to_json(const RunningNormalizer& n) {
  json out = json::array();
  for (int c = 0; c < RunningNormalizer::kChannels; ++c) {
    const auto& m = n.moments(c);
    out.push_back({m.count, m.mean, m.m2});
  }
  return out;
}

RunningNormalizer normalizer_from_json(const json& j) {
  if (!j.is_array() || j.size() != RunningNormalizer::kChannels)
    throw CheckpointError("checkpoint: normalizer must list 5 channels");
  RunningNormalizer n;
  for (int c = 0; c < RunningNormalizer::kChannels; ++c) {
    auto& m = n.moments(c);
    m.count = j[c].at(0).get<double>();
    m.mean = j[c].at(1).get<double>();
    m.m2 = j[c].at(2).get<double>();
  }
  return n;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const auto np = PolicyNet<TrainScalar>::layout().size();
  const auto nv = ValueNet<TrainScalar>::layout().size();
  auto moments = [](const AdamState<TrainScalar>& a, Eigen::Index n) {
    // Untouched optimizers are stored as explicit zeros.
    if (a.m.size() == n) return std::pair{a.m, a.v};
    return std::pair{VectorX<TrainScalar>(VectorX<TrainScalar>::Zero(n)),
                     VectorX<TrainScalar>(VectorX<TrainScalar>::Zero(n))};
  };
  const auto [pm, pv] = moments(c.policy_adam, np);
  const auto [vm, vv] = moments(c.value_adam, nv);

  json header;
  header["version"] = kCheckpointVersion;
  header["scalar"] = "f32";
  header["iteration"] = c.iteration;
  header["stage"] = c.stage;
  header["beta"] = c.beta;
  header["policy_layout"] = layout_json(PolicyNet<TrainScalar>::layout());
  header["value_layout"] = layout_json(ValueNet<TrainScalar>::layout());
  header["sections"] = {{{"name", "policy"}, {"count", np}},
                        {{"name", "value"}, {"count", nv}},
                        {{"name", "policy_adam_m"}, {"count", np}},
                        {{"name", "policy_adam_v"}, {"count", np}},
                        {{"name", "value_adam_m"}, {"count", nv}},
                        {{"name", "value_adam_v"}, {"count", nv}}};
  header["policy_adam_step"] = c.policy_adam.step;
  header["value_adam_step"] = c.value_adam.step;
  header["normalizer"] = normalizer_to_json(c.normalizer);
  header["trainer_rng"] = c.trainer_rng;
  header["env_rngs"] = c.env_rngs;
  header["recent_outcomes"] = c.recent_outcomes;
  header["config"] = c.config;
  const std::string text = header.dump();

  std::string buf(kMagic, kMagicLen);
  put_u64(buf, text.size());
  buf += text;
  put_floats(buf, c.policy.values());
  put_floats(buf, c.value.values());
  put_floats(buf, pm);
  put_floats(buf, pv);
  put_floats(buf, vm);
  put_floats(buf, vv);
  put_u64(buf, fnv1a64(buf.data(), buf.size()));

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint '" + tmp.string() + "'");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw CheckpointError("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();
  const std::string where = "checkpoint '" + path.string() + "': ";

  if (buf.size() < kMagicLen + 16 || buf.compare(0, kMagicLen, kMagic) != 0)
    throw CheckpointError(where + "bad magic or truncated file");
  const std::size_t body = buf.size() - 8;
  if (fnv1a64(buf.data(), body) != get_u64(buf.data() + body))
    throw CheckpointError(where + "checksum mismatch");
  const std::uint64_t hlen = get_u64(buf.data() + kMagicLen);
  std::size_t pos = kMagicLen + 8;
  if (hlen > body - pos) throw CheckpointError(where + "header length out of range");
  json header = json::parse(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                            buf.begin() + static_cast<std::ptrdiff_t>(pos + hlen),
                            nullptr, false);
  if (header.is_discarded()) throw CheckpointError(where + "header is not valid JSON");
  pos += hlen;

  Checkpoint c;
  try {
    if (header.at("version").get<int>() != kCheckpointVersion)
      throw CheckpointError(where + "unsupported version");
    if (header.at("scalar").get<std::string>() != "f32")
      throw CheckpointError(where + "unsupported scalar type");
    if (header.at("policy_layout") != layout_json(PolicyNet<TrainScalar>::layout()) ||
        header.at("value_layout") != layout_json(ValueNet<TrainScalar>::layout()))
      throw CheckpointError(where + "parameter layout differs from this build");

    auto take = [&](VectorX<TrainScalar>& dst, Eigen::Index n) {
      const std::size_t bytes = static_cast<std::size_t>(n) * 4;
      if (pos + bytes > body) throw CheckpointError(where + "payload truncated");
      dst.resize(n);
      std::memcpy(dst.data(), buf.data() + pos, bytes);
      pos += bytes;
    };
    const auto np = PolicyNet<TrainScalar>::layout().size();
    const auto nv = ValueNet<TrainScalar>::layout().size();
    take(c.policy.mutable_values(), np);
    take(c.value.mutable_values(), nv);
    take(c.policy_adam.m, np);
    take(c.policy_adam.v, np);
    take(c.value_adam.m, nv);
    take(c.value_adam.v, nv);
    if (pos != body) throw CheckpointError(where + "trailing bytes after payload");

    c.iteration = header.at("iteration").get<int>();
    c.stage = header.at("stage").get<int>();
    c.beta = header.at("beta").get<double>();
    c.policy_adam.step = header.at("policy_adam_step").get<std::int64_t>();
    c.value_adam.step = header.at("value_adam_step").get<std::int64_t>();
    c.normalizer = normalizer_from_json(header.at("normalizer"));
    c.trainer_rng = header.at("trainer_rng").get<std::string>();
    c.env_rngs = header.at("env_rngs").get<std::vector<std::string>>();
    c.recent_outcomes = header.at("recent_outcomes").get<std::vector<int>>();
    c.config = header.at("config");
  } catch (const json::exception& e) {
    throw CheckpointError(where + "malformed header: " + e.what());
  }
  return c;
}

}  // namespace mrca
