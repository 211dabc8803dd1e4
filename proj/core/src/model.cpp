#include "artn/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "artn/error.hpp"

namespace artn::nn {

namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float f) { le(std::bit_cast<std::uint32_t>(f)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  bool has(std::size_t n) const { return in_.size() - pos_ >= n; }
  template <typename U>
  U le(const std::string& what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(in_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  std::string str(std::size_t n, const std::string& what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n, const std::string& what) const {
    if (!has(n)) throw Error(ErrorCode::ShapeMismatch, "weight file truncated in " + what);
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::string shape_string(const std::vector<std::uint32_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace

std::vector<std::uint8_t> serialize_weights(const PolicyNet& net) {
  Writer w;
  w.bytes("ARTN", 4);
  w.le<std::uint32_t>(kWeightFormatVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(net.tensors().size()));
  const auto params = net.params();
  for (const auto& t : net.tensors()) {
    w.le<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.le<std::uint8_t>(static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) w.le<std::uint32_t>(d);
    for (std::size_t i = 0; i < t.size; ++i) w.f32(params[t.offset + i]);
  }
  return w.take();
}

PolicyNet deserialize_weights(std::span<const std::uint8_t> bytes, const NetConfig& expected) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "ARTN", 4) != 0) {
    throw Error(ErrorCode::BadMagic, "not a weight file");
  }
  Reader r(bytes.subspan(4));
  const auto version = r.le<std::uint32_t>("header");
  if (version != kWeightFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "weight file version " + std::to_string(version) +
                                                ", expected " + std::to_string(kWeightFormatVersion));
  }
  PolicyNet net(expected);
  const auto count = r.le<std::uint32_t>("header");
  if (count != net.tensors().size()) {
    throw Error(ErrorCode::ShapeMismatch, "weight file has " + std::to_string(count) +
                                              " tensors, expected " +
                                              std::to_string(net.tensors().size()));
  }
  auto params = net.params();
  for (const auto& t : net.tensors()) {
    const auto name_len = r.le<std::uint16_t>("tensor '" + t.name + "'");
    const std::string name = r.str(name_len, "tensor '" + t.name + "'");
    if (name != t.name) {
      throw Error(ErrorCode::ShapeMismatch, "tensor '" + name + "' found where '" + t.name + "' was expected");
    }
    const auto rank = r.le<std::uint8_t>("tensor '" + name + "'");
    std::vector<std::uint32_t> shape;
    for (int i = 0; i < rank; ++i) shape.push_back(r.le<std::uint32_t>("tensor '" + name + "'"));
    if (shape != t.shape) {
      throw Error(ErrorCode::ShapeMismatch, "tensor '" + name + "' has shape " + shape_string(shape) +
                                                ", expected " + shape_string(t.shape));
    }
    r.need(4 * t.size, "tensor '" + name + "'");
    for (std::size_t i = 0; i < t.size; ++i) {
      params[t.offset + i] = std::bit_cast<float>(r.le<std::uint32_t>(name));
    }
  }
  if (!r.done()) throw Error(ErrorCode::ShapeMismatch, "trailing bytes after the last tensor");
  return net;
}

void save_weights(const std::filesystem::path& path, const PolicyNet& net) {
  const auto bytes = serialize_weights(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

PolicyNet load_weights(const std::filesystem::path& path, const NetConfig& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_weights(bytes, expected);
}

nlohmann::json to_json(const ModelMeta& meta) {
  return {{"modelId", meta.model_id},
          {"name", meta.name},
          {"trainedEpisodes", meta.trained_episodes},
          {"createdAt", meta.created_at}};
}

ModelMeta model_meta_from_json(const nlohmann::json& j) {
  try {
    return {j.at("modelId").get<std::string>(), j.at("name").get<std::string>(),
            j.at("trainedEpisodes").get<std::int64_t>(), j.at("createdAt").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptRecord, std::string("model metadata: ") + e.what());
  }
}

nn::Logits NetPolicy::logits(const sim::Observation& obs, const sim::VehicleState&) {
  net_.forward(obs.data, act_);
  return act_.out.logits;
}

}  // namespace artn::nn
