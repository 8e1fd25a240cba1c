#include "phqens/archive.hpp"

#include "phqens/errors.hpp"

#include <cereal/archives/portable_binary.hpp>
#include <cereal/types/array.hpp>
#include <cereal/types/optional.hpp>
#include <cereal/types/string.hpp>
#include <cereal/types/vector.hpp>
#include <openssl/evp.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace phqens {

template <class Archive>
void save(Archive& ar, const LinearSoftmaxModel& m) {
  const auto rows = static_cast<std::int64_t>(m.weights.rows());
  const auto cols = static_cast<std::int64_t>(m.weights.cols());
  ar(rows, cols);
  for (Eigen::Index i = 0; i < m.weights.size(); ++i) ar(m.weights.data()[i]);
  for (Eigen::Index i = 0; i < m.bias.size(); ++i) ar(m.bias(i));
}

template <class Archive>
void load(Archive& ar, LinearSoftmaxModel& m) {
  std::int64_t rows = 0, cols = 0;
  ar(rows, cols);
  if (rows < 2 || rows > 1024 || cols < 1 || cols > 4096) {
    throw IntegrityError("archive model shape out of range");
  }
  m = LinearSoftmaxModel::zeros(static_cast<int>(rows), cols);
  for (Eigen::Index i = 0; i < m.weights.size(); ++i) ar(m.weights.data()[i]);
  for (Eigen::Index i = 0; i < m.bias.size(); ++i) ar(m.bias(i));
}

template <class Archive>
void serialize(Archive& ar, TrainConfig& c) {
  ar(c.learning_rate, c.epochs, c.batch_size, c.seed);
}

template <class Archive>
void serialize(Archive& ar, AugmentConfig& c) {
  ar(c.perturb_count, c.preserve_count, c.noise_sigma, c.relative_noise, c.seed);
}

template <class Archive>
void serialize(Archive& ar, BottomUpEnsemble& e) {
  ar(e.item_models, e.train_config, e.augment_config);
}

template <class Archive>
void serialize(Archive& ar, TopDownMoE& moe) {
  ar(moe.router, moe.experts, moe.expert_trained, moe.train_config, moe.augment_config);
}

namespace {

constexpr std::string_view kMagic = "PHQENS";
constexpr std::size_t kDigestSize = 32;
constexpr std::size_t kHeaderSize = kMagic.size() + 4 + 1 + 8;

template <typename T>
void append_le(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T read_le(std::string_view bytes, std::size_t offset) {
  T value{};
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

std::string sha256_raw(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  return std::string(reinterpret_cast<const char*>(md), len);
}

}  // namespace

std::string_view to_string(SystemKind kind) {
  return kind == SystemKind::BottomUp ? "bottom-up" : "top-down";
}

SystemKind parse_system_kind(std::string_view name) {
  if (name == "bottom-up") return SystemKind::BottomUp;
  if (name == "top-down") return SystemKind::TopDown;
  throw DomainError("unknown system: " + std::string(name));
}

std::string sha256_hex(std::string_view bytes) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned char c : sha256_raw(bytes)) {
    out.push_back(kHex[c >> 4]);
    out.push_back(kHex[c & 0xF]);
  }
  return out;
}

std::string fingerprint_files(std::span<const std::filesystem::path> files) {
  std::string joined;
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    append_le<std::uint64_t>(joined, content.size());
    joined += content;
  }
  return sha256_hex(joined);
}

std::string serialize_archive(const ModelArchive& archive) {
  std::ostringstream payload_stream;
  {
    cereal::PortableBinaryOutputArchive ar(payload_stream);
    ar(archive.data_fingerprint);
    std::visit([&ar](const auto& models) { ar(models); }, archive.models);
  }
  const std::string payload = payload_stream.str();

  std::string bytes(kMagic);
  append_le<std::uint32_t>(bytes, archive.version);
  append_le<std::uint8_t>(bytes, static_cast<std::uint8_t>(archive.kind()));
  append_le<std::uint64_t>(bytes, payload.size());
  bytes += payload;
  bytes += sha256_raw(bytes);
  return bytes;
}

ModelArchive deserialize_archive(std::string_view bytes, std::optional<SystemKind> expected) {
  if (bytes.size() < kHeaderSize + kDigestSize) throw IntegrityError("archive truncated");
  if (bytes.substr(0, kMagic.size()) != kMagic) throw IntegrityError("not a model archive");
  const auto body = bytes.substr(0, bytes.size() - kDigestSize);
  if (sha256_raw(body) != bytes.substr(body.size())) {
    throw IntegrityError("archive checksum mismatch");
  }

  ModelArchive archive;
  archive.version = read_le<std::uint32_t>(bytes, kMagic.size());
  if (archive.version != ModelArchive::kFormatVersion) {
    throw VersionError("archive format version " + std::to_string(archive.version) +
                       " unsupported (expected " +
                       std::to_string(ModelArchive::kFormatVersion) + ")");
  }
  const auto kind_byte = read_le<std::uint8_t>(bytes, kMagic.size() + 4);
  if (kind_byte != 1 && kind_byte != 2) throw IntegrityError("unknown system kind in archive");
  const auto kind = static_cast<SystemKind>(kind_byte);
  if (expected && *expected != kind) {
    throw KindMismatchError("archive holds a " + std::string(to_string(kind)) +
                            " model, requested " + std::string(to_string(*expected)));
  }
  const auto payload_size = read_le<std::uint64_t>(bytes, kMagic.size() + 5);
  if (payload_size != body.size() - kHeaderSize) throw IntegrityError("archive size mismatch");

  std::istringstream payload(std::string(body.substr(kHeaderSize)));
  try {
    cereal::PortableBinaryInputArchive ar(payload);
    ar(archive.data_fingerprint);
    if (kind == SystemKind::BottomUp) {
      BottomUpEnsemble e;
      ar(e);
      e.validate();
      archive.models = std::move(e);
    } else {
      TopDownMoE moe;
      ar(moe);
      moe.validate();
      archive.models = std::move(moe);
    }
  } catch (const cereal::Exception& e) {
    throw IntegrityError(std::string("archive payload corrupt: ") + e.what());
  }
  return archive;
}

void save_model(const ModelArchive& archive, const std::filesystem::path& path) {
  const auto bytes = serialize_archive(archive);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

ModelArchive load_model(const std::filesystem::path& path, std::optional<SystemKind> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_archive(bytes, expected);
}

}  // namespace phqens
