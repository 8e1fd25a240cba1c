#include "phqens/archive.hpp"
#include "phqens/data_io.hpp"
#include "phqens/errors.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

namespace phqens {
namespace {

namespace fs = std::filesystem;

struct Trained {
  SyntheticCohort data;
  BottomUpEnsemble bottom_up;
  TopDownMoE top_down;
};

const Trained& trained() {
  static const Trained t = [] {
    SyntheticConfig config;
    config.train_counts = {8, 6, 5, 4, 3};
    config.dev_counts = {3, 2, 2, 2, 1};
    config.groups_per_speaker = 4;
    Trained r{synth_cohort(config), {}, {}};
    r.bottom_up = train_bottom_up(r.data.train, bottom_up_defaults(), AugmentConfig{});
    r.top_down = train_top_down(r.data.train, top_down_defaults(), AugmentConfig{}).moe;
    return r;
  }();
  return t;
}

TEST(Archive, BottomUpRoundTripIsBitExact) {
  const ModelArchive archive{ModelArchive::kFormatVersion, trained().bottom_up, "abc123"};
  const auto restored = deserialize_archive(serialize_archive(archive), SystemKind::BottomUp);
  EXPECT_EQ(restored, archive);
  const auto& a = std::get<BottomUpEnsemble>(archive.models);
  const auto& b = std::get<BottomUpEnsemble>(restored.models);
  for (const auto& groups : group_by_speaker(trained().data.dev.embeddings)) {
    EXPECT_EQ(predict_bottom_up(a, groups), predict_bottom_up(b, groups));
  }
}

TEST(Archive, TopDownRoundTripThroughFile) {
  const fs::path path = fs::temp_directory_path() / "phqens_archive_test.model";
  ModelArchive archive;
  archive.models = trained().top_down;
  save_model(archive, path);
  const auto restored = load_model(path, SystemKind::TopDown);
  fs::remove(path);
  EXPECT_EQ(restored, archive);
  EXPECT_EQ(restored.kind(), SystemKind::TopDown);
  const auto& moe = std::get<TopDownMoE>(restored.models);
  for (const auto& groups : group_by_speaker(trained().data.dev.embeddings)) {
    EXPECT_EQ(predict_top_down(moe, groups), predict_top_down(trained().top_down, groups));
  }
}

TEST(Archive, SerializationIsDeterministic) {
  const ModelArchive archive{ModelArchive::kFormatVersion, trained().bottom_up, ""};
  EXPECT_EQ(serialize_archive(archive), serialize_archive(archive));
}

TEST(Archive, EveryFlippedByteIsDetected) {
  const ModelArchive archive{ModelArchive::kFormatVersion, trained().top_down, "fp"};
  const auto bytes = serialize_archive(archive);
  for (std::size_t i = 0; i < bytes.size(); i += 1 + i / 7) {
    auto corrupt = bytes;
    corrupt[i] = static_cast<char>(corrupt[i] ^ 0x01);
    EXPECT_THROW(deserialize_archive(corrupt), IntegrityError) << "byte " << i;
  }
  EXPECT_THROW(deserialize_archive(bytes.substr(0, bytes.size() - 1)), IntegrityError);
  EXPECT_THROW(deserialize_archive(""), IntegrityError);
}

TEST(Archive, FutureVersionIsRejected) {
  ModelArchive archive{2, trained().bottom_up, ""};
  EXPECT_THROW(deserialize_archive(serialize_archive(archive)), VersionError);
}

TEST(Archive, KindMismatchIsRejected) {
  const ModelArchive archive{ModelArchive::kFormatVersion, trained().bottom_up, ""};
  const auto bytes = serialize_archive(archive);
  EXPECT_THROW(deserialize_archive(bytes, SystemKind::TopDown), KindMismatchError);
  EXPECT_NO_THROW(deserialize_archive(bytes));
}

TEST(Archive, SystemKindNames) {
  EXPECT_EQ(parse_system_kind("bottom-up"), SystemKind::BottomUp);
  EXPECT_EQ(parse_system_kind(to_string(SystemKind::TopDown)), SystemKind::TopDown);
  EXPECT_THROW(parse_system_kind("sideways"), DomainError);
}

TEST(Fingerprint, KnownDigestAndFileOrder) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const fs::path a = fs::temp_directory_path() / "phqens_fp_a.txt";
  const fs::path b = fs::temp_directory_path() / "phqens_fp_b.txt";
  std::ofstream(a) << "ab";
  std::ofstream(b) << "c";
  const std::vector<fs::path> ab{a, b}, ba{b, a};
  const auto h1 = fingerprint_files(ab);
  EXPECT_EQ(h1.size(), 64u);
  EXPECT_NE(h1, fingerprint_files(ba));
  std::ofstream(a) << "a";
  std::ofstream(b) << "bc";
  EXPECT_NE(h1, fingerprint_files(ab));
  fs::remove(a);
  fs::remove(b);
}

}  // namespace
}  // namespace phqens
