#include "phqens/domain.hpp"
#include "phqens/errors.hpp"

#include <gtest/gtest.h>

#include <set>

namespace phqens {
namespace {

TEST(SeverityOf, BandExamples) {
  EXPECT_EQ(severity_of(0), Severity::None);
  EXPECT_EQ(severity_of(10), Severity::Moderate);
  EXPECT_EQ(severity_of(24), Severity::Severe);
  EXPECT_EQ(severity_of(4), Severity::None);
  EXPECT_EQ(severity_of(5), Severity::Mild);
  EXPECT_EQ(severity_of(19), Severity::ModeratelySevere);
  EXPECT_EQ(severity_of(20), Severity::Severe);
}

TEST(SeverityOf, RejectsOutOfRange) {
  EXPECT_THROW(severity_of(-1), DomainError);
  EXPECT_THROW(severity_of(25), DomainError);
}

TEST(SeverityOf, MonotoneWithFiveDistinctOutputs) {
  std::set<Severity> seen;
  for (int t = 0; t <= kMaxTotal; ++t) {
    seen.insert(severity_of(t));
    if (t > 0) EXPECT_LE(severity_index(severity_of(t - 1)), severity_index(severity_of(t)));
  }
  EXPECT_EQ(seen.size(), 5u);
}

TEST(SeverityBands, PartitionZeroToTwentyFour) {
  int expected_start = 0;
  for (Severity s : kAllSeverities) {
    EXPECT_EQ(band_start(s), expected_start);
    EXPECT_EQ(band_end(s), expected_start + 4);
    for (int t = band_start(s); t <= band_end(s); ++t) EXPECT_EQ(severity_of(t), s);
    expected_start = band_end(s) + 1;
  }
  EXPECT_EQ(expected_start, kMaxTotal + 1);
}

TEST(BinaryOf, CutoffAtTen) {
  EXPECT_FALSE(binary_of(9));
  EXPECT_TRUE(binary_of(10));
  EXPECT_FALSE(binary_of(0));
  EXPECT_THROW(binary_of(25), DomainError);
  EXPECT_THROW(binary_of(-3), DomainError);
}

TEST(BinaryOf, CoincidesWithModerateOrWorse) {
  for (int t = 0; t <= kMaxTotal; ++t) {
    EXPECT_EQ(binary_of(t), severity_index(severity_of(t)) >= severity_index(Severity::Moderate));
  }
}

TEST(Phq8Items, RangeAndTotal) {
  const Phq8Items items({0, 1, 2, 3, 3, 2, 1, 0});
  EXPECT_EQ(items.total(), 12);
  EXPECT_THROW(Phq8Items({0, 0, 0, 4, 0, 0, 0, 0}), DomainError);
  EXPECT_THROW(Phq8Items({0, -1, 0, 0, 0, 0, 0, 0}), DomainError);
}

TEST(SeverityNames, RoundTrip) {
  for (Severity s : kAllSeverities) EXPECT_EQ(parse_severity(to_string(s)), s);
  EXPECT_THROW(parse_severity("extreme"), DomainError);
}

Cohort consistent_cohort() {
  Cohort c;
  c.labels.push_back(SpeakerLabel::from_items("a", Phq8Items({1, 1, 1, 1, 1, 1, 1, 1})));
  c.labels.push_back(SpeakerLabel::from_items("b", Phq8Items({3, 3, 3, 3, 0, 0, 0, 0})));
  c.embeddings.push_back({"a", 0, Embedding::Zero(kEmbeddingDim)});
  c.embeddings.push_back({"b", 0, Embedding::Ones(kEmbeddingDim)});
  c.embeddings.push_back({"b", 1, Embedding::Ones(kEmbeddingDim)});
  return c;
}

TEST(ValidateCohort, ConsistentCohortIsClean) {
  EXPECT_TRUE(validate_cohort(consistent_cohort()).empty());
}

TEST(ValidateCohort, BinaryRuleViolation) {
  Cohort c = consistent_cohort();
  c.labels[0] = SpeakerLabel::from_items("a", Phq8Items({3, 3, 3, 0, 0, 0, 0, 0}));
  ASSERT_EQ(c.labels[0].total, 9);
  c.labels[0].binary = true;
  const auto report = validate_cohort(c);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].speaker_id, "a");
  EXPECT_EQ(report[0].rule, "binary");
}

TEST(ValidateCohort, OrphanEmbedding) {
  Cohort c = consistent_cohort();
  c.embeddings.push_back({"ghost", 0, Embedding::Zero(kEmbeddingDim)});
  const auto report = validate_cohort(c);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].speaker_id, "ghost");
  EXPECT_EQ(report[0].rule, "orphan_embedding");
}

TEST(ValidateCohort, OtherRules) {
  Cohort c = consistent_cohort();
  c.labels[1].total = 11;
  c.labels.push_back(c.labels[0]);
  c.labels.push_back(SpeakerLabel::from_items("silent", Phq8Items()));
  c.embeddings[0].vector = Embedding::Zero(63);
  std::set<std::string> rules;
  for (const auto& v : validate_cohort(c)) rules.insert(v.rule);
  EXPECT_EQ(rules, (std::set<std::string>{"total", "duplicate_speaker", "no_embeddings",
                                          "embedding_dim"}));
  EXPECT_THROW(require_valid(c), ValidationError);
}

TEST(Prediction, BottomUpDerivesLabels) {
  const auto p = Prediction::bottom_up("s", Phq8Items({1, 1, 1, 1, 1, 1, 1, 1}));
  EXPECT_EQ(p.total(), 8);
  EXPECT_EQ(p.severity(), Severity::Mild);
  EXPECT_FALSE(p.binary());
  EXPECT_TRUE(p.is_bottom_up());
}

TEST(Prediction, TopDownRejectsOutOfBandTotals) {
  const auto p = Prediction::top_down("s", Severity::Severe, 22);
  EXPECT_EQ(p.severity(), Severity::Severe);
  EXPECT_TRUE(p.binary());
  EXPECT_THROW(Prediction::top_down("s", Severity::Severe, 19), DomainError);
  EXPECT_THROW(Prediction::top_down("s", Severity::None, 5), DomainError);
}

TEST(GroupBySpeaker, KeepsFirstAppearanceOrder) {
  std::vector<GroupEmbedding> g = {{"b", 0, {}}, {"a", 0, {}}, {"b", 1, {}}};
  const auto groups = group_by_speaker(g);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].size(), 2u);
  EXPECT_EQ(groups[0][1].group_index, 1);
  EXPECT_EQ(groups[1][0].speaker_id, "a");
}

}  // namespace
}  // namespace phqens
