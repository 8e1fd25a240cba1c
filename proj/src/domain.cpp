#include "phqens/domain.hpp"

#include "phqens/errors.hpp"

#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace phqens {

namespace {

void require_total_in_range(int total) {
  if (total < 0 || total > kMaxTotal) {
    throw DomainError("PHQ-8 total out of range 0..24: " + std::to_string(total));
  }
}

}  // namespace

Phq8Items::Phq8Items(const std::array<int, kItemCount>& items) : items_(items) {
  for (std::size_t k = 0; k < items_.size(); ++k) {
    if (items_[k] < 0 || items_[k] > kMaxItemScore) {
      throw DomainError("item " + std::string(kItemNames[k]) + " score out of range 0..3: " +
                        std::to_string(items_[k]));
    }
  }
}

int Phq8Items::total() const { return std::accumulate(items_.begin(), items_.end(), 0); }

Severity severity_of(int total) {
  require_total_in_range(total);
  return static_cast<Severity>(total / kBandWidth);
}

bool binary_of(int total) {
  require_total_in_range(total);
  return total >= kBinaryCutoff;
}

Severity severity_from_index(int index) {
  if (index < 0 || index >= kSeverityCount) {
    throw DomainError("severity index out of range 0..4: " + std::to_string(index));
  }
  return static_cast<Severity>(index);
}

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::None: return "none";
    case Severity::Mild: return "mild";
    case Severity::Moderate: return "moderate";
    case Severity::ModeratelySevere: return "moderately_severe";
    case Severity::Severe: return "severe";
  }
  return "unknown";
}

Severity parse_severity(std::string_view name) {
  for (Severity s : kAllSeverities) {
    if (to_string(s) == name) return s;
  }
  throw DomainError("unknown severity name: " + std::string(name));
}

std::string_view to_string(Split s) { return s == Split::Train ? "train" : "dev"; }

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "dev") return Split::Dev;
  throw DomainError("unknown split: " + std::string(name));
}

SpeakerLabel SpeakerLabel::from_items(std::string speaker_id, const Phq8Items& items) {
  const int total = items.total();
  return SpeakerLabel{std::move(speaker_id), items, total, binary_of(total), severity_of(total)};
}

const SpeakerLabel* Cohort::find_label(std::string_view speaker_id) const {
  for (const auto& label : labels) {
    if (label.speaker_id == speaker_id) return &label;
  }
  return nullptr;
}

std::vector<Violation> validate_cohort(const Cohort& cohort) {
  std::vector<Violation> report;
  std::unordered_set<std::string> ids;

  for (const auto& label : cohort.labels) {
    const auto& id = label.speaker_id;
    if (!ids.insert(id).second) {
      report.push_back({id, "duplicate_speaker", "speaker_id appears more than once"});
    }
    const int item_sum = label.items.total();
    if (label.total != item_sum) {
      report.push_back({id, "total", "total " + std::to_string(label.total) +
                                         " != item sum " + std::to_string(item_sum)});
      continue;
    }
    if (label.binary != binary_of(label.total)) {
      report.push_back({id, "binary", "binary flag inconsistent with total " +
                                          std::to_string(label.total)});
    }
    if (label.severity != severity_of(label.total)) {
      report.push_back({id, "severity", "severity inconsistent with total " +
                                            std::to_string(label.total)});
    }
  }

  std::unordered_map<std::string, int> group_counts;
  std::set<std::string> reported_orphans;
  for (const auto& group : cohort.embeddings) {
    const auto& id = group.speaker_id;
    if (!ids.contains(id)) {
      if (reported_orphans.insert(id).second) {
        report.push_back({id, "orphan_embedding", "embedding speaker has no label"});
      }
      continue;
    }
    ++group_counts[id];
    if (group.vector.size() != kEmbeddingDim) {
      report.push_back({id, "embedding_dim", "group " + std::to_string(group.group_index) +
                                                 " has " + std::to_string(group.vector.size()) +
                                                 " components"});
    } else if (!group.vector.allFinite()) {
      report.push_back(
          {id, "embedding_finite", "group " + std::to_string(group.group_index) + " not finite"});
    }
  }

  for (const auto& label : cohort.labels) {
    if (!group_counts.contains(label.speaker_id)) {
      report.push_back({label.speaker_id, "no_embeddings", "speaker has no embeddings"});
    }
  }
  return report;
}

void require_valid(const Cohort& cohort) {
  const auto report = validate_cohort(cohort);
  if (!report.empty()) {
    const auto& v = report.front();
    throw ValidationError("speaker " + v.speaker_id + " violates " + v.rule + ": " + v.detail);
  }
}

std::vector<std::vector<GroupEmbedding>> group_by_speaker(
    const std::vector<GroupEmbedding>& embeddings) {
  std::vector<std::vector<GroupEmbedding>> groups;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& g : embeddings) {
    auto [it, inserted] = slot.try_emplace(g.speaker_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(g);
  }
  return groups;
}

Prediction::Prediction(std::string speaker_id, int total, Source source)
    : speaker_id_(std::move(speaker_id)),
      total_(total),
      binary_(binary_of(total)),
      severity_(severity_of(total)),
      source_(std::move(source)) {}

Prediction Prediction::bottom_up(std::string speaker_id, const Phq8Items& items) {
  return Prediction(std::move(speaker_id), items.total(), BottomUpSource{items});
}

Prediction Prediction::top_down(std::string speaker_id, Severity expert, int total) {
  if (total < band_start(expert) || total > band_end(expert)) {
    throw DomainError("total " + std::to_string(total) + " outside band of expert " +
                      std::string(to_string(expert)));
  }
  return Prediction(std::move(speaker_id), total, TopDownSource{expert});
}

}  // namespace phqens
