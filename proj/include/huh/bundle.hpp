#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "huh/emissions.hpp"
#include "huh/error.hpp"
#include "huh/prompt.hpp"
#include "huh/provider.hpp"
#include "huh/segmenter.hpp"
#include "huh/transcript.hpp"

namespace huh {

class BundleError : public Error {
 public:
  enum class Kind { kInvalidRange, kProviderExhausted, kIo, kInvalidBundle };
  BundleError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr int kLevels = 2;

// Slot k of each level starts at coverage_start_ms + k * interval_ms. Both
// coverage bounds are inclusive.
struct SlotConfig {
  Millis interval_ms = 5000;
  Millis coverage_start_ms = 0;
  Millis coverage_end_ms = 0;
};

// floor((end - start) / interval) + 1; throws kInvalidRange for a reversed
// range or a non-positive interval.
std::size_t slot_count(const SlotConfig& config);

struct PlannedSlot {
  std::size_t slot_index = 0;
  Millis evaluation_ms = 0;
  int level = 1;
  // Empty when no sentence has ended by evaluation time.
  std::optional<ContextWindow> window;
};

// Level-1 slots in order, then level-2 slots. The transcript must already be
// punctuated; coverage must lie inside [0, duration_ms].
std::vector<PlannedSlot> plan_slots(const Transcript& transcript, const SlotConfig& config,
                                    const SegmenterOptions& segmenter = {});

enum class SlotStatus { kGenerated, kUnavailable };

struct ExplanationSlot {
  std::size_t slot_index = 0;
  Millis slot_start_ms = 0;
  int level = 1;
  std::vector<std::size_t> target_sentence_indices;
  // Key into ExplanationBundle::explanations; empty when unavailable.
  std::string explanation_ref;
  SlotStatus status = SlotStatus::kUnavailable;
  // Why the slot is unavailable.
  std::string note;

  bool operator==(const ExplanationSlot&) const = default;
};

struct Explanation {
  int level = 1;
  std::vector<std::size_t> target_sentence_indices;
  std::string text;
  TokenUsage usage;

  bool operator==(const Explanation&) const = default;
};

struct GeneratorMeta {
  std::string model;
  std::map<std::string, std::string> template_hashes;
  std::string created_at;

  bool operator==(const GeneratorMeta&) const = default;
};

struct ExplanationBundle {
  std::string video_id;
  std::string language;
  Millis interval_ms = 5000;
  Millis coverage_start_ms = 0;
  Millis coverage_end_ms = 0;
  std::map<std::string, Explanation> explanations;
  // Level-1 slots in index order followed by level-2 slots.
  std::vector<ExplanationSlot> slots;
  GeneratorMeta generator_meta;

  std::size_t slot_count_per_level() const { return slots.size() / kLevels; }
  const ExplanationSlot& slot(int level, std::size_t index) const;

  bool operator==(const ExplanationBundle&) const = default;
};

// "<level>:<i>" or "<level>:<i>,<j>".
std::string explanation_key(int level, const std::vector<std::size_t>& targets);

struct GenerateConfig {
  SlotConfig slots;
  SegmenterOptions segmenter;
  TemplateSet templates;
  RetryPolicy retry;
  Sleeper sleep;
  std::uint32_t max_output_tokens = 512;
  double temperature = 0.0;
  // The run aborts once failed calls exceed this share of all calls.
  double abort_threshold = 0.2;
  std::size_t concurrency = 4;
  // Stored verbatim in generator_meta.
  std::string created_at;
};

struct GenerateResult {
  ExplanationBundle bundle;
  RunLedger ledger;
  // Usage had every slot issued its own call.
  TokenUsage no_dedup_totals;
  std::size_t provider_calls = 0;
};

// One provider call per distinct (targets, level); slots sharing a target
// share the explanation. Failed calls leave their slots unavailable.
GenerateResult generate_bundle(const Transcript& transcript, ExplanationProvider& provider,
                               const GenerateConfig& config);

struct LookupResult {
  bool available = false;
  std::string explanation_text;
  int level = 1;
  // Empty when t_ms falls outside coverage.
  std::optional<Millis> slot_start_ms;
  std::vector<std::size_t> target_sentence_indices;

  bool operator==(const LookupResult&) const = default;
};

// Slot with the largest start <= t_ms inside coverage. Never throws.
LookupResult lookup(const ExplanationBundle& bundle, Millis t_ms, int level);

std::string lookup_json(const LookupResult& result);
std::string manifest_json(const ExplanationBundle& bundle);
std::string slot_file_json(const ExplanationBundle& bundle, const ExplanationSlot& slot);

std::string to_bundle_json(const ExplanationBundle& bundle);
ExplanationBundle parse_bundle_json(std::string_view bytes);

void save_bundle(const ExplanationBundle& bundle, const std::filesystem::path& path);
ExplanationBundle load_bundle(const std::filesystem::path& path);

struct ExportManifest {
  std::string manifest;
  // Paths relative to the export root, manifest first.
  std::vector<std::string> files;
};

// Writes manifest.json and <level>/<slot_index>.json. Re-exporting replaces
// the level directories, so the tree always mirrors the bundle.
ExportManifest export_static(const ExplanationBundle& bundle, const std::filesystem::path& out_dir);

}  // namespace huh
