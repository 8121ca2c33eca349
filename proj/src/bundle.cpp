#include "huh/bundle.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include <nlohmann/json.hpp>

#include "fileio.hpp"

namespace huh {

namespace {

using Kind = BundleError::Kind;
using ojson = nlohmann::ordered_json;

constexpr std::string_view kFormat = "huh-bundle/1";

RequestKind request_kind(int level) {
  return level == 2 ? RequestKind::kExplainLevel2 : RequestKind::kExplainLevel1;
}

std::string trim_copy(std::string_view s) {
  const auto space = [](char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r'; };
  while (!s.empty() && space(s.front())) s.remove_prefix(1);
  while (!s.empty() && space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

struct Job {
  std::string key;
  const ContextWindow* window = nullptr;
  std::size_t first_slot = 0;
};

struct JobResult {
  bool ok = false;
  std::string text;
  TokenUsage usage;
  std::string error;
};

}  // namespace

std::size_t slot_count(const SlotConfig& config) {
  if (config.interval_ms <= 0) {
    throw BundleError(Kind::kInvalidRange, "interval_ms must be positive");
  }
  if (config.coverage_end_ms < config.coverage_start_ms) {
    throw BundleError(Kind::kInvalidRange, "coverage end precedes coverage start");
  }
  return static_cast<std::size_t>((config.coverage_end_ms - config.coverage_start_ms) / config.interval_ms) + 1;
}

std::vector<PlannedSlot> plan_slots(const Transcript& transcript, const SlotConfig& config,
                                    const SegmenterOptions& segmenter) {
  const auto count = slot_count(config);
  if (config.coverage_start_ms < 0 || config.coverage_end_ms > transcript.duration_ms) {
    throw BundleError(Kind::kInvalidRange, "coverage [" + std::to_string(config.coverage_start_ms) + ", " +
                                               std::to_string(config.coverage_end_ms) +
                                               "] exceeds the transcript duration " +
                                               std::to_string(transcript.duration_ms));
  }
  const auto segmentation = segment(transcript, segmenter);

  std::vector<PlannedSlot> plan;
  plan.reserve(count * kLevels);
  for (int level = 1; level <= kLevels; ++level) {
    for (std::size_t k = 0; k < count; ++k) {
      PlannedSlot slot;
      slot.slot_index = k;
      slot.level = level;
      slot.evaluation_ms = config.coverage_start_ms + static_cast<Millis>(k) * config.interval_ms;
      try {
        slot.window = context_window(segmentation.sentences, segmentation.text, slot.evaluation_ms, level,
                                     segmenter.max_context_chars);
      } catch (const SegmenterError& e) {
        if (e.kind() != SegmenterError::Kind::kNoTargetAvailable) throw;
      }
      plan.push_back(std::move(slot));
    }
  }
  return plan;
}

std::string explanation_key(int level, const std::vector<std::size_t>& targets) {
  std::string key = std::to_string(level) + ":";
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (i > 0) key += ',';
    key += std::to_string(targets[i]);
  }
  return key;
}

const ExplanationSlot& ExplanationBundle::slot(int level, std::size_t index) const {
  const auto n = slot_count_per_level();
  if (level < 1 || level > kLevels || index >= n) {
    throw BundleError(Kind::kInvalidBundle, "no slot " + std::to_string(index) + " at level " + std::to_string(level));
  }
  return slots[static_cast<std::size_t>(level - 1) * n + index];
}

GenerateResult generate_bundle(const Transcript& transcript, ExplanationProvider& provider,
                               const GenerateConfig& config) {
  const auto plan = plan_slots(transcript, config.slots, config.segmenter);

  std::vector<Job> jobs;
  std::map<std::string, std::size_t> job_of_key;
  for (const auto& slot : plan) {
    if (!slot.window) continue;
    const auto key = explanation_key(slot.level, slot.window->target_sentence_indices);
    if (job_of_key.emplace(key, jobs.size()).second) {
      jobs.push_back({key, &*slot.window, slot.slot_index});
    }
  }

  std::vector<JobResult> results(jobs.size());
  LedgerRecorder recorder(transcript.video_id);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failures{0};
  std::atomic<bool> aborted{false};
  const auto failure_limit = config.abort_threshold * static_cast<double>(jobs.size());

  const auto worker = [&] {
    while (!aborted.load()) {
      const auto j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      const auto& job = jobs[j];
      ProviderRequest request;
      request.prompt = build_prompt(*job.window, config.templates);
      request.max_output_tokens = config.max_output_tokens;
      request.temperature = config.temperature;
      request.kind = request_kind(job.window->level);
      request.context = job.window->context_text;
      request.request_tag = transcript.video_id + "/slot" + std::to_string(job.first_slot) + "/L" +
                            std::to_string(job.window->level);
      auto& result = results[j];
      try {
        auto outcome = retrying(provider, request, config.retry, config.sleep);
        recorder.commit(j, {request.request_tag, outcome.response.usage});
        result.usage = outcome.response.usage;
        result.text = trim_copy(outcome.response.text);
        result.ok = !result.text.empty();
        if (!result.ok) result.error = "provider returned an empty explanation";
      } catch (const ProviderError& e) {
        result.error = std::string(to_string(e.kind())) + ": " + e.what();
      }
      if (!result.ok && static_cast<double>(failures.fetch_add(1) + 1) > failure_limit) {
        aborted.store(true);
      }
    }
  };

  const auto threads = std::min(std::max<std::size_t>(config.concurrency, 1), jobs.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    if (threads > 0) worker();
  }

  if (aborted.load()) {
    throw BundleError(Kind::kProviderExhausted,
                      std::to_string(failures.load()) + " of " + std::to_string(jobs.size()) +
                          " provider calls failed, above the abort threshold");
  }

  GenerateResult out;
  auto& bundle = out.bundle;
  bundle.video_id = transcript.video_id;
  bundle.language = transcript.language;
  bundle.interval_ms = config.slots.interval_ms;
  bundle.coverage_start_ms = config.slots.coverage_start_ms;
  bundle.coverage_end_ms = config.slots.coverage_end_ms;
  bundle.generator_meta.model = provider.model_name();
  bundle.generator_meta.template_hashes = {{"level1", config.templates.level1.hash()},
                                           {"level2", config.templates.level2.hash()},
                                           {"punctuation", config.templates.punctuation.hash()}};
  bundle.generator_meta.created_at = config.created_at;

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (!results[j].ok) continue;
    bundle.explanations[jobs[j].key] = {jobs[j].window->level, jobs[j].window->target_sentence_indices,
                                        results[j].text, results[j].usage};
  }
  for (const auto& planned : plan) {
    ExplanationSlot slot;
    slot.slot_index = planned.slot_index;
    slot.slot_start_ms = planned.evaluation_ms;
    slot.level = planned.level;
    if (!planned.window) {
      slot.note = "no sentence completed yet";
    } else {
      slot.target_sentence_indices = planned.window->target_sentence_indices;
      const auto key = explanation_key(planned.level, slot.target_sentence_indices);
      const auto& result = results[job_of_key.at(key)];
      if (result.ok) {
        slot.status = SlotStatus::kGenerated;
        slot.explanation_ref = key;
        out.no_dedup_totals += result.usage;
      } else {
        slot.note = result.error;
      }
    }
    bundle.slots.push_back(std::move(slot));
  }
  out.ledger = recorder.snapshot();
  out.provider_calls = jobs.size();
  return out;
}

LookupResult lookup(const ExplanationBundle& bundle, Millis t_ms, int level) {
  LookupResult result;
  result.level = level;
  const auto n = bundle.slot_count_per_level();
  if (n == 0 || level < 1 || level > kLevels || bundle.interval_ms <= 0 || t_ms < bundle.coverage_start_ms ||
      t_ms > bundle.coverage_end_ms) {
    return result;
  }
  const auto k = std::min(static_cast<std::size_t>((t_ms - bundle.coverage_start_ms) / bundle.interval_ms), n - 1);
  const auto& slot = bundle.slot(level, k);
  result.slot_start_ms = slot.slot_start_ms;
  result.target_sentence_indices = slot.target_sentence_indices;
  if (slot.status != SlotStatus::kGenerated) return result;
  const auto it = bundle.explanations.find(slot.explanation_ref);
  if (it == bundle.explanations.end()) return result;
  result.available = true;
  result.explanation_text = it->second.text;
  return result;
}

std::string lookup_json(const LookupResult& result) {
  ojson doc;
  doc["available"] = result.available;
  doc["explanation"] = result.explanation_text;
  doc["level"] = result.level;
  doc["slot_start_ms"] = result.slot_start_ms ? ojson(*result.slot_start_ms) : ojson(nullptr);
  doc["target_sentence_indices"] = result.target_sentence_indices;
  return doc.dump();
}

namespace {

ojson meta_json(const GeneratorMeta& meta) {
  ojson doc;
  doc["model"] = meta.model;
  doc["template_hashes"] = ojson::object();
  for (const auto& [name, hash] : meta.template_hashes) doc["template_hashes"][name] = hash;
  doc["created_at"] = meta.created_at;
  return doc;
}

}  // namespace

std::string manifest_json(const ExplanationBundle& bundle) {
  ojson doc;
  doc["video_id"] = bundle.video_id;
  doc["language"] = bundle.language;
  doc["interval_ms"] = bundle.interval_ms;
  doc["coverage_start_ms"] = bundle.coverage_start_ms;
  doc["coverage_end_ms"] = bundle.coverage_end_ms;
  doc["levels"] = {1, 2};
  doc["slot_count_per_level"] = bundle.slot_count_per_level();
  doc["generator_meta"] = meta_json(bundle.generator_meta);
  return doc.dump(2) + "\n";
}

std::string slot_file_json(const ExplanationBundle& bundle, const ExplanationSlot& slot) {
  const auto result = lookup(bundle, slot.slot_start_ms, slot.level);
  ojson doc;
  doc["slot_start_ms"] = slot.slot_start_ms;
  doc["available"] = result.available;
  doc["explanation"] = result.explanation_text;
  doc["target_sentence_indices"] = slot.target_sentence_indices;
  return doc.dump() + "\n";
}

std::string to_bundle_json(const ExplanationBundle& bundle) {
  ojson doc;
  doc["format"] = kFormat;
  doc["video_id"] = bundle.video_id;
  doc["language"] = bundle.language;
  doc["interval_ms"] = bundle.interval_ms;
  doc["coverage_start_ms"] = bundle.coverage_start_ms;
  doc["coverage_end_ms"] = bundle.coverage_end_ms;
  doc["generator_meta"] = meta_json(bundle.generator_meta);
  doc["explanations"] = ojson::array();
  for (const auto& [key, e] : bundle.explanations) {
    doc["explanations"].push_back({{"key", key},
                                   {"level", e.level},
                                   {"target_sentence_indices", e.target_sentence_indices},
                                   {"text", e.text},
                                   {"usage",
                                    {{"prompt_tokens", e.usage.prompt_tokens},
                                     {"completion_tokens", e.usage.completion_tokens}}}});
  }
  doc["slots"] = ojson::array();
  for (const auto& s : bundle.slots) {
    doc["slots"].push_back({{"slot_index", s.slot_index},
                            {"slot_start_ms", s.slot_start_ms},
                            {"level", s.level},
                            {"target_sentence_indices", s.target_sentence_indices},
                            {"explanation_ref", s.explanation_ref},
                            {"status", s.status == SlotStatus::kGenerated ? "generated" : "unavailable"},
                            {"note", s.note}});
  }
  return doc.dump(2) + "\n";
}

ExplanationBundle parse_bundle_json(std::string_view bytes) {
  using nlohmann::json;
  const auto invalid = [](const std::string& what) { return BundleError(Kind::kInvalidBundle, "bundle: " + what); };
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw invalid(e.what());
  }

  ExplanationBundle bundle;
  try {
    if (doc.value("format", std::string()) != kFormat) throw invalid("unsupported format tag");
    bundle.video_id = doc.at("video_id").get<std::string>();
    bundle.language = doc.at("language").get<std::string>();
    bundle.interval_ms = doc.at("interval_ms").get<Millis>();
    bundle.coverage_start_ms = doc.at("coverage_start_ms").get<Millis>();
    bundle.coverage_end_ms = doc.at("coverage_end_ms").get<Millis>();
    const auto& meta = doc.at("generator_meta");
    bundle.generator_meta.model = meta.at("model").get<std::string>();
    bundle.generator_meta.template_hashes = meta.at("template_hashes").get<std::map<std::string, std::string>>();
    bundle.generator_meta.created_at = meta.at("created_at").get<std::string>();
    for (const auto& node : doc.at("explanations")) {
      Explanation e;
      e.level = node.at("level").get<int>();
      e.target_sentence_indices = node.at("target_sentence_indices").get<std::vector<std::size_t>>();
      e.text = node.at("text").get<std::string>();
      e.usage.prompt_tokens = node.at("usage").at("prompt_tokens").get<std::uint64_t>();
      e.usage.completion_tokens = node.at("usage").at("completion_tokens").get<std::uint64_t>();
      bundle.explanations[node.at("key").get<std::string>()] = std::move(e);
    }
    for (const auto& node : doc.at("slots")) {
      ExplanationSlot s;
      s.slot_index = node.at("slot_index").get<std::size_t>();
      s.slot_start_ms = node.at("slot_start_ms").get<Millis>();
      s.level = node.at("level").get<int>();
      s.target_sentence_indices = node.at("target_sentence_indices").get<std::vector<std::size_t>>();
      s.explanation_ref = node.at("explanation_ref").get<std::string>();
      const auto status = node.at("status").get<std::string>();
      if (status != "generated" && status != "unavailable") throw invalid("bad slot status '" + status + "'");
      s.status = status == "generated" ? SlotStatus::kGenerated : SlotStatus::kUnavailable;
      s.note = node.value("note", std::string());
      bundle.slots.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw invalid(e.what());
  }

  // Structural invariants.
  if (!bundle.slots.empty()) {
    const auto expected = slot_count({bundle.interval_ms, bundle.coverage_start_ms, bundle.coverage_end_ms});
    if (bundle.slots.size() != expected * kLevels) throw invalid("slot count does not match coverage");
  }
  const auto n = bundle.slot_count_per_level();
  for (std::size_t i = 0; i < bundle.slots.size(); ++i) {
    const auto& s = bundle.slots[i];
    const int level = static_cast<int>(i / std::max<std::size_t>(n, 1)) + 1;
    const auto index = i % std::max<std::size_t>(n, 1);
    if (s.level != level || s.slot_index != index ||
        s.slot_start_ms != bundle.coverage_start_ms + static_cast<Millis>(index) * bundle.interval_ms) {
      throw invalid("slot " + std::to_string(i) + " is out of place");
    }
    if (s.status == SlotStatus::kGenerated) {
      const auto it = bundle.explanations.find(s.explanation_ref);
      if (it == bundle.explanations.end() || it->second.text.empty()) {
        throw invalid("slot " + std::to_string(i) + " references a missing explanation");
      }
    }
  }
  return bundle;
}

void save_bundle(const ExplanationBundle& bundle, const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  auto staging = path;
  staging += ".tmp";
  if (!write_file(staging, to_bundle_json(bundle))) {
    throw BundleError(Kind::kIo, "cannot write " + path.string());
  }
  fs::rename(staging, path, ec);
  if (ec) {
    fs::remove(staging, ec);
    throw BundleError(Kind::kIo, "cannot write " + path.string());
  }
}

ExplanationBundle load_bundle(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (!bytes) throw BundleError(Kind::kIo, "cannot read " + path.string());
  return parse_bundle_json(*bytes);
}

ExportManifest export_static(const ExplanationBundle& bundle, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  ExportManifest manifest;
  manifest.manifest = manifest_json(bundle);
  try {
    fs::create_directories(out_dir);
    for (int level = 1; level <= kLevels; ++level) fs::remove_all(out_dir / std::to_string(level));
    if (!write_file(out_dir / "manifest.json", manifest.manifest)) {
      throw BundleError(Kind::kIo, "cannot write " + (out_dir / "manifest.json").string());
    }
    manifest.files.push_back("manifest.json");
    for (const auto& slot : bundle.slots) {
      const auto dir = out_dir / std::to_string(slot.level);
      fs::create_directories(dir);
      const auto name = std::to_string(slot.level) + "/" + std::to_string(slot.slot_index) + ".json";
      if (!write_file(out_dir / name, slot_file_json(bundle, slot))) {
        throw BundleError(Kind::kIo, "cannot write " + (out_dir / name).string());
      }
      manifest.files.push_back(name);
    }
  } catch (const fs::filesystem_error& e) {
    throw BundleError(Kind::kIo, e.what());
  }
  return manifest;
}

}  // namespace huh
