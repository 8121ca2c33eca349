#include "huh/emissions.hpp"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

namespace huh {

using Kind = EmissionsError::Kind;

void RunLedger::append(LedgerEntry entry) {
  totals_ += entry.usage;
  entries_.push_back(std::move(entry));
}

void RunLedger::merge(const RunLedger& other) {
  for (const auto& entry : other.entries_) append(entry);
}

void LedgerRecorder::commit(std::uint64_t sequence, LedgerEntry entry) {
  std::lock_guard lock(mutex_);
  entries_.insert_or_assign(sequence, std::move(entry));
}

RunLedger LedgerRecorder::snapshot() const {
  std::lock_guard lock(mutex_);
  RunLedger ledger(video_id_);
  for (const auto& [_, entry] : entries_) ledger.append(entry);
  return ledger;
}

std::vector<ReferenceRun> published_reference_runs() {
  return {
      {{390'962, 37'435}, 150.7},
      {{531'619, 63'727}, 209.4},
  };
}

EmissionEstimate estimate(const TokenUsage& usage, double factor_kg_per_token) {
  if (!(factor_kg_per_token > 0.0)) {
    throw EmissionsError(Kind::kNonPositiveFactor, "emission factor must be positive");
  }
  EmissionEstimate e;
  e.factor_kg_per_token = factor_kg_per_token;
  e.total_tokens = usage.total();
  e.kg_co2e = factor_kg_per_token * static_cast<double>(e.total_tokens);
  return e;
}

double derive_factor(const std::vector<ReferenceRun>& reference) {
  double xy = 0.0;
  double xx = 0.0;
  for (const auto& run : reference) {
    const auto x = static_cast<double>(run.usage.total());
    xy += x * run.kg_co2e;
    xx += x * x;
  }
  if (xx == 0.0) {
    throw EmissionsError(Kind::kEmptyReference, "need at least one reference run with tokens");
  }
  return xy / xx;
}

std::string format_kg(double kg) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f kg CO2e", kg);
  return buf;
}

std::string to_emissions_json(const RunLedger& ledger, double factor_kg_per_token,
                              const TokenUsage* no_dedup_totals) {
  const auto e = estimate(ledger.totals(), factor_kg_per_token);
  nlohmann::ordered_json doc;
  doc["video_id"] = ledger.video_id();
  doc["entries"] = nlohmann::ordered_json::array();
  for (const auto& entry : ledger.entries()) {
    doc["entries"].push_back({{"request_tag", entry.request_tag},
                              {"prompt_tokens", entry.usage.prompt_tokens},
                              {"completion_tokens", entry.usage.completion_tokens}});
  }
  doc["totals"] = {{"prompt_tokens", ledger.totals().prompt_tokens},
                   {"completion_tokens", ledger.totals().completion_tokens}};
  doc["factor_kg_per_token"] = factor_kg_per_token;
  doc["kg_co2e"] = e.kg_co2e;
  if (no_dedup_totals != nullptr) {
    doc["no_dedup_totals"] = {{"prompt_tokens", no_dedup_totals->prompt_tokens},
                              {"completion_tokens", no_dedup_totals->completion_tokens}};
    doc["no_dedup_kg_co2e"] = estimate(*no_dedup_totals, factor_kg_per_token).kg_co2e;
  }
  return doc.dump(2) + "\n";
}

LoadedLedger parse_emissions_json(std::string_view bytes) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw EmissionsError(Kind::kInvalidLedger, e.what());
  }
  const auto usage_of = [](const json& node, const std::string& where) {
    if (!node.is_object() || !node.value("prompt_tokens", json()).is_number_unsigned() ||
        !node.value("completion_tokens", json()).is_number_unsigned()) {
      throw EmissionsError(Kind::kInvalidLedger, where + " needs prompt_tokens and completion_tokens");
    }
    return TokenUsage{node["prompt_tokens"].get<std::uint64_t>(), node["completion_tokens"].get<std::uint64_t>()};
  };
  if (!doc.is_object()) throw EmissionsError(Kind::kInvalidLedger, "ledger must be a JSON object");

  LoadedLedger loaded;
  loaded.ledger = RunLedger(doc.value("video_id", std::string()));
  if (doc.contains("factor_kg_per_token")) {
    if (!doc["factor_kg_per_token"].is_number()) {
      throw EmissionsError(Kind::kInvalidLedger, "factor_kg_per_token must be a number");
    }
    loaded.factor_kg_per_token = doc["factor_kg_per_token"].get<double>();
  }
  const auto entries = doc.value("entries", json::array());
  if (!entries.is_array()) throw EmissionsError(Kind::kInvalidLedger, "entries must be an array");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto where = "entries[" + std::to_string(i) + "]";
    loaded.ledger.append({entries[i].value("request_tag", std::string()), usage_of(entries[i], where)});
  }
  if (doc.contains("totals")) {
    const auto totals = usage_of(doc["totals"], "totals");
    if (entries.empty()) {
      loaded.ledger.append({"totals", totals});
    } else if (!(totals == loaded.ledger.totals())) {
      throw EmissionsError(Kind::kInvalidLedger, "totals do not equal the sum of entries");
    }
  }
  return loaded;
}

}  // namespace huh
