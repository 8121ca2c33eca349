#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "huh/error.hpp"
#include "huh/provider.hpp"

namespace huh {

class EmissionsError : public Error {
 public:
  enum class Kind { kNonPositiveFactor, kEmptyReference, kInvalidLedger, kIo };
  EmissionsError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct LedgerEntry {
  std::string request_tag;
  TokenUsage usage;

  bool operator==(const LedgerEntry&) const = default;
};

// Token usage of one generation run. `totals` is kept equal to the sum of
// the entries by every mutator.
class RunLedger {
 public:
  RunLedger() = default;
  explicit RunLedger(std::string video_id) : video_id_(std::move(video_id)) {}

  void append(LedgerEntry entry);
  void merge(const RunLedger& other);

  const std::string& video_id() const { return video_id_; }
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  const TokenUsage& totals() const { return totals_; }

  bool operator==(const RunLedger&) const = default;

 private:
  std::string video_id_;
  std::vector<LedgerEntry> entries_;
  TokenUsage totals_;
};

// Thread-safe collector. Entries are committed under a sequence number and
// the snapshot lists them in sequence order, so concurrent producers still
// yield a deterministic ledger.
class LedgerRecorder {
 public:
  explicit LedgerRecorder(std::string video_id) : video_id_(std::move(video_id)) {}

  void commit(std::uint64_t sequence, LedgerEntry entry);
  RunLedger snapshot() const;

 private:
  std::string video_id_;
  mutable std::mutex mutex_;
  std::map<std::uint64_t, LedgerEntry> entries_;
};

struct EmissionEstimate {
  double kg_co2e = 0.0;
  double factor_kg_per_token = 0.0;
  std::uint64_t total_tokens = 0;
};

struct ReferenceRun {
  TokenUsage usage;
  double kg_co2e = 0.0;
};

// The two published GPT-4 generation runs: an English lecture
// (390,962 + 37,435 tokens, 150.7 kg) and a German one (531,619 + 63,727
// tokens, 209.4 kg).
std::vector<ReferenceRun> published_reference_runs();

// Least-squares fit through the origin over the published runs.
inline constexpr double kDefaultFactorKgPerToken = 3.517447050978295e-4;

EmissionEstimate estimate(const TokenUsage& usage, double factor_kg_per_token = kDefaultFactorKgPerToken);

// Single-factor least-squares fit through the origin: sum(x*y) / sum(x*x)
// with x the total tokens of each run.
double derive_factor(const std::vector<ReferenceRun>& reference);

// "150.7 kg CO2e"
std::string format_kg(double kg);

// emissions.json. `no_dedup_totals`, when given, records what the run would
// have used without explanation sharing.
std::string to_emissions_json(const RunLedger& ledger, double factor_kg_per_token,
                              const TokenUsage* no_dedup_totals = nullptr);

struct LoadedLedger {
  RunLedger ledger;
  double factor_kg_per_token = kDefaultFactorKgPerToken;
};

// Accepts the emissions.json form. A file with totals but no entries is
// read as a single entry carrying the totals.
LoadedLedger parse_emissions_json(std::string_view bytes);

}  // namespace huh
