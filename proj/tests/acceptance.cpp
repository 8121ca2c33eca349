// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "huh/bundle.hpp"
#include "huh/demo.hpp"
#include "huh/emissions.hpp"
#include "huh/prompt.hpp"
#include "huh/segmenter.hpp"
#include "huh/server.hpp"
#include "huh/transcript.hpp"
#include "support.hpp"

namespace {

using namespace huh;
using Clock = std::chrono::steady_clock;

constexpr double kEnglishToleranceKg = 0.2;
constexpr double kGermanToleranceKg = 0.3;
constexpr double kConsistencyTolerance = 0.0002;
constexpr double kEndToEndBudgetS = 30.0;
constexpr int kHttpLookups = 1000;
constexpr int kPropertyTranscripts = 200;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto started = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  const double ms = std::chrono::duration<double, std::milli>(Clock::now() - started).count();
  if (!o.pass) ++failures;
  std::printf("%s  %-28s %s (%.0f ms)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.str().c_str(), ms);
  std::fflush(stdout);
}

void emissions_reproduction(Outcome& o) {
  const double factor = derive_factor(published_reference_runs());
  const double en = estimate({390962, 37435}, factor).kg_co2e;
  const double de = estimate({531619, 63727}, factor).kg_co2e;
  o.detail << "factor=" << factor << " en=" << en << " de=" << de;
  o.require(std::abs(en - 150.7) <= kEnglishToleranceKg, "English run within 0.2 kg of 150.7");
  o.require(std::abs(de - 209.4) <= kGermanToleranceKg, "German run within 0.3 kg of 209.4");
  o.require(factor == kDefaultFactorKgPerToken, "default factor equals the fit");
}

void single_factor_consistency(Outcome& o) {
  const double a = 150.7 / 428397.0;
  const double b = 209.4 / 595346.0;
  const double rel = std::abs(a - b) / std::min(a, b);
  o.detail << "rel_diff=" << rel * 100 << "%";
  o.require(rel < kConsistencyTolerance, "ratios agree to <0.02%");
}

void slot_arithmetic(Outcome& o) {
  const auto lecture = test::sentence_transcript(100, 9000, 1000, "long");
  const auto en = plan_slots(lecture, {5000, 10000, 825000});
  const auto de = plan_slots(lecture, {5000, 30000, 965000});
  const auto per_level = [](const std::vector<PlannedSlot>& plan, int level) {
    std::size_t n = 0;
    for (const auto& p : plan) n += p.level == level;
    return n;
  };
  o.detail << "10000-825000: " << per_level(en, 1) << "/" << per_level(en, 2) << ", 30000-965000: " << per_level(de, 1)
           << "/" << per_level(de, 2);
  o.require(per_level(en, 1) == 164 && per_level(en, 2) == 164, "164 slots per level");
  o.require(per_level(de, 1) == 188 && per_level(de, 2) == 188, "188 slots per level");
  o.require(slot_count({5000, 10000, 825000}) == 164 && slot_count({5000, 30000, 965000}) == 188, "slot_count");
}

void end_to_end(Outcome& o) {
  const auto started = Clock::now();
  const auto raw = demo::transcript();
  const auto punctuated = restore_punctuation(raw, RulePunctuation{});
  const auto seg = segment(punctuated);
  o.require(seg.sentences.size() >= 20, ">= 20 sentences");
  o.require(punctuated.duration_ms >= 180000, ">= 3 min");

  MockProvider mock;
  test::CountingProvider counting(mock);
  GenerateConfig config;
  config.slots = {5000, 0, punctuated.duration_ms};
  config.created_at = "1970-01-01T00:00:00Z";
  const auto result = generate_bundle(punctuated, counting, config);
  const std::size_t generation_calls = counting.calls();
  counting.forbid();

  test::TempDir dir("acceptance");
  save_bundle(result.bundle, dir.path() / "bundles" / punctuated.video_id / "bundle.json");
  const auto exported = export_static(result.bundle, dir.path() / "static" / punctuated.video_id);

  auto store = std::make_shared<BundleStore>(dir.path() / "bundles");
  store->refresh(true);
  ExplanationServer server(store, ServerOptions{});
  const int port = server.bind("127.0.0.1", 0);
  server.start();

  std::mt19937_64 rng(20240229);
  std::uniform_int_distribution<Millis> when(-5000, punctuated.duration_ms + 5000);
  int mismatches = 0;
  int available = 0;
  for (int i = 0; i < kHttpLookups; ++i) {
    const Millis t = when(rng);
    const int level = 1 + static_cast<int>(rng() % 2);
    const auto res = test::http_get(port, "/videos/" + punctuated.video_id +
                                              "/explanations?t_ms=" + std::to_string(t) + "&level=" + std::to_string(level));
    const auto expected = test::brute_force_lookup(result.bundle, t, level);
    if (res.status != 200 || res.body != lookup_json(expected)) ++mismatches;
    available += expected.available;
  }
  server.stop();
  const double seconds = std::chrono::duration<double>(Clock::now() - started).count();

  o.detail << seg.sentences.size() << " sentences, " << punctuated.duration_ms / 1000 << " s, "
           << generation_calls << " generation calls, " << exported.files.size() << " static files, "
           << kHttpLookups << " lookups (" << available << " available), " << mismatches << " mismatches, "
           << counting.calls_after_forbid() << " calls after generation, " << seconds << " s";
  o.require(mismatches == 0, "HTTP lookups equal the oracle");
  o.require(available > 0 && available < kHttpLookups, "sample covers both availability states");
  o.require(counting.calls_after_forbid() == 0, "no provider calls after generation");
  o.require(seconds < kEndToEndBudgetS, "runtime under 30 s");
}

void prompt_golden(Outcome& o) {
  const std::string quoted =
      "Use a third person singular perspective, referring to the speaker. Take the last sentence of this text which "
      "ends with a full stop, and explain it in your own words: [...]";
  const auto prefix = quoted.substr(0, quoted.find("[...]"));
  const ContextWindow window{"X. Y.", {1}, 5000, 1};
  const auto prompt = build_prompt(window, TemplateSet{});
  o.require(prompt == prefix + "X. Y.", "rendered prompt equals the quote with context substituted");
  const auto text = default_template_text(TemplateKind::kLevel1);
  o.require(text == prefix + "{context}", "template text");
  o.detail << prefix.size() << " bytes before the placeholder";
}

void parser_suite(Outcome& o) {
  int cases = 0;
  const auto check = [&](bool ok, const std::string& what) {
    ++cases;
    o.require(ok, what);
  };

  const auto three = parse_srt(test::read_fixture("three_cues.srt"), {"f", "en", 0});
  check(three.cues.size() == 3 && three.cues[1].text == "today we look at attention heads" &&
            three.cues[2].text == "and why they help",
        "SRT two-line body");
  check(parse_srt("1\n00:00:00,000 --> 00:00:02,500\nHello world.\n").cues[0] ==
            TranscriptCue{0, 0, 2500, "Hello world."},
        "SRT minimal");
  const auto vtt = parse_vtt(test::read_fixture("settings.vtt"), {"f", "en", 0});
  check(vtt.cues.size() == 3 && vtt.cues[0].text == "So far we have a bigram model." && vtt.cues[1].start_ms == 2250,
        "VTT cue settings");
  check(parse_vtt("WEBVTT\n\n00:10.000 --> 00:12.000\n<v Speaker>Hi.").cues[0] == TranscriptCue{0, 10000, 12000, "Hi."},
        "VTT tags");
  const auto json =
      parse_cue_json(R"({"video_id":"v1","language":"en","cues":[{"start_ms":0,"end_ms":1000,"text":"A."}]})");
  check(json.cues.size() == 1 && json.video_id == "v1", "CueFile");
  const auto overlap = parse_srt(test::read_fixture("overlap.srt"), {"f", "en", 0});
  check(overlap.cues[0].end_ms == 2500 && overlap.cues[1].start_ms == 2500, "overlap repair");
  const auto abbr = segment(parse_srt(test::read_fixture("abbreviations.srt"), {"f", "en", 0}));
  check(abbr.sentences.size() == 3 && abbr.sentences[0].text == "Dr. Smith arrived.", "abbreviation guard");
  const auto german = parse_srt(test::read_fixture("german.srt"), {"f", "de", 0});
  check(german.cues[0].text == "Die Gr\xc3\xb6\xc3\x9f" "e der \xc3\x9c" "bungsmenge", "umlauts");
  bool rejected = false;
  try {
    parse_srt("1\n00:00:05,000 --> 00:00:04,000\nA.\n");
  } catch (const TranscriptError& e) {
    rejected = e.kind() == TranscriptError::Kind::kNonMonotonicCues;
  }
  check(rejected, "non-monotonic rejected");

  std::mt19937_64 rng(1);
  int identical = 0;
  for (int i = 0; i < kPropertyTranscripts; ++i) {
    const auto t = test::random_transcript(rng, "p" + std::to_string(i));
    const ParseOptions options{t.video_id, t.language, 0};
    const bool ok = parse_cue_json(to_cue_json(t)) == t && parse_srt(to_srt(t), options) == t &&
                    parse_vtt(to_vtt(t), options) == t;
    identical += ok;
  }
  check(identical == kPropertyTranscripts, "round trip identity");
  o.detail << cases - 1 << " fixture cases, " << identical << "/" << kPropertyTranscripts
           << " generated transcripts round-trip";
}

void dedup_economy(Outcome& o) {
  // Sentences of 8 s with 5 s slots: consecutive slots share targets.
  const auto t = test::sentence_transcript(10, 8000, 2000, "dedup");
  MockProvider mock;
  test::CountingProvider counting(mock);
  GenerateConfig config;
  config.slots = {5000, 0, t.duration_ms};
  const auto result = generate_bundle(t, counting, config);
  std::set<std::string> distinct;
  std::size_t slots_with_target = 0;
  for (const auto& s : result.bundle.slots) {
    if (s.target_sentence_indices.empty()) continue;
    ++slots_with_target;
    distinct.insert(explanation_key(s.level, s.target_sentence_indices));
  }
  o.detail << counting.calls() << " calls, " << distinct.size() << " distinct (target, level), "
           << result.bundle.slots.size() << " slots (" << slots_with_target << " with a target)";
  o.require(counting.calls() == distinct.size(), "calls equal distinct pairs");
  o.require(counting.calls() < result.bundle.slots.size(), "calls below slot count");
}

}  // namespace

int main() {
  criterion("emissions-reproduction", emissions_reproduction);
  criterion("single-factor-consistency", single_factor_consistency);
  criterion("slot-arithmetic", slot_arithmetic);
  criterion("end-to-end-mock-run", end_to_end);
  criterion("prompt-golden", prompt_golden);
  criterion("parser-suite", parser_suite);
  criterion("dedup-economy", dedup_economy);
  std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
