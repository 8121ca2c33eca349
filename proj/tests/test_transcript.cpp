#include <random>

#include <gtest/gtest.h>

#include "huh/transcript.hpp"
#include "support.hpp"

namespace huh {
namespace {

using Kind = TranscriptError::Kind;

template <typename F>
Kind error_kind(F&& f) {
  try {
    f();
  } catch (const TranscriptError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no TranscriptError thrown";
  return Kind::kEmptyFile;
}

Transcript make(std::string id, std::string lang, std::vector<TranscriptCue> cues) {
  Transcript t{std::move(id), std::move(lang), 0, std::move(cues)};
  for (std::size_t i = 0; i < t.cues.size(); ++i) t.cues[i].index = i;
  t.duration_ms = t.cues.empty() ? 0 : t.cues.back().end_ms;
  return t;
}

TEST(ParseSrt, MinimalFile) {
  const auto t = parse_srt("1\n00:00:00,000 --> 00:00:02,500\nHello world.\n", {"v", "en", 0});
  ASSERT_EQ(t.cues.size(), 1u);
  EXPECT_EQ(t.cues[0], (TranscriptCue{0, 0, 2500, "Hello world."}));
  EXPECT_EQ(t.duration_ms, 2500);
}

TEST(ParseSrt, ReversedTimesAreNonMonotonic) {
  EXPECT_EQ(error_kind([] { parse_srt("1\n00:00:05,000 --> 00:00:04,000\nA.\n\n2\n00:00:06,000 --> 00:00:07,000\nB.\n"); }),
            Kind::kNonMonotonicCues);
  EXPECT_EQ(error_kind([] { parse_srt("1\n00:00:05,000 --> 00:00:06,000\nA.\n\n2\n00:00:04,000 --> 00:00:04,500\nB.\n"); }),
            Kind::kNonMonotonicCues);
}

TEST(ParseSrt, ThreeCueFixtureWithTwoLineBody) {
  const auto t = parse_srt(test::read_fixture("three_cues.srt"), {"lecture-1", "en", 0});
  const auto expected = make("lecture-1", "en",
                             {{0, 1000, 3200, "welcome back everyone"},
                              {0, 3400, 6750, "today we look at attention heads"},
                              {0, 7000, 9000, "and why they help"}});
  EXPECT_EQ(t, expected);
}

TEST(ParseSrt, MalformedTimestamp) {
  EXPECT_EQ(error_kind([] { parse_srt("1\n00:00:0,000 --> 00:00:02,500\nHi.\n"); }), Kind::kMalformedTimestamp);
  EXPECT_EQ(error_kind([] { parse_srt("1\n00:00:00,000 --> 00:61:02,500\nHi.\n"); }), Kind::kMalformedTimestamp);
}

TEST(ParseSrt, EmptyInput) {
  EXPECT_EQ(error_kind([] { parse_srt(""); }), Kind::kEmptyFile);
  EXPECT_EQ(error_kind([] { parse_srt("\n\n  \n"); }), Kind::kEmptyFile);
  EXPECT_EQ(error_kind([] { parse_srt("1\n00:00:00,000 --> 00:00:01,000\n<i> </i>\n"); }), Kind::kEmptyFile);
}

TEST(ParseSrt, RejectsInvalidUtf8) {
  EXPECT_EQ(error_kind([] { parse_srt("1\n00:00:00,000 --> 00:00:01,000\nbad \xff byte\n"); }),
            Kind::kInvalidEncoding);
}

TEST(ParseSrt, OverlapRepairClipsAtMidpoint) {
  const auto t = parse_srt(test::read_fixture("overlap.srt"), {"o", "en", 0});
  const auto expected = make("o", "en",
                             {{0, 0, 2500, "first cue runs long"},
                              {0, 2500, 5000, "second cue starts early"},
                              {0, 5000, 6000, "third cue is clean"}});
  EXPECT_EQ(t, expected);
}

TEST(ParseSrt, OverlapWithinToleranceIsKept) {
  const auto t = parse_srt(test::read_fixture("overlap.srt"), {"o", "en", 1000});
  EXPECT_EQ(t.cues[0].end_ms, 3000);
  EXPECT_EQ(t.cues[1].start_ms, 2000);
}

TEST(ParseSrt, NestedCueClipDoesNotPassNextStart) {
  const auto t = parse_srt(
      "1\n00:00:00,000 --> 00:00:02,492\nouter\n\n2\n00:00:00,591 --> 00:00:01,661\ninner\n\n"
      "3\n00:00:01,520 --> 00:00:03,513\nnext\n",
      {"n", "en", 0});
  const auto expected = make("n", "en", {{0, 0, 1520, "outer"}, {0, 1520, 1590, "inner"}, {0, 1590, 3513, "next"}});
  EXPECT_EQ(t, expected);
}

TEST(ParseVtt, TagStripping) {
  const auto t = parse_vtt("WEBVTT\n\n00:10.000 --> 00:12.000\n<v Speaker>Hi.", {"v", "en", 0});
  ASSERT_EQ(t.cues.size(), 1u);
  EXPECT_EQ(t.cues[0], (TranscriptCue{0, 10000, 12000, "Hi."}));
}

TEST(ParseVtt, MissingHeader) {
  EXPECT_EQ(error_kind([] { parse_vtt("00:10.000 --> 00:12.000\nHi.\n"); }), Kind::kMissingHeader);
  EXPECT_EQ(error_kind([] { parse_vtt("WEBVTTX\n\n00:10.000 --> 00:12.000\nHi.\n"); }), Kind::kMissingHeader);
}

TEST(ParseVtt, CueSettingsAreIgnored) {
  const auto t = parse_vtt(test::read_fixture("settings.vtt"), {"vtt", "en", 0});
  const auto expected = make("vtt", "en",
                             {{0, 500, 2000, "So far we have a bigram model."},
                              {0, 2250, 4000, "It only sees one character & nothing else."},
                              {0, 4100, 6000, "That is its main weakness."}});
  EXPECT_EQ(t, expected);
}

TEST(ParseCueJson, SingleCue) {
  const auto t = parse_cue_json(R"({"video_id":"v1","language":"en","cues":[{"start_ms":0,"end_ms":1000,"text":"A."}]})");
  EXPECT_EQ(t, make("v1", "en", {{0, 0, 1000, "A."}}));
}

TEST(ParseCueJson, SchemaViolations) {
  EXPECT_EQ(error_kind([] { parse_cue_json(R"({"video_id":"v","language":"en","cues":[{"start_ms":5,"end_ms":5,"text":"A."}]})"); }),
            Kind::kSchemaViolation);
  EXPECT_EQ(error_kind([] { parse_cue_json(R"({"video_id":"v","language":"en","cues":[{"start_ms":-1,"end_ms":5,"text":"A."}]})"); }),
            Kind::kSchemaViolation);
  EXPECT_EQ(error_kind([] { parse_cue_json(R"({"language":"en","cues":[]})"); }), Kind::kSchemaViolation);
  EXPECT_EQ(error_kind([] { parse_cue_json(R"({"video_id":"v","language":"en","cues":[{"start_ms":0.5,"end_ms":5,"text":"A."}]})"); }),
            Kind::kSchemaViolation);
  EXPECT_EQ(error_kind([] { parse_cue_json("[1,2"); }), Kind::kSchemaViolation);
}

TEST(ParseCueJson, DurationOverride) {
  const auto t = parse_cue_json(
      R"({"video_id":"v","language":"de","duration_ms":90000,"cues":[{"start_ms":0,"end_ms":1000,"text":"A."}]})");
  EXPECT_EQ(t.duration_ms, 90000);
  EXPECT_EQ(error_kind([] {
              parse_cue_json(
                  R"({"video_id":"v","language":"de","duration_ms":10,"cues":[{"start_ms":0,"end_ms":1000,"text":"A."}]})");
            }),
            Kind::kSchemaViolation);
}

TEST(ParseCueJson, RoundTripFromSrt) {
  const auto srt = parse_srt(test::read_fixture("three_cues.srt"), {"rt", "en", 0});
  EXPECT_EQ(parse_cue_json(to_cue_json(srt)), srt);
}

TEST(Normalize, ZeroWidthAndWhitespace) {
  auto t = make("n", "en", {{0, 0, 1000, "a\u200b  b"}, {0, 1000, 2000, "  "}, {0, 2000, 3000, "c"}});
  const auto n = normalize(t);
  ASSERT_EQ(n.cues.size(), 2u);
  EXPECT_EQ(n.cues[0].text, "a b");
  EXPECT_EQ(n.cues[1], (TranscriptCue{1, 2000, 3000, "c"}));
}

TEST(Normalize, GermanUmlautsPreserved) {
  const auto t = parse_srt(test::read_fixture("german.srt"), {"de1", "de", 0});
  const auto expected = make("de1", "de",
                             {{0, 0, 2000, "Die Gr\xc3\xb6\xc3\x9f" "e der \xc3\x9c" "bungsmenge"},
                              {0, 2100, 4500, "ist f\xc3\xbcr das Modell entscheidend."},
                              {0, 5000, 7000, "\xc3\x84u\xc3\x9f" "erst wichtig, oder?"}});
  EXPECT_EQ(t, expected);
}

TEST(SniffFormat, PicksParserFromContent) {
  EXPECT_EQ(sniff_format("WEBVTT\n\n"), TranscriptFormat::kVtt);
  EXPECT_EQ(sniff_format("\xef\xbb\xbfWEBVTT\n"), TranscriptFormat::kVtt);
  EXPECT_EQ(sniff_format("  {\"cues\":[]}"), TranscriptFormat::kCueJson);
  EXPECT_EQ(sniff_format("1\n00:00:00,000 --> 00:00:01,000\nx\n"), TranscriptFormat::kSrt);
}

TEST(Timestamps, Format) {
  EXPECT_EQ(format_srt_time(3'723'004), "01:02:03,004");
  EXPECT_EQ(format_vtt_time(3'723'004), "01:02:03.004");
  EXPECT_EQ(format_srt_time(0), "00:00:00,000");
}

bool well_formed(const Transcript& t, Millis tolerance) {
  for (std::size_t i = 0; i < t.cues.size(); ++i) {
    const auto& c = t.cues[i];
    if (c.index != i || c.text.empty() || c.start_ms >= c.end_ms) return false;
    if (i > 0) {
      const auto& p = t.cues[i - 1];
      if (p.start_ms > c.start_ms || p.end_ms - c.start_ms > tolerance) return false;
    }
  }
  return true;
}

TEST(TranscriptProperty, CueJsonRoundTripIsIdentity) {
  std::mt19937_64 rng(20240611);
  for (int i = 0; i < 200; ++i) {
    const auto t = test::random_transcript(rng, "p" + std::to_string(i));
    const auto back = parse_cue_json(to_cue_json(t));
    ASSERT_EQ(back, t) << to_cue_json(t);
    ASSERT_EQ(to_cue_json(back), to_cue_json(t));
  }
}

TEST(TranscriptProperty, SrtAndVttEncodingsAgree) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const auto t = test::random_transcript(rng, "eq");
    const ParseOptions options{t.video_id, t.language, 0};
    const auto from_srt = parse_srt(to_srt(t), options);
    const auto from_vtt = parse_vtt(to_vtt(t), options);
    ASSERT_EQ(from_srt, t) << to_srt(t);
    ASSERT_EQ(from_vtt, t) << to_vtt(t);
  }
}

// Random overlapping, unsorted-text inputs: whatever parses must be well formed.
TEST(TranscriptProperty, ParserOutputIsWellFormed) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<Millis> start_jitter(-400, 1500);
  std::uniform_int_distribution<Millis> length(1, 4000);
  std::uniform_int_distribution<Millis> tolerance(0, 500);
  std::uniform_int_distribution<int> blank(0, 6);
  int parsed = 0;
  for (int i = 0; i < 300; ++i) {
    auto t = test::random_transcript(rng, "wf");
    Millis clock = 0;
    for (auto& c : t.cues) {
      c.start_ms = std::max<Millis>(0, clock + start_jitter(rng));
      c.end_ms = c.start_ms + length(rng);
      clock = c.start_ms + 500;
      if (blank(rng) == 0) c.text = " \u200b ";
    }
    const Millis tol = tolerance(rng);
    try {
      const auto out = parse_srt(to_srt(t), {"wf", "en", tol});
      ++parsed;
      ASSERT_TRUE(well_formed(out, tol)) << to_srt(t);
    } catch (const TranscriptError& e) {
      ASSERT_TRUE(e.kind() == Kind::kNonMonotonicCues || e.kind() == Kind::kEmptyFile) << e.what();
    }
  }
  EXPECT_GT(parsed, 50);
}

}  // namespace
}  // namespace huh
