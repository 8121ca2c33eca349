#include "huh/demo.hpp"

#include <array>
#include <string_view>
#include <vector>

namespace huh::demo {

namespace {

constexpr std::array<std::string_view, 30> kSentences = {
    "today we are going to build a very small language model from scratch",
    "it will not be anything like the large systems you read about in the news",
    "those systems are trained on huge amounts of text and need a lot of engineering",
    "what we can do in one lecture is train a model that predicts the next character",
    "so the unit we work with is a single character rather than a whole word",
    "that keeps the vocabulary tiny and the code easy to follow",
    "for data we will use a plain text file with a few old plays in it",
    "the file is only about one megabyte which is small enough to load into memory",
    "first we read the whole file into one long string",
    "then we collect every distinct character that appears in that string",
    "each character gets an integer id and that mapping is our tokenizer",
    "encoding turns text into a list of integers and decoding turns it back",
    "next we split the data so that ninety percent is used for training",
    "the remaining ten percent is held out to check whether the model generalizes",
    "we never train on the whole file at once because that would be far too slow",
    "instead we sample short chunks of text at random positions",
    "a chunk of length eight actually contains eight separate training examples",
    "the model sees one character and has to guess the second",
    "then it sees two characters and has to guess the third and so on",
    "stacking many chunks together gives us a batch that the hardware can process in parallel",
    "the simplest model we can start with is a bigram model",
    "it looks only at the current character and ignores everything before it",
    "for each character it learns a table of scores for what comes next",
    "we measure how wrong those scores are with the cross entropy loss",
    "at the start the loss is close to what random guessing would give",
    "after a few thousand steps of gradient descent the loss goes down noticeably",
    "if we sample from the trained bigram model the output looks almost like words",
    "it is still mostly nonsense because the model has no memory of the context",
    "fixing that is exactly what attention is for and that is our next topic",
    "before we get there let us take a short break",
};

constexpr std::size_t kWordsPerCue = 7;
constexpr long long kMsPerWord = 380;
constexpr long long kIntraSentenceGapMs = 200;
constexpr long long kSentenceGapMs = 1500;
constexpr long long kLeadInMs = 2000;

std::vector<std::string_view> words_of(std::string_view s) {
  std::vector<std::string_view> words;
  std::size_t begin = 0;
  while (begin < s.size()) {
    auto end = s.find(' ', begin);
    if (end == std::string_view::npos) end = s.size();
    words.push_back(s.substr(begin, end - begin));
    begin = end + 1;
  }
  return words;
}

}  // namespace

std::string transcript_srt() {
  std::string out;
  long long t = kLeadInMs;
  std::size_t cue_number = 1;
  for (std::size_t s = 0; s < kSentences.size(); ++s) {
    const auto words = words_of(kSentences[s]);
    // Spread words evenly over ceil(n / kWordsPerCue) cues.
    const std::size_t cues = (words.size() + kWordsPerCue - 1) / kWordsPerCue;
    std::size_t w = 0;
    for (std::size_t c = 0; c < cues; ++c) {
      const std::size_t take = (words.size() - w) / (cues - c);
      std::string text;
      for (std::size_t i = 0; i < take; ++i) {
        if (!text.empty()) text += ' ';
        text += words[w + i];
      }
      w += take;
      const long long start = t;
      const long long end = start + static_cast<long long>(take) * kMsPerWord;
      out += std::to_string(cue_number++) + "\n" + format_srt_time(start) + " --> " + format_srt_time(end) +
             "\n" + text + "\n\n";
      t = end + (c + 1 == cues ? kSentenceGapMs : kIntraSentenceGapMs);
    }
  }
  return out;
}

Transcript transcript() {
  ParseOptions options;
  options.video_id = kVideoId;
  options.language = "en";
  return parse_srt(transcript_srt(), options);
}

}  // namespace huh::demo
