#pragma once

#include <string>

#include "huh/transcript.hpp"

namespace huh::demo {

inline constexpr const char* kVideoId = "demo-lecture";

// A four-minute auto-caption style lecture: lower case, no punctuation,
// sentences separated by 1.5 s pauses and split into short cues.
std::string transcript_srt();
Transcript transcript();

}  // namespace huh::demo
