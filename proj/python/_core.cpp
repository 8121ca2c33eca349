#include <sstream>
#include <vector>

#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "huh/bundle.hpp"
#include "huh/cli.hpp"
#include "huh/demo.hpp"
#include "huh/emissions.hpp"
#include "huh/prompt.hpp"
#include "huh/provider.hpp"
#include "huh/segmenter.hpp"
#include "huh/transcript.hpp"

namespace py = pybind11;
using namespace huh;

namespace {

// Adapts a Python callable `fn(prompt, request_tag) -> (text, prompt_tokens,
// completion_tokens)` to the provider interface. Called from worker threads.
class CallableProvider final : public ExplanationProvider {
 public:
  CallableProvider(py::function fn, std::string model) : fn_(std::move(fn)), model_(std::move(model)) {}
  ~CallableProvider() override {
    py::gil_scoped_acquire gil;
    fn_ = py::function();
  }

  ProviderResponse complete(const ProviderRequest& request) override {
    validate(request);
    py::gil_scoped_acquire gil;
    try {
      const auto out = fn_(request.prompt, request.request_tag).cast<py::tuple>();
      if (out.size() != 3) throw ProviderError(ProviderError::Kind::kBackendError, "provider must return a 3-tuple");
      return {out[0].cast<std::string>(), {out[1].cast<std::uint64_t>(), out[2].cast<std::uint64_t>()}, {}};
    } catch (const py::error_already_set& e) {
      throw ProviderError(ProviderError::Kind::kBackendError, e.what());
    } catch (const py::cast_error& e) {
      throw ProviderError(ProviderError::Kind::kBackendError, e.what());
    }
  }
  std::string model_name() const override { return model_; }

 private:
  py::function fn_;
  std::string model_;
};

GenerateConfig make_config(Millis interval_ms, Millis start_ms, Millis end_ms, std::size_t concurrency,
                           const std::string& created_at) {
  GenerateConfig config;
  config.slots = {interval_ms, start_ms, end_ms};
  config.concurrency = concurrency;
  config.created_at = created_at;
  config.sleep = [](std::chrono::milliseconds) {};
  return config;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Transcript processing, explanation bundles and emission estimates.";

  static py::exception<Error> huh_error(m, "HuhError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(huh_error, e.what());
    }
  });

  py::class_<TranscriptCue>(m, "TranscriptCue")
      .def(py::init<>())
      .def(py::init([](std::size_t index, Millis start, Millis end, std::string text) {
             return TranscriptCue{index, start, end, std::move(text)};
           }),
           py::arg("index"), py::arg("start_ms"), py::arg("end_ms"), py::arg("text"))
      .def_readwrite("index", &TranscriptCue::index)
      .def_readwrite("start_ms", &TranscriptCue::start_ms)
      .def_readwrite("end_ms", &TranscriptCue::end_ms)
      .def_readwrite("text", &TranscriptCue::text)
      .def(py::self == py::self)
      .def("__repr__", [](const TranscriptCue& c) {
        std::ostringstream os;
        os << "TranscriptCue(" << c.index << ", " << c.start_ms << ", " << c.end_ms << ", '" << c.text << "')";
        return os.str();
      });

  py::class_<Transcript>(m, "Transcript")
      .def(py::init<>())
      .def_readwrite("video_id", &Transcript::video_id)
      .def_readwrite("language", &Transcript::language)
      .def_readwrite("duration_ms", &Transcript::duration_ms)
      .def_readwrite("cues", &Transcript::cues)
      .def(py::self == py::self)
      .def("to_json", &to_cue_json)
      .def("to_srt", &to_srt)
      .def("to_vtt", &to_vtt);

  using Parser = Transcript (*)(std::string_view, const ParseOptions&);
  const std::pair<const char*, Parser> parsers[] = {
      {"parse_srt", &parse_srt},
      {"parse_vtt", &parse_vtt},
      {"parse_cue_json", &parse_cue_json},
      {"parse_transcript", &parse_transcript},
  };
  for (const auto& [name, fn] : parsers) {
    m.def(
        name,
        [fn = fn](const std::string& bytes, const std::string& video_id, const std::string& language,
                  Millis overlap_tolerance_ms) { return fn(bytes, {video_id, language, overlap_tolerance_ms}); },
        py::arg("bytes"), py::arg("video_id") = "", py::arg("language") = "en", py::arg("overlap_tolerance_ms") = 0);
  }

  m.def(
      "restore_punctuation_rule",
      [](const Transcript& t, Millis gap_ms) { return restore_punctuation(t, RulePunctuation{gap_ms}); },
      py::arg("transcript"), py::arg("gap_ms") = 1200);

  py::class_<Sentence>(m, "Sentence")
      .def_readonly("index", &Sentence::index)
      .def_readonly("text", &Sentence::text)
      .def_readonly("start_ms", &Sentence::start_ms)
      .def_readonly("end_ms", &Sentence::end_ms)
      .def_readonly("char_begin", &Sentence::char_begin)
      .def_readonly("char_end", &Sentence::char_end);

  py::class_<Segmentation>(m, "Segmentation")
      .def_readonly("text", &Segmentation::text)
      .def_readonly("sentences", &Segmentation::sentences)
      .def_readonly("fragment_begin", &Segmentation::fragment_begin);

  py::class_<ContextWindow>(m, "ContextWindow")
      .def_readonly("context_text", &ContextWindow::context_text)
      .def_readonly("target_sentence_indices", &ContextWindow::target_sentence_indices)
      .def_readonly("trigger_ms", &ContextWindow::trigger_ms)
      .def_readonly("level", &ContextWindow::level);

  m.def(
      "segment",
      [](const Transcript& t, std::size_t max_context_chars) {
        SegmenterOptions options;
        options.max_context_chars = max_context_chars;
        return segment(t, options);
      },
      py::arg("transcript"), py::arg("max_context_chars") = 12000);
  m.def(
      "context_window",
      [](const Segmentation& seg, Millis trigger_ms, int level, std::size_t max_context_chars) {
        return context_window(seg.sentences, seg.text, trigger_ms, level, max_context_chars);
      },
      py::arg("segmentation"), py::arg("trigger_ms"), py::arg("level") = 1, py::arg("max_context_chars") = 12000);
  m.def(
      "build_prompt", [](const ContextWindow& w) { return build_prompt(w, TemplateSet{}); }, py::arg("window"));

  m.def(
      "mock_complete",
      [](const std::string& prompt, int level) {
        ProviderRequest request;
        request.prompt = prompt;
        request.kind = level == 2 ? RequestKind::kExplainLevel2 : RequestKind::kExplainLevel1;
        request.request_tag = "python";
        const auto r = MockProvider{}.complete(request);
        return py::make_tuple(r.text, r.usage.prompt_tokens, r.usage.completion_tokens);
      },
      py::arg("prompt"), py::arg("level") = 1,
      "Deterministic offline completion: returns (text, prompt_tokens, completion_tokens).");

  py::class_<LookupResult>(m, "LookupResult")
      .def_readonly("available", &LookupResult::available)
      .def_readonly("explanation_text", &LookupResult::explanation_text)
      .def_readonly("level", &LookupResult::level)
      .def_readonly("slot_start_ms", &LookupResult::slot_start_ms)
      .def_readonly("target_sentence_indices", &LookupResult::target_sentence_indices)
      .def("to_json", &lookup_json);

  py::class_<ExplanationBundle>(m, "Bundle")
      .def_readonly("video_id", &ExplanationBundle::video_id)
      .def_readonly("language", &ExplanationBundle::language)
      .def_readonly("interval_ms", &ExplanationBundle::interval_ms)
      .def_readonly("coverage_start_ms", &ExplanationBundle::coverage_start_ms)
      .def_readonly("coverage_end_ms", &ExplanationBundle::coverage_end_ms)
      .def_property_readonly("slot_count_per_level", &ExplanationBundle::slot_count_per_level)
      .def("lookup", &lookup, py::arg("t_ms"), py::arg("level") = 1)
      .def("to_json", &to_bundle_json)
      .def("manifest_json", &manifest_json)
      .def("save", [](const ExplanationBundle& b, const std::filesystem::path& path) { save_bundle(b, path); })
      .def("export_static",
           [](const ExplanationBundle& b, const std::filesystem::path& dir) { return export_static(b, dir).files; })
      .def_static("from_json", [](const std::string& bytes) { return parse_bundle_json(bytes); })
      .def_static("load", [](const std::filesystem::path& path) { return load_bundle(path); })
      .def(py::self == py::self);

  m.def(
      "generate_bundle",
      [](const Transcript& t, py::object provider, Millis interval_ms, std::optional<Millis> start_ms,
         std::optional<Millis> end_ms, std::size_t concurrency, const std::string& created_at) {
        const auto config =
            make_config(interval_ms, start_ms.value_or(0), end_ms.value_or(t.duration_ms), concurrency, created_at);
        GenerateResult result;
        if (provider.is_none()) {
          MockProvider mock;
          py::gil_scoped_release release;
          result = generate_bundle(t, mock, config);
        } else {
          CallableProvider callable(provider.cast<py::function>(), "python");
          py::gil_scoped_release release;
          result = generate_bundle(t, callable, config);
        }
        py::dict usage;
        usage["prompt_tokens"] = result.ledger.totals().prompt_tokens;
        usage["completion_tokens"] = result.ledger.totals().completion_tokens;
        usage["provider_calls"] = result.provider_calls;
        return py::make_tuple(std::move(result.bundle), usage);
      },
      py::arg("transcript"), py::arg("provider") = py::none(), py::arg("interval_ms") = 5000,
      py::arg("start_ms") = py::none(), py::arg("end_ms") = py::none(), py::arg("concurrency") = 4,
      py::arg("created_at") = "",
      "Returns (bundle, usage). Without a provider the offline mock is used; otherwise `provider(prompt, tag)` "
      "must return (text, prompt_tokens, completion_tokens).");

  m.def(
      "slot_count",
      [](Millis interval_ms, Millis start_ms, Millis end_ms) { return slot_count({interval_ms, start_ms, end_ms}); },
      py::arg("interval_ms"), py::arg("start_ms"), py::arg("end_ms"));

  m.attr("DEFAULT_FACTOR") = kDefaultFactorKgPerToken;
  m.def(
      "estimate_kg",
      [](std::uint64_t prompt_tokens, std::uint64_t completion_tokens, double factor) {
        return estimate({prompt_tokens, completion_tokens}, factor).kg_co2e;
      },
      py::arg("prompt_tokens"), py::arg("completion_tokens"), py::arg("factor") = kDefaultFactorKgPerToken);
  m.def(
      "derive_factor",
      [](const std::vector<std::pair<std::uint64_t, double>>& runs) {
        std::vector<ReferenceRun> reference;
        for (const auto& [tokens, kg] : runs) reference.push_back({{tokens, 0}, kg});
        return derive_factor(reference);
      },
      py::arg("runs"), "Least-squares factor through the origin from (total_tokens, kg) pairs.");
  m.def("format_kg", &format_kg);

  m.def("demo_transcript", &demo::transcript);

  m.def(
      "main",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "huh");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line tool in-process: returns (exit_code, stdout, stderr).");
}
