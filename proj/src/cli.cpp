#include "huh/cli.hpp"

#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fileio.hpp"
#include "huh/bundle.hpp"
#include "huh/demo.hpp"
#include "huh/emissions.hpp"
#include "huh/server.hpp"

namespace huh {

namespace {

namespace fs = std::filesystem;

class OperationalError : public Error {
 public:
  using Error::Error;
};

std::string env_name(const std::string& key) {
  std::string name = "HUH_";
  for (char c : key) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return name;
}

template <typename T>
T from_text(const std::string& text, const std::string& key) {
  if constexpr (std::is_same_v<T, std::string>) {
    return text;
  } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
    std::vector<std::string> items;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
      if (!item.empty()) items.push_back(item);
    }
    return items;
  } else {
    std::istringstream in(text);
    T value{};
    if (!(in >> value) || !in.eof()) {
      throw OperationalError("cannot read " + env_name(key) + "='" + text + "'");
    }
    return value;
  }
}

// flag > HUH_<KEY> > config file > default
class Resolver {
 public:
  void load(const std::string& path) {
    if (path.empty()) return;
    const auto bytes = read_file(path);
    if (!bytes) throw OperationalError("cannot read config file " + path);
    try {
      config_ = nlohmann::json::parse(*bytes);
    } catch (const nlohmann::json::parse_error& e) {
      throw OperationalError("config file " + path + ": " + e.what());
    }
    if (!config_.is_object()) throw OperationalError("config file must hold a JSON object");
  }

  template <typename T>
  T get(const std::string& key, const CLI::Option* flag, const T& flag_value, const T& fallback) const {
    if (flag != nullptr && flag->count() > 0) return flag_value;
    if (const char* env = std::getenv(env_name(key).c_str()); env != nullptr && *env != '\0') {
      return from_text<T>(env, key);
    }
    if (config_.contains(key)) {
      try {
        return config_[key].get<T>();
      } catch (const nlohmann::json::exception&) {
        throw OperationalError("config key '" + key + "' has the wrong type");
      }
    }
    return fallback;
  }

 private:
  nlohmann::json config_ = nlohmann::json::object();
};

std::string read_input(const std::string& path) {
  const auto bytes = read_file(path);
  if (!bytes) throw OperationalError("cannot read " + path);
  return *bytes;
}

void emit(std::ostream& out, const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    out << text;
  } else if (!write_file(path, text)) {
    throw OperationalError("cannot write " + path);
  }
}

std::unique_ptr<ExplanationProvider> make_provider(const std::string& name) {
  if (name == "mock") return std::make_unique<MockProvider>();
  if (name == "remote") return std::make_unique<RemoteProvider>(RemoteProviderConfig::from_env());
  throw OperationalError("unknown provider '" + name + "' (expected mock or remote)");
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Options shared by every subcommand that reads a transcript.
struct InputFlags {
  std::string file;
  std::string video_id;
  std::string language;
  Millis overlap_tolerance_ms = 0;
  CLI::Option* language_opt = nullptr;
  CLI::Option* overlap_opt = nullptr;

  void add_to(CLI::App* cmd) {
    cmd->add_option("file", file, "Transcript file (.srt, .vtt or CueFile .json)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--video-id", video_id, "Video id for SRT/WebVTT input (default: file stem)");
    language_opt = cmd->add_option("--language", language, "Language tag for SRT/WebVTT input (default: en)");
    overlap_opt = cmd->add_option("--overlap-tolerance-ms", overlap_tolerance_ms,
                                  "Cue overlap accepted before clipping (default: 0)");
  }

  Transcript load(const Resolver& settings) const {
    ParseOptions options;
    options.video_id = video_id.empty() ? fs::path(file).stem().string() : video_id;
    options.language = settings.get<std::string>("language", language_opt, language, "en");
    options.overlap_tolerance_ms = settings.get<Millis>("overlap_tolerance_ms", overlap_opt, overlap_tolerance_ms, 0);
    return parse_transcript(read_input(file), options);
  }
};

struct SegmenterFlags {
  Millis gap_ms = 1200;
  std::size_t max_context_chars = 12000;
  std::vector<std::string> abbreviations;
  CLI::Option* gap_opt = nullptr;
  CLI::Option* max_context_opt = nullptr;
  CLI::Option* abbreviations_opt = nullptr;

  void add_to(CLI::App* cmd) {
    gap_opt = cmd->add_option("--gap-ms", gap_ms, "Pause that ends a sentence in rule punctuation (default: 1200)");
    max_context_opt = cmd->add_option("--max-context-chars", max_context_chars,
                                      "Context cap in characters (default: 12000)");
    abbreviations_opt = cmd->add_option("--abbreviations", abbreviations, "Abbreviations that never end a sentence")
                            ->delimiter(',');
  }

  SegmenterOptions resolve(const Resolver& settings) const {
    SegmenterOptions options;
    options.gap_ms = settings.get<Millis>("gap_ms", gap_opt, gap_ms, options.gap_ms);
    options.max_context_chars =
        settings.get<std::size_t>("max_context_chars", max_context_opt, max_context_chars, options.max_context_chars);
    options.abbreviations =
        settings.get<std::vector<std::string>>("abbreviations", abbreviations_opt, abbreviations, options.abbreviations);
    return options;
  }
};

TemplateSet resolve_templates(const Resolver& settings, const CLI::Option* opt, const std::string& value) {
  const auto dir = settings.get<std::string>("templates", opt, value, "");
  return dir.empty() ? TemplateSet{} : load_templates(dir);
}

Transcript punctuate(const Transcript& transcript, const std::string& strategy, const std::string& provider_name,
                     Millis gap_ms, const TemplateSet& templates, RunLedger* ledger) {
  if (strategy == "none") return transcript;
  if (strategy == "rule") return restore_punctuation(transcript, RulePunctuation{gap_ms});
  if (strategy != "provider") throw OperationalError("unknown punctuation strategy '" + strategy + "'");
  auto provider = make_provider(provider_name);
  ProviderPunctuation p;
  p.provider = provider.get();
  p.templates = &templates;
  if (ledger != nullptr) {
    p.on_usage = [ledger](const std::string& tag, const TokenUsage& usage) { ledger->append({tag, usage}); };
  }
  return restore_punctuation(transcript, p);
}

std::string sentences_table(const Segmentation& seg, bool as_json) {
  if (as_json) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& s : seg.sentences) {
      doc.push_back({{"index", s.index},
                     {"start_ms", s.start_ms},
                     {"end_ms", s.end_ms},
                     {"char_span", {s.char_begin, s.char_end}},
                     {"text", s.text}});
    }
    return doc.dump(2) + "\n";
  }
  std::string out;
  for (const auto& s : seg.sentences) {
    out += std::to_string(s.index) + "\t" + std::to_string(s.start_ms) + "\t" + std::to_string(s.end_ms) + "\t" +
           s.text + "\n";
  }
  return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pre-generated, cached two-level explanations for lecture videos", "huh"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file with default settings");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse and normalize a transcript into CueFile JSON");
  InputFlags ingest_in;
  std::string ingest_out;
  ingest_in.add_to(ingest);
  ingest->add_option("-o,--output", ingest_out, "Output path (default: stdout)");

  // punctuate
  auto* punct = app.add_subcommand("punctuate", "Restore punctuation; prints CueFile JSON");
  InputFlags punct_in;
  SegmenterFlags punct_seg;
  std::string punct_out, punct_strategy = "rule", punct_provider = "mock", punct_templates;
  punct_in.add_to(punct);
  punct_seg.add_to(punct);
  punct->add_option("-o,--output", punct_out, "Output path (default: stdout)");
  auto* punct_strategy_opt = punct->add_option("--strategy", punct_strategy, "rule or provider")
                                 ->check(CLI::IsMember({"rule", "provider"}));
  auto* punct_provider_opt = punct->add_option("--provider", punct_provider, "mock or remote");
  auto* punct_templates_opt = punct->add_option("--templates", punct_templates, "Directory with prompt templates");

  // segment
  auto* seg = app.add_subcommand("segment", "Print sentences with interpolated times");
  InputFlags seg_in;
  SegmenterFlags seg_flags;
  bool seg_json = false;
  seg_in.add_to(seg);
  seg_flags.add_to(seg);
  seg->add_flag("--json", seg_json, "Emit JSON instead of tab-separated lines");

  // generate
  auto* gen = app.add_subcommand("generate", "Pre-generate explanations; writes bundle.json and emissions.json");
  InputFlags gen_in;
  SegmenterFlags gen_seg;
  std::string gen_provider = "mock", gen_punctuate = "none", gen_templates, gen_out_dir = ".", gen_created_at;
  Millis gen_interval = 5000, gen_from = 0, gen_to = -1;
  std::size_t gen_concurrency = 4;
  double gen_abort = 0.2, gen_factor = kDefaultFactorKgPerToken;
  std::uint32_t gen_max_tokens = 512;
  gen_in.add_to(gen);
  gen_seg.add_to(gen);
  auto* gen_provider_opt = gen->add_option("--provider", gen_provider, "mock or remote");
  auto* gen_punctuate_opt = gen->add_option("--punctuate", gen_punctuate, "none, rule or provider (default: none)")
                                ->check(CLI::IsMember({"none", "rule", "provider"}));
  auto* gen_templates_opt = gen->add_option("--templates", gen_templates, "Directory with prompt templates");
  auto* gen_interval_opt = gen->add_option("--interval-ms", gen_interval, "Slot width (default: 5000)");
  auto* gen_from_opt = gen->add_option("--from-ms", gen_from, "Coverage start, inclusive (default: 0)");
  auto* gen_to_opt = gen->add_option("--to-ms", gen_to, "Coverage end, inclusive (default: duration)");
  gen->add_option("--out-dir", gen_out_dir, "Where bundle.json and emissions.json go (default: .)");
  gen->add_option("--created-at", gen_created_at, "Timestamp stored in generator metadata (default: now)");
  auto* gen_concurrency_opt = gen->add_option("--concurrency", gen_concurrency, "Parallel provider calls (default: 4)");
  auto* gen_abort_opt = gen->add_option("--abort-threshold", gen_abort, "Failure share that aborts the run (default: 0.2)");
  auto* gen_max_tokens_opt = gen->add_option("--max-output-tokens", gen_max_tokens, "Completion cap (default: 512)");
  auto* gen_factor_opt = gen->add_option("--factor", gen_factor, "kg CO2e per token");

  // export
  auto* exp = app.add_subcommand("export", "Write the static web tree for a bundle");
  std::string exp_bundle, exp_out_dir;
  exp->add_option("--bundle", exp_bundle, "bundle.json")->required()->check(CLI::ExistingFile);
  exp->add_option("--out-dir", exp_out_dir, "Output directory")->required();

  // serve
  auto* srv = app.add_subcommand("serve", "Serve bundles over HTTP");
  std::string srv_bind = "127.0.0.1:8080", srv_dir = ".";
  int srv_max_age = 86400;
  auto* srv_bind_opt = srv->add_option("--bind", srv_bind, "host:port (default: 127.0.0.1:8080)");
  auto* srv_dir_opt = srv->add_option("--bundle-dir", srv_dir, "Directory holding bundle.json files (default: .)");
  auto* srv_age_opt = srv->add_option("--cache-max-age", srv_max_age, "Cache-Control max-age in seconds (default: 86400)");

  // emissions
  auto* emi = app.add_subcommand("emissions", "Estimate kg CO2e from a ledger or token counts");
  std::string emi_ledger;
  std::uint64_t emi_prompt = 0, emi_completion = 0;
  double emi_factor = kDefaultFactorKgPerToken;
  bool emi_json = false, emi_derive = false;
  auto* emi_ledger_opt = emi->add_option("--ledger", emi_ledger, "emissions.json")->check(CLI::ExistingFile);
  auto* emi_prompt_opt = emi->add_option("--prompt-tokens", emi_prompt, "Prompt tokens")->excludes(emi_ledger_opt);
  emi->add_option("--completion-tokens", emi_completion, "Completion tokens")->excludes(emi_ledger_opt);
  auto* emi_factor_opt = emi->add_option("--factor", emi_factor, "kg CO2e per token (default: derived from the reference runs)");
  emi->add_flag("--json", emi_json, "Full-precision JSON output");
  emi->add_flag("--derive", emi_derive, "Print the factor fitted to the reference runs");

  // demo-fixture
  auto* demo = app.add_subcommand("demo-fixture", "Write the sample transcript, mock bundle and static tree");
  std::string demo_out = "demo";
  demo->add_option("--out-dir", demo_out, "Output directory (default: demo)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    Resolver settings;
    settings.load(config_path);

    if (ingest->parsed()) {
      emit(out, ingest_out, to_cue_json(ingest_in.load(settings)));
    } else if (punct->parsed()) {
      const auto options = punct_seg.resolve(settings);
      const auto templates = resolve_templates(settings, punct_templates_opt, punct_templates);
      const auto result = punctuate(punct_in.load(settings),
                                    settings.get<std::string>("strategy", punct_strategy_opt, punct_strategy, "rule"),
                                    settings.get<std::string>("provider", punct_provider_opt, punct_provider, "mock"),
                                    options.gap_ms, templates, nullptr);
      emit(out, punct_out, to_cue_json(result));
    } else if (seg->parsed()) {
      const auto options = seg_flags.resolve(settings);
      out << sentences_table(segment(seg_in.load(settings), options), seg_json);
    } else if (gen->parsed()) {
      const auto transcript_in = gen_in.load(settings);
      GenerateConfig config;
      config.segmenter = gen_seg.resolve(settings);
      config.templates = resolve_templates(settings, gen_templates_opt, gen_templates);
      config.slots.interval_ms = settings.get<Millis>("interval_ms", gen_interval_opt, gen_interval, 5000);
      config.slots.coverage_start_ms = settings.get<Millis>("from_ms", gen_from_opt, gen_from, 0);
      config.slots.coverage_end_ms =
          settings.get<Millis>("to_ms", gen_to_opt, gen_to, transcript_in.duration_ms);
      config.concurrency = settings.get<std::size_t>("concurrency", gen_concurrency_opt, gen_concurrency, 4);
      config.abort_threshold = settings.get<double>("abort_threshold", gen_abort_opt, gen_abort, 0.2);
      config.max_output_tokens = settings.get<std::uint32_t>("max_output_tokens", gen_max_tokens_opt, gen_max_tokens, 512);
      config.created_at = gen_created_at.empty() ? utc_now() : gen_created_at;
      const auto factor = settings.get<double>("factor_kg_per_token", gen_factor_opt, gen_factor, kDefaultFactorKgPerToken);
      const auto provider_name = settings.get<std::string>("provider", gen_provider_opt, gen_provider, "mock");

      RunLedger punctuation_ledger(transcript_in.video_id);
      const auto transcript =
          punctuate(transcript_in, settings.get<std::string>("punctuate", gen_punctuate_opt, gen_punctuate, "none"),
                    provider_name, config.segmenter.gap_ms, config.templates, &punctuation_ledger);
      auto provider = make_provider(provider_name);
      auto result = generate_bundle(transcript, *provider, config);
      RunLedger ledger = punctuation_ledger;
      ledger.merge(result.ledger);
      const auto no_dedup = result.no_dedup_totals + punctuation_ledger.totals();

      fs::create_directories(gen_out_dir);
      save_bundle(result.bundle, fs::path(gen_out_dir) / "bundle.json");
      emit(out, (fs::path(gen_out_dir) / "emissions.json").string(), to_emissions_json(ledger, factor, &no_dedup));
      out << result.bundle.video_id << ": " << result.bundle.slot_count_per_level() << " slots per level, "
          << result.bundle.explanations.size() << " explanations from " << result.provider_calls
          << " provider calls; " << ledger.totals().prompt_tokens << " prompt + "
          << ledger.totals().completion_tokens << " completion tokens = "
          << format_kg(estimate(ledger.totals(), factor).kg_co2e) << "\n";
    } else if (exp->parsed()) {
      const auto manifest = export_static(load_bundle(exp_bundle), exp_out_dir);
      out << "wrote " << manifest.files.size() << " files to " << exp_out_dir << "\n";
    } else if (srv->parsed()) {
      ServerOptions options;
      options.cache_max_age_s = settings.get<int>("cache_max_age", srv_age_opt, srv_max_age, 86400);
      serve(settings.get<std::string>("bundle_dir", srv_dir_opt, srv_dir, "."),
            settings.get<std::string>("bind", srv_bind_opt, srv_bind, "127.0.0.1:8080"), options);
    } else if (emi->parsed()) {
      if (emi_derive) {
        out << std::setprecision(17) << derive_factor(published_reference_runs()) << "\n";
        return kExitOk;
      }
      RunLedger ledger;
      double factor = kDefaultFactorKgPerToken;
      if (!emi_ledger.empty()) {
        auto loaded = parse_emissions_json(read_input(emi_ledger));
        ledger = std::move(loaded.ledger);
        factor = loaded.factor_kg_per_token;
      } else if (emi_prompt_opt->count() > 0 || emi->count("--completion-tokens") > 0) {
        ledger.append({"cli", {emi_prompt, emi_completion}});
      } else {
        throw CLI::RequiredError("--ledger or --prompt-tokens/--completion-tokens");
      }
      factor = settings.get<double>("factor_kg_per_token", emi_factor_opt, emi_factor, factor);
      const auto e = estimate(ledger.totals(), factor);
      if (emi_json) {
        nlohmann::ordered_json doc = {{"video_id", ledger.video_id()},
                                      {"prompt_tokens", ledger.totals().prompt_tokens},
                                      {"completion_tokens", ledger.totals().completion_tokens},
                                      {"total_tokens", e.total_tokens},
                                      {"factor_kg_per_token", e.factor_kg_per_token},
                                      {"kg_co2e", e.kg_co2e}};
        out << doc.dump(2) << "\n";
      } else {
        out << (ledger.video_id().empty() ? std::string() : ledger.video_id() + ": ")
            << ledger.totals().prompt_tokens << " prompt + " << ledger.totals().completion_tokens
            << " completion tokens = " << format_kg(e.kg_co2e) << "\n";
      }
    } else if (demo->parsed()) {
      const fs::path dir = demo_out;
      fs::create_directories(dir);
      emit(out, (dir / "lecture.srt").string(), demo::transcript_srt());
      const auto transcript = restore_punctuation(demo::transcript(), RulePunctuation{});
      GenerateConfig config;
      config.slots.coverage_end_ms = transcript.duration_ms;
      config.created_at = "1970-01-01T00:00:00Z";
      MockProvider provider;
      auto result = generate_bundle(transcript, provider, config);
      const auto bundle_dir = dir / "bundles" / transcript.video_id;
      fs::create_directories(bundle_dir);
      save_bundle(result.bundle, bundle_dir / "bundle.json");
      emit(out, (bundle_dir / "emissions.json").string(),
           to_emissions_json(result.ledger, kDefaultFactorKgPerToken, &result.no_dedup_totals));
      const auto manifest = export_static(result.bundle, dir / "static" / transcript.video_id);
      out << "wrote " << (dir / "lecture.srt").string() << ", " << (bundle_dir / "bundle.json").string() << " and "
          << manifest.files.size() << " static files\n";
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitOperational;
  }
  return kExitOk;
}

}  // namespace huh
