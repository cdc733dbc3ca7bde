#pragma once

// Subcommand dispatcher behind tools/gencnippet. Results go to stdout or
// files, logs to stderr. Exit codes: 0 ok, 1 usage/validation, 2 runtime.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gencnippet/backend.hpp"
#include "gencnippet/config.hpp"
#include "gencnippet/dataset.hpp"
#include "gencnippet/eval.hpp"
#include "gencnippet/filter.hpp"
#include "gencnippet/ingest.hpp"
#include "gencnippet/prompt.hpp"
#include "gencnippet/server.hpp"
#include "gencnippet/survey.hpp"

namespace gencnippet::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

inline void init_logging(const std::string& level) {
  static const bool installed = [] {
    auto logger = spdlog::stderr_color_mt("gencnippet");
    spdlog::set_default_logger(logger);
    return true;
  }();
  (void)installed;
  spdlog::set_level(spdlog::level::from_str(level));
}

namespace detail {

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

inline std::string slurp(const std::string& path) {
  auto in = open_in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::vector<ingest::QuestionPost> load_questions(const std::string& path) {
  auto in = open_in(path);
  return ingest::read_questions(in);
}

inline std::vector<dataset::TrainingRecord> load_pool(const std::string& path) {
  if (path.empty()) throw ValidationError("MISSING_POOL", "--pool is required when --shots > 0");
  return dataset::read_records(std::filesystem::path(path));
}

inline Language language_arg(const std::string& s) { return require_language(s); }

}  // namespace detail

// Options shared by `prompt` and `generate`.
struct PromptArgs {
  std::string description_file;
  std::string language;
  std::string constraints_file;
  std::string profile = "foundation";
  std::size_t shots = 0;
  std::string pool;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App& sub, bool require_description) {
    auto* d = sub.add_option("--description-file", description_file, "File holding the problem description");
    if (require_description) d->required();
    auto* l = sub.add_option("--language", language, "java or python");
    if (require_description) l->required();
    sub.add_option("--constraints-file", constraints_file, "Optional constraints text");
    sub.add_option("--profile", profile, "foundation or fine_tuned")->capture_default_str();
    sub.add_option("--shots", shots, "Number of few-shot exemplars")->capture_default_str();
    sub.add_option("--pool", pool, "Exemplar pool (training JSONL)");
    sub.add_option("--seed", seed, "Exemplar selection seed");
  }

  prompt::Profile parsed_profile() const {
    auto p = prompt::parse_profile(profile);
    if (!p) throw ValidationError("BAD_PROFILE", "unknown profile '" + profile + "'");
    return *p;
  }

  std::string build(const std::string& description, Language lang, std::uint64_t default_seed,
                    std::optional<long long> exclude_id = std::nullopt) const {
    prompt::PromptSpec spec;
    spec.problem_description = description;
    spec.language = lang;
    if (!constraints_file.empty()) spec.constraints = detail::slurp(constraints_file);
    if (shots > 0) {
      spec.max_exemplars = std::max(spec.max_exemplars, shots);
      spec.exemplars = prompt::select_exemplars(detail::load_pool(pool), lang, shots, seed.value_or(default_seed),
                                                exclude_id);
    }
    const auto now = std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
    return prompt::build(parsed_profile(), spec, now);
  }
};

inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Code example generation pipeline for programming questions", "gencnippet"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string log_level = "info";
  app.add_option("--config", config_path, std::string("Pipeline config file (or $") + kConfigEnvVar + ")");
  init_logging(log_level);
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")
      ->capture_default_str()
      ->each([](const std::string& level) { init_logging(level); });

  int rc = kOk;
  auto config = [&] { return resolve_pipeline_config(config_path); };

  // ingest ---------------------------------------------------------------
  auto* ingest_cmd = app.add_subcommand("ingest", "Stream a posts XML dump into question JSONL");
  std::string posts, languages_csv = "java,python", ingest_out, ingest_summary;
  std::uint64_t max_rows = 0;
  ingest_cmd->add_option("--posts", posts, "Posts.xml path")->required();
  ingest_cmd->add_option("--languages", languages_csv, "Comma separated language list")->capture_default_str();
  ingest_cmd->add_option("--out", ingest_out, "Output question JSONL")->required();
  ingest_cmd->add_option("--max-rows", max_rows, "Stop after N rows (0 = all)");
  ingest_cmd->add_option("--summary", ingest_summary, "Also write the summary as JSON");
  ingest_cmd->callback([&] {
    const auto langs = parse_language_list(languages_csv);
    auto in = detail::open_in(posts);
    auto sink = detail::open_out(ingest_out);
    auto stats = ingest::ingest_posts(
        in, langs, [&](const ingest::QuestionPost& q) { sink << ingest::to_json(q).dump() << '\n'; },
        [](const ingest::RowError& e) { spdlog::warn("row error at byte {}: {}", e.byte_offset, e.message); },
        max_rows);
    if (!sink) throw IoError("write failed for '" + ingest_out + "'");
    spdlog::info("ingest: {} rows, {} questions, {} row errors, peak retained rows {}", stats.rows, stats.questions,
                 stats.row_errors, stats.stream.peak_retained_rows);
    if (!ingest_summary.empty()) detail::open_out(ingest_summary) << ingest::to_json(stats.summary).dump(2) << '\n';
    out << "rows: " << stats.rows << "\nquestions: " << stats.questions << "\nrow_errors: " << stats.row_errors
        << '\n';
  });

  // filter ---------------------------------------------------------------
  auto* filter_cmd = app.add_subcommand("filter", "Apply the code-need classifier and quality gates");
  std::string filter_in, model_path, mode_text = "training", filter_out, decisions_path, filter_summary;
  bool allow_multi = false;
  filter_cmd->add_option("--in", filter_in, "Question JSONL")->required();
  filter_cmd->add_option("--model", model_path, "Code-need model parameter file");
  filter_cmd->add_option("--mode", mode_text, "training or generation")->capture_default_str();
  filter_cmd->add_option("--out", filter_out, "Selected questions JSONL")->required();
  filter_cmd->add_option("--decisions", decisions_path, "Per-question decisions JSONL");
  filter_cmd->add_option("--summary", filter_summary, "Also write the funnel as JSON");
  filter_cmd->add_flag("--allow-multi-snippet", allow_multi, "Accept questions with several code blocks");
  filter_cmd->callback([&] {
    const auto cfg = config();
    auto mode = filter::parse_mode(mode_text);
    if (!mode) throw ValidationError("BAD_MODE", "--mode must be training or generation");
    const auto model = filter::load_model(model_path.empty() ? cfg.model_path : model_path);
    const auto questions = detail::load_questions(filter_in);
    const auto result = filter::run_filter(questions, model, {*mode, allow_multi});
    auto sink = detail::open_out(filter_out);
    for (const auto& q : result.selected) sink << ingest::to_json(q).dump() << '\n';
    if (!decisions_path.empty()) {
      auto dsink = detail::open_out(decisions_path);
      for (const auto& d : result.decisions) dsink << filter::to_json(d).dump() << '\n';
    }
    if (!filter_summary.empty()) detail::open_out(filter_summary) << ingest::to_json(result.summary).dump(2) << '\n';
    out << ingest::render_summary(result.summary, filter::summary_headers(*mode));
  });

  // dataset --------------------------------------------------------------
  auto* dataset_cmd = app.add_subcommand("dataset", "Build fine-tuning JSONL splits and the trainer config");
  std::string dataset_in, out_dir;
  std::optional<std::uint64_t> dataset_seed;
  dataset_cmd->add_option("--in", dataset_in, "Filtered question JSONL")->required();
  dataset_cmd->add_option("--seed", dataset_seed, "Split seed");
  dataset_cmd->add_option("--out-dir", out_dir, "Output directory")->required();
  dataset_cmd->callback([&] {
    const auto cfg = config();
    const auto seed = dataset_seed.value_or(cfg.seed);
    std::vector<dataset::TrainingRecord> records;
    for (const auto& q : detail::load_questions(dataset_in)) records.push_back(dataset::make_record(q));
    dataset::assign_splits(records, seed);
    const auto manifest = dataset::export_jsonl(records, out_dir, seed);
    dataset::emit_training_config({}, std::filesystem::path(out_dir) / "training_config.json");
    for (const auto& [split, counts] : manifest.counts) {
      out << split << ": java=" << counts.at("java") << " python=" << counts.at("python") << '\n';
    }
  });

  // prompt ---------------------------------------------------------------
  auto* prompt_cmd = app.add_subcommand("prompt", "Print the generation prompt for a description");
  PromptArgs prompt_args;
  prompt_args.add_to(*prompt_cmd, true);
  prompt_cmd->callback([&] {
    const auto cfg = config();
    out << prompt_args.build(detail::slurp(prompt_args.description_file), detail::language_arg(prompt_args.language),
                             cfg.seed);
  });

  // generate -------------------------------------------------------------
  auto* generate_cmd = app.add_subcommand("generate", "Generate a code example with a configured backend");
  PromptArgs gen_args;
  gen_args.add_to(*generate_cmd, false);
  std::string backend_kind, endpoint, model_id, replay_dir, questions_path, gen_out;
  bool record = false;
  generate_cmd->add_option("--backend", backend_kind, "mock, replay or remote");
  generate_cmd->add_option("--endpoint", endpoint, "Chat-completions URL for the remote backend");
  generate_cmd->add_option("--model-id", model_id, "Model identifier sent to the backend");
  generate_cmd->add_option("--replay-dir", replay_dir, "Replay store directory");
  generate_cmd->add_flag("--record", record, "Record exchanges into --replay-dir");
  generate_cmd->add_option("--questions", questions_path, "Batch mode: question JSONL (prose is the description)");
  generate_cmd->add_option("--out", gen_out, "Batch mode: output snippet JSONL");
  generate_cmd->callback([&] {
    auto cfg = config();
    auto& bc = cfg.backend;
    if (!backend_kind.empty()) {
      auto k = backend::parse_kind(backend_kind);
      if (!k) throw ValidationError("BAD_BACKEND", "unknown backend '" + backend_kind + "'");
      bc.kind = *k;
    }
    if (!endpoint.empty()) bc.endpoint_url = endpoint;
    if (!model_id.empty()) bc.model_id = model_id;
    if (!replay_dir.empty()) bc.replay_dir = replay_dir;
    if (record) bc.record = true;
    if (const char* key = std::getenv("GENCNIPPET_API_KEY"); key && *key) bc.api_key = key;
    auto be = backend::make_backend(bc);

    if (questions_path.empty()) {
      if (gen_args.description_file.empty()) {
        throw ValidationError("MISSING_FIELD", "--description-file or --questions is required");
      }
      const auto lang = detail::language_arg(gen_args.language);
      const auto text = gen_args.build(detail::slurp(gen_args.description_file), lang, cfg.seed);
      const auto result = be->generate({text, lang, backend::make_request_id()});
      out << result.code << '\n';
      return;
    }
    if (gen_out.empty()) throw ValidationError("MISSING_FIELD", "--out is required with --questions");
    const auto lang_filter = gen_args.language.empty() ? std::nullopt : parse_language(gen_args.language);
    auto sink = detail::open_out(gen_out);
    std::size_t n = 0;
    for (const auto& q : detail::load_questions(questions_path)) {
      if (lang_filter && q.language != *lang_filter) continue;
      const auto description = q.title.empty() ? q.prose : q.title + "\n" + q.prose;
      const auto text = gen_args.build(description, q.language, cfg.seed, q.id);
      const auto result = be->generate({text, q.language, backend::make_request_id()});
      nlohmann::ordered_json j;
      j["question_id"] = q.id;
      j["snippet"] = result.code;
      j["prompt"] = text;
      j["model_id"] = result.model_id;
      sink << j.dump() << '\n';
      ++n;
    }
    out << "generated: " << n << '\n';
  });

  // eval -----------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Score candidate/reference code pairs");
  std::string pairs_path, eval_out, smoothing_text;
  std::optional<int> bleu_n;
  eval_cmd->add_option("--pairs", pairs_path, "JSONL of {id, candidate, reference}")->required();
  eval_cmd->add_option("--bleu-n", bleu_n, "Maximum BLEU n-gram order");
  eval_cmd->add_option("--smoothing", smoothing_text, "none or eps");
  eval_cmd->add_option("--out", eval_out, "Structured report path");
  eval_cmd->callback([&] {
    const auto cfg = config();
    auto mc = metric_config(cfg.metrics);
    if (bleu_n) {
      if (*bleu_n < 1) throw ValidationError("BAD_BLEU_N", "--bleu-n must be >= 1");
      mc.bleu_max_n = *bleu_n;
    }
    if (!smoothing_text.empty()) {
      auto s = eval::parse_smoothing(smoothing_text);
      if (!s) throw ValidationError("BAD_SMOOTHING", "--smoothing must be none or eps");
      mc.smoothing = *s;
    }
    auto in = detail::open_in(pairs_path);
    const auto report = eval::evaluate_corpus(eval::read_pairs(in), mc);
    if (!eval_out.empty()) detail::open_out(eval_out) << eval::to_json(report).dump(2) << '\n';
    out << eval::render_report(report);
  });

  // serve ----------------------------------------------------------------
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP generation API");
  std::optional<int> port;
  std::string host;
  serve_cmd->add_option("--port", port, "Listen port (0 = ephemeral)");
  serve_cmd->add_option("--host", host, "Listen address");
  serve_cmd->callback([&] {
    auto cfg = config();
    auto sc = cfg.server;
    server::apply_env_overrides(sc);
    sc.backend.validate();
    if (port) sc.port = *port;
    if (!host.empty()) sc.host = host;
    auto service = std::make_shared<server::GenerationService>(sc);
    server::ApiServer api(service);
    const auto bound = api.bind(sc.host, sc.port);
    spdlog::info("listening on {}:{} (backend {}, profile {})", sc.host, bound, backend::kind_name(sc.backend.kind),
                 prompt::profile_name(sc.prompt_profile));
    out << "listening on " << sc.host << ':' << bound << std::endl;
    api.run();
  });

  // survey-report --------------------------------------------------------
  auto* survey_cmd = app.add_subcommand("survey-report", "Validate and summarize survey responses");
  std::string responses_path, survey_out;
  survey_cmd->add_option("--responses", responses_path, "Response JSONL")->required();
  survey_cmd->add_option("--out", survey_out, "Output directory")->required();
  survey_cmd->callback([&] {
    auto in = detail::open_in(responses_path);
    const auto validation = survey::validate_responses(survey::read_responses(in));
    const auto report = survey::summarize_survey(validation.included);
    const auto text = survey::render_survey(report, &validation);
    std::filesystem::create_directories(survey_out);
    auto j = survey::to_json(report);
    j["excluded"] = nlohmann::ordered_json::array();
    for (const auto& e : validation.excluded) {
      j["excluded"].push_back({{"respondent_id", e.respondent_id},
                               {"reason", survey::reason_code(e.reason)},
                               {"detail", e.detail}});
    }
    detail::open_out((std::filesystem::path(survey_out) / "survey_report.json").string()) << j.dump(2) << '\n';
    detail::open_out((std::filesystem::path(survey_out) / "survey_report.txt").string()) << text;
    out << text;
  });

  // wild-export ----------------------------------------------------------
  auto* wild_cmd = app.add_subcommand("wild-export", "Prepare a batch of suggested edits for manual submission");
  std::string wild_questions, snippets_path, wild_out;
  std::size_t k = 50;
  wild_cmd->add_option("--questions", wild_questions, "Questions without code (JSONL)")->required();
  wild_cmd->add_option("--snippets", snippets_path, "Output of `generate --questions` (JSONL)")->required();
  wild_cmd->add_option("--k", k, "Batch size")->capture_default_str();
  wild_cmd->add_option("--out", wild_out, "Edit-suggestion JSONL")->required();
  wild_cmd->callback([&] {
    std::map<long long, eval::GeneratedSnippet> results;
    auto in = detail::open_in(snippets_path);
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        results[j.at("question_id").get<long long>()] = {j.at("snippet").get<std::string>(),
                                                          j.value("prompt", std::string{})};
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("BAD_SNIPPET", e.what());
      }
    }
    const auto batch = eval::export_wild_test_batch(detail::load_questions(wild_questions), results, k);
    for (const auto& w : batch.warnings) spdlog::warn("{}", w);
    auto sink = detail::open_out(wild_out);
    eval::write_wild_batch(sink, batch);
    out << "entries: " << batch.entries.size() << '\n';
  });

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.code() << ": " << e.what() << '\n';
    rc = kUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.code() << ": " << e.what() << '\n';
    rc = kUsage;
  } catch (const Error& e) {
    err << "error: " << e.code() << ": " << e.what() << '\n';
    rc = kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    rc = kRuntime;
  }
  return rc;
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, out, err);
}

}  // namespace gencnippet::cli
