#pragma once

// Fine-tuning pairs ("Question: ... Language: [...] Date: [...]" ->
// "Code: ..."), the stratified 80/10/10 split and trainer configuration.

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gencnippet/common.hpp"
#include "gencnippet/ingest.hpp"

namespace gencnippet::dataset {

using ingest::QuestionPost;

enum class Split : std::uint8_t { Train, Validation, Test };

inline constexpr std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "train";
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

struct TrainingRecord {
  long long question_id = 0;
  std::string input_text;
  std::string output_text;
  Language language = Language::Java;
  std::string creation_date;  // YYYY-MM-DD
  Split split = Split::Train;

  friend bool operator==(const TrainingRecord&, const TrainingRecord&) = default;
};

inline constexpr std::string_view kOutputPrefix = "Code: ";

inline std::string format_input(std::string_view prose, Language lang, Timestamp date) {
  if (trim(prose).empty()) throw ValidationError("EMPTY_PROSE", "question prose is empty");
  std::string out = "Question: ";
  out += prose;
  out += " Language: [";
  out += display_name(lang);
  out += "] Date: [";
  out += format_date(date);
  out += "]";
  return out;
}

inline std::string format_input(const QuestionPost& q) {
  return format_input(q.prose, q.language, q.creation_date);
}

// "Code: {code}" with exactly one trailing newline.
inline std::string format_output(std::string_view code) {
  if (trim(code).empty()) throw ValidationError("EMPTY_CODE", "code snippet is empty");
  while (!code.empty() && (code.back() == '\n' || code.back() == '\r')) code.remove_suffix(1);
  std::string out(kOutputPrefix);
  out += code;
  out += '\n';
  return out;
}

// Inverse helpers used by exemplar selection.
inline std::string description_from_input(std::string_view input) {
  constexpr std::string_view kHead = "Question: ";
  if (input.starts_with(kHead)) input.remove_prefix(kHead.size());
  const auto lang = input.rfind(" Language: [");
  if (lang != std::string_view::npos) input = input.substr(0, lang);
  return std::string(input);
}

inline std::string code_from_output(std::string_view output) {
  if (output.starts_with(kOutputPrefix)) output.remove_prefix(kOutputPrefix.size());
  if (!output.empty() && output.back() == '\n') output.remove_suffix(1);
  return std::string(output);
}

// Training pair from a question with exactly one code block.
inline TrainingRecord make_record(const QuestionPost& q) {
  if (q.code_blocks.empty()) {
    throw ValidationError("NO_SNIPPET", "question " + std::to_string(q.id) + " has no code block");
  }
  TrainingRecord r;
  r.question_id = q.id;
  r.input_text = format_input(q);
  r.output_text = format_output(q.code_blocks.front());
  r.language = q.language;
  r.creation_date = format_date(q.creation_date);
  return r;
}

// ------------------------------------------------------------------
// Split
// ------------------------------------------------------------------

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

// Largest-remainder apportionment of n records over the three ratios.
inline std::array<std::size_t, 3> split_quotas(std::size_t n, const SplitRatios& r) {
  const std::array<double, 3> exact = {r.train * static_cast<double>(n),
                                       r.validation * static_cast<double>(n),
                                       r.test * static_cast<double>(n)};
  std::array<std::size_t, 3> quota{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    // Guard against 799.9999999 when the exact value is an integer.
    quota[i] = static_cast<std::size_t>(std::floor(exact[i] + 1e-9));
    assigned += quota[i];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return exact[a] - static_cast<double>(quota[a]) > exact[b] - static_cast<double>(quota[b]);
  });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++quota[order[k % 3]];
  return quota;
}

// Assigns every record a split. Within each language, records are ranked by
// seeded_key(seed, question_id); the first quota goes to train, the next to
// validation, the rest to test. The result does not depend on input order.
inline void assign_splits(std::vector<TrainingRecord>& records, std::uint64_t seed,
                          const SplitRatios& ratios = {}) {
  const double sum = ratios.train + ratios.validation + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9 || ratios.train < 0 || ratios.validation < 0 || ratios.test < 0) {
    throw ValidationError("BAD_RATIOS", "split ratios must be nonnegative and sum to 1");
  }
  std::set<long long> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.question_id).second) {
      throw ValidationError("DUPLICATE_ID", "duplicate question id " + std::to_string(r.question_id));
    }
  }
  for (auto lang : {Language::Java, Language::Python}) {
    std::vector<TrainingRecord*> stratum;
    for (auto& r : records) {
      if (r.language == lang) stratum.push_back(&r);
    }
    std::sort(stratum.begin(), stratum.end(), [&](const TrainingRecord* a, const TrainingRecord* b) {
      const auto ka = seeded_key(seed, static_cast<std::uint64_t>(a->question_id));
      const auto kb = seeded_key(seed, static_cast<std::uint64_t>(b->question_id));
      return ka != kb ? ka < kb : a->question_id < b->question_id;
    });
    const auto quota = split_quotas(stratum.size(), ratios);
    for (std::size_t i = 0; i < stratum.size(); ++i) {
      stratum[i]->split = i < quota[0]              ? Split::Train
                          : i < quota[0] + quota[1] ? Split::Validation
                                                    : Split::Test;
    }
  }
}

// ------------------------------------------------------------------
// JSONL
// ------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const TrainingRecord& r) {
  nlohmann::ordered_json j;
  j["input"] = r.input_text;
  j["output"] = r.output_text;
  auto& meta = j["meta"];
  meta["id"] = r.question_id;
  meta["language"] = tag_name(r.language);
  meta["date"] = r.creation_date;
  meta["split"] = split_name(r.split);
  return j;
}

inline TrainingRecord record_from_json(const nlohmann::json& j) {
  try {
    TrainingRecord r;
    r.input_text = j.at("input").get<std::string>();
    r.output_text = j.at("output").get<std::string>();
    const auto& meta = j.at("meta");
    r.question_id = meta.at("id").get<long long>();
    r.language = require_language(meta.at("language").get<std::string>());
    r.creation_date = meta.at("date").get<std::string>();
    const auto split = parse_split(meta.at("split").get<std::string>());
    if (!split) throw ValidationError("BAD_RECORD", "unknown split");
    r.split = *split;
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("BAD_RECORD", std::string("invalid training record: ") + e.what());
  }
}

inline std::vector<TrainingRecord> read_records(std::istream& in) {
  std::vector<TrainingRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("BAD_JSON", e.what());
    }
  }
  return out;
}

inline std::vector<TrainingRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_records(in);
}

inline void write_jsonl(std::ostream& out, const std::vector<TrainingRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

struct ExportManifest {
  std::uint64_t seed = 0;
  std::map<std::string, std::map<std::string, std::size_t>> counts;  // split -> language -> n
  std::map<std::string, std::string> files;                          // split -> file name
};

// Writes train.jsonl, validation.jsonl, test.jsonl and manifest.json to `dir`.
inline ExportManifest export_jsonl(const std::vector<TrainingRecord>& records,
                                   const std::filesystem::path& dir, std::uint64_t seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  ExportManifest manifest;
  manifest.seed = seed;
  for (auto split : {Split::Train, Split::Validation, Split::Test}) {
    const std::string name(split_name(split));
    const auto path = dir / (name + ".jsonl");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    auto& counts = manifest.counts[name];
    counts["java"] = 0;
    counts["python"] = 0;
    for (const auto& r : records) {
      if (r.split != split) continue;
      out << to_json(r).dump() << '\n';
      ++counts[std::string(tag_name(r.language))];
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
    manifest.files[name] = name + ".jsonl";
  }

  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["total"] = records.size();
  j["files"] = manifest.files;
  j["counts"] = manifest.counts;
  const auto mpath = dir / "manifest.json";
  std::ofstream mout(mpath, std::ios::binary);
  if (!mout) throw IoError("cannot write '" + mpath.string() + "'");
  mout << j.dump(2) << '\n';
  return manifest;
}

// ------------------------------------------------------------------
// Trainer configuration
// ------------------------------------------------------------------

// Learning rate, batch size, epochs, early stopping and loss follow the
// published setup. LoRA rank/alpha and patience are local defaults.
struct TrainingConfig {
  std::string base_model = "meta-llama/Meta-Llama-3-8B";
  double learning_rate = 2e-5;
  int batch_size = 32;
  int epochs = 3;
  bool early_stopping = true;
  int early_stopping_patience = 1;
  std::string loss = "cross_entropy";
  std::string adapter = "lora";
  int lora_rank = 16;
  int lora_alpha = 32;

  void validate() const {
    if (!(learning_rate > 0)) throw ValidationError("BAD_CONFIG", "learning_rate must be > 0");
    if (batch_size < 1) throw ValidationError("BAD_CONFIG", "batch_size must be >= 1");
    if (epochs < 1) throw ValidationError("BAD_CONFIG", "epochs must be >= 1");
    if (early_stopping_patience < 0) throw ValidationError("BAD_CONFIG", "patience must be >= 0");
  }
};

inline nlohmann::ordered_json to_json(const TrainingConfig& c) {
  nlohmann::ordered_json j;
  j["base_model"] = c.base_model;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["early_stopping"] = c.early_stopping;
  j["early_stopping_patience"] = c.early_stopping_patience;
  j["loss"] = c.loss;
  j["adapter"] = c.adapter;
  j["lora_rank"] = c.lora_rank;
  j["lora_alpha"] = c.lora_alpha;
  return j;
}

inline TrainingConfig training_config_from_json(const nlohmann::json& j) {
  TrainingConfig c;
  try {
    c.base_model = j.at("base_model").get<std::string>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.early_stopping = j.at("early_stopping").get<bool>();
    c.early_stopping_patience = j.at("early_stopping_patience").get<int>();
    c.loss = j.at("loss").get<std::string>();
    c.adapter = j.at("adapter").get<std::string>();
    c.lora_rank = j.at("lora_rank").get<int>();
    c.lora_alpha = j.at("lora_alpha").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid training config: ") + e.what());
  }
  c.validate();
  return c;
}

inline std::string render_training_config(const TrainingConfig& c) {
  c.validate();
  return to_json(c).dump(2) + "\n";
}

inline void emit_training_config(const TrainingConfig& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << render_training_config(c);
}

}  // namespace gencnippet::dataset
