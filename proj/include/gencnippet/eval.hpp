#pragma once

// Automatic relevance metrics (BLEU, ROUGE-L, greedy-matching embedding
// score) over a lexical code tokenizer, plus the manual-review math.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gencnippet/backend.hpp"
#include "gencnippet/common.hpp"
#include "gencnippet/ingest.hpp"

namespace gencnippet::eval {

using TokenSequence = std::vector<std::string>;

// ------------------------------------------------------------------
// Tokenizer
// ------------------------------------------------------------------

// Identifiers and numbers stay whole, common multi-character operators are
// single tokens, every other non-space character is its own token. Case is
// preserved; comments are tokenized like code.
inline TokenSequence tokenize_code(std::string_view text) {
  static constexpr std::array<std::string_view, 8> kOps3 = {">>=", "<<=", "...", "===",
                                                            "!==", "**=", "//=", ">>>"};
  static constexpr std::array<std::string_view, 23> kOps2 = {
      "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=",
      "%=", "&=", "|=", "^=", "->", "::", "<<", ">>", "**", "//", "=>"};
  auto ident_char = [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '$' || c >= 0x80; };

  TokenSequence out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (std::isdigit(c)) {
      while (j < text.size() && (ident_char(static_cast<unsigned char>(text[j])) || text[j] == '.')) ++j;
    } else if (ident_char(c)) {
      while (j < text.size() && ident_char(static_cast<unsigned char>(text[j]))) ++j;
    } else {
      const auto rest = text.substr(i);
      if (std::any_of(kOps3.begin(), kOps3.end(), [&](auto op) { return rest.starts_with(op); })) j = i + 3;
      else if (std::any_of(kOps2.begin(), kOps2.end(), [&](auto op) { return rest.starts_with(op); })) j = i + 2;
    }
    out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

// ------------------------------------------------------------------
// BLEU
// ------------------------------------------------------------------

enum class Smoothing { None, AddEpsilon };

inline constexpr double kSmoothingEpsilon = 1e-9;

inline std::optional<Smoothing> parse_smoothing(std::string_view s) {
  if (s == "none") return Smoothing::None;
  if (s == "eps" || s == "add_epsilon" || s == "epsilon") return Smoothing::AddEpsilon;
  return std::nullopt;
}

inline constexpr std::string_view smoothing_name(Smoothing s) {
  return s == Smoothing::None ? "none" : "add_epsilon";
}

struct BleuDetails {
  double score = 0.0;
  std::vector<double> precisions;  // modified n-gram precision, n = 1..max_n
  double brevity_penalty = 0.0;
  bool empty_candidate = false;
};

namespace detail {

struct VectorHash {
  std::size_t operator()(const std::vector<std::string_view>& v) const noexcept {
    std::uint64_t h = 0x84222325ULL;
    for (auto s : v) h = splitmix64(h ^ fnv1a64(s));
    return static_cast<std::size_t>(h);
  }
};

using NgramCounts = std::unordered_map<std::vector<std::string_view>, int, VectorHash>;

inline NgramCounts count_ngrams(const TokenSequence& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  std::vector<std::string_view> gram(n);
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    for (std::size_t k = 0; k < n; ++k) gram[k] = tokens[i + k];
    ++counts[gram];
  }
  return counts;
}

}  // namespace detail

// Sentence BLEU: geometric mean of clipped n-gram precisions times
// exp(min(0, 1 - |ref|/|cand|)). Orders longer than the candidate are left
// out of the mean (effective order), so bleu(x, x) = 1 for short x.
inline BleuDetails bleu_details(const TokenSequence& candidate, const TokenSequence& reference,
                                int max_n = 4, Smoothing smoothing = Smoothing::AddEpsilon) {
  if (reference.empty()) throw ValidationError("EMPTY_REFERENCE", "BLEU reference is empty");
  if (max_n < 1) throw ValidationError("BAD_ORDER", "BLEU max_n must be >= 1");
  BleuDetails d;
  if (candidate.empty()) {
    d.empty_candidate = true;
    d.precisions.assign(static_cast<std::size_t>(max_n), 0.0);
    return d;
  }
  double log_sum = 0.0;
  bool zero = false;
  int orders = 0;
  for (int n = 1; n <= max_n; ++n) {
    const auto cand = detail::count_ngrams(candidate, static_cast<std::size_t>(n));
    const auto ref = detail::count_ngrams(reference, static_cast<std::size_t>(n));
    long long matched = 0;
    long long total = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      if (auto it = ref.find(gram); it != ref.end()) matched += std::min(count, it->second);
    }
    double p = 0.0;
    if (total == 0) {
      d.precisions.push_back(0.0);
      continue;
    }
    ++orders;
    if (matched > 0) {
      p = static_cast<double>(matched) / static_cast<double>(total);
    } else if (smoothing == Smoothing::AddEpsilon) {
      p = kSmoothingEpsilon / static_cast<double>(std::max<long long>(total, 1));
    }
    d.precisions.push_back(p);
    if (p == 0.0) zero = true;
    else log_sum += std::log(p);
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  d.brevity_penalty = std::exp(std::min(0.0, 1.0 - r / c));
  d.score = zero ? 0.0 : std::min(1.0, d.brevity_penalty * std::exp(log_sum / orders));
  return d;
}

inline double bleu(const TokenSequence& candidate, const TokenSequence& reference, int max_n = 4,
                   Smoothing smoothing = Smoothing::AddEpsilon) {
  return bleu_details(candidate, reference, max_n, smoothing).score;
}

// ------------------------------------------------------------------
// ROUGE-L
// ------------------------------------------------------------------

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline double harmonic_mean(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

// Two-row dynamic programme.
inline std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// ROUGE-L with beta = 1. Empty input on either side scores zero.
inline PrfScore rouge_l(const TokenSequence& candidate, const TokenSequence& reference) {
  PrfScore s;
  if (candidate.empty() || reference.empty()) return s;
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  s.precision = lcs / static_cast<double>(candidate.size());
  s.recall = lcs / static_cast<double>(reference.size());
  s.f1 = harmonic_mean(s.precision, s.recall);
  return s;
}

// ------------------------------------------------------------------
// Embedding score
// ------------------------------------------------------------------

class EmbeddingError : public Error {
 public:
  explicit EmbeddingError(const std::string& message) : Error("EMBEDDING_ERROR", message) {}
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<std::vector<double>> embed(const TokenSequence& tokens) const = 0;
  virtual std::string name() const = 0;
};

// Signed feature hashing of "#token#" character trigrams plus the whole
// token. Deterministic and offline; never yields a zero vector.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dim = 256) : dim_(dim) {}

  std::vector<std::vector<double>> embed(const TokenSequence& tokens) const override {
    std::vector<std::vector<double>> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
      std::vector<double> v(dim_, 0.0);
      auto add = [&](std::string_view piece, double weight) {
        const auto h = splitmix64(fnv1a64(piece));
        v[h % dim_] += (h >> 63) ? -weight : weight;
      };
      add(t, 2.0);
      const auto padded = "#" + t + "#";
      for (std::size_t i = 0; i + 3 <= padded.size(); ++i) add(std::string_view(padded).substr(i, 3), 1.0);
      if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[fnv1a64(t) % dim_] = 1.0;
      out.push_back(std::move(v));
    }
    return out;
  }
  std::string name() const override { return "hashing-" + std::to_string(dim_); }

 private:
  std::size_t dim_;
};

// One dimension per vocabulary entry; unknown tokens fail.
class OneHotEmbedder final : public Embedder {
 public:
  explicit OneHotEmbedder(const std::vector<std::string>& vocabulary) {
    for (const auto& w : vocabulary) index_.emplace(w, index_.size());
  }

  std::vector<std::vector<double>> embed(const TokenSequence& tokens) const override {
    std::vector<std::vector<double>> out;
    for (const auto& t : tokens) {
      auto it = index_.find(t);
      if (it == index_.end()) throw EmbeddingError("token '" + t + "' is not in the vocabulary");
      std::vector<double> v(index_.size(), 0.0);
      v[it->second] = 1.0;
      out.push_back(std::move(v));
    }
    return out;
  }
  std::string name() const override { return "one-hot"; }

 private:
  std::map<std::string, std::size_t> index_;
};

// Adapts a plain token -> vector function.
class FunctionEmbedder final : public Embedder {
 public:
  using Fn = std::function<std::vector<double>(const std::string&)>;
  explicit FunctionEmbedder(Fn fn, std::string name = "function") : fn_(std::move(fn)), name_(std::move(name)) {}

  std::vector<std::vector<double>> embed(const TokenSequence& tokens) const override {
    std::vector<std::vector<double>> out;
    for (const auto& t : tokens) out.push_back(fn_(t));
    return out;
  }
  std::string name() const override { return name_; }

 private:
  Fn fn_;
  std::string name_;
};

// OpenAI-style embeddings endpoint: {model, input: [tokens]} ->
// {data: [{embedding: [...]}, ...]} in input order.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(std::string endpoint_url, std::string model, std::string api_key = {},
                 std::chrono::milliseconds timeout = std::chrono::seconds(30))
      : url_(backend::parse_url(endpoint_url)), model_(std::move(model)), api_key_(std::move(api_key)),
        timeout_(timeout) {}

  std::vector<std::vector<double>> embed(const TokenSequence& tokens) const override {
    if (tokens.empty()) return {};
    nlohmann::json body{{"model", model_}, {"input", tokens}};
    backend::JsonPostOptions opts;
    opts.timeout = timeout_;
    if (!api_key_.empty()) opts.headers.emplace("Authorization", "Bearer " + api_key_);
    nlohmann::json reply;
    try {
      reply = backend::post_json(url_, body, opts);
    } catch (const backend::BackendError& e) {
      throw EmbeddingError(std::string("embedding request failed: ") + e.what());
    }
    std::vector<std::vector<double>> out;
    try {
      for (const auto& item : reply.at("data")) out.push_back(item.at("embedding").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
      throw EmbeddingError(std::string("malformed embedding response: ") + e.what());
    }
    if (out.size() != tokens.size()) throw EmbeddingError("embedding count does not match token count");
    return out;
  }
  std::string name() const override { return "remote:" + model_; }

 private:
  backend::ParsedUrl url_;
  std::string model_;
  std::string api_key_;
  std::chrono::milliseconds timeout_;
};

namespace detail {

inline std::vector<std::vector<double>> normalized(std::vector<std::vector<double>> vs) {
  for (auto& v : vs) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (!(norm > 0.0) || !std::isfinite(norm)) throw EmbeddingError("embedder produced a zero or non-finite vector");
    for (double& x : v) x /= norm;
  }
  return vs;
}

}  // namespace detail

// Greedy matching: recall averages, over reference tokens, the best cosine
// to any candidate token; precision is the mirror image. Negative cosines
// count as 0.
inline PrfScore embedding_score(const TokenSequence& candidate, const TokenSequence& reference,
                                const Embedder& embedder) {
  PrfScore s;
  if (candidate.empty() || reference.empty()) return s;
  const auto cand = detail::normalized(embedder.embed(candidate));
  const auto ref = detail::normalized(embedder.embed(reference));
  if (cand.size() != candidate.size() || ref.size() != reference.size()) {
    throw EmbeddingError("embedder returned the wrong number of vectors");
  }
  const auto dim = cand.front().size();
  for (const auto* group : {&cand, &ref}) {
    for (const auto& v : *group) {
      if (v.size() != dim) throw EmbeddingError("embedding dimensions differ");
    }
  }

  std::vector<double> best_for_cand(cand.size(), 0.0), best_for_ref(ref.size(), 0.0);
  for (std::size_t i = 0; i < cand.size(); ++i) {
    for (std::size_t j = 0; j < ref.size(); ++j) {
      double cos = std::inner_product(cand[i].begin(), cand[i].end(), ref[j].begin(), 0.0);
      cos = std::clamp(cos, 0.0, 1.0);
      best_for_cand[i] = std::max(best_for_cand[i], cos);
      best_for_ref[j] = std::max(best_for_ref[j], cos);
    }
  }
  s.precision = std::accumulate(best_for_cand.begin(), best_for_cand.end(), 0.0) / static_cast<double>(cand.size());
  s.recall = std::accumulate(best_for_ref.begin(), best_for_ref.end(), 0.0) / static_cast<double>(ref.size());
  s.f1 = harmonic_mean(s.precision, s.recall);
  return s;
}

// ------------------------------------------------------------------
// Manual review math
// ------------------------------------------------------------------

inline double z_for_confidence(double confidence) {
  struct Row {
    double confidence, z;
  };
  static constexpr std::array<Row, 3> kTable = {{{0.90, 1.645}, {0.95, 1.96}, {0.99, 2.576}}};
  for (const auto& row : kTable) {
    if (std::abs(row.confidence - confidence) < 1e-9) return row.z;
  }
  throw ValidationError("BAD_CONFIDENCE", "confidence must be one of 0.90, 0.95, 0.99");
}

// Cochran's n0 = z^2 p(1-p) / e^2 with p = 0.5, optionally corrected for a
// finite population, rounded up.
inline long long required_sample_size(double confidence, double margin,
                                      std::optional<long long> population = std::nullopt) {
  if (!(margin > 0.0 && margin < 1.0)) throw ValidationError("BAD_MARGIN", "margin must lie in (0,1)");
  if (population && *population < 1) throw ValidationError("BAD_POPULATION", "population must be >= 1");
  const double z = z_for_confidence(confidence);
  double n = z * z * 0.25 / (margin * margin);
  if (population) n = n / (1.0 + (n - 1.0) / static_cast<double>(*population));
  return static_cast<long long>(std::ceil(n - 1e-9));
}

struct ReviewPlan {
  long long formula = 0;
  long long chosen = 0;
  bool overridden = false;
};

// The formula value, or `override_n` when it is at least as large.
inline ReviewPlan plan_manual_review(double confidence, double margin, std::optional<long long> population,
                                     std::optional<long long> override_n) {
  ReviewPlan p;
  p.formula = required_sample_size(confidence, margin, population);
  p.chosen = p.formula;
  if (override_n) {
    if (*override_n < p.formula) {
      throw ValidationError("OVERRIDE_TOO_SMALL", "override " + std::to_string(*override_n) +
                                                      " is below the required " + std::to_string(p.formula));
    }
    p.chosen = *override_n;
    p.overridden = true;
  }
  return p;
}

struct LikertRating {
  std::string sample_id;
  std::string rater_id;
  int clarity = 0;
  int relevance = 0;
};

struct DimensionStats {
  std::size_t count = 0;
  std::optional<double> mean;
  std::optional<double> median;
  std::array<std::size_t, 5> distribution{};  // counts of 1..5
  std::size_t shared_samples = 0;             // samples with >= 2 raters
  std::size_t rater_pairs = 0;
  std::optional<double> exact_agreement;       // fraction of rater pairs
  std::optional<double> within_one_agreement;  // fraction with |a - b| <= 1
};

struct LikertSummary {
  DimensionStats clarity;
  DimensionStats relevance;
};

inline LikertSummary aggregate_likert(const std::vector<LikertRating>& ratings) {
  for (const auto& r : ratings) {
    if (r.clarity < 1 || r.clarity > 5 || r.relevance < 1 || r.relevance > 5) {
      throw ValidationError("BAD_RATING", "Likert scores must be in 1..5 (sample " + r.sample_id + ")");
    }
  }
  auto stats_for = [&](int LikertRating::*field) {
    DimensionStats d;
    std::vector<int> values;
    std::map<std::string, std::vector<int>> by_sample;
    for (const auto& r : ratings) {
      values.push_back(r.*field);
      by_sample[r.sample_id].push_back(r.*field);
      ++d.distribution[static_cast<std::size_t>(r.*field - 1)];
    }
    d.count = values.size();
    if (!values.empty()) {
      d.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
      std::sort(values.begin(), values.end());
      const auto mid = values.size() / 2;
      d.median = values.size() % 2 ? values[mid] : (values[mid - 1] + values[mid]) / 2.0;
    }
    std::size_t exact = 0, within = 0;
    for (const auto& [sample, scores] : by_sample) {
      if (scores.size() < 2) continue;
      ++d.shared_samples;
      for (std::size_t a = 0; a < scores.size(); ++a) {
        for (std::size_t b = a + 1; b < scores.size(); ++b) {
          ++d.rater_pairs;
          if (scores[a] == scores[b]) ++exact;
          if (std::abs(scores[a] - scores[b]) <= 1) ++within;
        }
      }
    }
    if (d.rater_pairs > 0) {
      d.exact_agreement = static_cast<double>(exact) / static_cast<double>(d.rater_pairs);
      d.within_one_agreement = static_cast<double>(within) / static_cast<double>(d.rater_pairs);
    }
    return d;
  };
  return {stats_for(&LikertRating::clarity), stats_for(&LikertRating::relevance)};
}

// ------------------------------------------------------------------
// Corpus evaluation
// ------------------------------------------------------------------

struct EvalPair {
  std::string id;
  std::string candidate;
  std::string reference;
};

struct MetricConfig {
  int bleu_max_n = 4;
  Smoothing smoothing = Smoothing::AddEpsilon;
  std::shared_ptr<const Embedder> embedder = std::make_shared<HashingEmbedder>();
  std::size_t threads = 0;  // 0 = hardware concurrency
};

struct PairScores {
  std::string id;
  double bleu = 0.0;
  PrfScore rouge_l;
  PrfScore embedding;
  bool empty_candidate = false;
  std::optional<std::string> error;  // excluded from corpus means when set
};

struct CorpusMeans {
  double bleu = 0.0;
  PrfScore rouge_l;
  PrfScore embedding;
};

struct MetricReport {
  std::vector<PairScores> per_pair;
  std::optional<CorpusMeans> corpus;  // absent when no pair could be scored
  std::size_t excluded = 0;
  nlohmann::ordered_json config;
};

inline PairScores score_pair(const EvalPair& pair, const MetricConfig& config) {
  PairScores s;
  s.id = pair.id;
  const auto cand = tokenize_code(pair.candidate);
  const auto ref = tokenize_code(pair.reference);
  if (ref.empty()) {
    s.error = "EMPTY_REFERENCE";
    return s;
  }
  s.empty_candidate = cand.empty();
  s.bleu = bleu(cand, ref, config.bleu_max_n, config.smoothing);
  s.rouge_l = rouge_l(cand, ref);
  try {
    s.embedding = embedding_score(cand, ref, *config.embedder);
  } catch (const Error& e) {
    s.error = e.what();
  }
  return s;
}

inline MetricReport evaluate_corpus(const std::vector<EvalPair>& pairs, const MetricConfig& config = {}) {
  if (!config.embedder) throw ConfigError("metric config has no embedder");
  MetricReport report;
  report.config["bleu_max_n"] = config.bleu_max_n;
  report.config["smoothing"] = smoothing_name(config.smoothing);
  report.config["smoothing_epsilon"] = kSmoothingEpsilon;
  report.config["rouge"] = "rouge-l (beta=1)";
  report.config["embedder"] = config.embedder->name();
  report.config["tokenizer"] = "lexical-code-v1";
  report.config["corpus_aggregation"] = "macro";

  report.per_pair.resize(pairs.size());
  std::size_t threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(pairs.size(), 1));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < pairs.size();) report.per_pair[i] = score_pair(pairs[i], config);
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  CorpusMeans sum;
  std::size_t n = 0;
  for (const auto& p : report.per_pair) {
    if (p.error) {
      ++report.excluded;
      continue;
    }
    ++n;
    sum.bleu += p.bleu;
    sum.rouge_l.precision += p.rouge_l.precision;
    sum.rouge_l.recall += p.rouge_l.recall;
    sum.rouge_l.f1 += p.rouge_l.f1;
    sum.embedding.precision += p.embedding.precision;
    sum.embedding.recall += p.embedding.recall;
    sum.embedding.f1 += p.embedding.f1;
  }
  if (n > 0) {
    const double k = static_cast<double>(n);
    report.corpus = CorpusMeans{sum.bleu / k,
                                {sum.rouge_l.precision / k, sum.rouge_l.recall / k, sum.rouge_l.f1 / k},
                                {sum.embedding.precision / k, sum.embedding.recall / k, sum.embedding.f1 / k}};
  }
  return report;
}

inline std::vector<EvalPair> read_pairs(std::istream& in) {
  std::vector<EvalPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EvalPair p;
      p.id = j.at("id").is_string() ? j["id"].get<std::string>() : j["id"].dump();
      p.candidate = j.at("candidate").get<std::string>();
      p.reference = j.at("reference").get<std::string>();
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("BAD_PAIR", "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline nlohmann::ordered_json to_json(const MetricReport& r) {
  auto prf = [](const PrfScore& s) {
    return nlohmann::ordered_json{{"p", s.precision}, {"r", s.recall}, {"f", s.f1}};
  };
  nlohmann::ordered_json j;
  j["config"] = r.config;
  auto& rows = j["per_pair"] = nlohmann::ordered_json::array();
  for (const auto& p : r.per_pair) {
    nlohmann::ordered_json row;
    row["id"] = p.id;
    if (p.error) {
      row["error"] = *p.error;
    } else {
      row["bleu"] = p.bleu;
      row["rouge_l_p"] = p.rouge_l.precision;
      row["rouge_l_r"] = p.rouge_l.recall;
      row["rouge_l_f"] = p.rouge_l.f1;
      row["emb_p"] = p.embedding.precision;
      row["emb_r"] = p.embedding.recall;
      row["emb_f"] = p.embedding.f1;
      if (p.empty_candidate) row["empty_candidate"] = true;
    }
    rows.push_back(std::move(row));
  }
  if (r.corpus) {
    j["corpus"] = {{"bleu", r.corpus->bleu}, {"rouge_l", prf(r.corpus->rouge_l)}, {"embedding", prf(r.corpus->embedding)}};
  } else {
    j["corpus"] = nullptr;
  }
  j["excluded"] = r.excluded;
  return j;
}

inline std::string render_report(const MetricReport& r) {
  std::ostringstream os;
  auto num = [](double v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  std::size_t id_width = 4;
  for (const auto& p : r.per_pair) id_width = std::max(id_width, p.id.size());
  auto row = [&](const std::string& id, const std::vector<std::string>& cells) {
    os << id << std::string(id_width - id.size(), ' ');
    for (const auto& c : cells) os << "  " << std::string(c.size() < 9 ? 9 - c.size() : 0, ' ') << c;
    os << '\n';
  };
  row("id", {"bleu", "rougeL_p", "rougeL_r", "rougeL_f", "emb_p", "emb_r", "emb_f"});
  for (const auto& p : r.per_pair) {
    if (p.error) {
      os << p.id << std::string(id_width - p.id.size(), ' ') << "  excluded: " << *p.error << '\n';
      continue;
    }
    row(p.id, {num(p.bleu), num(p.rouge_l.precision), num(p.rouge_l.recall), num(p.rouge_l.f1),
               num(p.embedding.precision), num(p.embedding.recall), num(p.embedding.f1)});
  }
  if (r.corpus) {
    const auto& c = *r.corpus;
    row("mean", {num(c.bleu), num(c.rouge_l.precision), num(c.rouge_l.recall), num(c.rouge_l.f1),
                 num(c.embedding.precision), num(c.embedding.recall), num(c.embedding.f1)});
  } else {
    row("mean", {"-", "-", "-", "-", "-", "-", "-"});
  }
  if (r.excluded) os << "excluded pairs: " << r.excluded << '\n';
  return os.str();
}

// ------------------------------------------------------------------
// Wild-test export
// ------------------------------------------------------------------

struct GeneratedSnippet {
  std::string snippet;
  std::string prompt;
};

struct WildEntry {
  long long question_id = 0;
  std::string url;
  std::string proposed_snippet;
  std::string prompt;

  friend bool operator==(const WildEntry&, const WildEntry&) = default;
};

struct WildBatch {
  std::vector<WildEntry> entries;
  std::vector<std::string> warnings;
};

inline std::string question_url(long long id) { return "https://stackoverflow.com/questions/" + std::to_string(id); }

// First k questions (input order) that lack code and have a generated
// snippet. No network access; the file is submitted by hand.
inline WildBatch export_wild_test_batch(const std::vector<ingest::QuestionPost>& questions,
                                        const std::map<long long, GeneratedSnippet>& results, std::size_t k = 50) {
  WildBatch batch;
  for (const auto& q : questions) {
    if (batch.entries.size() >= k) break;
    if (!q.code_blocks.empty()) {
      batch.warnings.push_back("question " + std::to_string(q.id) + " already has code; skipped");
      continue;
    }
    auto it = results.find(q.id);
    if (it == results.end() || trim(it->second.snippet).empty()) {
      batch.warnings.push_back("question " + std::to_string(q.id) + " has no generated snippet; skipped");
      continue;
    }
    batch.entries.push_back({q.id, question_url(q.id), it->second.snippet, it->second.prompt});
  }
  if (batch.entries.size() < k) {
    batch.warnings.push_back("only " + std::to_string(batch.entries.size()) + " eligible questions for " +
                             std::to_string(k) + " requested entries");
  }
  return batch;
}

inline nlohmann::ordered_json to_json(const WildEntry& e) {
  nlohmann::ordered_json j;
  j["question_id"] = e.question_id;
  j["url"] = e.url;
  j["proposed_snippet"] = e.proposed_snippet;
  j["prompt"] = e.prompt;
  return j;
}

inline void write_wild_batch(std::ostream& out, const WildBatch& batch) {
  for (const auto& e : batch.entries) out << to_json(e).dump() << '\n';
}

inline std::vector<WildEntry> read_wild_batch(std::istream& in) {
  std::vector<WildEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("question_id").get<long long>(), j.at("url").get<std::string>(),
                     j.at("proposed_snippet").get<std::string>(), j.at("prompt").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("BAD_ENTRY", e.what());
    }
  }
  return out;
}

}  // namespace gencnippet::eval
