#pragma once

// Stack Exchange data-dump ingestion: a streaming reader for Posts.xml,
// question selection by language tag and HTML code-block extraction.

#include <array>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "gencnippet/common.hpp"

namespace gencnippet::ingest {

// ------------------------------------------------------------------
// Entities
// ------------------------------------------------------------------

namespace detail {

inline void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Decodes one entity starting at s[pos] == '&'. On success appends the
// decoded text, advances pos past ';' and returns true.
inline bool decode_entity(std::string_view s, std::size_t& pos, std::string& out, bool html) {
  const auto semi = s.find(';', pos);
  if (semi == std::string_view::npos || semi - pos > 12) return false;
  const auto name = s.substr(pos + 1, semi - pos - 1);
  if (name.empty()) return false;
  if (name[0] == '#') {
    std::uint32_t cp = 0;
    const bool hex = name.size() > 1 && (name[1] == 'x' || name[1] == 'X');
    const auto digits = name.substr(hex ? 2 : 1);
    if (digits.empty()) return false;
    for (char c : digits) {
      int v = -1;
      if (c >= '0' && c <= '9') v = c - '0';
      else if (hex && c >= 'a' && c <= 'f') v = c - 'a' + 10;
      else if (hex && c >= 'A' && c <= 'F') v = c - 'A' + 10;
      if (v < 0) return false;
      cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
      if (cp > 0x10FFFF) return false;
    }
    append_utf8(out, cp);
  } else if (name == "lt") {
    out.push_back('<');
  } else if (name == "gt") {
    out.push_back('>');
  } else if (name == "amp") {
    out.push_back('&');
  } else if (name == "quot") {
    out.push_back('"');
  } else if (name == "apos") {
    out.push_back('\'');
  } else if (html && name == "nbsp") {
    out.push_back(' ');
  } else {
    return false;
  }
  pos = semi + 1;
  return true;
}

}  // namespace detail

// XML attribute decoding. Unknown entities are an error (returns nullopt).
inline std::optional<std::string> decode_xml_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] == '&') {
      if (!detail::decode_entity(s, i, out, false)) return std::nullopt;
    } else {
      out.push_back(s[i++]);
    }
  }
  return out;
}

// HTML text decoding. Unknown entities are kept literally.
inline std::string decode_html_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] == '&' && detail::decode_entity(s, i, out, true)) continue;
    out.push_back(s[i++]);
  }
  return out;
}

// ------------------------------------------------------------------
// Raw rows
// ------------------------------------------------------------------

struct RawPostRow {
  long long id = 0;
  int post_type = 0;
  int score = 0;
  std::optional<Timestamp> creation_date;
  std::vector<std::string> tags;
  std::string title;
  std::string body_html;
  std::uint64_t byte_offset = 0;  // offset of the row element in the source
};

// A row that could not be turned into a RawPostRow. The stream continues.
struct RowError {
  std::uint64_t byte_offset = 0;
  std::string message;
};

using PostRecord = std::variant<RawPostRow, RowError>;

// Fatal: the document itself is not well formed.
class XmlParseError : public Error {
 public:
  XmlParseError(std::uint64_t offset, const std::string& message)
      : Error("XML_PARSE_ERROR", "malformed XML at byte " + std::to_string(offset) + ": " + message),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// "<python><pandas>" (classic dumps) or "|python|pandas|" (2024+ dumps).
inline std::vector<std::string> parse_tags(std::string_view raw) {
  std::vector<std::string> tags;
  std::string current;
  auto flush = [&] {
    auto t = trim(current);
    if (!t.empty()) tags.push_back(to_lower(t));
    current.clear();
  };
  for (char c : raw) {
    if (c == '<' || c == '>' || c == '|') {
      flush();
    } else {
      current.push_back(c);
    }
  }
  flush();
  return tags;
}

struct StreamStats {
  std::uint64_t bytes_consumed = 0;
  std::uint64_t rows_emitted = 0;
  std::uint64_t row_errors = 0;
  std::size_t peak_retained_rows = 0;
  std::size_t peak_buffer_bytes = 0;
};

// Pull parser over a Posts.xml stream. Holds at most one parsed row and one
// read chunk plus the element being scanned, independent of file size.
class PostStream {
 public:
  static constexpr std::size_t kMaxRetainedRows = 1;
  static constexpr std::size_t kDefaultChunkBytes = 64 * 1024;

  explicit PostStream(std::istream& in, std::size_t chunk_bytes = kDefaultChunkBytes)
      : in_(in), chunk_bytes_(chunk_bytes) {}

  // Next row or row error; nullopt once the root element has been closed.
  // Throws XmlParseError on malformed documents.
  std::optional<PostRecord> next() {
    while (true) {
      if (pending_) {
        PostRecord out = std::move(*pending_);
        pending_.reset();
        return out;
      }
      if (finished_) return std::nullopt;
      scan_one();
    }
  }

  const StreamStats& stats() const noexcept { return stats_; }

  // Range-for support.
  class iterator {
   public:
    using value_type = PostRecord;
    using difference_type = std::ptrdiff_t;

    iterator() = default;
    explicit iterator(PostStream* s) : stream_(s) { ++*this; }

    const PostRecord& operator*() const { return *current_; }
    iterator& operator++() {
      current_ = stream_->next();
      if (!current_) stream_ = nullptr;
      return *this;
    }
    void operator++(int) { ++*this; }
    bool operator==(const iterator& o) const { return stream_ == o.stream_; }

   private:
    PostStream* stream_ = nullptr;
    std::optional<PostRecord> current_;
  };

  iterator begin() { return iterator{this}; }
  iterator end() { return iterator{}; }

 private:
  std::uint64_t offset_at(std::size_t p) const { return base_offset_ + p; }

  // Makes sure buf_ holds at least `n` bytes past pos_. False on EOF.
  bool fill(std::size_t n) {
    while (buf_.size() - pos_ < n) {
      if (eof_) return false;
      if (pos_ > chunk_bytes_) {
        buf_.erase(0, pos_);
        base_offset_ += pos_;
        pos_ = 0;
      }
      const auto old = buf_.size();
      buf_.resize(old + chunk_bytes_);
      in_.read(buf_.data() + old, static_cast<std::streamsize>(chunk_bytes_));
      const auto got = static_cast<std::size_t>(in_.gcount());
      buf_.resize(old + got);
      if (got < chunk_bytes_) eof_ = true;
      stats_.peak_buffer_bytes = std::max(stats_.peak_buffer_bytes, buf_.capacity());
    }
    return true;
  }

  // Position of `needle` at or after pos_ + from, reading more input as needed.
  std::size_t find_ahead(std::string_view needle, std::size_t from) {
    std::size_t rel = from;
    while (true) {
      const auto hit = std::string_view(buf_).find(needle, pos_ + rel);
      if (hit != std::string_view::npos) return hit;
      const auto avail = buf_.size() - pos_;
      if (avail >= needle.size()) rel = std::max(rel, avail - needle.size() + 1);
      if (!fill(avail + 1)) return std::string_view::npos;
    }
  }

  // End of a start tag: first '>' not inside a quoted attribute value.
  std::size_t find_tag_end() {
    std::size_t i = pos_ + 1;
    char quote = 0;
    while (true) {
      if (i >= buf_.size()) {
        const auto rel = i - pos_;
        if (!fill(rel + 1)) return std::string_view::npos;
        i = pos_ + rel;
      }
      const char c = buf_[i];
      if (quote) {
        if (c == quote) quote = 0;
      } else if (c == '"' || c == '\'') {
        quote = c;
      } else if (c == '>') {
        return i;
      } else if (c == '<') {
        throw XmlParseError(offset_at(i), "'<' inside tag");
      }
      ++i;
    }
  }

  void scan_one() {
    // Skip character data between elements; only whitespace is allowed.
    while (true) {
      if (!fill(1)) {
        if (!root_seen_) throw XmlParseError(offset_at(pos_), "no root element");
        throw XmlParseError(offset_at(pos_), "unexpected end of input inside <" + root_name_ + ">");
      }
      const char c = buf_[pos_];
      if (c == '<') break;
      if (!std::isspace(static_cast<unsigned char>(c))) {
        throw XmlParseError(offset_at(pos_), "unexpected character data");
      }
      ++pos_;
    }
    const auto start = offset_at(pos_);
    fill(4);
    const std::string_view head(buf_.data() + pos_, std::min<std::size_t>(4, buf_.size() - pos_));
    if (head.starts_with("<?")) {
      skip_past("?>");
    } else if (head.starts_with("<!--")) {
      skip_past("-->");
    } else if (head.starts_with("<!")) {
      skip_past(">");
    } else if (head.starts_with("</")) {
      const auto close = find_ahead(">", 2);
      if (close == std::string_view::npos) throw XmlParseError(start, "unterminated end tag");
      const auto name = std::string(trim(std::string_view(buf_).substr(pos_ + 2, close - pos_ - 2)));
      if (open_.empty() || open_.back() != name) {
        throw XmlParseError(start, "mismatched end tag </" + name + ">");
      }
      open_.pop_back();
      advance_to(close + 1);
      if (open_.empty()) finish_document();
    } else {
      const auto close = find_tag_end();
      if (close == std::string_view::npos) throw XmlParseError(start, "unterminated start tag");
      std::string_view tag(buf_.data() + pos_ + 1, close - pos_ - 1);
      const bool self_closing = !tag.empty() && tag.back() == '/';
      if (self_closing) tag.remove_suffix(1);
      handle_start_tag(tag, self_closing, start);
      advance_to(close + 1);
      if (open_.empty() && root_seen_) finish_document();
    }
  }

  void skip_past(std::string_view terminator) {
    const auto start = offset_at(pos_);
    const auto hit = find_ahead(terminator, 1);
    if (hit == std::string_view::npos) throw XmlParseError(start, "unterminated markup");
    advance_to(hit + terminator.size());
  }

  void advance_to(std::size_t p) {
    stats_.bytes_consumed += p - pos_;
    pos_ = p;
  }

  void finish_document() {
    // Only whitespace, comments and processing instructions may follow.
    while (fill(1)) {
      const char c = buf_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
        continue;
      }
      fill(4);
      const std::string_view head(buf_.data() + pos_, std::min<std::size_t>(4, buf_.size() - pos_));
      if (head.starts_with("<!--")) {
        skip_past("-->");
      } else if (head.starts_with("<?")) {
        skip_past("?>");
      } else {
        throw XmlParseError(offset_at(pos_), "content after root element");
      }
    }
    finished_ = true;
  }

  void handle_start_tag(std::string_view tag, bool self_closing, std::uint64_t offset) {
    std::size_t i = 0;
    while (i < tag.size() && !std::isspace(static_cast<unsigned char>(tag[i]))) ++i;
    const std::string name(tag.substr(0, i));
    if (name.empty()) throw XmlParseError(offset, "empty element name");

    if (!root_seen_) {
      root_seen_ = true;
      root_name_ = name;
      if (!self_closing) open_.push_back(name);
      return;
    }
    if (open_.empty()) throw XmlParseError(offset, "second root element <" + name + ">");

    std::map<std::string, std::string, std::less<>> attrs;
    parse_attributes(tag.substr(i), offset, attrs);
    if (open_.size() == 1 && name == "row") emit_row(attrs, offset);
    if (!self_closing) open_.push_back(name);
  }

  static void parse_attributes(std::string_view s, std::uint64_t offset,
                               std::map<std::string, std::string, std::less<>>& attrs) {
    std::size_t i = 0;
    while (true) {
      while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      if (i >= s.size()) return;
      const auto name_start = i;
      while (i < s.size() && s[i] != '=' && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      const std::string name(s.substr(name_start, i - name_start));
      while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      if (i >= s.size() || s[i] != '=') throw XmlParseError(offset, "attribute '" + name + "' without value");
      ++i;
      while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      if (i >= s.size() || (s[i] != '"' && s[i] != '\'')) {
        throw XmlParseError(offset, "unquoted value for attribute '" + name + "'");
      }
      const char quote = s[i++];
      const auto end = s.find(quote, i);
      if (end == std::string_view::npos) throw XmlParseError(offset, "unterminated attribute value");
      auto value = decode_xml_entities(s.substr(i, end - i));
      if (!value) throw XmlParseError(offset, "bad entity in attribute '" + name + "'");
      if (!attrs.emplace(name, std::move(*value)).second) {
        throw XmlParseError(offset, "duplicate attribute '" + name + "'");
      }
      i = end + 1;
    }
  }

  static std::optional<long long> to_integer(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    long long v = 0;
    bool neg = false;
    std::size_t i = 0;
    if (s[0] == '-') {
      neg = true;
      i = 1;
    }
    if (i == s.size()) return std::nullopt;
    for (; i < s.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
      v = v * 10 + (s[i] - '0');
    }
    return neg ? -v : v;
  }

  void emit_row(std::map<std::string, std::string, std::less<>>& attrs, std::uint64_t offset) {
    auto fail = [&](std::string message) {
      ++stats_.row_errors;
      pending_ = RowError{offset, std::move(message)};
      note_retained();
    };
    auto get = [&](std::string_view key) -> const std::string* {
      auto it = attrs.find(key);
      return it == attrs.end() ? nullptr : &it->second;
    };

    RawPostRow row;
    row.byte_offset = offset;
    const auto* id = get("Id");
    if (!id) return fail("missing Id attribute");
    const auto parsed_id = to_integer(*id);
    if (!parsed_id || *parsed_id <= 0) return fail("invalid Id '" + *id + "'");
    row.id = *parsed_id;
    const auto* type = get("PostTypeId");
    if (!type) return fail("missing PostTypeId attribute (Id " + *id + ")");
    const auto parsed_type = to_integer(*type);
    if (!parsed_type) return fail("invalid PostTypeId '" + *type + "'");
    row.post_type = static_cast<int>(*parsed_type);
    if (const auto* score = get("Score")) {
      if (auto v = to_integer(*score)) row.score = static_cast<int>(*v);
    }
    if (const auto* date = get("CreationDate")) row.creation_date = parse_iso8601(*date);
    if (const auto* tags = get("Tags")) row.tags = parse_tags(*tags);
    if (auto it = attrs.find("Title"); it != attrs.end()) row.title = std::move(it->second);
    if (auto it = attrs.find("Body"); it != attrs.end()) row.body_html = std::move(it->second);

    ++stats_.rows_emitted;
    pending_ = std::move(row);
    note_retained();
  }

  // Rows parsed but not yet handed to the caller.
  std::size_t retained_rows() const noexcept { return pending_.has_value() ? 1 : 0; }
  void note_retained() { stats_.peak_retained_rows = std::max(stats_.peak_retained_rows, retained_rows()); }

  std::istream& in_;
  std::size_t chunk_bytes_;
  std::string buf_;
  std::size_t pos_ = 0;
  std::uint64_t base_offset_ = 0;
  bool eof_ = false;
  bool root_seen_ = false;
  bool finished_ = false;
  std::string root_name_;
  std::vector<std::string> open_;
  std::optional<PostRecord> pending_;
  StreamStats stats_;
};

// ------------------------------------------------------------------
// HTML code-block extraction
// ------------------------------------------------------------------

struct Extraction {
  std::string prose;
  std::vector<std::string> code_blocks;
  std::vector<std::string> warnings;
};

namespace detail {

inline bool is_block_tag(std::string_view name) {
  static constexpr std::array<std::string_view, 22> kBlock = {
      "p",  "br", "div", "li", "ul", "ol", "h1", "h2",         "h3",    "h4", "h5",
      "h6", "hr", "blockquote", "table", "tr", "td", "th", "pre", "dl", "dd", "dt"};
  return std::find(kBlock.begin(), kBlock.end(), name) != kBlock.end();
}

}  // namespace detail

// Splits an (unescaped) HTML body into plain prose and the contents of its
// <pre> blocks. Inline <code> spans stay in the prose.
inline Extraction extract_code_blocks(std::string_view html) {
  Extraction out;
  std::string prose;
  std::string code;
  int pre_depth = 0;

  std::size_t i = 0;
  while (i < html.size()) {
    const char c = html[i];
    if (c != '<') {
      const auto next = html.find('<', i);
      const auto text = html.substr(i, next == std::string_view::npos ? html.size() - i : next - i);
      (pre_depth > 0 ? code : prose) += decode_html_entities(text);
      i += text.size();
      continue;
    }
    if (html.substr(i).starts_with("<!--")) {
      const auto end = html.find("-->", i + 4);
      if (end == std::string_view::npos) {
        out.warnings.push_back("unterminated comment");
        break;
      }
      i = end + 3;
      continue;
    }
    const auto close = html.find('>', i + 1);
    const auto reopen = html.find('<', i + 1);
    if (close == std::string_view::npos || (reopen != std::string_view::npos && reopen < close)) {
      // Not a tag; treat the '<' as text.
      out.warnings.push_back("stray '<' at offset " + std::to_string(i));
      (pre_depth > 0 ? code : prose).push_back('<');
      ++i;
      continue;
    }
    auto tag = html.substr(i + 1, close - i - 1);
    const bool closing = !tag.empty() && tag[0] == '/';
    if (closing) tag.remove_prefix(1);
    std::size_t n = 0;
    while (n < tag.size() && !std::isspace(static_cast<unsigned char>(tag[n])) && tag[n] != '/') ++n;
    const auto name = to_lower(tag.substr(0, n));
    i = close + 1;

    if (name == "pre") {
      if (!closing) {
        if (pre_depth == 0) {
          code.clear();
          prose.push_back(' ');
        } else {
          out.warnings.push_back("nested <pre>");
        }
        ++pre_depth;
      } else if (pre_depth == 0) {
        out.warnings.push_back("unmatched </pre>");
        prose.push_back(' ');
      } else if (--pre_depth == 0) {
        out.code_blocks.push_back(std::move(code));
        code.clear();
      }
      continue;
    }
    if (pre_depth > 0) {
      if (name == "br") code.push_back('\n');
      continue;
    }
    if (detail::is_block_tag(name)) prose.push_back(' ');
  }
  if (pre_depth > 0) {
    out.warnings.push_back("unclosed <pre>");
    out.code_blocks.push_back(std::move(code));
  }
  out.prose = normalize_whitespace(prose);
  return out;
}

// ------------------------------------------------------------------
// Questions
// ------------------------------------------------------------------

struct QuestionPost {
  long long id = 0;
  std::string title;
  std::string prose;
  std::vector<std::string> code_blocks;
  Language language = Language::Java;
  bool ambiguous_language = false;  // both java and python tags present
  std::vector<std::string> tags;
  int score = 0;
  Timestamp creation_date{};
  std::vector<std::string> warnings;
};

inline const std::vector<Language>& default_languages() {
  static const std::vector<Language> kDefault{Language::Java, Language::Python};
  return kDefault;
}

// Question iff post_type == 1 and a tag names one of `languages`. The first
// language in `languages` order wins when several match. Rows without a
// parseable CreationDate are rejected.
inline std::optional<QuestionPost> parse_question(const RawPostRow& row,
                                                  const std::vector<Language>& languages) {
  if (row.post_type != 1 || !row.creation_date) return std::nullopt;
  std::optional<Language> chosen;
  int matches = 0;
  for (auto lang : languages) {
    if (std::find(row.tags.begin(), row.tags.end(), tag_name(lang)) != row.tags.end()) {
      if (!chosen) chosen = lang;
      ++matches;
    }
  }
  if (!chosen) return std::nullopt;

  auto extracted = extract_code_blocks(row.body_html);
  QuestionPost q;
  q.id = row.id;
  q.title = row.title;
  q.prose = std::move(extracted.prose);
  q.code_blocks = std::move(extracted.code_blocks);
  q.warnings = std::move(extracted.warnings);
  q.language = *chosen;
  q.ambiguous_language = matches > 1;
  q.tags = row.tags;
  q.score = row.score;
  q.creation_date = *row.creation_date;
  return q;
}

inline nlohmann::ordered_json to_json(const QuestionPost& q) {
  nlohmann::ordered_json j;
  j["id"] = q.id;
  j["title"] = q.title;
  j["prose"] = q.prose;
  j["code_blocks"] = q.code_blocks;
  j["language"] = tag_name(q.language);
  j["ambiguous_language"] = q.ambiguous_language;
  j["tags"] = q.tags;
  j["score"] = q.score;
  j["creation_date"] = format_timestamp(q.creation_date);
  if (!q.warnings.empty()) j["warnings"] = q.warnings;
  return j;
}

inline QuestionPost question_from_json(const nlohmann::json& j) {
  try {
    QuestionPost q;
    q.id = j.at("id").get<long long>();
    q.title = j.value("title", "");
    q.prose = j.at("prose").get<std::string>();
    q.code_blocks = j.value("code_blocks", std::vector<std::string>{});
    q.language = require_language(j.at("language").get<std::string>());
    q.ambiguous_language = j.value("ambiguous_language", false);
    q.tags = j.value("tags", std::vector<std::string>{});
    q.score = j.value("score", 0);
    const auto date = j.at("creation_date").get<std::string>();
    auto ts = parse_iso8601(date);
    if (!ts) throw ValidationError("BAD_DATE", "invalid creation_date '" + date + "'");
    q.creation_date = *ts;
    q.warnings = j.value("warnings", std::vector<std::string>{});
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("BAD_RECORD", std::string("invalid question record: ") + e.what());
  }
}

// Reads a QuestionPost JSONL file; blank lines are skipped.
inline std::vector<QuestionPost> read_questions(std::istream& in) {
  std::vector<QuestionPost> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("BAD_JSON", "line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(question_from_json(j));
  }
  return out;
}

// ------------------------------------------------------------------
// Funnel summary
// ------------------------------------------------------------------

struct StageCounts {
  long long with_code = 0;
  long long needing_code = 0;
  long long final_selected = 0;

  StageCounts& operator+=(const StageCounts& o) {
    with_code += o.with_code;
    needing_code += o.needing_code;
    final_selected += o.final_selected;
    return *this;
  }
  friend bool operator==(const StageCounts&, const StageCounts&) = default;
};

// Per-question funnel membership. Stages are cumulative.
struct StageFlags {
  bool with_code = false;
  bool needs_code = false;
  bool final_selected = false;
};

struct DatasetSummary {
  std::array<StageCounts, 2> per_language{};  // indexed by Language

  StageCounts& operator[](Language lang) { return per_language[static_cast<std::size_t>(lang)]; }
  const StageCounts& operator[](Language lang) const {
    return per_language[static_cast<std::size_t>(lang)];
  }

  StageCounts totals() const {
    StageCounts t;
    for (const auto& c : per_language) t += c;
    return t;
  }

  // Associative combine of partial summaries.
  DatasetSummary& operator+=(const DatasetSummary& o) {
    for (std::size_t i = 0; i < per_language.size(); ++i) per_language[i] += o.per_language[i];
    return *this;
  }
  friend DatasetSummary operator+(DatasetSummary a, const DatasetSummary& b) { return a += b; }
  friend bool operator==(const DatasetSummary&, const DatasetSummary&) = default;
};

inline DatasetSummary summarize(const std::vector<QuestionPost>& questions,
                                const std::vector<StageFlags>& flags) {
  if (flags.size() != questions.size()) {
    throw ValidationError("FLAGS_MISMATCH", "stage flags cover " + std::to_string(flags.size()) +
                                                " of " + std::to_string(questions.size()) + " questions");
  }
  DatasetSummary s;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    auto& c = s[questions[i].language];
    const auto& f = flags[i];
    if (!f.with_code) continue;
    ++c.with_code;
    if (!f.needs_code) continue;
    ++c.needing_code;
    if (f.final_selected) ++c.final_selected;
  }
  return s;
}

struct SummaryHeaders {
  std::string with_code = "Questions with Code Snippets";
  std::string needing_code = "Questions Needing Code Snippets";
  std::string final_selected = "Questions with Positive Score and Single Code Snippet";
};

// Three-column text table with Java, Python and Total rows.
inline std::string render_summary(const DatasetSummary& s, const SummaryHeaders& headers = {}) {
  const std::array<std::string, 4> head = {"", headers.with_code, headers.needing_code,
                                           headers.final_selected};
  std::vector<std::array<std::string, 4>> rows;
  auto add = [&](std::string label, const StageCounts& c) {
    rows.push_back({std::move(label), with_thousands(c.with_code), with_thousands(c.needing_code),
                    with_thousands(c.final_selected)});
  };
  add("Java", s[Language::Java]);
  add("Python", s[Language::Python]);
  add("Total", s.totals());

  std::array<std::size_t, 4> width{};
  for (std::size_t col = 0; col < 4; ++col) {
    width[col] = head[col].size();
    for (const auto& r : rows) width[col] = std::max(width[col], r[col].size());
  }
  std::ostringstream os;
  auto line = [&](const std::array<std::string, 4>& cells) {
    for (std::size_t col = 0; col < 4; ++col) {
      if (col > 0) os << " | ";
      const auto pad = std::string(width[col] - cells[col].size(), ' ');
      if (col == 0) os << cells[col] << pad;
      else os << pad << cells[col];
    }
    os << '\n';
  };
  line(head);
  std::size_t total_width = 0;
  for (auto w : width) total_width += w;
  os << std::string(total_width + 9, '-') << '\n';
  for (const auto& r : rows) line(r);
  return os.str();
}

inline nlohmann::ordered_json to_json(const DatasetSummary& s) {
  auto counts = [](const StageCounts& c) {
    nlohmann::ordered_json j;
    j["with_code"] = c.with_code;
    j["needing_code"] = c.needing_code;
    j["final_selected"] = c.final_selected;
    return j;
  };
  nlohmann::ordered_json j;
  j["java"] = counts(s[Language::Java]);
  j["python"] = counts(s[Language::Python]);
  j["total"] = counts(s.totals());
  return j;
}

// ------------------------------------------------------------------
// Pipeline
// ------------------------------------------------------------------

struct IngestStats {
  std::uint64_t rows = 0;
  std::uint64_t questions = 0;
  std::uint64_t row_errors = 0;
  DatasetSummary summary;  // with_code column only
  StreamStats stream;
};

// Streams `in`, calls `on_question` for every selected question and
// `on_error` for every row error. Stops after `max_rows` rows when nonzero.
inline IngestStats ingest_posts(std::istream& in, const std::vector<Language>& languages,
                                const std::function<void(const QuestionPost&)>& on_question,
                                const std::function<void(const RowError&)>& on_error = {},
                                std::uint64_t max_rows = 0) {
  IngestStats stats;
  PostStream stream(in);
  while (auto rec = stream.next()) {
    if (auto* err = std::get_if<RowError>(&*rec)) {
      ++stats.row_errors;
      if (on_error) on_error(*err);
      continue;
    }
    ++stats.rows;
    const auto& row = std::get<RawPostRow>(*rec);
    if (auto q = parse_question(row, languages)) {
      ++stats.questions;
      if (!q->code_blocks.empty()) ++stats.summary[q->language].with_code;
      on_question(*q);
    }
    if (max_rows != 0 && stats.rows >= max_rows) break;
  }
  stats.stream = stream.stats();
  return stats;
}

}  // namespace gencnippet::ingest
