#pragma once

// Builders for synthetic dump rows, questions and records shared by the
// unit tests and the acceptance binary.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "gencnippet/dataset.hpp"
#include "gencnippet/ingest.hpp"

namespace fixtures {

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      case '\n': out += "&#xA;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

struct Row {
  long long id = 1;
  int post_type = 1;
  int score = 1;
  std::string date = "2023-06-01T10:00:00.000";
  std::string tags = "<python>";
  std::string title = "title";
  std::string body = "<p>body</p>";
};

inline std::string row_xml(const Row& r) {
  return "  <row Id=\"" + std::to_string(r.id) + "\" PostTypeId=\"" + std::to_string(r.post_type) +
         "\" Score=\"" + std::to_string(r.score) + "\" CreationDate=\"" + r.date + "\" Tags=\"" +
         xml_escape(r.tags) + "\" Title=\"" + xml_escape(r.title) + "\" Body=\"" + xml_escape(r.body) + "\" />\n";
}

inline std::string document(const std::vector<Row>& rows) {
  std::string doc = "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<posts>\n";
  for (const auto& r : rows) doc += row_xml(r);
  doc += "</posts>\n";
  return doc;
}

inline gencnippet::ingest::QuestionPost question(long long id, gencnippet::Language lang, int score,
                                                 std::size_t code_blocks, std::string prose = "How do I fix this?") {
  gencnippet::ingest::QuestionPost q;
  q.id = id;
  q.title = "q" + std::to_string(id);
  q.prose = std::move(prose);
  q.language = lang;
  q.tags = {std::string(gencnippet::tag_name(lang))};
  q.score = score;
  q.creation_date = *gencnippet::parse_iso8601("2023-06-01");
  for (std::size_t i = 0; i < code_blocks; ++i) q.code_blocks.push_back("x = " + std::to_string(i));
  return q;
}

inline std::vector<gencnippet::dataset::TrainingRecord> records(std::size_t n_java, std::size_t n_python,
                                                                long long first_id = 1) {
  std::vector<gencnippet::dataset::TrainingRecord> out;
  long long id = first_id;
  auto add = [&](gencnippet::Language lang, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i, ++id) {
      gencnippet::dataset::TrainingRecord r;
      r.question_id = id;
      r.language = lang;
      r.creation_date = "2023-06-01";
      r.input_text = gencnippet::dataset::format_input("describe " + std::to_string(id), lang,
                                                        *gencnippet::parse_iso8601("2023-06-01"));
      r.output_text = gencnippet::dataset::format_output("code " + std::to_string(id));
      out.push_back(std::move(r));
    }
  };
  add(gencnippet::Language::Java, n_java);
  add(gencnippet::Language::Python, n_python);
  return out;
}

}  // namespace fixtures
