#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace psyprobe::text {

std::string trim(std::string_view s);
bool is_blank(std::string_view s);
std::string lower_ascii(std::string_view s);

/// Decodes UTF-8 into code points. Invalid bytes are passed through as
/// single code points so the function is total.
std::vector<char32_t> decode_utf8(std::string_view s);
std::string encode_utf8(char32_t cp);

/// One sentence of a text, as a byte range into the source. Leading
/// whitespace is excluded; trailing terminal punctuation and closing quotes
/// are included.
struct SentenceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool question = false;

  std::string_view view(std::string_view source) const { return source.substr(begin, end - begin); }
  bool operator==(const SentenceSpan&) const = default;
};

/// Punctuation-based segmentation on {. ! ? 。 ？}. Runs of terminators
/// ("...", "??") close a single sentence. A '.' between two digits is not a
/// terminator. A sentence is a question iff its last terminator is ? or ？.
std::vector<SentenceSpan> split_sentences(std::string_view s);
std::vector<SentenceSpan> detect_question_sentences(std::string_view s);
std::size_t count_sentences(std::string_view s);
std::size_t count_question_sentences(std::string_view s);

/// Exactly one sentence, and that sentence is a question.
bool is_single_question(std::string_view s);

std::vector<std::string> tokenize_whitespace(std::string_view s);
/// One token per non-whitespace code point (for Korean and other
/// unsegmented scripts).
std::vector<std::string> tokenize_chars(std::string_view s);

/// Finds `term` in `haystack`: ASCII letters compare case-insensitively and
/// terms that start/end with an ASCII letter or digit must sit on a word
/// boundary. Non-ASCII terms match as plain substrings. Returns byte offsets.
std::vector<std::size_t> find_term(std::string_view haystack, std::string_view term);
bool contains_term(std::string_view haystack, std::string_view term);

}  // namespace psyprobe::text
