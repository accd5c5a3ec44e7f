#include "psyprobe/text.hpp"

#include <algorithm>

namespace psyprobe::text {

namespace {

bool is_space_byte(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_space_cp(char32_t cp) { return cp < 0x80 ? is_space_byte(static_cast<unsigned char>(cp)) : cp == 0x3000 || cp == 0xA0; }

bool is_ascii_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_ascii_digit(char32_t cp) { return cp >= '0' && cp <= '9'; }

bool is_terminal(char32_t cp) { return cp == '.' || cp == '!' || cp == '?' || cp == 0x3002 || cp == 0xFF1F; }

bool is_question_mark(char32_t cp) { return cp == '?' || cp == 0xFF1F; }

bool is_closer(char32_t cp) {
  return cp == '"' || cp == '\'' || cp == ')' || cp == ']' || cp == 0x201D || cp == 0x2019 || cp == 0x300D ||
         cp == 0x300F;
}

char fold(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

// Decodes one code point starting at s[i]; returns its byte length.
std::size_t decode_one(std::string_view s, std::size_t i, char32_t& out) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) {
    return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  if (b0 < 0x80) {
    out = b0;
    return 1;
  }
  if ((b0 & 0xE0) == 0xC0 && cont(1)) {
    out = ((b0 & 0x1F) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3F);
    return 2;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    out = ((b0 & 0x0F) << 12) | ((static_cast<unsigned char>(s[i + 1]) & 0x3F) << 6) |
          (static_cast<unsigned char>(s[i + 2]) & 0x3F);
    return 3;
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    out = ((b0 & 0x07) << 18) | ((static_cast<unsigned char>(s[i + 1]) & 0x3F) << 12) |
          ((static_cast<unsigned char>(s[i + 2]) & 0x3F) << 6) | (static_cast<unsigned char>(s[i + 3]) & 0x3F);
    return 4;
  }
  out = b0;
  return 1;
}

struct CodePoint {
  char32_t cp;
  std::size_t begin;
  std::size_t end;
};

std::vector<CodePoint> code_points(std::string_view s) {
  std::vector<CodePoint> out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    char32_t cp = 0;
    const std::size_t n = decode_one(s, i, cp);
    out.push_back({cp, i, i + n});
    i += n;
  }
  return out;
}

}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space_byte(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space_byte(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool is_blank(std::string_view s) {
  for (const auto& c : code_points(s)) {
    if (!is_space_cp(c.cp)) return false;
  }
  return true;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), fold);
  return out;
}

std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  for (const auto& c : code_points(s)) out.push_back(c.cp);
  return out;
}

std::string encode_utf8(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return out;
}

std::vector<SentenceSpan> split_sentences(std::string_view s) {
  const auto cps = code_points(s);
  std::vector<SentenceSpan> out;
  std::size_t i = 0;
  const std::size_t n = cps.size();
  while (i < n) {
    while (i < n && is_space_cp(cps[i].cp)) ++i;
    if (i >= n) break;
    const std::size_t begin = cps[i].begin;
    bool closed = false;
    while (i < n) {
      const char32_t cp = cps[i].cp;
      const bool decimal_point = cp == '.' && i > 0 && i + 1 < n && is_ascii_digit(cps[i - 1].cp) &&
                                 is_ascii_digit(cps[i + 1].cp);
      if (is_terminal(cp) && !decimal_point) {
        char32_t last = cp;
        ++i;
        while (i < n && is_terminal(cps[i].cp)) last = cps[i++].cp;
        while (i < n && is_closer(cps[i].cp)) ++i;
        out.push_back({begin, cps[i - 1].end, is_question_mark(last)});
        closed = true;
        break;
      }
      ++i;
    }
    if (!closed) {
      std::size_t end = cps[n - 1].end;
      std::size_t k = n;
      while (k > 0 && is_space_cp(cps[k - 1].cp)) end = cps[--k].begin;
      out.push_back({begin, end, false});
    }
  }
  return out;
}

std::vector<SentenceSpan> detect_question_sentences(std::string_view s) {
  auto all = split_sentences(s);
  std::erase_if(all, [](const SentenceSpan& sp) { return !sp.question; });
  return all;
}

std::size_t count_sentences(std::string_view s) { return split_sentences(s).size(); }

std::size_t count_question_sentences(std::string_view s) { return detect_question_sentences(s).size(); }

bool is_single_question(std::string_view s) {
  const auto spans = split_sentences(s);
  return spans.size() == 1 && spans.front().question;
}

std::vector<std::string> tokenize_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (const auto& c : code_points(s)) {
    if (is_space_cp(c.cp)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.append(s.substr(c.begin, c.end - c.begin));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> tokenize_chars(std::string_view s) {
  std::vector<std::string> out;
  for (const auto& c : code_points(s)) {
    if (!is_space_cp(c.cp)) out.emplace_back(s.substr(c.begin, c.end - c.begin));
  }
  return out;
}

std::vector<std::size_t> find_term(std::string_view haystack, std::string_view term) {
  std::vector<std::size_t> hits;
  if (term.empty() || term.size() > haystack.size()) return hits;
  const bool bound_front = is_ascii_alnum(static_cast<unsigned char>(term.front()));
  const bool bound_back = is_ascii_alnum(static_cast<unsigned char>(term.back()));
  for (std::size_t i = 0; i + term.size() <= haystack.size(); ++i) {
    bool eq = true;
    for (std::size_t k = 0; k < term.size(); ++k) {
      if (fold(haystack[i + k]) != fold(term[k])) {
        eq = false;
        break;
      }
    }
    if (!eq) continue;
    if (bound_front && i > 0 && is_ascii_alnum(static_cast<unsigned char>(haystack[i - 1]))) continue;
    const std::size_t after = i + term.size();
    if (bound_back && after < haystack.size() && is_ascii_alnum(static_cast<unsigned char>(haystack[after])))
      continue;
    hits.push_back(i);
  }
  return hits;
}

bool contains_term(std::string_view haystack, std::string_view term) { return !find_term(haystack, term).empty(); }

}  // namespace psyprobe::text
