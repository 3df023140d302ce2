#include "mmhash/format.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "mmhash/error.hpp"

namespace mmhash {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  (void)ec;
  return std::string(buf, end);
}

double parse_double(std::string_view token, bool allow_inf) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || token.empty())
    throw Error(ErrorCode::Parse, "not a number: '" + std::string(token) + "'");
  if (std::isnan(v) || (std::isinf(v) && !allow_inf))
    throw Error(ErrorCode::Parse, "non-finite value: '" + std::string(token) + "'");
  return v;
}

TokenReader::TokenReader(std::istream& is, std::string context)
    : is_(is), context_(std::move(context)) {}

bool TokenReader::next(std::string& token) {
  token.clear();
  int c;
  while ((c = is_.get()) != EOF) {
    if (c == '\n') ++line_;
    if (!std::isspace(c)) break;
  }
  if (c == EOF) return false;
  token.push_back(static_cast<char>(c));
  while ((c = is_.peek()) != EOF && !std::isspace(c)) token.push_back(static_cast<char>(is_.get()));
  return true;
}

std::string TokenReader::next_token() {
  std::string t;
  if (!next(t)) fail("unexpected end of input");
  return t;
}

void TokenReader::expect(std::string_view literal) {
  const std::string t = next_token();
  if (t != literal) fail("expected '" + std::string(literal) + "', found '" + t + "'");
}

std::size_t TokenReader::next_count() {
  const std::string t = next_token();
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size())
    fail("expected a non-negative integer, found '" + t + "'");
  return v;
}

double TokenReader::next_double(bool allow_inf) {
  const std::string t = next_token();
  try {
    return parse_double(t, allow_inf);
  } catch (const Error& e) {
    fail(e.what());
  }
}

void TokenReader::fail(const std::string& message) const {
  throw Error(ErrorCode::Parse, context_ + " line " + std::to_string(line_) + ": " + message);
}

}  // namespace mmhash
