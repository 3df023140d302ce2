#pragma once

// Helpers shared by the text formats (MMHM1, MMHF1, MMHP1).

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>

namespace mmhash {

// 17 significant digits; inf/nan spelled "inf"/"-inf"/"nan".
std::string format_double(double v);

// Whitespace-separated token reader that tracks line numbers for
// diagnostics.
class TokenReader {
 public:
  TokenReader(std::istream& is, std::string context);

  // Returns false at end of input.
  bool next(std::string& token);
  std::string next_token();
  void expect(std::string_view literal);
  std::size_t next_count();
  double next_double(bool allow_inf = false);

  std::size_t line() const noexcept { return line_; }

  [[noreturn]] void fail(const std::string& message) const;

 private:
  std::istream& is_;
  std::string context_;
  std::size_t line_ = 1;
};

double parse_double(std::string_view token, bool allow_inf = false);

}  // namespace mmhash
