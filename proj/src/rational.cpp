#include "branchsim/rational.hpp"

#include <cstdlib>

namespace branchsim {

Rational Rational::parse(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("rational: empty string");
  const auto slash = text.find('/');
  const auto to_int = [](const std::string& s) {
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument("rational: not an integer: '" + s + "'");
    }
    if (pos != s.size()) {
      throw std::invalid_argument("rational: trailing characters in '" + s + "'");
    }
    return static_cast<std::int64_t>(v);
  };
  if (slash == std::string::npos) {
    return Rational(to_int(text), 1);
  }
  return Rational(to_int(text.substr(0, slash)),
                  to_int(text.substr(slash + 1)));
}

}  // namespace branchsim
