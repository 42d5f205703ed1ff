#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace lexki {

// Every domain failure carries a stable kind name ("ShapeMismatch",
// "ParseError", ...) so the CLI can report it verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

namespace detail {

inline void append(std::ostringstream&) {}

template <typename Head, typename... Rest>
void append(std::ostringstream& os, Head&& head, Rest&&... rest) {
  os << std::forward<Head>(head);
  append(os, std::forward<Rest>(rest)...);
}

}  // namespace detail

template <typename... Args>
[[noreturn]] void fail(const std::string& kind, Args&&... args) {
  std::ostringstream os;
  detail::append(os, std::forward<Args>(args)...);
  throw Error(kind, os.str());
}

}  // namespace lexki
