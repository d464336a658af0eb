#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dfkd {

// Shapes are row-major extents; NCHW for image tensors.
using Shape = std::vector<int64_t>;

inline int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string to_string(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

// Error taxonomy. Every module throws one of these; the CLI maps them to
// nonzero exit codes with the message preserved.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {   // bad hyperparameter or config file entry
  using Error::Error;
};
struct ShapeError : Error {    // incompatible tensor shapes
  using Error::Error;
};
struct FormatError : Error {   // corrupt or mismatched file contents
  using Error::Error;
};
struct UsageError : Error {    // API called out of contract
  using Error::Error;
};
struct DataError : Error {     // invalid data values (e.g. non-positive sigma)
  using Error::Error;
};
struct NumericError : Error {  // NaN/Inf detected where finiteness is required
  using Error::Error;
};

namespace detail {
inline void cat_into(std::ostringstream&) {}
template <typename A, typename... Rest>
void cat_into(std::ostringstream& os, const A& a, const Rest&... rest) {
  os << a;
  cat_into(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string strcat(const Args&... args) {
  std::ostringstream os;
  detail::cat_into(os, args...);
  return os.str();
}

template <typename E = Error, typename... Args>
[[noreturn]] void fail(const Args&... args) {
  throw E(strcat(args...));
}

template <typename E = Error, typename... Args>
void check(bool cond, const Args&... args) {
  if (!cond) fail<E>(args...);
}

}  // namespace dfkd
