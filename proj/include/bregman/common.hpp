#ifndef BREGMAN_COMMON_HPP
#define BREGMAN_COMMON_HPP

#include <Eigen/Dense>
#include <charconv>
#include <span>
#include <stdexcept>
#include <string>

namespace bregman {

// Points are stored one per row; row-major keeps each point contiguous.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// A point (or a model parameter) lies outside the divergence domain.
class DomainError : public std::runtime_error {
public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file (CSV/JSON); message carries the line number when known.
class ParseError : public std::runtime_error {
public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Shortest round-trip decimal form; reloading reproduces the exact double.
inline void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline std::string format_double(double v) {
  std::string s;
  append_double(s, v);
  return s;
}

inline std::span<const double> row_span(const RowMatrix& m, Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

inline std::span<const double> vec_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace bregman

#endif
