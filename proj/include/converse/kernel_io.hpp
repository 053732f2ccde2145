#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "converse/converse2d.hpp"

namespace converse {

namespace detail {

inline std::vector<double> parse_numbers(const std::string& line, std::size_t line_no) {
  std::vector<double> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v))
      throw Error(ErrorCode::MalformedKernel,
                  "line " + std::to_string(line_no) + ": bad number '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

// Text format: a "C kh kw" line, then C blocks of kh lines with kw numbers
// each. Blank lines are ignored. Weights are used as given (no softmax).
inline KernelStack parse_kernel(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    auto nums = detail::parse_numbers(line, line_no);
    if (!nums.empty()) rows.push_back(std::move(nums));
  }
  if (rows.empty()) throw Error(ErrorCode::MalformedKernel, "empty kernel file");
  const auto& head = rows.front();
  auto as_dim = [](double d) {
    return d >= 1.0 && d == std::floor(d) && d < 1e6 ? static_cast<std::size_t>(d) : 0;
  };
  if (head.size() != 3 || as_dim(head[0]) == 0 || as_dim(head[1]) == 0 || as_dim(head[2]) == 0)
    throw Error(ErrorCode::MalformedKernel, "first line must be 'C kh kw' with positive integers");
  const std::size_t c = as_dim(head[0]);
  const std::size_t kh = as_dim(head[1]);
  const std::size_t kw = as_dim(head[2]);
  if (kh % 2 == 0 || kw % 2 == 0)
    throw Error(ErrorCode::MalformedKernel, "kernel dimensions must be odd");
  if (rows.size() - 1 != c * kh)
    throw Error(ErrorCode::MalformedKernel, "expected " + std::to_string(c * kh) +
                                                " kernel rows, found " +
                                                std::to_string(rows.size() - 1));
  std::vector<double> values;
  values.reserve(c * kh * kw);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != kw)
      throw Error(ErrorCode::MalformedKernel, "kernel row " + std::to_string(r) + " has " +
                                                  std::to_string(rows[r].size()) +
                                                  " values, expected " + std::to_string(kw));
    values.insert(values.end(), rows[r].begin(), rows[r].end());
  }
  return {c, kh, kw, std::move(values)};
}

inline KernelStack load_kernel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open kernel file " + path.string());
  return parse_kernel(in);
}

inline void write_kernel(std::ostream& out, const KernelStack& k) {
  out << k.channels() << " " << k.kh() << " " << k.kw() << "\n";
  out << std::setprecision(17);
  for (std::size_t c = 0; c < k.channels(); ++c)
    for (std::size_t i = 0; i < k.kh(); ++i)
      for (std::size_t j = 0; j < k.kw(); ++j) out << k.at(c, i, j) << (j + 1 < k.kw() ? " " : "\n");
}

inline void save_kernel(const std::filesystem::path& path, const KernelStack& k) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::FileNotFound, "cannot write kernel file " + path.string());
  write_kernel(out, k);
}

// Normalized 2-D Gaussian of odd `size`.
inline KernelStack gaussian_kernel(std::size_t size, double sigma, std::size_t channels = 1) {
  KernelStack k(channels, size, size);
  const double c = static_cast<double>(size / 2);
  double sum = 0.0;
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) {
      const double di = static_cast<double>(i) - c;
      const double dj = static_cast<double>(j) - c;
      const double v = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      k.at(0, i, j) = v;
      sum += v;
    }
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) {
      k.at(0, i, j) /= sum;
      for (std::size_t ch = 1; ch < channels; ++ch) k.at(ch, i, j) = k.at(0, i, j);
    }
  return k;
}

}  // namespace converse
