#ifndef EE_NUMERIC_HPP
#define EE_NUMERIC_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace ee {

/// exp-normalize a vector of log weights into probabilities.
inline std::vector<double> normalize_log_weights(std::span<const double> logs) {
  const double top = *std::max_element(logs.begin(), logs.end());
  std::vector<double> p(logs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    p[i] = std::exp(logs[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

/// Shortest round-trip decimal form; identical on every run.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace ee

#endif  // EE_NUMERIC_HPP
