#include "options.hpp"

#include <cmath>
#include <sstream>

namespace uwie::cli {

namespace {

bool parse_number(const std::string& s, double& out) {
  std::size_t used = 0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == s.size() && std::isfinite(out);
}

bool parse_positive_int(const std::string& s, int& out) {
  if (s.empty() || s.size() > 6) return false;
  for (const char c : s) {
    if (c < '0' || c > '9') return false;
  }
  out = std::stoi(s);
  return out > 0;
}

}  // namespace

std::array<double, 3> parse_triple(const std::string& text, const std::string& flag) {
  std::array<double, 3> v{};
  std::stringstream ss(text);
  std::string part;
  int n = 0;
  while (std::getline(ss, part, ',')) {
    if (n == 3 || !parse_number(part, v[n])) {
      throw UsageError(flag + " expects three comma-separated numbers r,g,b, got '" + text + "'");
    }
    ++n;
  }
  if (n != 3 || (!text.empty() && text.back() == ',')) {
    throw UsageError(flag + " expects three comma-separated numbers r,g,b, got '" + text + "'");
  }
  return v;
}

std::optional<Resolution> parse_resize(const std::string& text) {
  if (text == "native") return std::nullopt;
  const auto x = text.find('x');
  Resolution r;
  if (x == std::string::npos || !parse_positive_int(text.substr(0, x), r.height) ||
      !parse_positive_int(text.substr(x + 1), r.width)) {
    throw UsageError("--resize expects HxW (e.g. 256x256) or 'native', got '" + text + "'");
  }
  return r;
}

}  // namespace uwie::cli
