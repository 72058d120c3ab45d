#pragma once

#include <cctype>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <string>

#include "pangenome/errors.hpp"

namespace pangenome {

// Model rates in the unhalved convention: gains fire at theta/2 per
// individual, losses at rho/2 per gene copy, horizontal transfer at gamma/2N
// per ordered pair per donor gene.  The /2 factors are applied at the point of
// use so that every formula reads in these same symbols.
struct ModelParams {
  double theta = 1.0;
  double rho = 1.0;
  double gamma = 0.0;
  int n = 1;                       // sample size
  std::optional<long> N;           // population size (forward simulation only)
};

class ValidatedParams {
 public:
  double theta() const { return p_.theta; }
  double rho() const { return p_.rho; }
  double gamma() const { return p_.gamma; }
  int n() const { return p_.n; }
  const std::optional<long>& N() const { return p_.N; }
  const ModelParams& raw() const { return p_; }

  friend ValidatedParams validate(const ModelParams& p);

 private:
  explicit ValidatedParams(ModelParams p) : p_(p) {}
  ModelParams p_;
};

inline ValidatedParams validate(const ModelParams& p) {
  if (!(p.theta >= 0.0) || !std::isfinite(p.theta))
    throw RangeError("theta", "must be >= 0 and finite");
  if (!(p.rho > 0.0) || !std::isfinite(p.rho))
    throw RangeError("rho", "must be > 0");
  if (!(p.gamma >= 0.0) || !std::isfinite(p.gamma))
    throw RangeError("gamma", "must be >= 0 and finite");
  if (p.n < 1) throw RangeError("n", "must be >= 1");
  if (p.N) {
    if (*p.N < 2) throw RangeError("N", "must be >= 2");
    if (p.n > *p.N) throw RangeError("n", "n > N: sample exceeds population");
  }
  return ValidatedParams(p);
}

// Flat key-value config file: one `key = value` per line, `#` starts a
// comment, whitespace around keys and values is ignored.
inline std::map<std::string, std::string> parse_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw RangeError("config", "line " + std::to_string(lineno) +
                                     ": expected `key = value`");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw RangeError("config", "line " + std::to_string(lineno) +
                                     ": empty key or value");
    kv[key] = value;
  }
  return kv;
}

}  // namespace pangenome
