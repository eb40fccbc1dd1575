#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "wmr/digest.hpp"

namespace wmr {

// Canonical text forms shared by every serialized artifact: digests, lineage
// records, wire messages, config files. Rules:
//   - keys sorted lexicographically
//   - numbers rendered as shortest round-trip decimal
//   - one record per line, fields joined with no ambiguity (escaped strings)

inline std::string canon_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

inline std::string canon_u64(std::uint64_t v) {
  char buf[24];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

inline std::string canon_i64(std::int64_t v) {
  char buf[24];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

// Escapes '=', ';', '\' and newline so flat key-value records stay one line.
inline std::string canon_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '=': out += "\\e"; break;
      case ';': out += "\\s"; break;
      case '\n': out += "\\n"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string canon_unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      ++i;
      switch (s[i]) {
        case '\\': out.push_back('\\'); break;
        case 'e': out.push_back('='); break;
        case 's': out.push_back(';'); break;
        case 'n': out.push_back('\n'); break;
        default: out.push_back(s[i]);
      }
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

// key=value pairs joined by ';', keys sorted. std::map keeps the order.
inline std::string canon_record(const std::map<std::string, std::string>& kv) {
  std::string out;
  bool first = true;
  for (const auto& [k, v] : kv) {
    if (!first) out.push_back(';');
    first = false;
    out += canon_escape(k);
    out.push_back('=');
    out += canon_escape(v);
  }
  return out;
}

inline std::map<std::string, std::string> parse_record(std::string_view line) {
  std::map<std::string, std::string> kv;
  std::string key, cur;
  bool in_key = true, esc = false;
  auto flush = [&] {
    if (!in_key) kv[canon_unescape(key)] = canon_unescape(cur);
    key.clear();
    cur.clear();
    in_key = true;
  };
  for (char c : line) {
    if (esc) {
      (in_key ? key : cur) += c;
      esc = false;
      continue;
    }
    if (c == '\\') {
      (in_key ? key : cur) += c;
      esc = true;
    } else if (c == '=' && in_key) {
      in_key = false;
    } else if (c == ';') {
      flush();
    } else {
      (in_key ? key : cur) += c;
    }
  }
  flush();
  return kv;
}

inline std::string canon_inputs(const std::map<std::string, double>& inputs) {
  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : inputs) kv[k] = canon_double(v);
  return canon_record(kv);
}

inline std::string inputs_digest(const std::map<std::string, double>& inputs) {
  return sha256_hex(canon_inputs(inputs));
}

inline std::string canon_values(const std::vector<double>& vals) {
  std::string out;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (i) out.push_back(',');
    out += canon_double(vals[i]);
  }
  return out;
}

inline std::vector<double> parse_values(std::string_view s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t end = s.find(',', pos);
    if (end == std::string_view::npos) end = s.size();
    std::string tok(s.substr(pos, end - pos));
    out.push_back(std::strtod(tok.c_str(), nullptr));
    pos = end + 1;
  }
  return out;
}

}  // namespace wmr
