#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "io.hpp"

namespace pdom {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Digest of the canonical dumps of every input document, in order.
inline std::string digest_inputs(const std::vector<io::Json>& inputs) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& j : inputs) {
    h = fnv1a64(j.dump(), h);
    h = fnv1a64("\n", h);
  }
  return hex64(h);
}

struct Criterion {
  enum class Status { pass, fail, warn };

  std::string id;
  Status status = Status::fail;
  std::string detail;
};

inline const char* to_string(Criterion::Status s) {
  switch (s) {
    case Criterion::Status::pass: return "PASS";
    case Criterion::Status::fail: return "FAIL";
    case Criterion::Status::warn: return "WARN";
  }
  return "?";
}

/**
 * @brief Result document of one command.
 *
 * The JSON form has sorted keys and no timestamps, so equal inputs and seed
 * give identical bytes. Wall time is only emitted on request.
 */
struct RunReport {
  std::string command;
  std::string inputs_digest;
  std::uint64_t seed = 42;
  io::Json verdicts = io::Json::object();
  io::Json certificates = io::Json::object();
  io::Json metrics = io::Json::object();
  std::vector<Criterion> criteria;
  double wall_time_s = 0.0;

  void add(std::string id, bool ok, std::string detail) {
    criteria.push_back({std::move(id), ok ? Criterion::Status::pass : Criterion::Status::fail, std::move(detail)});
  }
  void warn(std::string id, std::string detail) {
    criteria.push_back({std::move(id), Criterion::Status::warn, std::move(detail)});
  }

  [[nodiscard]] bool failed() const {
    for (const auto& c : criteria)
      if (c.status == Criterion::Status::fail) return true;
    return false;
  }

  [[nodiscard]] int exit_code() const { return failed() ? 1 : 0; }

  [[nodiscard]] io::Json to_json(bool with_time = false) const {
    io::Json crit = io::Json::array();
    for (const auto& c : criteria) crit.push_back({{"id", c.id}, {"status", to_string(c.status)}, {"detail", c.detail}});
    io::Json j{{"command", command},   {"inputs_digest", inputs_digest}, {"seed", seed},
               {"verdicts", verdicts}, {"certificates", certificates},   {"metrics", metrics},
               {"criteria", crit},     {"result", failed() ? "FAIL" : "PASS"}};
    if (with_time) j["wall_time_s"] = wall_time_s;
    return j;
  }

  /// One line per criterion, then an overall line.
  [[nodiscard]] std::string summary() const {
    std::string out;
    for (const auto& c : criteria) out += std::string(to_string(c.status)) + "  " + c.id + "  " + c.detail + "\n";
    out += std::string(failed() ? "FAIL" : "PASS") + "  " + command + "\n";
    return out;
  }
};

}  // namespace pdom
