#pragma once

// CSV emission and ingestion. Every output starts with a provenance comment
// (tool version, FNV-1a hash of the serialized config, seed); numbers carry
// 17 significant digits so written doubles round-trip exactly. The reader
// reports malformed input with its line number.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cavspin/errors.hpp"
#include "cavspin/fit.hpp"
#include "cavspin/sequence.hpp"
#include "cavspin/version.hpp"

namespace cavspin {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string format_g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Provenance {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

inline std::string provenance_line(const Provenance& p) {
  return std::string("# cavspin ") + kVersion + " config=" + hex64(p.config_hash) +
         " seed=" + std::to_string(p.seed);
}

inline constexpr const char* kShotHeader = "alpha_rad,sz,shot_index,stream_id";
inline constexpr const char* kVarianceHeader = "alpha_rad,sigma2,stderr,n";
inline constexpr const char* kModelHeader = "q,sigma2_max,sigma2_min,alpha0_deg,variant";

inline void write_shots_csv(std::ostream& os, const std::vector<ShotRecord>& records,
                            const Provenance& prov) {
  os << provenance_line(prov) << "\n" << kShotHeader << "\n";
  for (const ShotRecord& r : records)
    os << format_g17(r.alpha) << "," << format_g17(r.sz_measured) << "," << r.shot_index << ","
       << r.stream_id << "\n";
}

inline void write_variance_csv(std::ostream& os, const std::vector<VariancePoint>& points,
                               const Provenance& prov) {
  os << provenance_line(prov) << "\n" << kVarianceHeader << "\n";
  for (const VariancePoint& p : points)
    os << format_g17(p.alpha) << "," << format_g17(p.sigma2) << "," << format_g17(p.std_err)
       << "," << p.n << "\n";
}

struct ModelRow {
  double q = 0.0;
  double sigma2_max = 0.0;
  double sigma2_min = 0.0;
  double alpha0_deg = 0.0;
  std::string variant;  // "ideal" or "technical"
};

inline void write_model_csv(std::ostream& os, const std::vector<ModelRow>& rows,
                            const Provenance& prov) {
  os << provenance_line(prov) << "\n" << kModelHeader << "\n";
  for (const ModelRow& r : rows)
    os << format_g17(r.q) << "," << format_g17(r.sigma2_max) << "," << format_g17(r.sigma2_min)
       << "," << format_g17(r.alpha0_deg) << "," << r.variant << "\n";
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline double csv_double(std::string_view f, int line_no, const char* col) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), x);
  if (ec != std::errc{} || ptr != f.data() + f.size())
    throw DataError("line " + std::to_string(line_no) + ": cannot parse " + col + " value '" +
                    std::string(f) + "'");
  return x;
}

inline std::uint64_t csv_u64(std::string_view f, int line_no, const char* col) {
  std::uint64_t x = 0;
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), x);
  if (ec != std::errc{} || ptr != f.data() + f.size())
    throw DataError("line " + std::to_string(line_no) + ": cannot parse " + col + " value '" +
                    std::string(f) + "'");
  return x;
}

}  // namespace detail

// Reads the shot schema back; comment lines are skipped, the header line is
// mandatory, and every defect is reported with its 1-based line number.
inline std::vector<ShotRecord> read_shots_csv(std::istream& is) {
  std::vector<ShotRecord> out;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kShotHeader)
        throw DataError("line " + std::to_string(line_no) + ": expected header '" +
                        kShotHeader + "'");
      header_seen = true;
      continue;
    }
    const auto fields = detail::split_csv(line);
    if (fields.size() != 4)
      throw DataError("line " + std::to_string(line_no) + ": expected 4 fields, got " +
                      std::to_string(fields.size()));
    ShotRecord r;
    r.alpha = detail::csv_double(fields[0], line_no, "alpha_rad");
    r.sz_measured = detail::csv_double(fields[1], line_no, "sz");
    r.shot_index = static_cast<int>(detail::csv_u64(fields[2], line_no, "shot_index"));
    r.stream_id = detail::csv_u64(fields[3], line_no, "stream_id");
    out.push_back(r);
  }
  if (!header_seen) throw DataError("line " + std::to_string(line_no) + ": missing shot header");
  return out;
}

}  // namespace cavspin
