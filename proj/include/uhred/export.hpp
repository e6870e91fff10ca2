#pragma once

// PGM label maps and CSV tables for external plotting.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "uhred/binary.hpp"
#include "uhred/cube.hpp"
#include "uhred/error.hpp"
#include "uhred/metrics.hpp"

namespace uhred {

/// Shortest round-trip decimal representation.
inline std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

/// Gray level of a label: round(255 * label / (k - 1)), or 0 when k = 1.
inline std::uint8_t label_gray(int label, std::size_t k) {
  if (k < 2) return 0;
  return static_cast<std::uint8_t>(std::lround(255.0 * label / static_cast<double>(k - 1)));
}

inline std::vector<std::uint8_t> encode_pgm(const LabelMap& map, std::size_t k) {
  const std::string header = "P5\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (int l : map.labels) out.push_back(label_gray(l, k));
  return out;
}

inline void save_pgm(const LabelMap& map, std::size_t k, const std::filesystem::path& path) {
  detail::write_file(path, encode_pgm(map, k));
}

/// Raw 8-bit gray levels of a binary PGM (P5, maxval <= 255).
inline LabelMap load_pgm(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != "P5") throw FormatError("PGM: expected P5 magic");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::exception&) {
    throw FormatError("PGM: malformed header");
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 255) throw FormatError("PGM: unsupported dimensions or maxval");
  ++pos;  // single whitespace after maxval
  if (bytes.size() < pos || bytes.size() - pos != w * h) throw FormatError("PGM: pixel payload size mismatch");
  LabelMap map(h, w);
  for (std::size_t i = 0; i < w * h; ++i) map.labels[i] = bytes[pos + i];
  return map;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

/// `band,axis_value,cluster_0..cluster_{k-1}`, one row per band.
inline std::string cluster_spectra_csv(const std::vector<std::vector<double>>& spectra,
                                       const std::optional<std::vector<float>>& axis) {
  std::ostringstream os;
  os << "band,axis_value";
  for (std::size_t c = 0; c < spectra.size(); ++c) os << ",cluster_" << c;
  os << '\n';
  const std::size_t bands = spectra.empty() ? 0 : spectra.front().size();
  for (std::size_t b = 0; b < bands; ++b) {
    os << b << ',' << (axis ? format_number((*axis)[b]) : std::to_string(b));
    for (const auto& s : spectra) os << ',' << format_number(s[b]);
    os << '\n';
  }
  return os.str();
}

/// `index,value` rows.
inline std::string index_value_csv(const std::vector<std::pair<double, double>>& rows) {
  std::ostringstream os;
  os << "index,value\n";
  for (const auto& [i, v] : rows) os << format_number(i) << ',' << format_number(v) << '\n';
  return os.str();
}

inline std::string profile_csv(const std::vector<ProfilePoint>& profile) {
  std::vector<std::pair<double, double>> rows;
  for (const auto& p : profile) rows.emplace_back(static_cast<double>(p.column), p.value);
  return index_value_csv(rows);
}

} // namespace uhred
