#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "echoprint/error.hpp"
#include "echoprint/fingerprint.hpp"

namespace echoprint {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw FormatError("fingerprint csv line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

std::string band_mask_to_hex(const std::vector<bool>& mask) {
  const std::size_t nibbles = (mask.size() + 3) / 4;
  std::string hex(std::max<std::size_t>(nibbles, 1), '0');
  static const char* digits = "0123456789abcdef";
  for (std::size_t n = 0; n < nibbles; ++n) {
    int v = 0;
    for (int b = 0; b < 4; ++b) {
      const std::size_t j = n * 4 + static_cast<std::size_t>(b);
      if (j < mask.size() && mask[j]) v |= 1 << b;
    }
    hex[hex.size() - 1 - n] = digits[v];
  }
  return hex;
}

std::vector<bool> band_mask_from_hex(const std::string& hex, std::size_t bands) {
  std::vector<bool> mask(bands, false);
  for (std::size_t n = 0; n < hex.size(); ++n) {
    const char c = hex[hex.size() - 1 - n];
    int v;
    if (c >= '0' && c <= '9') v = c - '0';
    else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
    else throw FormatError("band mask: bad hex digit");
    for (int b = 0; b < 4; ++b) {
      const std::size_t j = n * 4 + static_cast<std::size_t>(b);
      if ((v >> b) & 1) {
        if (j >= bands) throw FormatError("band mask: bit beyond band count");
        mask[j] = true;
      }
    }
  }
  return mask;
}

void write_fingerprints(const std::filesystem::path& path, std::span<const FingerprintVector> rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  const std::size_t B = rows.empty() ? 0 : rows.front().size();
  out << "label";
  for (std::size_t j = 0; j < B; ++j) out << ",band_" << j;
  out << ",band_mask_hex,n_segments\n";
  char buf[64];
  for (const auto& r : rows) {
    if (r.size() != B) throw ShapeError("write_fingerprints: rows differ in band count");
    if (r.label.find(',') != std::string::npos) throw FormatError("label contains a comma: " + r.label);
    out << r.label;
    for (double v : r.p) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    std::vector<bool> mask = r.band_mask;
    mask.resize(B, false);
    out << ',' << band_mask_to_hex(mask) << ',' << r.n_segments << '\n';
  }
}

std::vector<FingerprintVector> read_fingerprints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty fingerprint csv " + path.string());
  const auto header = split_csv(line);
  if (header.size() < 3 || header.front() != "label" || header[header.size() - 2] != "band_mask_hex" ||
      header.back() != "n_segments") {
    throw FormatError("fingerprint csv header mismatch in " + path.string());
  }
  const std::size_t B = header.size() - 3;
  for (std::size_t j = 0; j < B; ++j) {
    if (header[j + 1] != "band_" + std::to_string(j)) throw FormatError("fingerprint csv: bad column " + header[j + 1]);
  }
  std::vector<FingerprintVector> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) {
      throw FormatError("fingerprint csv line " + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " fields");
    }
    FingerprintVector v;
    v.label = f[0];
    v.p.reserve(B);
    for (std::size_t j = 0; j < B; ++j) v.p.push_back(parse_double(f[j + 1], lineno));
    v.band_mask = band_mask_from_hex(f[B + 1], B);
    v.n_segments = static_cast<int>(parse_double(f[B + 2], lineno));
    rows.push_back(std::move(v));
  }
  return rows;
}

}  // namespace echoprint
