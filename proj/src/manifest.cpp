#include "echoprint/manifest.hpp"

#include <fstream>
#include <sstream>

#include "echoprint/error.hpp"

namespace echoprint {
namespace {

const char* kHeader = "path,label,room_id,position_id,codec_mode,loss_rate,seed";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

DatasetManifest DatasetManifest::load(const std::filesystem::path& csv, bool check_paths) {
  std::ifstream in(csv);
  if (!in) throw DataError("cannot open manifest " + csv.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty manifest " + csv.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw DataError("unexpected manifest header in " + csv.string());

  DatasetManifest m;
  const auto base = csv.parent_path();
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = csv.string() + ":" + std::to_string(row);
    if (cells.size() != 7) throw DataError("expected 7 columns at " + where);
    ManifestEntry e;
    e.path = cells[0];
    e.label = cells[1];
    e.room_id = cells[2];
    e.codec_mode = cells[4];
    try {
      e.position_id = std::stoi(cells[3]);
      e.loss_rate = std::stod(cells[5]);
      e.seed = std::stoull(cells[6]);
    } catch (const std::exception&) {
      throw DataError("malformed number at " + where);
    }
    if (e.label.empty()) throw DataError("empty label at " + where);
    std::filesystem::path p(e.path);
    if (p.is_relative()) p = base / p;
    e.path = p.string();
    if (check_paths && !std::filesystem::exists(p)) throw DataError("missing file " + e.path);
    m.entries.push_back(std::move(e));
  }
  return m;
}

void DatasetManifest::save(const std::filesystem::path& csv) const {
  std::ofstream out(csv);
  if (!out) throw DataError("cannot write manifest " + csv.string());
  out << kHeader << '\n';
  for (const auto& e : entries) {
    out << e.path << ',' << e.label << ',' << e.room_id << ',' << e.position_id << ','
        << e.codec_mode << ',' << e.loss_rate << ',' << e.seed << '\n';
  }
}

}  // namespace echoprint
