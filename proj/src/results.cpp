#include "hrrp/results.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace hrrp {

namespace {

constexpr const char* kHeader =
    "config_hash,run_name,backbone,conditioning,angle_source,split,seed,"
    "accuracy,macro_f1,per_class_f1";

std::string row_to_line(const ResultRow& r) {
  char num[64];
  std::ostringstream os;
  os << r.config_hash << ',' << r.run_name << ',' << r.backbone << ','
     << r.conditioning << ',' << r.angle_source << ',' << r.split << ','
     << r.seed << ',';
  std::snprintf(num, sizeof(num), "%.6f", r.accuracy);
  os << num << ',';
  std::snprintf(num, sizeof(num), "%.6f", r.macro_f1);
  os << num << ',' << r.per_class_path;
  return os.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void write_results_csv(const std::string& path,
                       const std::vector<ResultRow>& rows) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write results csv: " + path);
    out << kHeader << '\n';
    for (const auto& r : rows) out << row_to_line(r) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

void append_results_csv(const std::string& path,
                        const std::vector<ResultRow>& rows) {
  std::vector<ResultRow> all;
  if (std::filesystem::exists(path)) all = read_results_csv(path);
  all.insert(all.end(), rows.begin(), rows.end());
  write_results_csv(path, all);
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results csv: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw std::runtime_error("results csv " + path + ": unexpected header");
  }
  std::vector<ResultRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 10) {
      throw std::runtime_error("results csv " + path + ":" +
                               std::to_string(lineno) + ": expected 10 fields");
    }
    ResultRow r;
    r.config_hash = f[0];
    r.run_name = f[1];
    r.backbone = f[2];
    r.conditioning = f[3];
    r.angle_source = f[4];
    r.split = f[5];
    r.seed = std::stoull(f[6]);
    r.accuracy = std::stod(f[7]);
    r.macro_f1 = std::stod(f[8]);
    r.per_class_path = f[9];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string markdown_report(const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw std::runtime_error("markdown_report: no result rows");

  const std::vector<std::string> cond_order = {"none", "concat", "film", "cbn"};
  const std::vector<std::string> backbone_order = {"resnet", "conv", "mlp"};

  std::vector<std::string> conds, backbones;
  for (const auto& c : cond_order) {
    for (const auto& r : rows) {
      if (r.conditioning == c) {
        conds.push_back(c);
        break;
      }
    }
  }
  for (const auto& b : backbone_order) {
    for (const auto& r : rows) {
      if (r.backbone == b) {
        backbones.push_back(b);
        break;
      }
    }
  }

  // mean accuracy / macro-F1 per cell, averaged over seeds
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> cell;
  std::map<std::pair<std::string, std::string>, int> count;
  for (const auto& r : rows) {
    auto key = std::make_pair(r.conditioning, r.backbone);
    cell[key].first += r.accuracy;
    cell[key].second += r.macro_f1;
    ++count[key];
  }
  for (auto& [key, v] : cell) {
    v.first /= count[key];
    v.second /= count[key];
  }

  // column maxima on accuracy
  std::map<std::string, double> col_max;
  for (const auto& b : backbones) {
    double best = -1.0;
    for (const auto& c : conds) {
      auto it = cell.find({c, b});
      if (it != cell.end()) best = std::max(best, it->second.first);
    }
    col_max[b] = best;
  }

  std::ostringstream os;
  os << "| Conditioning |";
  for (const auto& b : backbones) os << ' ' << b << " |";
  os << "\n|---|";
  for (size_t i = 0; i < backbones.size(); ++i) os << "---|";
  os << '\n';
  for (const auto& c : conds) {
    os << "| " << (c == "none" ? "uncond" : c) << " |";
    for (const auto& b : backbones) {
      auto it = cell.find({c, b});
      if (it == cell.end()) {
        os << " - |";
        continue;
      }
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.2f \\| %.2f",
                    100.0 * it->second.first, 100.0 * it->second.second);
      const bool bold = std::fabs(it->second.first - col_max[b]) < 1e-12;
      if (bold) {
        os << " **" << buf << "** |";
      } else {
        os << ' ' << buf << " |";
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace hrrp
