#pragma once

#include <string>
#include <vector>

namespace hrrp {

/// One experiment outcome, a row of results.csv.
struct ResultRow {
  std::string config_hash;
  std::string run_name;
  std::string backbone;
  std::string conditioning;
  std::string angle_source;
  std::string split;
  uint64_t seed = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::string per_class_path;
};

void write_results_csv(const std::string& path,
                       const std::vector<ResultRow>& rows);
void append_results_csv(const std::string& path,
                        const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::string& path);

/// Pivots rows into a conditioning x backbone markdown table with
/// "accuracy | macro-F1" cells (percent, averaged over seeds). The best
/// accuracy of each backbone column is bolded; ties are all bolded.
std::string markdown_report(const std::vector<ResultRow>& rows);

}  // namespace hrrp
