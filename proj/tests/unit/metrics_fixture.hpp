#pragma once

// The committed 10-item metric fixture and its hand-computed metrics.
//
// Per item, |pred - gt| and |pred - gt| / gt:
//   v0  4   4.0   0     0          hit
//   v1  5   6.0   1     1/5        hit (boundary)
//   v2 10   8.5   1.5   3/20
//   v3  2   3.0   1     1/2        hit (boundary)
//   v4  8   8.25  0.25  1/32       hit
//   v5  3   1.5   1.5   1/2
//   v6 12  12.75  0.75  1/16       hit
//   v7  1   0.0   1     1          hit (boundary)
//   v8  6   4.0   2     1/3
//   v9 20  21.5   1.5   3/40
// OBO = 6/10. MAE = (403/160 + 1/3) / 10 = 1369/4800.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fixture {

struct Row {
  std::string id;
  double gt = 0.0;
  double pred = 0.0;
};

inline constexpr double kObo = 6.0 / 10.0;
inline constexpr double kMae = 1369.0 / 4800.0;

// Buckets with edges {5, 10, 20}.
inline constexpr double kMaeUpTo5 = (0.0 + 0.2 + 0.5 + 0.5 + 1.0) / 5.0;
inline constexpr double kOboUpTo5 = 4.0 / 5.0;
inline constexpr double kMae5To10 = (0.15 + 0.03125 + 1.0 / 3.0) / 3.0;
inline constexpr double kObo5To10 = 1.0 / 3.0;
inline constexpr double kMae10To20 = (0.0625 + 0.075) / 2.0;
inline constexpr double kObo10To20 = 1.0 / 2.0;

inline std::vector<Row> load(const std::string& path) {
  std::ifstream in(path);
  std::vector<Row> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    Row r;
    std::string gt, pred;
    std::getline(ss, r.id, ',');
    std::getline(ss, gt, ',');
    std::getline(ss, pred, ',');
    r.gt = std::stod(gt);
    r.pred = std::stod(pred);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace fixture
