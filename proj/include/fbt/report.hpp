#pragma once

#include <string>
#include <vector>

namespace fbt {

/** @brief One measured inequality lhs <rel> rhs. */
struct BoundRow {
  std::string label;
  double lhs = 0.0;
  double rhs = 0.0;
  /// rhs - lhs for "<=" rows; positive means the inequality holds with room.
  double slack = 0.0;
  bool holds = true;
};

/** @brief Measured sides of an inequality family with an overall verdict. */
struct BoundReport {
  std::string name;
  std::vector<BoundRow> rows;
  bool pass = true;

  /// Records lhs < rhs (strict) or lhs <= rhs, allowing tol of floating slack.
  void check_le(std::string label, double lhs, double rhs, bool strict, double tol = 1e-9) {
    const double slack = rhs - lhs;
    const bool ok = strict ? (lhs < rhs + tol) : (lhs <= rhs + tol);
    rows.push_back({std::move(label), lhs, rhs, slack, ok});
    pass = pass && ok;
  }

  /// Records a measurement that carries no verdict.
  void record(std::string label, double lhs, double rhs) {
    rows.push_back({std::move(label), lhs, rhs, rhs - lhs, true});
  }

  double min_slack() const {
    double m = 0.0;
    bool first = true;
    for (const auto& r : rows)
      if (first || r.slack < m) {
        m = r.slack;
        first = false;
      }
    return m;
  }
};

}  // namespace fbt
