#pragma once

// Binary classifier contingency table and its derived diagnostic ratios.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

namespace dndx {

struct ContingencyTable {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t population() const { return tp + fp + fn + tn; }
  bool operator==(const ContingencyTable&) const = default;
};

class EmptyPopulation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Outcome {
  int predicted = 0;
  int actual = 0;
};

/// Exact counts; class 1 is the positive condition.
ContingencyTable tabulate(std::span<const Outcome> outcomes);
/// Parallel prediction / label sequences of equal length.
ContingencyTable tabulate(std::span<const int> predicted, std::span<const int> actual);

/// A ratio whose denominator was zero is nullopt.
using Ratio = std::optional<double>;

struct DiagnosticStats {
  Ratio accuracy;
  Ratio prevalence;
  Ratio tpr;  ///< sensitivity
  Ratio fnr;
  Ratio fpr;
  Ratio tnr;  ///< specificity
  Ratio ppv;
  Ratio npv;
  Ratio fdr;
  Ratio false_omission;
  Ratio plr;
  Ratio nlr;
  Ratio dor;  ///< plr / nlr
};

/// Throws EmptyPopulation for an all-zero table.
DiagnosticStats stats(const ContingencyTable& t);

/// (tp * tn) / (fp * fn), the closed form of plr / nlr.
Ratio odds_ratio(const ContingencyTable& t);

/// 4 significant digits; "undefined" for nullopt.
std::string format_ratio(Ratio r);

/// name,value rows: the four counts, marginals and every ratio.
std::string report_csv(const ContingencyTable& t);
/// Same content as an aligned two-column table with the 2x2 matrix on top.
std::string report_text(const ContingencyTable& t);

}  // namespace dndx
