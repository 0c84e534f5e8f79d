#include "dndx/evalstats.hpp"

#include <cstdio>
#include <iomanip>
#include <sstream>
#include <utility>
#include <vector>

namespace dndx {

namespace {

Ratio divide(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

Ratio divide(Ratio num, Ratio den) {
  if (!num || !den) return std::nullopt;
  return divide(*num, *den);
}

Ratio complement(Ratio r) {
  if (!r) return std::nullopt;
  return 1.0 - *r;
}

std::vector<std::pair<std::string, std::string>> rows(const ContingencyTable& t) {
  const DiagnosticStats s = stats(t);
  auto count = [](std::uint64_t v) { return std::to_string(v); };
  return {
      {"tp", count(t.tp)},
      {"fp", count(t.fp)},
      {"fn", count(t.fn)},
      {"tn", count(t.tn)},
      {"predicted_positive", count(t.tp + t.fp)},
      {"predicted_negative", count(t.fn + t.tn)},
      {"condition_positive", count(t.tp + t.fn)},
      {"condition_negative", count(t.fp + t.tn)},
      {"population", count(t.population())},
      {"accuracy", format_ratio(s.accuracy)},
      {"prevalence", format_ratio(s.prevalence)},
      {"tpr", format_ratio(s.tpr)},
      {"fnr", format_ratio(s.fnr)},
      {"fpr", format_ratio(s.fpr)},
      {"tnr", format_ratio(s.tnr)},
      {"ppv", format_ratio(s.ppv)},
      {"npv", format_ratio(s.npv)},
      {"fdr", format_ratio(s.fdr)},
      {"for", format_ratio(s.false_omission)},
      {"plr", format_ratio(s.plr)},
      {"nlr", format_ratio(s.nlr)},
      {"dor", format_ratio(s.dor)},
  };
}

}  // namespace

ContingencyTable tabulate(std::span<const Outcome> outcomes) {
  if (outcomes.empty()) throw EmptyPopulation("cannot tabulate an empty outcome list");
  ContingencyTable t;
  for (const auto& o : outcomes) {
    if ((o.predicted != 0 && o.predicted != 1) || (o.actual != 0 && o.actual != 1))
      throw std::invalid_argument("outcomes must be 0 or 1");
    if (o.predicted == 1) {
      ++(o.actual == 1 ? t.tp : t.fp);
    } else {
      ++(o.actual == 1 ? t.fn : t.tn);
    }
  }
  return t;
}

ContingencyTable tabulate(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size()) throw std::invalid_argument("prediction and label counts differ");
  std::vector<Outcome> outcomes(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) outcomes[i] = {predicted[i], actual[i]};
  return tabulate(outcomes);
}

DiagnosticStats stats(const ContingencyTable& t) {
  if (t.population() == 0) throw EmptyPopulation("contingency table is empty");
  const double tp = static_cast<double>(t.tp);
  const double fp = static_cast<double>(t.fp);
  const double fn = static_cast<double>(t.fn);
  const double tn = static_cast<double>(t.tn);
  const double pop = static_cast<double>(t.population());

  DiagnosticStats s;
  s.accuracy = (tp + tn) / pop;
  s.prevalence = (tp + fn) / pop;
  s.tpr = divide(tp, tp + fn);
  s.fnr = divide(fn, tp + fn);
  s.fpr = divide(fp, fp + tn);
  s.tnr = divide(tn, fp + tn);
  s.ppv = divide(tp, tp + fp);
  s.npv = divide(tn, tn + fn);
  s.fdr = complement(s.ppv);
  s.false_omission = complement(s.npv);
  s.plr = divide(s.tpr, s.fpr);
  s.nlr = divide(s.fnr, s.tnr);
  s.dor = divide(s.plr, s.nlr);
  return s;
}

Ratio odds_ratio(const ContingencyTable& t) {
  return divide(static_cast<double>(t.tp) * static_cast<double>(t.tn),
                static_cast<double>(t.fp) * static_cast<double>(t.fn));
}

std::string format_ratio(Ratio r) {
  if (!r) return "undefined";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", *r);
  return buf;
}

std::string report_csv(const ContingencyTable& t) {
  std::ostringstream out;
  out << "statistic,value\n";
  for (const auto& [name, value] : rows(t)) out << name << ',' << value << '\n';
  return out.str();
}

std::string report_text(const ContingencyTable& t) {
  std::ostringstream out;
  out << std::left;
  out << std::setw(22) << "" << std::setw(12) << "actual +" << std::setw(12) << "actual -" << '\n';
  out << std::setw(22) << "predicted +" << std::setw(12) << t.tp << std::setw(12) << t.fp << '\n';
  out << std::setw(22) << "predicted -" << std::setw(12) << t.fn << std::setw(12) << t.tn << '\n';
  out << '\n';
  for (const auto& [name, value] : rows(t)) out << std::setw(22) << name << value << '\n';
  return out.str();
}

}  // namespace dndx
