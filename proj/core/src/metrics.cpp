#include "nssm_unc/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nssm {

double fit_index(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
  if (y_true.size() != y_pred.size() || y_true.size() < 2)
    throw std::invalid_argument("fit_index: need equal lengths >= 2");
  const double mean = y_true.mean();
  const double denom = std::sqrt((y_true.array() - mean).square().sum());
  if (denom == 0.0) throw std::runtime_error("FIT undefined (zero variance)");
  const double numer = std::sqrt((y_true - y_pred).array().square().sum());
  return 100.0 * (1.0 - numer / denom);
}

double coverage(const Eigen::VectorXd& y_true, const Eigen::VectorXd& lo,
                const Eigen::VectorXd& hi) {
  if (y_true.size() != lo.size() || y_true.size() != hi.size() || y_true.size() < 1)
    throw std::invalid_argument("coverage: length mismatch or empty");
  Eigen::Index inside = 0;
  for (Eigen::Index k = 0; k < y_true.size(); ++k)
    if (lo(k) <= y_true(k) && y_true(k) <= hi(k)) ++inside;
  return 100.0 * static_cast<double>(inside) / static_cast<double>(y_true.size());
}

double rmse(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
  if (y_true.size() != y_pred.size() || y_true.size() < 1)
    throw std::invalid_argument("rmse: length mismatch or empty");
  return std::sqrt((y_true - y_pred).array().square().mean());
}

void report_save_csv(const std::vector<EvalReport>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "signal,fit,coverage,surprise,rmse,n_steps\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%lld\n",
                  r.signal_id.c_str(), r.fit, r.coverage, r.surprise, r.rmse,
                  static_cast<long long>(r.n_steps));
    out << buf;
  }
}

std::vector<EvalReport> report_load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "signal,fit,coverage,surprise,rmse,n_steps")
    throw std::runtime_error("report parse error in " + path + ": bad header");
  std::vector<EvalReport> rows;
  long long rownum = 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string f;
    std::vector<std::string> fields;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 6)
      throw std::runtime_error("report parse error in " + path + " at row " +
                               std::to_string(rownum));
    EvalReport r;
    r.signal_id = fields[0];
    r.fit = std::stod(fields[1]);
    r.coverage = std::stod(fields[2]);
    r.surprise = std::stod(fields[3]);
    r.rmse = std::stod(fields[4]);
    r.n_steps = std::stoll(fields[5]);
    rows.push_back(std::move(r));
    ++rownum;
  }
  return rows;
}

}  // namespace nssm
