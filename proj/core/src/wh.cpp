#include "nssm_unc/wh.hpp"

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nssm {

LtiFilter::LtiFilter(const std::array<double, 4>& b, const std::array<double, 4>& a)
    : b_(b), a_(a) {
  if (a_[0] != 1.0) throw std::invalid_argument("LtiFilter: a[0] must be exactly 1");
}

void LtiFilter::reset() {
  u_hist_.fill(0.0);
  y_hist_.fill(0.0);
}

double LtiFilter::step(double u) {
  double y = b_[0] * u + b_[1] * u_hist_[0] + b_[2] * u_hist_[1] + b_[3] * u_hist_[2] -
             a_[1] * y_hist_[0] - a_[2] * y_hist_[1] - a_[3] * y_hist_[2];
  u_hist_[2] = u_hist_[1];
  u_hist_[1] = u_hist_[0];
  u_hist_[0] = u;
  y_hist_[2] = y_hist_[1];
  y_hist_[1] = y_hist_[0];
  y_hist_[0] = y;
  return y;
}

Eigen::VectorXd LtiFilter::filter(const Eigen::VectorXd& u) {
  reset();
  Eigen::VectorXd y(u.size());
  for (Eigen::Index k = 0; k < u.size(); ++k) y(k) = step(u(k));
  return y;
}

LtiFilter wh_g1() {
  return LtiFilter({0.010252, 0.030757, 0.030757, 0.010252},
                   {1.0, -2.151941, 1.744729, -0.510767});
}

LtiFilter wh_g2() {
  return LtiFilter({0.008706, -0.004596, -0.004596, 0.008706},
                   {1.0, -2.574867, 2.235716, -0.652629});
}

double wh_nonlinearity(double x, EluVariant variant) {
  const double z = -(10.0 / 11.0) * x;
  switch (variant) {
    case EluVariant::Standard:
      return z > 0.0 ? z : std::expm1(z);
    case EluVariant::ShiftedExp:
      return z <= 0.0 ? std::exp(z - 1.0) : 0.0;
  }
  throw std::logic_error("wh_nonlinearity: unknown variant");
}

std::string to_string(EluVariant v) {
  return v == EluVariant::Standard ? "standard" : "shifted_exp";
}

EluVariant elu_variant_from_string(const std::string& s) {
  if (s == "standard") return EluVariant::Standard;
  if (s == "shifted_exp") return EluVariant::ShiftedExp;
  throw std::invalid_argument("unknown nonlinearity variant: " + s);
}

void MultisineConfig::validate() const {
  if (n_samples < 1) throw std::invalid_argument("multisine: n_samples must be >= 1");
  if (fs <= 0.0) throw std::invalid_argument("multisine: fs must be positive");
  if (!(band_lo >= 0.0 && band_lo < band_hi && band_hi <= fs / 2.0))
    throw std::invalid_argument("multisine: need 0 <= band_lo < band_hi <= fs/2");
  if (target_std <= 0.0) throw std::invalid_argument("multisine: target_std must be > 0");
}

Eigen::VectorXd multisine(const MultisineConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = cfg.n_samples;
  const double bin_hz = cfg.fs / static_cast<double>(n);

  std::vector<Eigen::Index> bins;
  for (Eigen::Index k = 1; k <= n / 2; ++k) {
    const double f = k * bin_hz;
    if (f >= cfg.band_lo && f <= cfg.band_hi) bins.push_back(k);
  }
  if (bins.empty())
    throw std::invalid_argument("multisine: no DFT bins inside the requested band");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);

  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  const double w0 = 2.0 * M_PI / static_cast<double>(n);
  for (const Eigen::Index k : bins) {
    const double ph = phase(rng);
    const double wk = w0 * static_cast<double>(k);
    for (Eigen::Index t = 0; t < n; ++t) u(t) += std::cos(wk * t + ph);
  }

  const double mean = u.mean();
  const double sd = std::sqrt((u.array() - mean).square().mean());
  if (sd <= 0.0) throw std::runtime_error("multisine: degenerate signal");
  u = (u.array() - mean) * (cfg.target_std / sd);
  return u;
}

Dataset wh_simulate(const Eigen::VectorXd& u, double sigma_e, std::uint64_t seed,
                    EluVariant variant, double fs) {
  if (!u.allFinite()) throw std::invalid_argument("wh_simulate: non-finite input");
  if (sigma_e < 0.0) throw std::invalid_argument("wh_simulate: sigma_e must be >= 0");

  LtiFilter g1 = wh_g1();
  LtiFilter g2 = wh_g2();
  Eigen::VectorXd v = g1.filter(u);
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = wh_nonlinearity(v(k), variant);
  Eigen::VectorXd y = g2.filter(v);

  if (sigma_e > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma_e);
    for (Eigen::Index k = 0; k < y.size(); ++k) y(k) += noise(rng);
  }

  Dataset ds;
  ds.u = u;
  ds.y = y;
  ds.fs = fs;
  ds.sigma_e = sigma_e;
  ds.meta.fs = fs;
  ds.meta.sigma_e = sigma_e;
  ds.meta.seed = seed;
  ds.meta.nonlinearity_variant = to_string(variant);
  return ds;
}

std::vector<FreqResponsePoint> frequency_response(const LtiFilter& filter, int n_points,
                                                  double fs) {
  if (n_points < 2) throw std::invalid_argument("frequency_response: n_points must be >= 2");
  const auto& b = filter.numerator();
  const auto& a = filter.denominator();
  std::vector<FreqResponsePoint> table;
  table.reserve(n_points);
  for (int i = 0; i < n_points; ++i) {
    const double f = (fs / 2.0) * static_cast<double>(i) / (n_points - 1);
    const double w = 2.0 * M_PI * f / fs;
    std::complex<double> num(0.0), den(0.0);
    for (int j = 0; j < 4; ++j) {
      const std::complex<double> zmj = std::polar(1.0, -w * j);
      num += b[j] * zmj;
      den += a[j] * zmj;
    }
    const std::complex<double> h = num / den;
    table.push_back({f, std::abs(h), std::arg(h)});
  }
  return table;
}

void frequency_response_save_csv(const std::vector<FreqResponsePoint>& table,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "freq_hz,magnitude,phase_rad\n";
  char buf[128];
  for (const auto& p : table) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.freq_hz, p.magnitude,
                  p.phase_rad);
    out << buf;
  }
}

namespace {

std::string sidecar_path(const std::string& path) {
  std::filesystem::path p(path);
  p.replace_extension("");
  return p.string() + ".meta.json";
}

}  // namespace

void dataset_save(const Dataset& ds, const std::string& path) {
  if (ds.u.size() != ds.y.size())
    throw std::invalid_argument("dataset_save: u and y must have equal length");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "k,u,y\n";
  char buf[128];
  for (Eigen::Index k = 0; k < ds.u.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g\n", static_cast<long long>(k),
                  ds.u(k), ds.y(k));
    out << buf;
  }
  out.close();

  nlohmann::json meta = {
      {"fs", ds.meta.fs},
      {"sigma_e", ds.meta.sigma_e},
      {"seed", ds.meta.seed},
      {"band", {ds.meta.band_lo, ds.meta.band_hi}},
      {"std", ds.meta.target_std},
      {"nonlinearity_variant", ds.meta.nonlinearity_variant},
  };
  std::ofstream mout(sidecar_path(path));
  if (!mout) throw std::runtime_error("cannot open for writing: " + sidecar_path(path));
  mout << meta.dump(2) << "\n";
}

Dataset dataset_load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line) || line != "k,u,y")
    throw std::runtime_error("dataset parse error in " + path +
                             ": expected header 'k,u,y', got '" + line + "'");
  std::vector<double> us, ys;
  long long row = 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 3)
      throw std::runtime_error("dataset parse error in " + path + " at row " +
                               std::to_string(row) + ": expected 3 columns, got " +
                               std::to_string(fields.size()));
    try {
      us.push_back(std::stod(fields[1]));
      ys.push_back(std::stod(fields[2]));
    } catch (const std::exception&) {
      throw std::runtime_error("dataset parse error in " + path + " at row " +
                               std::to_string(row) + ": non-numeric field");
    }
    ++row;
  }

  const std::string mpath = sidecar_path(path);
  std::ifstream min(mpath);
  if (!min) throw std::runtime_error("missing metadata sidecar: " + mpath);
  nlohmann::json meta;
  try {
    min >> meta;
  } catch (const std::exception& e) {
    throw std::runtime_error("metadata parse error in " + mpath + ": " + e.what());
  }

  Dataset ds;
  ds.u = Eigen::Map<const Eigen::VectorXd>(us.data(), static_cast<Eigen::Index>(us.size()));
  ds.y = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  ds.meta.fs = meta.at("fs").get<double>();
  ds.meta.sigma_e = meta.at("sigma_e").get<double>();
  ds.meta.seed = meta.at("seed").get<std::uint64_t>();
  ds.meta.band_lo = meta.at("band").at(0).get<double>();
  ds.meta.band_hi = meta.at("band").at(1).get<double>();
  ds.meta.target_std = meta.at("std").get<double>();
  ds.meta.nonlinearity_variant = meta.at("nonlinearity_variant").get<std::string>();
  ds.fs = ds.meta.fs;
  ds.sigma_e = ds.meta.sigma_e;
  return ds;
}

}  // namespace nssm
