#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace nssm {

/// Third-order IIR filter evaluated as a direct-form difference equation
///   y_k = sum_i b_i u_{k-i} - sum_j a_j y_{k-j},  a_0 = 1.
class LtiFilter {
 public:
  LtiFilter(const std::array<double, 4>& b, const std::array<double, 4>& a);

  double step(double u);
  Eigen::VectorXd filter(const Eigen::VectorXd& u);  // resets state first
  void reset();

  const std::array<double, 4>& numerator() const { return b_; }
  const std::array<double, 4>& denominator() const { return a_; }

 private:
  std::array<double, 4> b_;
  std::array<double, 4> a_;
  std::array<double, 3> u_hist_{};
  std::array<double, 3> y_hist_{};
};

/// The two LTI blocks of the synthetic Wiener-Hammerstein system.
LtiFilter wh_g1();
LtiFilter wh_g2();

/// Static nonlinearity between the two filters: f(x) = elu(-(10/11) x).
/// Standard: elu(z) = z for z > 0, exp(z) - 1 otherwise (continuous, f(0)=0).
/// ShiftedExp: elu(z) = exp(z - 1) for z <= 0, 0 otherwise.
enum class EluVariant { Standard, ShiftedExp };

double wh_nonlinearity(double x, EluVariant variant = EluVariant::Standard);

std::string to_string(EluVariant v);
EluVariant elu_variant_from_string(const std::string& s);

struct MultisineConfig {
  Eigen::Index n_samples = 10000;
  double fs = 51200.0;  // Hz
  double band_lo = 0.0;
  double band_hi = 2000.0;
  double target_std = 0.4;  // V
  std::uint64_t seed = 0;

  void validate() const;
};

/// Random-phase multisine: unit magnitude on every DFT bin inside
/// [band_lo, band_hi] (DC excluded), seeded uniform phases, rescaled so the
/// empirical standard deviation equals target_std exactly.
Eigen::VectorXd multisine(const MultisineConfig& cfg);

struct DatasetMeta {
  double fs = 51200.0;
  double sigma_e = 0.0;
  std::uint64_t seed = 0;
  double band_lo = 0.0;
  double band_hi = 0.0;
  double target_std = 0.0;
  std::string nonlinearity_variant = "standard";
};

struct Dataset {
  Eigen::VectorXd u;  // V
  Eigen::VectorXd y;  // V
  double fs = 51200.0;
  double sigma_e = 0.0;
  DatasetMeta meta;
};

/// y = G2(f(G1(u))) + e, e ~ iid N(0, sigma_e^2) from the seeded RNG;
/// both filters start from zero state.
Dataset wh_simulate(const Eigen::VectorXd& u, double sigma_e, std::uint64_t seed,
                    EluVariant variant = EluVariant::Standard, double fs = 51200.0);

struct FreqResponsePoint {
  double freq_hz;
  double magnitude;
  double phase_rad;
};

/// Transfer function evaluated on the unit circle at n_points frequencies
/// spaced uniformly over [0, fs/2].
std::vector<FreqResponsePoint> frequency_response(const LtiFilter& filter,
                                                  int n_points, double fs);

void frequency_response_save_csv(const std::vector<FreqResponsePoint>& table,
                                 const std::string& path);

/// CSV persistence (header `k,u,y`) with a JSON metadata sidecar
/// `<stem>.meta.json` next to the data file.
void dataset_save(const Dataset& ds, const std::string& path);
Dataset dataset_load(const std::string& path);

}  // namespace nssm
