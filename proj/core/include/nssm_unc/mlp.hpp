#pragma once

#include <Eigen/Core>
#include <stdexcept>

namespace nssm {

using ParamVector = Eigen::VectorXd;

/// One-hidden-layer feed-forward network with tanh activation and an
/// optional direct linear input/output bypass.
///
/// Parameter layout inside a flat parameter vector, in this fixed order:
///   [ W1 row-major (n_hidden x n_in) | b1 (n_hidden) |
///     W2 row-major (n_out x n_hidden) | b2 (n_out) |
///     bypass A row-major (n_out x n_in) ]
/// The bypass carries no bias.
struct MlpSpec {
  int n_in = 0;
  int n_out = 0;
  int n_hidden = 15;
  bool has_linear_bypass = true;

  Eigen::Index param_count() const {
    Eigen::Index n = static_cast<Eigen::Index>(n_hidden) * (n_in + 1) +
                     static_cast<Eigen::Index>(n_out) * (n_hidden + 1);
    if (has_linear_bypass) n += static_cast<Eigen::Index>(n_out) * n_in;
    return n;
  }

  void validate() const {
    if (n_in < 1 || n_out < 1 || n_hidden < 1)
      throw std::invalid_argument("MlpSpec: n_in, n_out, n_hidden must all be >= 1");
  }

  // Offsets of the layout blocks relative to the slice start.
  Eigen::Index w1_offset() const { return 0; }
  Eigen::Index b1_offset() const { return static_cast<Eigen::Index>(n_hidden) * n_in; }
  Eigen::Index w2_offset() const { return b1_offset() + n_hidden; }
  Eigen::Index b2_offset() const { return w2_offset() + static_cast<Eigen::Index>(n_out) * n_hidden; }
  Eigen::Index bypass_offset() const { return b2_offset() + n_out; }
};

/// A view descriptor: where this network's parameters live inside a
/// shared flat ParamVector.
struct ParamSlice {
  Eigen::Index offset = 0;
  MlpSpec spec;

  void check_against(const ParamVector& theta) const {
    if (offset < 0 || offset + spec.param_count() > theta.size())
      throw std::invalid_argument("ParamSlice: slice exceeds parameter vector length");
  }
};

struct MlpJacobians {
  Eigen::MatrixXd wrt_input;   // n_out x n_in
  Eigen::MatrixXd wrt_params;  // n_out x param_count, columns follow the layout
};

Eigen::VectorXd mlp_forward(const ParamSlice& slice, const ParamVector& theta,
                            const Eigen::VectorXd& input);

MlpJacobians mlp_jacobians(const ParamSlice& slice, const ParamVector& theta,
                           const Eigen::VectorXd& input);

/// Assemble a parameter block from dense weight matrices (layout above).
/// Pass an empty bypass matrix when spec.bypass is false.
Eigen::VectorXd mlp_pack(const MlpSpec& spec, const Eigen::MatrixXd& w1,
                         const Eigen::VectorXd& b1, const Eigen::MatrixXd& w2,
                         const Eigen::VectorXd& b2,
                         const Eigen::MatrixXd& bypass = Eigen::MatrixXd());

struct MlpWeights {
  Eigen::MatrixXd w1, w2, bypass;
  Eigen::VectorXd b1, b2;
};

MlpWeights mlp_unpack(const ParamSlice& slice, const ParamVector& theta);

}  // namespace nssm
