#include "nssm_unc/mlp.hpp"

namespace nssm {

namespace {

using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

struct Views {
  ConstRowMajorMap w1, w2, bypass;
  ConstVecMap b1, b2;
};

Views make_views(const ParamSlice& slice, const ParamVector& theta) {
  const MlpSpec& s = slice.spec;
  const double* p = theta.data() + slice.offset;
  return Views{
      ConstRowMajorMap(p + s.w1_offset(), s.n_hidden, s.n_in),
      ConstRowMajorMap(p + s.w2_offset(), s.n_out, s.n_hidden),
      ConstRowMajorMap(p + s.bypass_offset(), s.has_linear_bypass ? s.n_out : 0,
                       s.has_linear_bypass ? s.n_in : 0),
      ConstVecMap(p + s.b1_offset(), s.n_hidden),
      ConstVecMap(p + s.b2_offset(), s.n_out),
  };
}

}  // namespace

Eigen::VectorXd mlp_forward(const ParamSlice& slice, const ParamVector& theta,
                            const Eigen::VectorXd& input) {
  slice.spec.validate();
  slice.check_against(theta);
  if (input.size() != slice.spec.n_in)
    throw std::invalid_argument("mlp_forward: input length does not match n_in");

  const Views v = make_views(slice, theta);
  Eigen::VectorXd h = (v.w1 * input + v.b1).array().tanh();
  Eigen::VectorXd out = v.w2 * h + v.b2;
  if (slice.spec.has_linear_bypass) out.noalias() += v.bypass * input;
  return out;
}

MlpJacobians mlp_jacobians(const ParamSlice& slice, const ParamVector& theta,
                           const Eigen::VectorXd& input) {
  slice.spec.validate();
  slice.check_against(theta);
  const MlpSpec& s = slice.spec;
  if (input.size() != s.n_in)
    throw std::invalid_argument("mlp_jacobians: input length does not match n_in");

  const Views v = make_views(slice, theta);
  const Eigen::VectorXd h = (v.w1 * input + v.b1).array().tanh();
  const Eigen::VectorXd d = 1.0 - h.array().square();  // tanh'

  MlpJacobians jac;
  jac.wrt_input.noalias() = v.w2 * d.asDiagonal() * v.w1;
  if (s.has_linear_bypass) jac.wrt_input += v.bypass;

  jac.wrt_params = Eigen::MatrixXd::Zero(s.n_out, s.param_count());
  // d out / d W1[i][j] = W2[:,i] * d_i * x_j
  for (int i = 0; i < s.n_hidden; ++i) {
    const Eigen::VectorXd col = v.w2.col(i) * d(i);
    for (int j = 0; j < s.n_in; ++j)
      jac.wrt_params.col(s.w1_offset() + static_cast<Eigen::Index>(i) * s.n_in + j) =
          col * input(j);
    jac.wrt_params.col(s.b1_offset() + i) = col;
  }
  // d out[o] / d W2[o][i] = h_i; d out[o] / d b2[o] = 1
  for (int o = 0; o < s.n_out; ++o) {
    for (int i = 0; i < s.n_hidden; ++i)
      jac.wrt_params(o, s.w2_offset() + static_cast<Eigen::Index>(o) * s.n_hidden + i) = h(i);
    jac.wrt_params(o, s.b2_offset() + o) = 1.0;
    if (s.has_linear_bypass)
      for (int j = 0; j < s.n_in; ++j)
        jac.wrt_params(o, s.bypass_offset() + static_cast<Eigen::Index>(o) * s.n_in + j) =
            input(j);
  }
  return jac;
}

Eigen::VectorXd mlp_pack(const MlpSpec& spec, const Eigen::MatrixXd& w1,
                         const Eigen::VectorXd& b1, const Eigen::MatrixXd& w2,
                         const Eigen::VectorXd& b2, const Eigen::MatrixXd& bypass) {
  spec.validate();
  if (w1.rows() != spec.n_hidden || w1.cols() != spec.n_in ||
      b1.size() != spec.n_hidden || w2.rows() != spec.n_out ||
      w2.cols() != spec.n_hidden || b2.size() != spec.n_out)
    throw std::invalid_argument("mlp_pack: weight shape mismatch");
  if (spec.has_linear_bypass && (bypass.rows() != spec.n_out || bypass.cols() != spec.n_in))
    throw std::invalid_argument("mlp_pack: bypass shape mismatch");

  Eigen::VectorXd p(spec.param_count());
  Eigen::Index k = 0;
  for (int i = 0; i < spec.n_hidden; ++i)
    for (int j = 0; j < spec.n_in; ++j) p(k++) = w1(i, j);
  for (int i = 0; i < spec.n_hidden; ++i) p(k++) = b1(i);
  for (int o = 0; o < spec.n_out; ++o)
    for (int i = 0; i < spec.n_hidden; ++i) p(k++) = w2(o, i);
  for (int o = 0; o < spec.n_out; ++o) p(k++) = b2(o);
  if (spec.has_linear_bypass)
    for (int o = 0; o < spec.n_out; ++o)
      for (int j = 0; j < spec.n_in; ++j) p(k++) = bypass(o, j);
  return p;
}

MlpWeights mlp_unpack(const ParamSlice& slice, const ParamVector& theta) {
  slice.spec.validate();
  slice.check_against(theta);
  const Views v = make_views(slice, theta);
  MlpWeights w;
  w.w1 = v.w1;
  w.b1 = v.b1;
  w.w2 = v.w2;
  w.b2 = v.b2;
  if (slice.spec.has_linear_bypass) w.bypass = v.bypass;
  return w;
}

}  // namespace nssm
