#include "nssm_unc/nssm.hpp"

#include <cmath>

namespace nssm {

namespace {

using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

struct NetViews {
  ConstRowMajorMap w1, w2, bypass;
  ConstVecMap b1, b2;
};

NetViews views(const ParamSlice& slice, const ParamVector& theta) {
  const MlpSpec& s = slice.spec;
  const double* p = theta.data() + slice.offset;
  return NetViews{
      ConstRowMajorMap(p + s.w1_offset(), s.n_hidden, s.n_in),
      ConstRowMajorMap(p + s.w2_offset(), s.n_out, s.n_hidden),
      ConstRowMajorMap(p + s.bypass_offset(), s.has_linear_bypass ? s.n_out : 0,
                       s.has_linear_bypass ? s.n_in : 0),
      ConstVecMap(p + s.b1_offset(), s.n_hidden),
      ConstVecMap(p + s.b2_offset(), s.n_out),
  };
}

[[noreturn]] void throw_divergence(Eigen::Index k) {
  throw DivergenceError(k, "simulation diverged (non-finite state) at step " +
                               std::to_string(k));
}

}  // namespace

NeuralSSModel NeuralSSModel::make(int n_x, int n_u, int n_hidden, bool bypass, int n_y) {
  NeuralSSModel m;
  m.n_x = n_x;
  m.n_u = n_u;
  m.n_y = n_y;
  m.f_spec = MlpSpec{n_x + n_u, n_x, n_hidden, bypass};
  m.g_spec = MlpSpec{n_x, n_y, n_hidden, bypass};
  m.f_spec.validate();
  m.g_spec.validate();
  m.theta = ParamVector::Zero(m.param_count());
  return m;
}

void NeuralSSModel::validate() const {
  f_spec.validate();
  g_spec.validate();
  if (f_spec.n_in != n_x + n_u || f_spec.n_out != n_x || g_spec.n_in != n_x ||
      g_spec.n_out != n_y)
    throw std::invalid_argument("NeuralSSModel: spec dimensions inconsistent");
  if (theta.size() != param_count())
    throw std::invalid_argument("NeuralSSModel: theta length does not match specs");
}

SimOutput simulate(const NeuralSSModel& model, const Eigen::MatrixXd& u,
                   const Eigen::VectorXd& x0, bool keep_states) {
  model.validate();
  const Eigen::Index n = u.rows();
  if (n < 1) throw std::invalid_argument("simulate: need at least one input sample");
  if (u.cols() != model.n_u || x0.size() != model.n_x)
    throw std::invalid_argument("simulate: input/state dimension mismatch");

  const NetViews f = views(model.f_slice(), model.theta);
  const NetViews g = views(model.g_slice(), model.theta);
  const int n_x = model.n_x;
  const int n_in_f = model.n_x + model.n_u;

  SimOutput out;
  out.y_mean.resize(n);
  if (keep_states) out.x_traj = Eigen::MatrixXd(n, n_x);

  Eigen::VectorXd x = x0;
  Eigen::VectorXd in_f(n_in_f), hf(model.f_spec.n_hidden), hg(model.g_spec.n_hidden);
  Eigen::VectorXd x_next(n_x), yv(model.n_y);

  for (Eigen::Index k = 0; k < n; ++k) {
    if (keep_states) out.x_traj->row(k) = x.transpose();

    hg = (g.w1 * x + g.b1).array().tanh();
    yv.noalias() = g.w2 * hg + g.b2;
    if (model.g_spec.has_linear_bypass) yv.noalias() += g.bypass * x;
    out.y_mean(k) = yv(0);

    in_f.head(n_x) = x;
    in_f.tail(model.n_u) = u.row(k).transpose();
    hf = (f.w1 * in_f + f.b1).array().tanh();
    x_next.noalias() = f.w2 * hf + f.b2;
    if (model.f_spec.has_linear_bypass) x_next.noalias() += f.bypass * in_f;

    if (!x_next.allFinite() || !std::isfinite(out.y_mean(k))) throw_divergence(k);
    x.swap(x_next);
  }
  out.x_final = x;
  return out;
}

SimOutput simulate_with_sensitivities(const NeuralSSModel& model,
                                      const Eigen::MatrixXd& u,
                                      const Eigen::VectorXd& x0,
                                      const SensitivityState* s0, bool keep_states) {
  model.validate();
  if (model.n_y != 1)
    throw std::invalid_argument("simulate_with_sensitivities: n_y must be 1");
  const Eigen::Index n = u.rows();
  if (n < 1) throw std::invalid_argument("simulate: need at least one input sample");
  if (u.cols() != model.n_u || x0.size() != model.n_x)
    throw std::invalid_argument("simulate: input/state dimension mismatch");

  const Eigen::Index n_theta = model.param_count();
  const NetViews f = views(model.f_slice(), model.theta);
  const NetViews g = views(model.g_slice(), model.theta);
  const MlpSpec& fs = model.f_spec;
  const MlpSpec& gs = model.g_spec;
  const int n_x = model.n_x;
  const int n_h_f = fs.n_hidden;
  const int n_h_g = gs.n_hidden;
  const int n_in_f = n_x + model.n_u;
  const Eigen::Index g_off = model.g_slice().offset;

  Eigen::MatrixXd s;  // n_x x n_theta
  if (s0) {
    if (s0->s.rows() != n_x || s0->s.cols() != n_theta)
      throw std::invalid_argument("simulate_with_sensitivities: s0 not conformable");
    s = s0->s;
  } else {
    s = Eigen::MatrixXd::Zero(n_x, n_theta);
  }

  SimOutput out;
  out.y_mean.resize(n);
  out.y_grads = Eigen::MatrixXd(n, n_theta);
  if (keep_states) out.x_traj = Eigen::MatrixXd(n, n_x);

  Eigen::VectorXd x = x0;
  Eigen::VectorXd in_f(n_in_f);
  Eigen::VectorXd hf(n_h_f), df(n_h_f), hg(n_h_g), dg(n_h_g);
  Eigen::VectorXd x_next(n_x), yv(1);
  Eigen::RowVectorXd vg(n_h_g), jgx(n_x), grow(n_theta);
  Eigen::MatrixXd vf(n_x, n_h_f), jfx(n_x, n_x), s_next(n_x, n_theta);

  for (Eigen::Index k = 0; k < n; ++k) {
    if (keep_states) out.x_traj->row(k) = x.transpose();

    // Output and its parameter gradient: dy_k/dtheta = Jgx s + Jgtheta.
    hg = (g.w1 * x + g.b1).array().tanh();
    yv.noalias() = g.w2 * hg + g.b2;
    if (gs.has_linear_bypass) yv.noalias() += g.bypass * x;
    out.y_mean(k) = yv(0);

    dg = 1.0 - hg.array().square();
    vg = g.w2.row(0).cwiseProduct(dg.transpose());
    jgx.noalias() = vg * g.w1;
    if (gs.has_linear_bypass) jgx += g.bypass.row(0);

    grow.noalias() = jgx * s;
    {
      double* gr = grow.data() + g_off;
      for (int i = 0; i < n_h_g; ++i) {
        const double vi = vg(i);
        double* w1c = gr + gs.w1_offset() + static_cast<Eigen::Index>(i) * n_x;
        for (int j = 0; j < n_x; ++j) w1c[j] += vi * x(j);
        gr[gs.b1_offset() + i] += vi;
      }
      for (int i = 0; i < n_h_g; ++i) gr[gs.w2_offset() + i] += hg(i);
      gr[gs.b2_offset()] += 1.0;
      if (gs.has_linear_bypass) {
        double* ac = gr + gs.bypass_offset();
        for (int j = 0; j < n_x; ++j) ac[j] += x(j);
      }
    }
    out.y_grads->row(k) = grow;

    // State update and sensitivity recursion: s_{k+1} = Jfx s + Jftheta.
    in_f.head(n_x) = x;
    in_f.tail(model.n_u) = u.row(k).transpose();
    hf = (f.w1 * in_f + f.b1).array().tanh();
    x_next.noalias() = f.w2 * hf + f.b2;
    if (fs.has_linear_bypass) x_next.noalias() += f.bypass * in_f;

    df = 1.0 - hf.array().square();
    vf = f.w2 * df.asDiagonal();
    jfx.noalias() = vf * f.w1.leftCols(n_x);
    if (fs.has_linear_bypass) jfx += f.bypass.leftCols(n_x);

    s_next.noalias() = jfx * s;
    for (int i = 0; i < n_h_f; ++i) {
      const auto vcol = vf.col(i);
      const Eigen::Index base = fs.w1_offset() + static_cast<Eigen::Index>(i) * n_in_f;
      for (int j = 0; j < n_in_f; ++j) s_next.col(base + j) += vcol * in_f(j);
      s_next.col(fs.b1_offset() + i) += vcol;
    }
    for (int o = 0; o < n_x; ++o) {
      const Eigen::Index base = fs.w2_offset() + static_cast<Eigen::Index>(o) * n_h_f;
      for (int i = 0; i < n_h_f; ++i) s_next(o, base + i) += hf(i);
      s_next(o, fs.b2_offset() + o) += 1.0;
      if (fs.has_linear_bypass) {
        const Eigen::Index abase =
            fs.bypass_offset() + static_cast<Eigen::Index>(o) * n_in_f;
        for (int j = 0; j < n_in_f; ++j) s_next(o, abase + j) += in_f(j);
      }
    }

    if (!x_next.allFinite() || !std::isfinite(out.y_mean(k))) throw_divergence(k);
    x.swap(x_next);
    s.swap(s_next);
  }
  out.x_final = x;
  out.s_final = s;
  return out;
}

namespace {

// Output at step k of a fresh simulation of steps 0..k (prefix re-simulation).
double prefix_output(const NeuralSSModel& model, const Eigen::MatrixXd& u,
                     const Eigen::VectorXd& x0, Eigen::Index k) {
  const NetViews f = views(model.f_slice(), model.theta);
  const NetViews g = views(model.g_slice(), model.theta);
  const int n_x = model.n_x;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd in_f(n_x + model.n_u);
  for (Eigen::Index i = 0; i < k; ++i) {
    in_f.head(n_x) = x;
    in_f.tail(model.n_u) = u.row(i).transpose();
    Eigen::VectorXd h = (f.w1 * in_f + f.b1).array().tanh();
    Eigen::VectorXd xn = f.w2 * h + f.b2;
    if (model.f_spec.has_linear_bypass) xn.noalias() += f.bypass * in_f;
    if (!xn.allFinite()) throw_divergence(i);
    x.swap(xn);
  }
  Eigen::VectorXd h = (g.w1 * x + g.b1).array().tanh();
  Eigen::VectorXd y = g.w2 * h + g.b2;
  if (model.g_spec.has_linear_bypass) y.noalias() += g.bypass * x;
  if (!std::isfinite(y(0))) throw_divergence(k);
  return y(0);
}

}  // namespace

Eigen::MatrixXd output_grads_naive(const NeuralSSModel& model, const Eigen::MatrixXd& u,
                                   const Eigen::VectorXd& x0, double fd_step) {
  model.validate();
  const Eigen::Index n = u.rows();
  const Eigen::Index n_theta = model.param_count();
  Eigen::MatrixXd grads(n, n_theta);
  NeuralSSModel perturbed = model;
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index i = 0; i < n_theta; ++i) {
      const double h = fd_step * std::max(1.0, std::abs(model.theta(i)));
      perturbed.theta(i) = model.theta(i) + h;
      const double yp = prefix_output(perturbed, u, x0, k);
      perturbed.theta(i) = model.theta(i) - h;
      const double ym = prefix_output(perturbed, u, x0, k);
      perturbed.theta(i) = model.theta(i);
      grads(k, i) = (yp - ym) / (2.0 * h);
    }
  }
  return grads;
}

}  // namespace nssm
