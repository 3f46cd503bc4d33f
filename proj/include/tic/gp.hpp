// Copyright 2026 The TIC Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Gaussian-process dynamics model: zero prior mean, squared-exponential
// kernel with one length scale per input, one independent GP per state
// dimension. Inputs are (state, control) pairs; targets are state deltas.

#ifndef TIC_GP_HPP_
#define TIC_GP_HPP_

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tic/common.hpp"
#include "tic/optim.hpp"

namespace tic {

struct GPHyper {
  VecX length_scales;
  double signal_variance = 1.0;
  double noise_variance = 1e-2;

  Eigen::Index input_dim() const { return length_scales.size(); }

  void validate() const {
    if (length_scales.size() == 0) throw DomainError("GPHyper: no length scales");
    if (!((length_scales.array() > 0.0).all() && length_scales.allFinite())) {
      throw DomainError("GPHyper: length scales must be positive");
    }
    if (!(signal_variance > 0.0 && noise_variance > 0.0) || !std::isfinite(signal_variance) ||
        !std::isfinite(noise_variance)) {
      throw DomainError("GPHyper: variances must be positive");
    }
  }

  // Packed as [log l_1 .. log l_D, log sigma_f, log sigma_n].
  VecX to_log() const {
    VecX p(input_dim() + 2);
    p.head(input_dim()) = length_scales.array().log();
    p[input_dim()] = 0.5 * std::log(signal_variance);
    p[input_dim() + 1] = 0.5 * std::log(noise_variance);
    return p;
  }

  static GPHyper from_log(const VecX& p) {
    GPHyper h;
    const Eigen::Index d = p.size() - 2;
    h.length_scales = p.head(d).array().exp();
    h.signal_variance = std::exp(2.0 * p[d]);
    h.noise_variance = std::exp(2.0 * p[d + 1]);
    return h;
  }
};

inline double se_kernel(const VecX& a, const VecX& b, const GPHyper& h) {
  const double r2 = ((a - b).array() / h.length_scales.array()).square().sum();
  return h.signal_variance * std::exp(-0.5 * r2);
}

namespace gp_detail {

// Pairwise squared distances between rows of A and rows of B.
inline MatX squared_distances(const MatX& A, const MatX& B) {
  MatX d = (-2.0 * A * B.transpose()).colwise() + A.rowwise().squaredNorm();
  d.rowwise() += B.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

inline MatX scale_rows(const MatX& X, const VecX& length_scales) {
  return X.array().rowwise() / length_scales.transpose().array();
}

// Kernel matrix without the noise term.
inline MatX se_gram(const MatX& X, const GPHyper& h) {
  const MatX Xs = scale_rows(X, h.length_scales);
  return h.signal_variance * (-0.5 * squared_distances(Xs, Xs)).array().exp().matrix();
}

// Factor K + (noise + jitter) I, escalating jitter (relative to the signal
// variance) from 0 through 1e-10 .. 1e-6.
inline Eigen::LLT<MatX> factor(const MatX& K, double noise, double signal, double* jitter_used) {
  double jitter = 0.0;
  for (int level = 0; level <= 5; ++level) {
    MatX A = K;
    A.diagonal().array() += noise + jitter;
    Eigen::LLT<MatX> llt(A);
    if (llt.info() == Eigen::Success) {
      const auto& L = llt.matrixLLT();
      if (L.diagonal().allFinite() && (L.diagonal().array() > 0.0).all()) {
        if (jitter_used) *jitter_used = jitter;
        return llt;
      }
    }
    jitter = signal * std::pow(10.0, -10 + level);
  }
  throw NumericError("GP Gram matrix is not positive definite after jitter escalation");
}

}  // namespace gp_detail

struct LmlResult {
  double value = 0.0;
  VecX gradient;  // with respect to GPHyper::to_log()
};

// Exact log evidence log p(y | X, h) of a zero-mean GP and its gradient with
// respect to the log hyperparameters.
inline LmlResult log_marginal_likelihood(const MatX& X, const VecX& y, const GPHyper& h) {
  h.validate();
  if (X.rows() != y.size()) throw DomainError("log_marginal_likelihood: size mismatch");
  if (X.cols() != h.input_dim()) throw DomainError("log_marginal_likelihood: input dim mismatch");
  const Eigen::Index n = X.rows();
  const Eigen::Index D = X.cols();

  const MatX Kse = gp_detail::se_gram(X, h);
  const auto llt = gp_detail::factor(Kse, h.noise_variance, h.signal_variance, nullptr);
  const VecX alpha = llt.solve(y);
  const MatX Kinv = llt.solve(MatX::Identity(n, n));
  const auto& L = llt.matrixLLT();

  LmlResult r;
  r.value = -0.5 * y.dot(alpha) - L.diagonal().array().log().sum() -
            0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  const MatX W = alpha * alpha.transpose() - Kinv;
  const MatX WK = W.cwiseProduct(Kse);
  r.gradient.resize(D + 2);
  for (Eigen::Index d = 0; d < D; ++d) {
    const VecX col = X.col(d) / h.length_scales[d];
    MatX diff2 = (col.replicate(1, n) - col.transpose().replicate(n, 1)).array().square();
    r.gradient[d] = 0.5 * WK.cwiseProduct(diff2).sum();
  }
  r.gradient[D] = WK.sum();
  r.gradient[D + 1] = h.noise_variance * W.trace();
  return r;
}

// One conditioned GP (a single output dimension).
class GaussianProcess {
 public:
  GaussianProcess() = default;

  static GaussianProcess condition(MatX inputs, VecX targets, GPHyper hyper) {
    hyper.validate();
    if (inputs.rows() != targets.size() || inputs.rows() == 0) {
      throw DomainError("GaussianProcess: inputs and targets must be nonempty and match");
    }
    if (inputs.cols() != hyper.input_dim()) {
      throw DomainError("GaussianProcess: input dimension does not match hyperparameters");
    }
    GaussianProcess gp;
    gp.inputs_ = std::move(inputs);
    gp.targets_ = std::move(targets);
    gp.hyper_ = std::move(hyper);
    gp.scaled_inputs_ = gp_detail::scale_rows(gp.inputs_, gp.hyper_.length_scales);
    const MatX K = gp_detail::se_gram(gp.inputs_, gp.hyper_);
    auto llt = gp_detail::factor(K, gp.hyper_.noise_variance, gp.hyper_.signal_variance,
                                 &gp.jitter_);
    gp.alpha_ = llt.solve(gp.targets_);
    gp.chol_ = llt.matrixL();
    return gp;
  }

  // Posterior of the noisy output at each row of Z: latent variance plus the
  // noise variance.
  void predict(const MatX& Z, VecX& mean, VecX& variance) const {
    const MatX Zs = gp_detail::scale_rows(Z, hyper_.length_scales);
    const MatX Ks =
        hyper_.signal_variance *
        (-0.5 * gp_detail::squared_distances(Zs, scaled_inputs_)).array().exp().matrix();
    mean = Ks * alpha_;
    const MatX V = chol_.triangularView<Eigen::Lower>().solve(Ks.transpose());
    const VecX latent =
        (hyper_.signal_variance - V.colwise().squaredNorm().transpose().array()).cwiseMax(0.0);
    variance = latent.array() + hyper_.noise_variance;
  }

  std::pair<double, double> predict(const VecX& z) const {
    VecX m, v;
    predict(MatX(z.transpose()), m, v);
    return {m[0], v[0]};
  }

  const MatX& inputs() const { return inputs_; }
  const VecX& targets() const { return targets_; }
  const GPHyper& hyper() const { return hyper_; }
  double jitter() const { return jitter_; }

 private:
  MatX inputs_;
  MatX scaled_inputs_;
  VecX targets_;
  GPHyper hyper_;
  MatX chol_;  // lower Cholesky factor of K + noise
  VecX alpha_;
  double jitter_ = 0.0;
};

struct Transition {
  VecX state;
  Vec3 control = Vec3::Zero();
  VecX next_state;
};

struct Dataset {
  std::vector<Transition> transitions;

  bool empty() const { return transitions.empty(); }
  std::size_t size() const { return transitions.size(); }
  Eigen::Index state_dim() const {
    return transitions.empty() ? 0 : transitions.front().state.size();
  }

  void append(const Dataset& other) {
    transitions.insert(transitions.end(), other.transitions.begin(), other.transitions.end());
  }

  MatX inputs() const {
    const Eigen::Index S = state_dim();
    MatX X(static_cast<Eigen::Index>(size()), S + kFingers);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const auto& t = transitions[static_cast<std::size_t>(i)];
      X.row(i).head(S) = t.state.transpose();
      X.row(i).tail(kFingers) = t.control.transpose();
    }
    return X;
  }

  MatX deltas() const {
    const Eigen::Index S = state_dim();
    MatX Y(static_cast<Eigen::Index>(size()), S);
    for (Eigen::Index i = 0; i < Y.rows(); ++i) {
      const auto& t = transitions[static_cast<std::size_t>(i)];
      Y.row(i) = (t.next_state - t.state).transpose();
    }
    return Y;
  }
};

struct Prediction {
  VecX mean;
  VecX variance;
};

struct GPModel {
  std::vector<GaussianProcess> outputs;

  Eigen::Index state_dim() const { return static_cast<Eigen::Index>(outputs.size()); }
  Eigen::Index input_dim() const { return state_dim() + kFingers; }

  // Rows of `inputs` are (state, control); returns absolute next-state means
  // and per-dimension variances.
  void predict_batch(const MatX& inputs, MatX& mean, MatX& variance) const {
    const Eigen::Index S = state_dim();
    mean.resize(inputs.rows(), S);
    variance.resize(inputs.rows(), S);
    VecX m, v;
    for (Eigen::Index j = 0; j < S; ++j) {
      outputs[static_cast<std::size_t>(j)].predict(inputs, m, v);
      mean.col(j) = inputs.col(j) + m;
      variance.col(j) = v;
    }
  }
};

inline Prediction predict(const GPModel& model, const VecX& state, const Vec3& control) {
  if (state.size() != model.state_dim()) throw DomainError("predict: state dimension mismatch");
  MatX z(1, model.input_dim());
  z.row(0).head(state.size()) = state.transpose();
  z.row(0).tail(kFingers) = control.transpose();
  MatX mean, var;
  model.predict_batch(z, mean, var);
  return {mean.row(0).transpose(), var.row(0).transpose()};
}

struct FitOptions {
  int restarts = 3;
  int max_iterations = 100;
  // Soft limits that keep the likelihood optimum well conditioned.
  double max_signal_to_noise = 1e4;
  double max_length_ratio = 1e3;  // relative to the input standard deviation
  std::optional<std::vector<GPHyper>> init;  // one per output; warm start
};

namespace gp_detail {

inline VecX column_std(const MatX& X) {
  VecX s(X.cols());
  for (Eigen::Index d = 0; d < X.cols(); ++d) {
    const double mean = X.col(d).mean();
    s[d] = std::sqrt((X.col(d).array() - mean).square().mean());
  }
  return s;
}

inline GPHyper default_hyper(const VecX& input_std, const VecX& y) {
  GPHyper h;
  h.length_scales = input_std.unaryExpr([](double s) { return s > 1e-12 ? s : 1.0; });
  const double mean = y.mean();
  double sf = std::sqrt((y.array() - mean).square().mean());
  if (!(sf > 1e-9)) sf = 1e-3;
  h.signal_variance = sf * sf;
  h.noise_variance = 0.01 * sf * sf;
  return h;
}

}  // namespace gp_detail

// Maximizes the log marginal likelihood of each output independently from
// `restarts` starting points and keeps the best.
inline GPModel fit(const Dataset& data, const FitOptions& opt = {}) {
  if (data.size() < 2) throw FitError("fit: need at least 2 data points");
  const MatX X = data.inputs();
  const MatX Y = data.deltas();
  if (!X.allFinite() || !Y.allFinite()) throw FitError("fit: non-finite data");
  bool distinct = false;
  for (Eigen::Index i = 1; i < X.rows() && !distinct; ++i) {
    distinct = (X.row(i) - X.row(0)).cwiseAbs().maxCoeff() > 0.0;
  }
  if (!distinct) throw FitError("fit: all training inputs are identical");

  const Eigen::Index D = X.cols();
  const Eigen::Index S = Y.cols();
  const VecX input_std = gp_detail::column_std(X);
  const VecX length_cap = input_std.unaryExpr([&](double s) {
    return std::log(opt.max_length_ratio * (s > 1e-12 ? s : 1.0));
  });
  const double log_snr_cap = std::log(opt.max_signal_to_noise);
  const double penalty_weight = static_cast<double>(X.rows());

  GPModel model;
  for (Eigen::Index j = 0; j < S; ++j) {
    const VecX y = Y.col(j);
    const GPHyper data_init = gp_detail::default_hyper(input_std, y);
    std::vector<VecX> starts;
    if (opt.init && static_cast<Eigen::Index>(opt.init->size()) == S &&
        (*opt.init)[static_cast<std::size_t>(j)].input_dim() == D) {
      starts.push_back((*opt.init)[static_cast<std::size_t>(j)].to_log());
    }
    starts.push_back(data_init.to_log());
    for (int r = 1; static_cast<int>(starts.size()) < std::max(1, opt.restarts); ++r) {
      VecX p = data_init.to_log();
      const double shift = (r % 2 == 1 ? 1.0 : -1.0) * std::log(2.0) * ((r + 1) / 2);
      p.head(D).array() += shift;
      p[D + 1] -= std::log(3.0) * r;
      starts.push_back(p);
    }
    starts.resize(static_cast<std::size_t>(std::max(1, opt.restarts)));

    auto objective = [&](const VecX& p, VecX* out) -> double {
      LmlResult lml;
      try {
        lml = log_marginal_likelihood(X, y, GPHyper::from_log(p));
      } catch (const Error&) {
        if (out) out->setZero(p.size());
        return std::numeric_limits<double>::infinity();
      }
      double value = -lml.value;
      VecX grad = -lml.gradient;
      for (Eigen::Index d = 0; d < D; ++d) {
        const double excess = p[d] - length_cap[d];
        if (excess > 0.0) {
          value += penalty_weight * excess * excess;
          grad[d] += 2.0 * penalty_weight * excess;
        }
      }
      const double excess = (p[D] - p[D + 1]) - log_snr_cap;
      if (excess > 0.0) {
        value += penalty_weight * excess * excess;
        grad[D] += 2.0 * penalty_weight * excess;
        grad[D + 1] -= 2.0 * penalty_weight * excess;
      }
      if (out) *out = std::move(grad);
      return value;
    };

    MinimizeOptions mopt;
    mopt.max_iterations = opt.max_iterations;
    mopt.nonfinite_is_error = false;
    mopt.gradient_tolerance = 1e-6;
    std::optional<MinimizeResult> best;
    for (const auto& p0 : starts) {
      try {
        auto res = minimize_bfgs(objective, p0, mopt);
        if (!best || res.value < best->value) best = std::move(res);
      } catch (const OptimizationError&) {
        // Start point itself was not finite; try the next one.
      }
    }
    if (!best) throw NumericError("fit: no restart produced a finite likelihood");
    model.outputs.push_back(GaussianProcess::condition(X, y, GPHyper::from_log(best->x)));
  }
  return model;
}

}  // namespace tic

#endif  // TIC_GP_HPP_
