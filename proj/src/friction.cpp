#include "tactorque/friction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tactorque/errors.hpp"

namespace tactorque {

void FrictionParams::validate() const {
  const int nj = n();
  require(nj > 0, "friction params are empty");
  auto dim = [nj](const Vec& v) { return v.size() == nj; };
  require(dim(breakaway) && dim(stribeck_vel) && dim(shape) && dim(viscous) &&
              dim(load_coulomb) && dim(load_viscous),
          "friction param dimension mismatch");
  for (int j = 0; j < nj; ++j) {
    const std::string tag = "friction joint " + std::to_string(j + 1) + ": ";
    require(coulomb[j] >= 0.0, tag + "coulomb must be >= 0");
    require(breakaway[j] >= coulomb[j], tag + "breakaway must be >= coulomb");
    require(stribeck_vel[j] > 0.0, tag + "stribeck velocity must be > 0");
    require(shape[j] > 0.0, tag + "shape exponent must be > 0");
    require(viscous[j] >= 0.0, tag + "viscous must be >= 0");
  }
}

FrictionParams FrictionParams::zeros(int n) {
  FrictionParams p;
  p.coulomb = Vec::Zero(n);
  p.breakaway = Vec::Zero(n);
  p.stribeck_vel = Vec::Constant(n, 1.0);
  p.shape = Vec::Constant(n, 2.0);
  p.viscous = Vec::Zero(n);
  p.load_coulomb = Vec::Zero(n);
  p.load_viscous = Vec::Zero(n);
  return p;
}

double stribeck_scalar(double tau_c, double tau_s, double qd_s, double delta,
                       double b, double qd) {
  if (qd == 0.0) return 0.0;
  const double sgn = qd > 0.0 ? 1.0 : -1.0;
  const double level =
      tau_c + (tau_s - tau_c) * std::exp(-std::pow(std::abs(qd / qd_s), delta));
  return level * sgn + b * qd;
}

Vec stribeck_friction(const FrictionParams& p, const Vec& qd) {
  require(qd.size() == p.n(), "velocity dimension mismatch");
  Vec tau(p.n());
  for (int j = 0; j < p.n(); ++j) {
    tau[j] = stribeck_scalar(p.coulomb[j], p.breakaway[j], p.stribeck_vel[j],
                             p.shape[j], p.viscous[j], qd[j]);
  }
  return tau;
}

FrictionParams load_adjusted_params(const FrictionParams& p, const Vec& g_abs) {
  require(g_abs.size() == p.n(), "gravity magnitude dimension mismatch");
  FrictionParams out = p;
  out.coulomb += p.load_coulomb.cwiseProduct(g_abs);
  out.viscous += p.load_viscous.cwiseProduct(g_abs);
  return out;
}

void BristleParams::validate(int n) const {
  require(stiffness.size() == n && damping.size() == n,
          "bristle param dimension mismatch");
  require((stiffness.array() > 0.0).all(), "bristle stiffness must be > 0");
  require((damping.array() >= 0.0).all(), "bristle damping must be >= 0");
}

BristleParams default_bristle(const FrictionParams& p) {
  BristleParams bp;
  bp.stiffness = 100.0 * p.breakaway.cwiseQuotient(p.stribeck_vel);
  bp.damping = bp.stiffness.cwiseSqrt();
  return bp;
}

Vec hysteretic_step(BristleState& state, const BristleParams& bp,
                    const FrictionParams& loaded, const Vec& qd, double dt) {
  const int n = loaded.n();
  require(qd.size() == n && state.z.size() == n, "bristle state dimension mismatch");
  require(dt > 0.0, "step size must be > 0");
  Vec tau(n);
  for (int j = 0; j < n; ++j) {
    // g(qd) = tau_c,load + (tau_s - tau_c,load) exp(-|qd/qd_s|^delta)
    const double g =
        loaded.coulomb[j] +
        (loaded.breakaway[j] - loaded.coulomb[j]) *
            std::exp(-std::pow(std::abs(qd[j] / loaded.stribeck_vel[j]),
                               loaded.shape[j]));
    const double s0 = bp.stiffness[j];
    const double z_new =
        (state.z[j] + dt * qd[j]) / (1.0 + dt * s0 * std::abs(qd[j]) / g);
    const double zdot = (z_new - state.z[j]) / dt;
    tau[j] = s0 * z_new + bp.damping[j] * zdot + loaded.viscous[j] * qd[j];
    state.z[j] = z_new;
  }
  return tau;
}

namespace {

// Linear least squares for fixed (qd_s, delta). Unknowns:
// (tau_c, tau_s, alpha_c, b, alpha_v) through
// tau = tau_c s(1-e) + tau_s s e + alpha_c g s(1-e) + b qd + alpha_v g qd.
struct LinearFit {
  Eigen::Matrix<double, 5, 1> theta;
  double sse;
};

LinearFit fit_linear(const std::vector<FrictionSample>& samples, double qd_s,
                     double delta) {
  const int m = static_cast<int>(samples.size());
  Mat a(m, 5);
  Vec y(m);
  for (int i = 0; i < m; ++i) {
    const auto& s = samples[i];
    const double sgn = s.qd > 0.0 ? 1.0 : (s.qd < 0.0 ? -1.0 : 0.0);
    const double e = std::exp(-std::pow(std::abs(s.qd / qd_s), delta));
    a(i, 0) = sgn * (1.0 - e);
    a(i, 1) = sgn * e;
    a(i, 2) = s.g_abs * sgn * (1.0 - e);
    a(i, 3) = s.qd;
    a(i, 4) = s.g_abs * s.qd;
    y[i] = s.tau;
  }
  // Tiny ridge: when the decay column degenerates into the sign column the
  // plain solve returns arbitrarily large coefficient pairs that cancel.
  Eigen::Matrix<double, 5, 5> gram = a.transpose() * a;
  const Eigen::Matrix<double, 5, 1> aty = a.transpose() * y;
  gram.diagonal().array() += 1e-9 * gram.trace();

  // All five coefficients are physically non-negative; clamp-and-refit stops
  // near-collinear columns from trading huge opposite weights.
  LinearFit f;
  f.theta.setZero();
  bool free[5] = {true, true, true, true, true};
  for (int pass = 0; pass < 5; ++pass) {
    int idx[5], nf = 0;
    for (int k = 0; k < 5; ++k)
      if (free[k]) idx[nf++] = k;
    if (nf == 0) break;
    Mat sub(nf, nf);
    Vec rhs(nf);
    for (int r = 0; r < nf; ++r) {
      rhs[r] = aty[idx[r]];
      for (int c = 0; c < nf; ++c) sub(r, c) = gram(idx[r], idx[c]);
    }
    const Vec sol = sub.ldlt().solve(rhs);
    f.theta.setZero();
    bool clamped = false;
    for (int r = 0; r < nf; ++r) {
      if (sol[r] < 0.0) {
        free[idx[r]] = false;
        clamped = true;
      } else {
        f.theta[idx[r]] = sol[r];
      }
    }
    if (!clamped) break;
  }
  f.sse = (a * f.theta - y).squaredNorm();
  return f;
}

double golden_min(const std::function<double(double)>& f, double lo, double hi,
                  int iters) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

IdentifiedFriction identify_friction(
    const std::vector<std::vector<FrictionSample>>& per_joint) {
  const int n = static_cast<int>(per_joint.size());
  require(n > 0, "no joints to identify");

  IdentifiedFriction out;
  out.params = FrictionParams::zeros(n);
  out.rmse = Vec::Zero(n);

  for (int j = 0; j < n; ++j) {
    const auto& samples = per_joint[j];
    int pos = 0, neg = 0;
    for (const auto& s : samples) (s.qd > 0.0 ? pos : neg)++;
    if (pos < 20 || neg < 20) {
      throw IdentifiabilityError("joint " + std::to_string(j + 1) +
                                 ": need both velocity signs (have " +
                                 std::to_string(pos) + " positive, " +
                                 std::to_string(neg) + " negative)");
    }

    auto sse_at = [&](double qd_s, double delta) {
      return fit_linear(samples, qd_s, delta).sse;
    };

    // A knee above the sampled speed range is indistinguishable from no knee,
    // so the search stays inside the data.
    double qd_abs_max = 0.0;
    for (const auto& s : samples) qd_abs_max = std::max(qd_abs_max, std::abs(s.qd));
    const double qs_cap = std::max(0.004, qd_abs_max);

    // Coarse grid over the two nonlinear parameters.
    double best_qs = 0.02, best_delta = 2.0;
    double best = std::numeric_limits<double>::infinity();
    for (int iq = 0; iq < 25; ++iq) {
      const double qd_s = 0.002 * std::pow(qs_cap / 0.002, iq / 24.0);
      for (double delta = 0.5; delta <= 3.01; delta += 0.25) {
        const double sse = sse_at(qd_s, delta);
        if (sse < best) {
          best = sse;
          best_qs = qd_s;
          best_delta = delta;
        }
      }
    }

    // Alternating golden-section refinement around the grid winner; the
    // bracket shrinks once the coordinate steps settle.
    double span = 2.0, dspan = 0.5;
    for (int round = 0; round < 10; ++round) {
      const double qs_hi = std::min(best_qs * span, qs_cap);
      const double qs_lo = std::min(best_qs / span, qs_hi / 1.001);
      best_qs = std::exp(golden_min(
          [&](double lq) { return sse_at(std::exp(lq), best_delta); },
          std::log(qs_lo), std::log(qs_hi), 40));
      best_delta = golden_min(
          [&](double d) { return sse_at(best_qs, d); },
          std::max(0.2, best_delta - dspan),
          std::min(4.0, best_delta + dspan), 40);
      span = std::max(1.02, span * 0.6);
      dspan = std::max(0.02, dspan * 0.6);
    }

    const LinearFit f = fit_linear(samples, best_qs, best_delta);
    auto& p = out.params;
    p.coulomb[j] = std::max(0.0, f.theta[0]);
    p.breakaway[j] = std::max(p.coulomb[j], f.theta[1]);
    p.load_coulomb[j] = f.theta[2];
    p.viscous[j] = std::max(0.0, f.theta[3]);
    p.load_viscous[j] = f.theta[4];
    p.stribeck_vel[j] = best_qs;
    p.shape[j] = best_delta;
    out.rmse[j] = std::sqrt(f.sse / static_cast<double>(samples.size()));
  }
  out.params.validate();
  return out;
}

}  // namespace tactorque
