#include "shiftlab/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace shiftlab::optim {

QpProblem::QpProblem(Matrix p, Vector q_, Vector lo, Vector hi, std::optional<double> eps)
    : P(0.5 * (p + p.transpose())), q(std::move(q_)), lower(std::move(lo)), upper(std::move(hi)),
      mean_deviation(eps) {
  const auto n = q.size();
  require(n >= 1, "qp: empty problem");
  require(P.rows() == n && P.cols() == n && lower.size() == n && upper.size() == n, "qp: inconsistent dimensions",
          ErrorCode::kDimensionMismatch);
  require(!mean_deviation || *mean_deviation >= 0.0, "qp: mean deviation must be nonnegative");
}

void QpProblem::check_feasible() const {
  for (Eigen::Index i = 0; i < size(); ++i)
    require(lower(i) <= upper(i) && std::isfinite(lower(i)), "qp: empty box");
  if (mean_deviation) {
    const double n = static_cast<double>(size());
    const double lo_sum = lower.sum(), hi_sum = upper.sum();
    require(lo_sum <= n * (1.0 + *mean_deviation) && hi_sum >= n * (1.0 - *mean_deviation),
            "qp: box and mean band do not intersect");
  }
}

Vector QpProblem::project(const Vector& y) const {
  if (!mean_deviation) return y.cwiseMax(lower).cwiseMin(upper);
  const double n = static_cast<double>(size());
  return project_box_sum(y, lower, upper, n * (1.0 - *mean_deviation), n * (1.0 + *mean_deviation));
}

double QpProblem::infeasibility(const Vector& x) const {
  double v = std::max((lower - x).maxCoeff(), (x - upper).maxCoeff());
  if (mean_deviation) v = std::max(v, std::abs(x.mean() - 1.0) - *mean_deviation);
  return std::max(v, 0.0);
}

namespace {

Vector clip(const Vector& y, double tau, const Vector& lo, const Vector& hi) {
  return (y.array() - tau).max(lo.array()).min(hi.array()).matrix();
}

/// tau with sum(clip(y - tau)) == target; sum is nonincreasing in tau.
double solve_shift(const Vector& y, const Vector& lo, const Vector& hi, double target) {
  auto sum_at = [&](double tau) { return clip(y, tau, lo, hi).sum(); };
  double a = -1.0, b = 1.0;  // bracket: sum_at(a) >= target >= sum_at(b)
  const double span = 1.0 + y.cwiseAbs().maxCoeff() + std::abs(target);
  a = -span;
  b = span;
  while (sum_at(a) < target) a *= 2.0;
  while (sum_at(b) > target) b *= 2.0;
  for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    const double mid = 0.5 * (a + b);
    (sum_at(mid) >= target ? a : b) = mid;
  }
  // Exact finish on the free set identified by the bracket.
  const double tau0 = 0.5 * (a + b);
  double fixed = 0.0, free_sum = 0.0;
  int free_count = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double v = y(i) - tau0;
    if (v <= lo(i)) {
      fixed += lo(i);
    } else if (v >= hi(i)) {
      fixed += hi(i);
    } else {
      free_sum += y(i);
      ++free_count;
    }
  }
  if (free_count == 0) return tau0;
  const double tau = (free_sum + fixed - target) / free_count;
  return (tau >= a && tau <= b) ? tau : tau0;
}

double power_iteration(const Matrix& p) {
  Vector v = Vector::Ones(p.rows()).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    Vector w = p * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    lambda = norm;
    v = w / norm;
  }
  return lambda;
}

}  // namespace

Vector project_box_sum(const Vector& y, const Vector& lower, const Vector& upper, double sum_lo, double sum_hi) {
  require(sum_lo <= sum_hi, "projection: empty sum band");
  Vector x = y.cwiseMax(lower).cwiseMin(upper);
  const double s = x.sum();
  if (s >= sum_lo && s <= sum_hi) return x;
  const double target = s < sum_lo ? sum_lo : sum_hi;
  require(lower.sum() <= target && upper.sum() >= target, "projection: box and sum band do not intersect");
  return clip(y, solve_shift(y, lower, upper, target), lower, upper);
}

QpResult solve_qp(const QpProblem& problem, const QpOptions& options) {
  problem.check_feasible();
  const auto n = problem.size();
  Vector x = problem.project(options.start ? *options.start : Vector(Vector::Ones(n).cwiseMax(problem.lower).cwiseMin(problem.upper)));
  // Products with P are carried along: y is an affine combination of exact
  // iterates, so one matrix-vector product per accepted step suffices.
  Vector px = problem.P * x;
  auto value = [&](const Vector& v, const Vector& pv) { return 0.5 * v.dot(pv) + problem.q.dot(v); };
  double fx = value(x, px);

  auto residual = [&](const Vector& v, const Vector& pv) {
    return (v - problem.project(v - (pv + problem.q))).cwiseAbs().maxCoeff();
  };

  QpResult out;
  double lipschitz = std::max(power_iteration(problem.P), 1e-12);
  Vector y = x, py = px;
  double t = 1.0;
  int it = 0;
  out.kkt_residual = residual(x, px);
  for (; it < options.budget && out.kkt_residual > options.tolerance; ++it) {
    const Vector g = py + problem.q;
    const double fy = value(y, py);
    Vector z, pz;
    double fz;
    for (;;) {
      z = problem.project(y - g / lipschitz);
      pz = problem.P * z;
      fz = value(z, pz);
      const Vector d = z - y;
      if (fz <= fy + g.dot(d) + 0.5 * lipschitz * d.squaredNorm() + 1e-15 * std::abs(fy)) break;
      lipschitz *= 2.0;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    // Monotone variant: keep the better of the new proximal point and the old iterate.
    const bool improved = fz <= fx;
    Vector x_next = improved ? z : x;
    Vector px_next = improved ? pz : px;
    if (improved) {
      const double a = t / t_next, b = (t - 1.0) / t_next;
      y = x_next + a * (z - x_next) + b * (x_next - x);
      py = px_next + a * (pz - px_next) + b * (px_next - px);
      t = t_next;
      fx = fz;
    } else {
      t = 1.0;  // restart momentum
      y = x_next;
      py = px_next;
    }
    x = std::move(x_next);
    px = std::move(px_next);
    if (options.record_history) out.history.push_back(fx);
    if (it % 10 == 9) out.kkt_residual = residual(x, px);
  }
  out.kkt_residual = residual(x, px);
  out.x = std::move(x);
  out.objective = fx;
  out.iterations = it;
  out.converged = out.kkt_residual <= options.tolerance;
  return out;
}

LpResult solve_mean_band_lp(const Vector& losses, double eps, std::optional<double> cap) {
  require(eps >= 0.0 && std::isfinite(eps), "mean-band LP: eps must be nonnegative");
  require(losses.size() >= 1, "mean-band LP: no losses");
  require(!cap || *cap > 0.0, "mean-band LP: cap must be positive");
  const auto n = losses.size();
  const double count = static_cast<double>(n);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return losses(a) > losses(b); });

  LpResult out;
  out.weights = Vector::Zero(n);
  // Nonnegative losses make the upper mean bound binding; negative-loss
  // samples only receive mass needed to reach the lower bound.
  double remaining_hi = count * (1.0 + eps);
  double remaining_lo = count * (1.0 - eps);
  for (Eigen::Index i : order) {
    const double room = cap ? *cap : kInf;
    const double budget = losses(i) >= 0.0 ? remaining_hi : std::max(0.0, remaining_lo);
    const double put = std::min(room, budget);
    if (put <= 0.0) break;
    out.weights(i) = put;
    remaining_hi -= put;
    remaining_lo -= put;
  }
  out.mass_short = remaining_lo > 1e-12 * count;
  out.optimum = losses.dot(out.weights) / count;
  return out;
}

KliepResult solve_kliep(const Matrix& a, const Vector& b, const KliepOptions& options) {
  require(a.cols() == b.size() && a.cols() >= 1 && a.rows() >= 1, "kliep: inconsistent basis dimensions",
          ErrorCode::kDimensionMismatch);
  require(b.minCoeff() > 0.0, "kliep: source basis means must be positive");
  const double m = static_cast<double>(a.rows());
  const auto k = b.size();

  // beta_l = b_l alpha_l lives on the unit simplex; the problem becomes
  // maximize mean_j log (at beta)_j with at = a diag(1/b).
  const Matrix at = a * b.cwiseInverse().asDiagonal();
  auto objective = [&](const Vector& beta) {
    const Vector w = at * beta;
    if (w.minCoeff() <= 0.0) return -kInf;
    return w.array().log().sum() / m;
  };
  auto gradient = [&](const Vector& beta) -> Vector { return at.transpose() * (at * beta).cwiseInverse() / m; };

  Vector beta = Vector::Constant(k, 1.0 / static_cast<double>(k));
  std::vector<char> active(static_cast<std::size_t>(k), 1);
  KliepResult out;
  out.objective = objective(beta);
  require(std::isfinite(out.objective), "kliep: basis vanishes at some target point", ErrorCode::kNotConverged);

  // Damped Newton step on the face {beta_S >= 0, sum beta_S = 1}; returns the
  // ascent predicted by the quadratic model (0 when stalled).
  auto newton_on_face = [&]() {
    std::vector<Eigen::Index> s;
    for (Eigen::Index l = 0; l < k; ++l)
      if (active[static_cast<std::size_t>(l)]) s.push_back(l);
    const auto q = static_cast<Eigen::Index>(s.size());
    if (q < 2) return 0.0;
    const Vector inv_w = (at * beta).cwiseInverse();
    const Vector g = at.transpose() * inv_w / m;
    Matrix scaled(at.rows(), q);
    Vector gs(q);
    for (Eigen::Index c = 0; c < q; ++c) {
      scaled.col(c) = inv_w.cwiseProduct(at.col(s[static_cast<std::size_t>(c)]));
      gs(c) = g(s[static_cast<std::size_t>(c)]);
    }
    Matrix kkt = Matrix::Zero(q + 1, q + 1);
    kkt.topLeftCorner(q, q) = scaled.transpose() * scaled / m;
    kkt.block(0, q, q, 1).setOnes();
    kkt.block(q, 0, 1, q).setOnes();
    Vector rhs = Vector::Zero(q + 1);
    rhs.head(q) = gs;
    Vector d = kkt.completeOrthogonalDecomposition().solve(rhs).head(q);
    d.array() -= d.mean();  // keep sum(beta) exact
    const double decrement = gs.dot(d);
    if (!d.allFinite() || decrement <= 0.0) return 0.0;

    double t_max = kInf;
    Eigen::Index blocking = -1;
    for (Eigen::Index c = 0; c < q; ++c) {
      if (d(c) < 0.0) {
        const double t = -beta(s[static_cast<std::size_t>(c)]) / d(c);
        if (t < t_max) {
          t_max = t;
          blocking = c;
        }
      }
    }
    double t = std::min(1.0, t_max);
    for (; t > 1e-14; t *= 0.5) {
      Vector candidate = beta;
      for (Eigen::Index c = 0; c < q; ++c) candidate(s[static_cast<std::size_t>(c)]) += t * d(c);
      const bool hits = blocking >= 0 && t == t_max;
      if (hits) candidate(s[static_cast<std::size_t>(blocking)]) = 0.0;
      candidate = candidate.cwiseMax(0.0);
      candidate /= candidate.sum();
      const double f = objective(candidate);
      if (f >= out.objective + 1e-4 * t * decrement) {
        beta = candidate;
        out.objective = std::max(out.objective, f);
        if (hits) active[static_cast<std::size_t>(s[static_cast<std::size_t>(blocking)])] = 0;
        return decrement;
      }
    }
    return 0.0;
  };

  // Exact line search from beta toward vertex l; concave in the step.
  auto frank_wolfe_step = [&](Eigen::Index l) {
    const Vector w = at * beta;
    const Vector dw = at.col(l) - w;
    auto slope = [&](double gamma) { return (dw.array() / (w + gamma * dw).array()).sum() / m; };
    double lo = 0.0, hi = 1.0;
    if (slope(hi) >= 0.0) {
      lo = hi;
    } else {
      for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        (slope(mid) > 0.0 ? lo : hi) = mid;
      }
    }
    Vector candidate = (1.0 - lo) * beta;
    candidate(l) += lo;
    const double f = objective(candidate);
    if (f > out.objective) {
      beta = candidate;
      out.objective = f;
    }
    for (Eigen::Index i = 0; i < k; ++i) active[static_cast<std::size_t>(i)] = beta(i) > 0.0;
  };

  auto gap = [&](const Vector& g) { return std::max(0.0, g.maxCoeff() - 1.0); };  // Frank-Wolfe duality gap
  int it = 0;
  for (; it < options.budget; ++it) {
    const Vector g = gradient(beta);
    out.kkt_residual = gap(g);
    if (out.kkt_residual <= options.tolerance) break;
    // Off the face optimum while the gradient differs across active coordinates.
    double lo = kInf, hi = -kInf;
    for (Eigen::Index l = 0; l < k; ++l) {
      if (active[static_cast<std::size_t>(l)]) {
        lo = std::min(lo, g(l));
        hi = std::max(hi, g(l));
      }
    }
    const double before = out.objective;
    if (hi - lo > 0.1 * options.tolerance && newton_on_face() > 0.0 && out.objective > before) continue;
    // Enter the coordinate with the largest gap.
    Eigen::Index enter;
    g.maxCoeff(&enter);
    active[static_cast<std::size_t>(enter)] = 1;
    if (newton_on_face() <= 0.0 || beta(enter) <= 0.0) frank_wolfe_step(enter);
    if (out.objective <= before) {
      out.kkt_residual = gap(gradient(beta));  // stalled at machine precision
      break;
    }
  }
  out.converged = out.kkt_residual <= options.tolerance;
  out.iterations = it;
  out.alpha = beta.cwiseQuotient(b);
  return out;
}

QpResult solve_nonnegative_qp(const Matrix& h, const Vector& g, const QpOptions& options) {
  const auto n = g.size();
  require(n >= 1 && h.rows() == n && h.cols() == n, "nonnegative qp: inconsistent dimensions",
          ErrorCode::kDimensionMismatch);
  const Matrix hs = 0.5 * (h + h.transpose());
  const double scale = std::max({hs.cwiseAbs().maxCoeff(), g.cwiseAbs().maxCoeff(), 1e-300});
  std::vector<char> free(static_cast<std::size_t>(n), 0);
  Vector x = Vector::Zero(n);

  // Minimizer of the quadratic restricted to the free set (zero elsewhere).
  auto restricted = [&]() {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i)
      if (free[static_cast<std::size_t>(i)]) idx.push_back(i);
    const auto k = static_cast<Eigen::Index>(idx.size());
    Matrix hf(k, k);
    Vector gf(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      gf(a) = g(idx[static_cast<std::size_t>(a)]);
      for (Eigen::Index b = 0; b < k; ++b) hf(a, b) = hs(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    }
    const Vector zf = hf.completeOrthogonalDecomposition().solve(gf);
    Vector z = Vector::Zero(n);
    for (Eigen::Index a = 0; a < k; ++a) z(idx[static_cast<std::size_t>(a)]) = zf(a);
    return z;
  };

  QpResult out;
  int it = 0;
  const double tol = options.tolerance * scale;
  for (; it < options.budget; ++it) {
    const Vector w = g - hs * x;  // negative gradient
    Eigen::Index enter = -1;
    double best = tol;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!free[static_cast<std::size_t>(i)] && w(i) > best) {
        best = w(i);
        enter = i;
      }
    }
    if (enter < 0) {
      out.converged = true;
      break;
    }
    free[static_cast<std::size_t>(enter)] = 1;
    for (int inner = 0; inner <= n; ++inner) {
      const Vector z = restricted();
      double step = 1.0;
      Eigen::Index leave = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (free[static_cast<std::size_t>(i)] && z(i) <= 0.0) {
          const double s = x(i) / (x(i) - z(i));
          if (s < step) {
            step = s;
            leave = i;
          }
        }
      }
      if (leave < 0) {
        x = z;
        break;
      }
      x += step * (z - x);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (free[static_cast<std::size_t>(i)] && (i == leave || x(i) <= 0.0)) {
          free[static_cast<std::size_t>(i)] = 0;
          x(i) = 0.0;
        }
      }
    }
  }
  out.x = x;
  out.objective = 0.5 * x.dot(hs * x) - g.dot(x);
  out.kkt_residual = (x - (x + g - hs * x).cwiseMax(0.0)).cwiseAbs().maxCoeff();
  out.iterations = it;
  return out;
}

}  // namespace shiftlab::optim
