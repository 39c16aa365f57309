#include "medex/design.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "medex/rng.hpp"

namespace medex::design {

namespace {

void check_np(int n, int p) {
  if (n < 2) throw std::invalid_argument("design: n must be >= 2");
  if (p < 1) throw std::invalid_argument("design: p must be >= 1");
}

// Sum over pairs of (squared distance)^(-t/2); phi_p is its t-th root.
// The swap optimizers work on this sum directly.
double inv_dist_power_sum(const Eigen::MatrixXd& pts, int t) {
  const Eigen::Index n = pts.rows();
  double s = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double d2 = (pts.row(i) - pts.row(j)).squaredNorm();
      s += std::pow(d2, -0.5 * t);
    }
  return s;
}

// Tracks the squared-distance matrix and the inverse-power sum across
// within-column swaps so each proposal costs O(n).
class SwapState {
 public:
  SwapState(Eigen::MatrixXd& pts, int t) : pts_(pts), t_(t), n_(pts.rows()) {
    d2_.resize(n_, n_);
    d2_.setZero();
    sum_ = 0.0;
    for (Eigen::Index i = 0; i + 1 < n_; ++i)
      for (Eigen::Index j = i + 1; j < n_; ++j) {
        double d2 = (pts_.row(i) - pts_.row(j)).squaredNorm();
        d2_(i, j) = d2_(j, i) = d2;
        sum_ += pw(d2);
      }
  }

  double sum() const { return sum_; }

  // Change in the inverse-power sum if rows r1,r2 swap their entries in
  // column c. d(r1,r2) itself is unaffected by the swap.
  double swap_delta(Eigen::Index c, Eigen::Index r1, Eigen::Index r2) const {
    const double a = pts_(r1, c), b = pts_(r2, c);
    double delta = 0.0;
    for (Eigen::Index k = 0; k < n_; ++k) {
      if (k == r1 || k == r2) continue;
      const double xk = pts_(k, c);
      const double d1_new = d2_(r1, k) - (a - xk) * (a - xk) + (b - xk) * (b - xk);
      const double d2_new = d2_(r2, k) - (b - xk) * (b - xk) + (a - xk) * (a - xk);
      delta += pw(d1_new) + pw(d2_new) - pw(d2_(r1, k)) - pw(d2_(r2, k));
    }
    return delta;
  }

  void apply_swap(Eigen::Index c, Eigen::Index r1, Eigen::Index r2) {
    const double a = pts_(r1, c), b = pts_(r2, c);
    for (Eigen::Index k = 0; k < n_; ++k) {
      if (k == r1 || k == r2) continue;
      const double xk = pts_(k, c);
      double upd1 = d2_(r1, k) - (a - xk) * (a - xk) + (b - xk) * (b - xk);
      double upd2 = d2_(r2, k) - (b - xk) * (b - xk) + (a - xk) * (a - xk);
      sum_ += pw(upd1) + pw(upd2) - pw(d2_(r1, k)) - pw(d2_(r2, k));
      d2_(r1, k) = d2_(k, r1) = upd1;
      d2_(r2, k) = d2_(k, r2) = upd2;
    }
    std::swap(pts_(r1, c), pts_(r2, c));
  }

 private:
  double pw(double d2) const { return std::pow(d2, -0.5 * t_); }

  Eigen::MatrixXd& pts_;
  int t_;
  Eigen::Index n_;
  Eigen::MatrixXd d2_;
  double sum_;
};

// Cross products between columns, for incremental column correlations. All
// LHD columns hold the same midpoint multiset, so means and variances are
// fixed; only sum(x_a * x_b) moves under swaps.
class CorrState {
 public:
  explicit CorrState(Eigen::MatrixXd& pts) : pts_(pts), n_(pts.rows()), p_(pts.cols()) {
    cp_ = pts_.transpose() * pts_;
    double mean = 0.5;
    var_ = 0.0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      double m = (static_cast<double>(i) + 0.5) / static_cast<double>(n_);
      var_ += (m - mean) * (m - mean);
    }
    // var_ is the column sum of squared deviations; correlation divides it out
  }

  double rho2_bar() const {
    if (p_ < 2) return 0.0;
    double s = 0.0;
    for (Eigen::Index a = 0; a + 1 < p_; ++a)
      for (Eigen::Index b = a + 1; b < p_; ++b) s += corr2(a, b);
    return s / (0.5 * static_cast<double>(p_) * static_cast<double>(p_ - 1));
  }

  double rho2_bar_after_swap(Eigen::Index c, Eigen::Index r1, Eigen::Index r2) const {
    if (p_ < 2) return 0.0;
    const double diff = pts_(r1, c) - pts_(r2, c);
    double s = 0.0;
    for (Eigen::Index a = 0; a + 1 < p_; ++a)
      for (Eigen::Index b = a + 1; b < p_; ++b) {
        double cp = cp_(a, b);
        if (a == c) cp += diff * (pts_(r2, b) - pts_(r1, b));
        if (b == c) cp += diff * (pts_(r2, a) - pts_(r1, a));
        s += corr2_from_cp(cp);
      }
    return s / (0.5 * static_cast<double>(p_) * static_cast<double>(p_ - 1));
  }

  void apply_swap(Eigen::Index c, Eigen::Index r1, Eigen::Index r2) {
    const double diff = pts_(r1, c) - pts_(r2, c);
    for (Eigen::Index o = 0; o < p_; ++o) {
      if (o == c) continue;
      double upd = cp_(c, o) + diff * (pts_(r2, o) - pts_(r1, o));
      cp_(c, o) = cp_(o, c) = upd;
    }
  }

 private:
  double corr2(Eigen::Index a, Eigen::Index b) const { return corr2_from_cp(cp_(a, b)); }

  double corr2_from_cp(double cp) const {
    double cov = cp - static_cast<double>(n_) * 0.25;  // means are exactly 0.5
    double r = cov / var_;
    return r * r;
  }

  Eigen::MatrixXd& pts_;
  Eigen::Index n_, p_;
  Eigen::MatrixXd cp_;
  double var_;
};

}  // namespace

DesignMatrix random_lhd(int n, int p, std::uint64_t seed) {
  check_np(n, p);
  rng::Stream stream(rng::derive(seed, "lhd"));
  Eigen::MatrixXd pts(n, p);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int j = 0; j < p; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    stream.shuffle(perm);
    for (int i = 0; i < n; ++i)
      pts(i, j) = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + 0.5) / n;
  }
  return DesignMatrix{std::move(pts)};
}

DesignMatrix maximin_lhd(int n, int p, int sweeps, std::uint64_t seed) {
  DesignMatrix d = random_lhd(n, p, seed);
  if (sweeps <= 0) return d;

  const int t = DesignCriterion{}.phi_p_exponent;
  SwapState state(d.points, t);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    bool improved = false;
    for (Eigen::Index c = 0; c < d.p(); ++c)
      for (Eigen::Index i = 0; i + 1 < d.n(); ++i)
        for (Eigen::Index j = i + 1; j < d.n(); ++j) {
          if (state.swap_delta(c, i, j) < -1e-14 * std::max(1.0, state.sum())) {
            state.apply_swap(c, i, j);
            improved = true;
          }
        }
    if (!improved) break;
  }
  return d;
}

DesignMatrix omlhd(int n, int p, const DesignCriterion& criterion, int sweeps,
                   std::uint64_t seed) {
  check_np(n, p);
  if (criterion.phi_p_exponent < 1)
    throw std::invalid_argument("omlhd: phi_p_exponent must be >= 1");
  if (criterion.correlation_weight < 0.0 || criterion.correlation_weight > 1.0)
    throw std::invalid_argument("omlhd: correlation_weight must be in [0,1]");

  DesignMatrix d = random_lhd(n, p, seed);
  if (sweeps <= 0) return d;

  const int t = criterion.phi_p_exponent;
  const double w = criterion.correlation_weight;
  SwapState dist(d.points, t);
  CorrState corr(d.points);

  const double phi0 = std::pow(dist.sum(), 1.0 / t);
  auto psi_of = [&](double sum, double rho2) {
    return w * rho2 + (1.0 - w) * std::pow(sum, 1.0 / t) / phi0;
  };

  double psi = psi_of(dist.sum(), corr.rho2_bar());

  rng::Stream stream(rng::derive(seed, "omlhd-anneal"));
  const Eigen::Index nn = d.n(), pp = d.p();
  auto propose = [&](Eigen::Index& c, Eigen::Index& r1, Eigen::Index& r2) {
    c = static_cast<Eigen::Index>(stream.uniform_int(static_cast<std::uint64_t>(pp)));
    r1 = static_cast<Eigen::Index>(stream.uniform_int(static_cast<std::uint64_t>(nn)));
    r2 = static_cast<Eigen::Index>(stream.uniform_int(static_cast<std::uint64_t>(nn - 1)));
    if (r2 >= r1) ++r2;
  };

  // Start temperature from the spread of criterion changes under random swaps.
  double spread = 0.0;
  {
    int probes = 64;
    for (int k = 0; k < probes; ++k) {
      Eigen::Index c, r1, r2;
      propose(c, r1, r2);
      double cand = psi_of(dist.sum() + dist.swap_delta(c, r1, r2),
                           corr.rho2_bar_after_swap(c, r1, r2));
      spread += std::abs(cand - psi);
    }
    spread /= probes;
  }
  double temp = std::max(spread, 1e-12);

  Eigen::MatrixXd best = d.points;
  double best_psi = psi;
  const int steps_per_sweep = n * p;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int step = 0; step < steps_per_sweep; ++step) {
      Eigen::Index c, r1, r2;
      propose(c, r1, r2);
      double cand_sum = dist.sum() + dist.swap_delta(c, r1, r2);
      double cand_psi = psi_of(cand_sum, corr.rho2_bar_after_swap(c, r1, r2));
      double delta = cand_psi - psi;
      if (delta < 0.0 || stream.uniform01() < std::exp(-delta / temp)) {
        corr.apply_swap(c, r1, r2);   // uses pre-swap entries
        dist.apply_swap(c, r1, r2);   // swaps the entries
        psi = cand_psi;
        if (psi < best_psi) {
          best_psi = psi;
          best = d.points;
        }
      }
    }
    temp *= 0.95;
  }
  d.points = std::move(best);
  return d;
}

DesignMatrix uniform_design(int n, int p, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("uniform_design: n must be >= 1");
  if (p < 1) throw std::invalid_argument("uniform_design: p must be >= 1");
  rng::Stream stream(rng::derive(seed, "uniform-design"));
  Eigen::MatrixXd pts(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) pts(i, j) = stream.uniform01();
  return DesignMatrix{std::move(pts)};
}

double min_pairwise_distance(const Eigen::MatrixXd& points) {
  if (points.rows() < 2)
    throw std::invalid_argument("min_pairwise_distance: need at least 2 points");
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i + 1 < points.rows(); ++i)
    for (Eigen::Index j = i + 1; j < points.rows(); ++j)
      best = std::min(best, (points.row(i) - points.row(j)).squaredNorm());
  return std::sqrt(best);
}

double min_pairwise_distance(const DesignMatrix& d) { return min_pairwise_distance(d.points); }

double phi_p(const Eigen::MatrixXd& points, int exponent) {
  if (points.rows() < 2) throw std::invalid_argument("phi_p: need at least 2 points");
  if (exponent < 1) throw std::invalid_argument("phi_p: exponent must be >= 1");
  return std::pow(inv_dist_power_sum(points, exponent), 1.0 / exponent);
}

double avg_sq_column_correlation(const Eigen::MatrixXd& points) {
  const Eigen::Index p = points.cols();
  if (p < 2) return 0.0;
  const Eigen::Index n = points.rows();
  Eigen::RowVectorXd mean = points.colwise().mean();
  Eigen::MatrixXd centered = points.rowwise() - mean;
  Eigen::VectorXd ss = centered.colwise().squaredNorm();
  double total = 0.0;
  for (Eigen::Index a = 0; a + 1 < p; ++a)
    for (Eigen::Index b = a + 1; b < p; ++b) {
      double denom = std::sqrt(ss(a) * ss(b));
      double r = denom > 0.0 ? centered.col(a).dot(centered.col(b)) / denom : 0.0;
      total += r * r;
    }
  (void)n;
  return total / (0.5 * static_cast<double>(p) * static_cast<double>(p - 1));
}

double omlhd_criterion(const Eigen::MatrixXd& points, const DesignCriterion& criterion,
                       double phi_p_reference) {
  double rho2 = avg_sq_column_correlation(points);
  double phi = phi_p(points, criterion.phi_p_exponent);
  return criterion.correlation_weight * rho2 +
         (1.0 - criterion.correlation_weight) * phi / phi_p_reference;
}

}  // namespace medex::design
