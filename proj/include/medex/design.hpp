#ifndef MEDEX_DESIGN_HPP
#define MEDEX_DESIGN_HPP

#include <Eigen/Core>
#include <cstdint>

namespace medex::design {

//! A set of n candidate points in the unit hypercube [0,1]^p, one per row.
//! Designs produced by the lhd_* generators additionally satisfy the Latin
//! hypercube property: every column is a permutation of the cell midpoints
//! (k + 0.5)/n for k = 0..n-1.
struct DesignMatrix {
  Eigen::MatrixXd points;

  Eigen::Index n() const { return points.rows(); }
  Eigen::Index p() const { return points.cols(); }
};

//! Knobs for the combined orthogonality/distance criterion
//!   psi = w * rho2_bar + (1 - w) * phi_p / phi_p(initial),
//! where rho2_bar is the mean squared pairwise column correlation and phi_p
//! the inverse-distance power sum criterion. phi_p is normalized by its value
//! on the starting random LHD so both terms are O(1) and the weight is
//! interpretable.
struct DesignCriterion {
  int phi_p_exponent = 15;
  double correlation_weight = 0.5;  // in [0,1]; 0 reduces to pure maximin
};

//! Random Latin hypercube: each column an independent random permutation of
//! the n cell midpoints. Deterministic for a fixed seed.
DesignMatrix random_lhd(int n, int p, std::uint64_t seed);

//! Greedy maximin improvement of a random LHD by within-column element swaps,
//! minimizing phi_p. sweeps = 0 returns the starting LHD unchanged (identical
//! to random_lhd with the same seed). phi_p never increases across accepted
//! moves.
DesignMatrix maximin_lhd(int n, int p, int sweeps, std::uint64_t seed);

//! Orthogonal-maximin LHD: simulated annealing over within-column swaps on
//! the combined criterion, geometric cooling with ratio 0.95 from a start
//! temperature set by the spread of criterion changes under random swaps.
//! Returns the best design seen.
DesignMatrix omlhd(int n, int p, const DesignCriterion& criterion, int sweeps,
                   std::uint64_t seed);

//! Plain i.i.d. uniform draws on [0,1]^p (the comparison baseline).
DesignMatrix uniform_design(int n, int p, std::uint64_t seed);

//! Minimum Euclidean distance over all point pairs. Requires n >= 2.
double min_pairwise_distance(const DesignMatrix& d);
double min_pairwise_distance(const Eigen::MatrixXd& points);

//! phi_p distance criterion: (sum over pairs of d^-exponent)^(1/exponent).
//! Smaller is better spread.
double phi_p(const Eigen::MatrixXd& points, int exponent);

//! Mean of squared Pearson correlations over all column pairs (0 when p < 2).
double avg_sq_column_correlation(const Eigen::MatrixXd& points);

//! Combined OMLHD criterion as defined on DesignCriterion. phi_p_reference
//! is the normalizer (typically phi_p of the starting random LHD).
double omlhd_criterion(const Eigen::MatrixXd& points, const DesignCriterion& criterion,
                       double phi_p_reference);

}  // namespace medex::design

#endif
