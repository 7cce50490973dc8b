#pragma once

#include "tnfeat/tensor.hpp"

#include <cstdint>
#include <vector>

namespace tnfeat::tensor {

enum class AlsInit {
  /// Every factor entry from a seeded uniform(0,1) stream, mode by mode,
  /// column by column, row by row.
  Uniform,
  /// Leading left singular vectors of each unfolding; columns beyond the
  /// mode size come from the uniform stream.
  Svd,
};

struct AlsOptions {
  int max_sweeps = 100;
  double rel_fit_tolerance = 1e-6;
  std::uint64_t init_seed = 0;
  AlsInit init = AlsInit::Svd;
  double ridge = 1e-12;
  /// After every sweep from the second on, minimize the error exactly along
  /// the last factor update and keep the step only if it lowers the error.
  bool line_search = true;

  /// Throws InvalidConfig.
  void validate() const;
};

/// Weighted sum of rank-1 outer products: weights[r] * a0[:,r] o a1[:,r] o ...
struct CPModel {
  std::vector<double> weights;
  std::vector<Matrix> factors;
  /// Set for models of all-zero inputs; such models carry zero weights
  /// and zero factors.
  bool degenerate = false;

  std::size_t rank() const noexcept { return weights.size(); }
  std::size_t order() const noexcept { return factors.size(); }
  Shape shape() const;
};

struct AlsResult {
  CPModel model;
  /// Frobenius reconstruction error after initialization (index 0) and
  /// after each completed sweep.
  std::vector<double> errors;
  int sweeps = 0;
  bool converged = false;
};

/// CP/PARAFAC decomposition by alternating least squares. Each mode update
/// solves the ridge-regularized normal equations exactly, so the error
/// sequence is non-increasing. All-zero inputs return a degenerate model.
/// Throws InvalidInput for order < 2 or rank 0, InvalidConfig for bad
/// options.
AlsResult cp_als(const DenseTensor& t, std::size_t rank, const AlsOptions& opts = {});

DenseTensor reconstruct(const CPModel& m);

/// 1 - ||t - reconstruct(m)||_F / ||t||_F. Throws UndefinedFit when t is
/// zero and ShapeMismatch when the model does not match t.
double fit_score(const CPModel& m, const DenseTensor& t);

/// Resolves the scale, sign and permutation indeterminacy of a CP model:
/// unit-norm columns with scale folded into the weights; for each mode n
/// below the last, the largest-magnitude entry of every column is made
/// nonnegative with the compensating flip applied to mode n+1; components
/// ordered by weight descending, ties by the mode-0 column
/// lexicographically. Zero columns mark the component degenerate (weight 0).
CPModel canonicalize(CPModel m);

}  // namespace tnfeat::tensor
