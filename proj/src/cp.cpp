#include "tnfeat/cp.hpp"

#include "tnfeat/error.hpp"
#include "tnfeat/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <string>

namespace tnfeat::tensor {

void AlsOptions::validate() const {
  if (max_sweeps < 1) throw Error(Errc::InvalidConfig, "als max_sweeps must be >= 1");
  if (!(rel_fit_tolerance >= 0.0)) throw Error(Errc::InvalidConfig, "als rel_fit_tolerance must be >= 0");
  if (!(ridge >= 0.0)) throw Error(Errc::InvalidConfig, "als ridge must be >= 0");
}

Shape CPModel::shape() const {
  Shape s;
  s.reserve(factors.size());
  for (const auto& f : factors) s.push_back(static_cast<std::size_t>(f.rows()));
  return s;
}

namespace {

// Khatri-Rao product of every factor except `skip`, in ascending mode order,
// matching the column enumeration of unfold(t, skip).
Matrix khatri_rao_except(const std::vector<Matrix>& factors, std::size_t skip) {
  Matrix acc;
  bool first = true;
  for (std::size_t m = 0; m < factors.size(); ++m) {
    if (m == skip) continue;
    if (first) {
      acc = factors[m];
      first = false;
    } else {
      acc = khatri_rao(acc, factors[m]);
    }
  }
  return acc;
}

Matrix approx_unfold0(const std::vector<Matrix>& factors, const std::vector<double>& weights) {
  const Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  return (factors[0] * w.asDiagonal()) * khatri_rao_except(factors, 0).transpose();
}

// Solves x * gram = rhs for x, where gram is symmetric positive
// (semi)definite after the ridge shift.
Matrix solve_normal_equations(const Matrix& gram, const Matrix& rhs) {
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() == Eigen::Success) return llt.solve(rhs.transpose()).transpose();
  Eigen::LDLT<Matrix> ldlt(gram);
  return ldlt.solve(rhs.transpose()).transpose();
}

// Eigenvectors of x x^T for the largest eigenvalues, at most `count` of
// them, each signed so its largest-magnitude entry is positive.
Matrix leading_left_singular_vectors(const Matrix& x, Eigen::Index count) {
  const Matrix gram = x * x.transpose();
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Eigen::Index rows = gram.rows();
  const Eigen::Index k = std::min(count, rows);
  Matrix out(rows, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::VectorXd v = eig.eigenvectors().col(rows - 1 - c);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.col(c) = v;
  }
  return out;
}

double squared_error(const Matrix& x0, const std::vector<Matrix>& factors) {
  const std::vector<double> ones(static_cast<std::size_t>(factors.front().cols()), 1.0);
  return (x0 - approx_unfold0(factors, ones)).squaredNorm();
}

std::vector<Matrix> step_along(const std::vector<Matrix>& base, const std::vector<Matrix>& direction, double s) {
  std::vector<Matrix> out(base.size());
  for (std::size_t n = 0; n < base.size(); ++n) out[n] = base[n] + s * direction[n];
  return out;
}

// The squared error along base + s * direction is a polynomial of degree
// 2N in s. Its coefficients are recovered from 2N + 1 samples; the real
// stationary points are the candidate steps. Returns the best candidate
// (factors, error) when it beats `error`.
std::optional<std::pair<std::vector<Matrix>, double>> exact_line_search(const Matrix& x0, const std::vector<Matrix>& base,
                                                                         const std::vector<Matrix>& direction,
                                                                         double error) {
  const auto degree = static_cast<Eigen::Index>(2 * base.size());
  const Eigen::Index samples = degree + 1;
  Matrix vandermonde(samples, samples);
  Eigen::VectorXd values(samples);
  for (Eigen::Index i = 0; i < samples; ++i) {
    const double s = static_cast<double>(i) - static_cast<double>(degree) / 2.0;
    double power = 1.0;
    for (Eigen::Index j = 0; j < samples; ++j) {
      vandermonde(i, j) = power;
      power *= s;
    }
    values(i) = squared_error(x0, step_along(base, direction, s));
  }
  const Eigen::VectorXd coeff = vandermonde.partialPivLu().solve(values);

  // derivative coefficients, lowest order first
  Eigen::VectorXd deriv(degree);
  for (Eigen::Index j = 1; j <= degree; ++j) deriv(j - 1) = static_cast<double>(j) * coeff(j);
  Eigen::Index top = degree - 1;
  while (top > 0 && std::abs(deriv(top)) <= 1e-14 * deriv.cwiseAbs().maxCoeff()) --top;
  if (top < 1) return std::nullopt;
  Matrix companion = Matrix::Zero(top, top);
  for (Eigen::Index i = 1; i < top; ++i) companion(i, i - 1) = 1.0;
  for (Eigen::Index i = 0; i < top; ++i) companion(i, top - 1) = -deriv(i) / deriv(top);
  const Eigen::VectorXcd roots = Eigen::EigenSolver<Matrix>(companion, false).eigenvalues();

  std::optional<std::pair<std::vector<Matrix>, double>> best;
  double best_error = error;
  for (Eigen::Index i = 0; i < roots.size(); ++i) {
    if (std::abs(roots(i).imag()) > 1e-8 * (1.0 + std::abs(roots(i).real()))) continue;
    const double s = roots(i).real();
    if (!std::isfinite(s) || s == 0.0) continue;
    std::vector<Matrix> trial = step_along(base, direction, s);
    const double e = std::sqrt(squared_error(x0, trial));
    if (e < best_error) {
      best_error = e;
      best.emplace(std::move(trial), e);
    }
  }
  return best;
}

// Factors with the weights folded into the last mode.
std::vector<Matrix> absorbed(const CPModel& m) {
  std::vector<Matrix> f = m.factors;
  const Eigen::Map<const Eigen::VectorXd> w(m.weights.data(), static_cast<Eigen::Index>(m.weights.size()));
  f.back() = f.back() * w.asDiagonal();
  return f;
}

CPModel normalized(std::vector<Matrix> factors) {
  CPModel m;
  const Eigen::Index r = factors.front().cols();
  m.weights.assign(static_cast<std::size_t>(r), 1.0);
  for (auto& f : factors) {
    for (Eigen::Index c = 0; c < r; ++c) {
      const double col_norm = f.col(c).norm();
      if (col_norm > 0.0) {
        f.col(c) /= col_norm;
        m.weights[static_cast<std::size_t>(c)] *= col_norm;
      } else {
        m.weights[static_cast<std::size_t>(c)] = 0.0;
      }
    }
  }
  m.factors = std::move(factors);
  return m;
}

}  // namespace

AlsResult cp_als(const DenseTensor& t, std::size_t rank, const AlsOptions& opts) {
  opts.validate();
  if (t.order() < 2) throw Error(Errc::InvalidInput, "cp_als needs a tensor with at least two modes");
  if (rank == 0) throw Error(Errc::InvalidInput, "cp_als rank must be >= 1");

  const Shape& shape = t.shape();
  const std::size_t order = shape.size();
  const auto r = static_cast<Eigen::Index>(rank);

  AlsResult result;
  CPModel& model = result.model;

  if (t.is_zero()) {
    model.weights.assign(rank, 0.0);
    for (std::size_t n = 0; n < order; ++n) model.factors.push_back(Matrix::Zero(static_cast<Eigen::Index>(shape[n]), r));
    model.degenerate = true;
    result.errors.push_back(0.0);
    result.converged = true;
    return result;
  }

  std::vector<Matrix> unfoldings;
  unfoldings.reserve(order);
  for (std::size_t n = 0; n < order; ++n) unfoldings.push_back(unfold(t, n));

  Rng rng(opts.init_seed);
  for (std::size_t n = 0; n < order; ++n) {
    Matrix f(static_cast<Eigen::Index>(shape[n]), r);
    Eigen::Index start = 0;
    if (opts.init == AlsInit::Svd) {
      const Matrix lead = leading_left_singular_vectors(unfoldings[n], r);
      start = lead.cols();
      f.leftCols(start) = lead;
    }
    for (Eigen::Index c = start; c < r; ++c) {
      for (Eigen::Index i = 0; i < f.rows(); ++i) f(i, c) = rng.uniform();
    }
    model.factors.push_back(std::move(f));
  }
  model.weights.assign(rank, 1.0);

  const double norm = t.frobenius_norm();
  auto current_error = [&] { return (unfoldings[0] - approx_unfold0(model.factors, model.weights)).norm(); };

  result.errors.push_back(current_error());
  double previous_fit = 1.0 - result.errors.back() / norm;
  std::vector<Matrix> previous = absorbed(model);

  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    for (std::size_t n = 0; n < order; ++n) {
      Matrix gram = Matrix::Ones(r, r);
      for (std::size_t m = 0; m < order; ++m) {
        if (m != n) gram = gram.cwiseProduct(model.factors[m].transpose() * model.factors[m]);
      }
      gram.diagonal().array() += opts.ridge;

      const Matrix mttkrp = unfoldings[n] * khatri_rao_except(model.factors, n);
      Matrix updated = solve_normal_equations(gram, mttkrp);

      for (Eigen::Index c = 0; c < r; ++c) {
        const double col_norm = updated.col(c).norm();
        if (col_norm > 0.0) {
          updated.col(c) /= col_norm;
          model.weights[static_cast<std::size_t>(c)] = col_norm;
        } else {
          model.weights[static_cast<std::size_t>(c)] = 0.0;
        }
      }
      model.factors[n] = std::move(updated);
    }

    double error = current_error();
    std::vector<Matrix> current = absorbed(model);
    if (opts.line_search && sweep >= 1) {
      std::vector<Matrix> direction(order);
      for (std::size_t n = 0; n < order; ++n) direction[n] = current[n] - previous[n];
      if (auto best = exact_line_search(unfoldings[0], current, direction, error)) {
        error = best->second;
        model = normalized(std::move(best->first));
        current = absorbed(model);
      }
    }
    previous = std::move(current);

    result.errors.push_back(error);
    result.sweeps = sweep + 1;
    const double fit = 1.0 - result.errors.back() / norm;
    if (std::abs(fit - previous_fit) < opts.rel_fit_tolerance) {
      result.converged = true;
      break;
    }
    previous_fit = fit;
  }
  return result;
}

DenseTensor reconstruct(const CPModel& m) {
  if (m.factors.empty()) throw Error(Errc::InvalidInput, "CP model has no factors");
  for (const auto& f : m.factors) {
    if (static_cast<std::size_t>(f.cols()) != m.rank()) {
      throw Error(Errc::ShapeMismatch, "factor column count does not match the model rank");
    }
  }
  const Shape shape = m.shape();
  if (m.rank() == 0) return DenseTensor(shape);
  if (m.order() == 1) {
    const Eigen::Map<const Eigen::VectorXd> w(m.weights.data(), static_cast<Eigen::Index>(m.weights.size()));
    const Eigen::VectorXd v = m.factors[0] * w;
    return DenseTensor(shape, std::vector<double>(v.data(), v.data() + v.size()));
  }
  return fold(approx_unfold0(m.factors, m.weights), 0, shape);
}

double fit_score(const CPModel& m, const DenseTensor& t) {
  const double norm = t.frobenius_norm();
  if (norm == 0.0) throw Error(Errc::UndefinedFit, "fit is undefined for a zero-norm tensor");
  if (m.shape() != t.shape()) throw Error(Errc::ShapeMismatch, "model shape does not match tensor shape");
  const DenseTensor approx = reconstruct(m);
  double sum = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double d = t[i] - approx[i];
    sum += d * d;
  }
  return 1.0 - std::sqrt(sum) / norm;
}

CPModel canonicalize(CPModel m) {
  const std::size_t rank = m.rank();
  const std::size_t order = m.order();
  for (const auto& f : m.factors) {
    if (static_cast<std::size_t>(f.cols()) != rank) {
      throw Error(Errc::ShapeMismatch, "factor column count does not match the model rank");
    }
  }
  if (order == 0 || rank == 0) return m;

  for (std::size_t c = 0; c < rank; ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    double& w = m.weights[c];
    if (w < 0.0) {
      w = -w;
      m.factors[0].col(col) *= -1.0;
    }
    bool zero_column = false;
    for (auto& f : m.factors) {
      const double col_norm = f.col(col).norm();
      if (col_norm == 0.0) {
        zero_column = true;
      } else if (std::abs(col_norm - 1.0) > 8.0 * std::numeric_limits<double>::epsilon()) {
        f.col(col) /= col_norm;
        w *= col_norm;
      }
    }
    if (zero_column) {
      w = 0.0;
      for (auto& f : m.factors) f.col(col).setZero();
    }
  }

  for (std::size_t n = 0; n + 1 < order; ++n) {
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(rank); ++c) {
      Eigen::Index arg = 0;
      m.factors[n].col(c).cwiseAbs().maxCoeff(&arg);
      if (m.factors[n](arg, c) < 0.0) {
        m.factors[n].col(c) *= -1.0;
        m.factors[n + 1].col(c) *= -1.0;
      }
    }
  }

  std::vector<std::size_t> perm(rank);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  const Matrix& lead = m.factors[0];
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    if (m.weights[a] != m.weights[b]) return m.weights[a] > m.weights[b];
    for (Eigen::Index i = 0; i < lead.rows(); ++i) {
      const double va = lead(i, static_cast<Eigen::Index>(a));
      const double vb = lead(i, static_cast<Eigen::Index>(b));
      if (va != vb) return va < vb;
    }
    return false;
  });

  CPModel out;
  out.weights.resize(rank);
  for (const auto& f : m.factors) out.factors.emplace_back(f.rows(), f.cols());
  for (std::size_t c = 0; c < rank; ++c) {
    out.weights[c] = m.weights[perm[c]];
    for (std::size_t n = 0; n < order; ++n) {
      out.factors[n].col(static_cast<Eigen::Index>(c)) = m.factors[n].col(static_cast<Eigen::Index>(perm[c]));
    }
  }
  out.degenerate = m.degenerate || std::all_of(out.weights.begin(), out.weights.end(), [](double w) { return w == 0.0; });
  return out;
}

}  // namespace tnfeat::tensor
