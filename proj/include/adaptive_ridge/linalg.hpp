#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "core.hpp"

namespace ridge {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Vector singular_values(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return Vector();
  return Eigen::JacobiSVD<Matrix>(a).singularValues();
}

inline double smallest_singular_value(const Matrix& a) {
  Vector s = singular_values(a);
  if (s.size() == 0) return 0.0;
  return s(s.size() - 1);
}

inline int numeric_rank(const Matrix& a, double tol) {
  Vector s = singular_values(a);
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > tol) ++r;
  return r;
}

// Orthonormal basis of ran(a^T) (the row space), columns of the result.
inline Matrix rowspace_basis(const Matrix& a, double tol) {
  if (a.rows() == 0 || a.cols() == 0) return Matrix(a.cols(), 0);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > tol) ++r;
  return svd.matrixV().leftCols(r);
}

// true iff ran(a^T) and ran(b^T) intersect only in {0}, tested through
// singular values of the stacked orthonormal bases.
inline bool rowspaces_intersect_trivially(const Matrix& a, const Matrix& b, double tol) {
  Matrix ba = rowspace_basis(a, tol);
  Matrix bb = rowspace_basis(b, tol);
  if (ba.cols() == 0 || bb.cols() == 0) return true;
  if (ba.cols() + bb.cols() > ba.rows()) return false;  // dimensions force an overlap
  Matrix stacked(ba.rows(), ba.cols() + bb.cols());
  stacked << ba, bb;
  return smallest_singular_value(stacked) > tol;
}

// Exact projection onto the affine set {x : c x = d} from x0 (minimum-norm
// correction via a complete orthogonal decomposition; rank deficiency ok).
inline Vector project_onto_affine(const Matrix& c, const Vector& d, const Vector& x0) {
  if (c.rows() == 0) return x0;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(c);
  return x0 + cod.solve(d - c * x0);
}

// Dense matrix of a linear operator obtained by probing unit vectors.
// Op must provide apply(const Image&) -> std::vector<double>.
template <class Op>
Matrix assemble_dense(const Op& op, int in_height, int in_width) {
  Image probe(in_height, in_width, 0.0);
  std::vector<double> first = op.apply(probe);
  // probe the zero image first to catch affine mistakes early
  for (double v : first) require(v == 0.0, "assemble_dense: operator is not linear");
  int n = in_height * in_width;
  Matrix m;
  for (int j = 0; j < n; ++j) {
    probe.data[j] = 1.0;
    std::vector<double> col = op.apply(probe);
    probe.data[j] = 0.0;
    if (j == 0) m.resize(static_cast<int>(col.size()), n);
    for (int i = 0; i < m.rows(); ++i) m(i, j) = col[i];
  }
  return m;
}

// ---------------------------------------------------------------------------
// Dense two-phase simplex for  min c^T x  s.t.  A x <= b,  x >= 0.
// Bland's rule throughout; sized for the small diagnostic programs in this
// repository (tens of rows/columns).
// ---------------------------------------------------------------------------

struct LpResult {
  enum class Status { optimal, infeasible, unbounded };
  Status status = Status::infeasible;
  double value = 0.0;
  std::vector<double> x;
};

namespace detail {

inline int lp_pivot_loop(Matrix& t, std::vector<int>& basis, int n_total, double tol) {
  const int m = static_cast<int>(t.rows()) - 1;
  const int cost = m;
  for (int iter = 0; iter < 20000; ++iter) {
    int enter = -1;
    for (int j = 0; j < n_total; ++j) {
      if (t(cost, j) < -tol) {
        enter = j;  // Bland: first improving index
        break;
      }
    }
    if (enter < 0) return 0;  // optimal
    int leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      if (t(i, enter) > tol) {
        double ratio = t(i, n_total) / t(i, enter);
        if (ratio < best - 1e-12 || (ratio < best + 1e-12 && (leave < 0 || basis[i] < basis[leave]))) {
          best = ratio;
          leave = i;
        }
      }
    }
    if (leave < 0) return 1;  // unbounded
    double piv = t(leave, enter);
    t.row(leave) /= piv;
    for (int i = 0; i <= m; ++i) {
      if (i == leave) continue;
      double f = t(i, enter);
      if (f != 0.0) t.row(i) -= f * t.row(leave);
    }
    basis[leave] = enter;
  }
  throw NumericalError("simplex: iteration limit reached");
}

}  // namespace detail

inline LpResult solve_lp(const Matrix& a, const Vector& b, const Vector& c) {
  const double tol = 1e-9;
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());

  // Rows with negative rhs are negated, turning the slack coefficient to -1
  // and requiring an artificial variable.
  std::vector<int> sign(m, 1);
  for (int i = 0; i < m; ++i)
    if (b(i) < 0.0) sign[i] = -1;

  int n_art = 0;
  for (int i = 0; i < m; ++i)
    if (sign[i] < 0) ++n_art;

  int n_total = n + m + n_art;
  Matrix t = Matrix::Zero(m + 1, n_total + 1);
  std::vector<int> basis(m, -1);
  int art = n + m;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) t(i, j) = sign[i] * a(i, j);
    t(i, n + i) = sign[i] * 1.0;
    t(i, n_total) = sign[i] * b(i);
    if (sign[i] < 0) {
      t(i, art) = 1.0;
      basis[i] = art;
      ++art;
    } else {
      basis[i] = n + i;
    }
  }

  LpResult res;
  if (n_art > 0) {
    // phase 1: minimize the artificial sum
    for (int j = 0; j < n_total; ++j) {
      double s = 0.0;
      for (int i = 0; i < m; ++i)
        if (basis[i] >= n + m) s += t(i, j);
      t(m, j) = (j >= n + m ? 1.0 : 0.0) - s;
    }
    double rhs = 0.0;
    for (int i = 0; i < m; ++i)
      if (basis[i] >= n + m) rhs += t(i, n_total);
    t(m, n_total) = -rhs;
    int rc = detail::lp_pivot_loop(t, basis, n_total, tol);
    if (rc != 0 || t(m, n_total) < -1e-7) {
      res.status = LpResult::Status::infeasible;
      return res;
    }
    // pivot remaining artificials out of the basis where possible
    for (int i = 0; i < m; ++i) {
      if (basis[i] >= n + m) {
        int enter = -1;
        for (int j = 0; j < n + m; ++j) {
          if (std::abs(t(i, j)) > tol) {
            enter = j;
            break;
          }
        }
        if (enter >= 0) {
          double piv = t(i, enter);
          t.row(i) /= piv;
          for (int k = 0; k <= m; ++k) {
            if (k == i) continue;
            double f = t(k, enter);
            if (f != 0.0) t.row(k) -= f * t.row(i);
          }
          basis[i] = enter;
        }
      }
    }
  }

  // phase 2 cost row (artificial columns are frozen at zero)
  for (int j = 0; j < n_total; ++j) t(m, j) = (j < n) ? c(j) : 0.0;
  t(m, n_total) = 0.0;
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n && c(basis[i]) != 0.0) t.row(m) -= c(basis[i]) * t.row(i);
  }
  int keep = n + m;  // do not let artificials re-enter
  int rc = detail::lp_pivot_loop(t, basis, keep, tol);
  if (rc == 1) {
    res.status = LpResult::Status::unbounded;
    return res;
  }
  res.status = LpResult::Status::optimal;
  res.x.assign(n, 0.0);
  for (int i = 0; i < m; ++i)
    if (basis[i] < n) res.x[basis[i]] = t(i, n_total);
  res.value = -t(m, n_total);
  // the tableau stores -z in the corner; recompute directly for clarity
  double v = 0.0;
  for (int j = 0; j < n; ++j) v += c(j) * res.x[j];
  res.value = v;
  return res;
}

}  // namespace ridge
