#pragma once

// Dense two-phase primal simplex for small linear programs:
//
//   minimize    c'x
//   subject to  A x (<=, =, >=) b,   0 <= x <= upper
//
// The tableau is kept dense; problem sizes here are a few hundred columns.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>

namespace windcascade {

enum class RowSense { LessEqual, Equal, GreaterEqual };
enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

template <typename Scalar>
struct LinearProgram {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector cost;
  Matrix constraints;
  Vector rhs;
  std::vector<RowSense> sense;
  Vector upper;  // +inf for unbounded columns; empty means all unbounded

  Eigen::Index variables() const { return cost.size(); }
};

template <typename Scalar>
struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
  Scalar objective = 0;
  int iterations = 0;
};

struct LpOptions {
  double tolerance = 1e-9;
  int max_iterations = 50000;
  bool feasibility_only = false;  // stop after phase one
};

namespace lp_detail {

template <typename Scalar>
class Tableau {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Tableau(const LinearProgram<Scalar>& lp, const LpOptions& opt) : opt_(opt) {
    n_ = lp.variables();
    const Eigen::Index m0 = lp.constraints.rows();

    std::vector<Eigen::Index> bound_cols;
    if (lp.upper.size() == n_)
      for (Eigen::Index j = 0; j < n_; ++j)
        if (std::isfinite(static_cast<double>(lp.upper[j]))) bound_cols.push_back(j);
    m_ = m0 + static_cast<Eigen::Index>(bound_cols.size());

    // Row data after sign normalisation (rhs >= 0).
    Matrix a = Matrix::Zero(m_, n_);
    Vector b(m_);
    std::vector<RowSense> sense(static_cast<std::size_t>(m_));
    for (Eigen::Index i = 0; i < m0; ++i) {
      a.row(i) = lp.constraints.row(i);
      b[i] = lp.rhs[i];
      sense[static_cast<std::size_t>(i)] = lp.sense[static_cast<std::size_t>(i)];
    }
    for (std::size_t k = 0; k < bound_cols.size(); ++k) {
      const Eigen::Index i = m0 + static_cast<Eigen::Index>(k);
      a(i, bound_cols[k]) = 1;
      b[i] = lp.upper[bound_cols[k]];
      sense[static_cast<std::size_t>(i)] = RowSense::LessEqual;
    }
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (b[i] < 0) {
        a.row(i) *= -1;
        b[i] = -b[i];
        auto& s = sense[static_cast<std::size_t>(i)];
        if (s == RowSense::LessEqual) s = RowSense::GreaterEqual;
        else if (s == RowSense::GreaterEqual) s = RowSense::LessEqual;
      }
    }

    Eigen::Index slacks = 0, artificials = 0;
    for (auto s : sense) {
      if (s != RowSense::Equal) ++slacks;
      if (s != RowSense::LessEqual) ++artificials;
    }
    first_artificial_ = n_ + slacks;
    cols_ = first_artificial_ + artificials;
    t_ = Matrix::Zero(m_ + 1, cols_ + 1);
    t_.topLeftCorner(m_, n_) = a;
    t_.col(cols_).head(m_) = b;
    basis_.assign(static_cast<std::size_t>(m_), 0);

    Eigen::Index slack = n_, art = first_artificial_;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const auto s = sense[static_cast<std::size_t>(i)];
      if (s == RowSense::LessEqual) {
        t_(i, slack) = 1;
        basis_[static_cast<std::size_t>(i)] = slack++;
      } else {
        if (s == RowSense::GreaterEqual) t_(i, slack++) = -1;
        t_(i, art) = 1;
        basis_[static_cast<std::size_t>(i)] = art++;
      }
    }
    cost_ = Vector::Zero(cols_);
    cost_.head(n_) = lp.cost;
  }

  LpSolution<Scalar> solve() {
    LpSolution<Scalar> out;
    // Phase one: minimise the sum of artificials.
    if (cols_ > first_artificial_) {
      Vector phase1 = Vector::Zero(cols_);
      phase1.tail(cols_ - first_artificial_).setOnes();
      load_objective(phase1);
      auto status = iterate(/*allow_artificial=*/true, out.iterations);
      if (status == LpStatus::IterationLimit) {
        out.status = status;
        return out;
      }
      const Scalar infeasibility = -t_(m_, cols_);
      const Scalar scale = std::max<Scalar>(1, t_.col(cols_).head(m_).cwiseAbs().maxCoeff());
      if (infeasibility > static_cast<Scalar>(opt_.tolerance) * scale * 10) {
        out.status = LpStatus::Infeasible;
        return out;
      }
      drive_out_artificials();
    }
    if (opt_.feasibility_only) {
      out.status = LpStatus::Optimal;
      extract(out);
      return out;
    }
    load_objective(cost_);
    out.status = iterate(/*allow_artificial=*/false, out.iterations);
    if (out.status == LpStatus::Optimal) extract(out);
    return out;
  }

 private:
  LpOptions opt_;
  Eigen::Index n_ = 0, m_ = 0, cols_ = 0, first_artificial_ = 0;
  Matrix t_;
  Vector cost_;
  std::vector<Eigen::Index> basis_;

  void load_objective(const Vector& c) {
    t_.row(m_).setZero();
    t_.row(m_).head(cols_) = c.transpose();
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Scalar cb = c[basis_[static_cast<std::size_t>(i)]];
      if (cb != 0) t_.row(m_) -= cb * t_.row(i);
    }
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    t_.row(row) /= t_(row, col);
    const Vector column = t_.col(col);
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> pivot_row = t_.row(row);
    for (Eigen::Index i = 0; i <= m_; ++i) {
      if (i == row || column[i] == 0) continue;
      t_.row(i) -= column[i] * pivot_row;
    }
    basis_[static_cast<std::size_t>(row)] = col;
  }

  LpStatus iterate(bool allow_artificial, int& iterations) {
    const Scalar tol = static_cast<Scalar>(opt_.tolerance);
    const Eigen::Index limit = allow_artificial ? cols_ : first_artificial_;
    int degenerate_run = 0;
    while (true) {
      if (iterations >= opt_.max_iterations) return LpStatus::IterationLimit;
      // Dantzig pricing, switching to Bland's rule after a run of degenerate pivots.
      const bool bland = degenerate_run > 50;
      Eigen::Index enter = -1;
      Scalar best = -tol;
      for (Eigen::Index j = 0; j < limit; ++j) {
        const Scalar rc = t_(m_, j);
        if (rc < best) {
          enter = j;
          if (bland) break;
          best = rc;
        }
      }
      if (enter < 0) return LpStatus::Optimal;

      Eigen::Index leave = -1;
      Scalar ratio = std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index i = 0; i < m_; ++i) {
        const Scalar a = t_(i, enter);
        if (a <= tol) continue;
        const Scalar r = t_(i, cols_) / a;
        if (r < ratio - tol ||
            (r <= ratio + tol && leave >= 0 &&
             basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
          ratio = r;
          leave = i;
        }
      }
      if (leave < 0) return LpStatus::Unbounded;
      degenerate_run = ratio <= tol ? degenerate_run + 1 : 0;
      pivot(leave, enter);
      ++iterations;
    }
  }

  void drive_out_artificials() {
    const Scalar tol = static_cast<Scalar>(opt_.tolerance);
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (basis_[static_cast<std::size_t>(i)] < first_artificial_) continue;
      for (Eigen::Index j = 0; j < first_artificial_; ++j) {
        if (std::abs(t_(i, j)) > tol) {
          pivot(i, j);
          break;
        }
      }
      // A row left with an artificial basic at zero is redundant.
    }
  }

  void extract(LpSolution<Scalar>& out) const {
    out.x = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const auto col = basis_[static_cast<std::size_t>(i)];
      if (col < n_) out.x[col] = std::max<Scalar>(0, t_(i, cols_));
    }
    out.objective = cost_.head(n_).dot(out.x);
  }
};

}  // namespace lp_detail

template <typename Scalar>
LpSolution<Scalar> solve_lp(const LinearProgram<Scalar>& lp, const LpOptions& options = {}) {
  return lp_detail::Tableau<Scalar>(lp, options).solve();
}

}  // namespace windcascade
