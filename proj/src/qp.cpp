#include "drfdm/qp.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "drfdm/error.hpp"

namespace drfdm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Factorization state of the dual method. J = L^{-T} Q, R upper triangular;
// the first `iq` columns of J span the active constraint normals.
struct ActiveSet {
  MatrixXd J;
  MatrixXd R;
  std::vector<int> ids;   // constraint ids in activation order
  std::vector<double> u;  // multipliers, parallel to ids
  double r_norm = 1.0;

  int size() const { return static_cast<int>(ids.size()); }
};

// Appends the constraint whose transformed normal is d (= J' n). Returns false
// when it is linearly dependent on the active set.
bool add_constraint(ActiveSet& as, VectorXd& d) {
  const auto n = as.J.rows();
  const int iq = as.size();
  for (Eigen::Index j = n - 1; j >= iq + 1; --j) {
    double cc = d(j - 1), ss = d(j);
    const double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    d(j) = 0.0;
    ss /= h;
    cc /= h;
    if (cc < 0.0) {
      cc = -cc;
      ss = -ss;
      d(j - 1) = -h;
    } else {
      d(j - 1) = h;
    }
    const double xny = ss / (1.0 + cc);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double t1 = as.J(k, j - 1), t2 = as.J(k, j);
      as.J(k, j - 1) = t1 * cc + t2 * ss;
      as.J(k, j) = xny * (t1 + as.J(k, j - 1)) - t2;
    }
  }
  as.R.col(iq).head(iq + 1) = d.head(iq + 1);
  if (std::abs(d(iq)) <= std::numeric_limits<double>::epsilon() * as.r_norm) return false;
  as.r_norm = std::max(as.r_norm, std::abs(d(iq)));
  return true;
}

void delete_constraint(ActiveSet& as, int pos) {
  const auto n = as.J.rows();
  int iq = as.size();
  as.ids.erase(as.ids.begin() + pos);
  as.u.erase(as.u.begin() + pos);
  for (int j = pos; j < iq - 1; ++j) as.R.col(j) = as.R.col(j + 1);
  as.R.col(iq - 1).setZero();
  --iq;
  for (int j = pos; j < iq; ++j) {
    double cc = as.R(j, j), ss = as.R(j + 1, j);
    const double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    cc /= h;
    ss /= h;
    as.R(j + 1, j) = 0.0;
    if (cc < 0.0) {
      as.R(j, j) = -h;
      cc = -cc;
      ss = -ss;
    } else {
      as.R(j, j) = h;
    }
    const double xny = ss / (1.0 + cc);
    for (int k = j + 1; k < iq; ++k) {
      const double t1 = as.R(j, k), t2 = as.R(j + 1, k);
      as.R(j, k) = t1 * cc + t2 * ss;
      as.R(j + 1, k) = xny * (t1 + as.R(j, k)) - t2;
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      const double t1 = as.J(k, j), t2 = as.J(k, j + 1);
      as.J(k, j) = t1 * cc + t2 * ss;
      as.J(k, j + 1) = xny * (as.J(k, j) + t1) - t2;
    }
  }
}

std::string describe(const std::vector<int>& ids, int n_eq, Eigen::Index n) {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) os << ", ";
    const int id = ids[i];
    if (id < n_eq)
      os << (id == 0 ? "budget" : "target");
    else if (id - n_eq < n)
      os << "w" << (id - n_eq) << "<=bound";
    else
      os << "w" << (id - n_eq - n) << ">=-bound";
  }
  os << "}";
  return os.str();
}

}  // namespace

BoxQpSolution solve_box_qp(const BoxQp& pb) {
  const auto n = pb.cov.rows();
  if (n < 1 || pb.cov.cols() != n) throw ShapeError("box QP: covariance must be square");
  if (pb.target.has_value() != pb.mean.has_value())
    throw ParameterError("box QP: mean and target must be given together");
  if (pb.mean && pb.mean->size() != n) throw ShapeError("box QP: mean dimension mismatch");
  if (!(pb.bound > 0.0)) throw ParameterError("box QP: bound must be positive");
  if (pb.bound * static_cast<double>(n) < 1.0)
    throw InfeasibleError("box QP infeasible: bound * N = " +
                          std::to_string(pb.bound * static_cast<double>(n)) +
                          " < 1, binding set {budget, all upper bounds}");

  Eigen::LLT<MatrixXd> llt(pb.cov);
  if (llt.info() != Eigen::Success) throw NumericError("box QP: covariance is not positive definite");

  const int n_eq = pb.mean ? 2 : 1;
  const int n_ineq = static_cast<int>(2 * n);
  // Equality normals: 1 (rhs 1) and mean (rhs target).
  auto eq_normal = [&](int id) -> VectorXd {
    return id == 0 ? VectorXd::Ones(n) : *pb.mean;
  };
  auto eq_rhs = [&](int id) { return id == 0 ? 1.0 : *pb.target; };
  // Inequality id i in [0, 2n): i < n is bound - w_i >= 0, else w_i + bound >= 0.
  auto slack = [&](const VectorXd& w, int i) {
    return i < n ? pb.bound - w(i) : w(i - n) + pb.bound;
  };
  auto sign_of = [&](int i) { return i < n ? -1.0 : 1.0; };
  auto coord = [&](int i) { return i < n ? i : static_cast<int>(i - n); };

  ActiveSet as;
  // J = L^{-T}
  as.J = llt.matrixU().solve(MatrixXd::Identity(n, n));
  as.R = MatrixXd::Zero(n, n);
  VectorXd w = VectorXd::Zero(n);
  VectorXd d(n), z(n), r;

  auto step_direction = [&](const auto& dvec) {
    const int iq = as.size();
    z.noalias() = as.J.rightCols(n - iq) * dvec.tail(n - iq);
    r = as.R.topLeftCorner(iq, iq).template triangularView<Eigen::Upper>().solve(dvec.head(iq));
  };

  for (int id = 0; id < n_eq; ++id) {
    const VectorXd np = eq_normal(id);
    d.noalias() = as.J.transpose() * np;
    step_direction(d);
    const double zn = z.dot(np);
    if (std::abs(zn) <= 1e-14 * np.squaredNorm())
      throw DegeneracyError("box QP: equality constraints are linearly dependent");
    const double t2 = (eq_rhs(id) - np.dot(w)) / zn;
    w += t2 * z;
    for (int k = 0; k < as.size(); ++k) as.u[static_cast<std::size_t>(k)] -= t2 * r(k);
    if (!add_constraint(as, d))
      throw DegeneracyError("box QP: equality constraints are linearly dependent");
    as.ids.push_back(id);
    as.u.push_back(t2);
  }

  std::vector<char> active(static_cast<std::size_t>(n_ineq), 0);
  const double feas_tol = 1e-13 * std::max(1.0, pb.bound);
  BoxQpSolution sol;
  const int max_iter = 50 * static_cast<int>(n) + 100;
  for (int iter = 0;; ++iter) {
    if (iter > max_iter) throw NumericError("box QP: iteration limit reached");
    // most violated inactive bound, lowest index on ties
    int p = -1;
    double worst = -feas_tol;
    for (int i = 0; i < n_ineq; ++i) {
      if (active[static_cast<std::size_t>(i)]) continue;
      const double s = slack(w, i);
      if (s < worst) {
        worst = s;
        p = i;
      }
    }
    if (p < 0) {
      sol.iterations = iter;
      break;
    }

    double u_plus = 0.0;
    double sp = slack(w, p);
    for (;;) {
      // d = J' n_p with n_p = sign * e_coord
      d = sign_of(p) * as.J.row(coord(p)).transpose();
      step_direction(d);
      int drop = -1;
      double t1 = kInf;
      for (int k = n_eq; k < as.size(); ++k) {
        if (r(k) > 0.0) {
          const double ratio = as.u[static_cast<std::size_t>(k)] / r(k);
          if (ratio < t1) {
            t1 = ratio;
            drop = k;
          }
        }
      }
      const double zn = sign_of(p) * z(coord(p));
      const double t2 = z.norm() > 1e-14 && zn > 0.0 ? -sp / zn : kInf;
      const double t = std::min(t1, t2);
      if (t == kInf) {
        std::vector<int> binding = as.ids;
        binding.push_back(n_eq + p);
        throw InfeasibleError("box QP infeasible: cannot satisfy " +
                              describe({n_eq + p}, n_eq, n) + "; binding set " +
                              describe(binding, n_eq, n));
      }
      if (t2 == kInf) {
        for (int k = 0; k < as.size(); ++k) as.u[static_cast<std::size_t>(k)] -= t * r(k);
        u_plus += t;
        const int id = as.ids[static_cast<std::size_t>(drop)];
        active[static_cast<std::size_t>(id - n_eq)] = 0;
        delete_constraint(as, drop);
        continue;
      }
      w += t * z;
      for (int k = 0; k < as.size(); ++k) as.u[static_cast<std::size_t>(k)] -= t * r(k);
      u_plus += t;
      if (t == t2) {
        if (!add_constraint(as, d)) {
          std::vector<int> binding = as.ids;
          binding.push_back(n_eq + p);
          throw InfeasibleError("box QP infeasible: dependent active set " +
                                describe(binding, n_eq, n));
        }
        as.ids.push_back(n_eq + p);
        as.u.push_back(u_plus);
        active[static_cast<std::size_t>(p)] = 1;
        break;
      }
      const int id = as.ids[static_cast<std::size_t>(drop)];
      active[static_cast<std::size_t>(id - n_eq)] = 0;
      delete_constraint(as, drop);
      sp = slack(w, p);
    }
  }

  sol.w = w;
  sol.bound_multipliers = VectorXd::Zero(n);
  for (int k = 0; k < as.size(); ++k) {
    const int id = as.ids[static_cast<std::size_t>(k)];
    const double u = as.u[static_cast<std::size_t>(k)];
    if (id == 0) {
      sol.budget_multiplier = u;
    } else if (id < n_eq) {
      sol.target_multiplier = u;
    } else {
      const int i = id - n_eq;
      sol.bound_multipliers(coord(i)) = sign_of(i) * u;
      sol.active.push_back(i < n ? coord(i) + 1 : -(coord(i) + 1));
    }
  }
  return sol;
}

}  // namespace drfdm
