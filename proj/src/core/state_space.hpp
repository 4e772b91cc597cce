#pragma once

#include <Eigen/Dense>
#include <complex>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace freqstab {

using cd = std::complex<double>;

struct Port {
  std::string name;
  Eigen::MatrixXd block;  // B: n x k, C: k x n
};

/// Linear model x' = A x + sum B_p u_p, y_q = C_q x + sum D_qp u_p.
class StateSpaceModel {
 public:
  Eigen::MatrixXd A;
  std::vector<std::string> state_labels;
  std::vector<Port> inputs;
  std::vector<Port> outputs;
  /// Keyed by (input, output); missing pairs are zero.
  std::map<std::pair<std::string, std::string>, Eigen::MatrixXd> D;

  Eigen::Index n() const { return A.rows(); }
  const Eigen::MatrixXd& B(const std::string& input) const;
  const Eigen::MatrixXd& C(const std::string& output) const;
  Eigen::MatrixXd Dblock(const std::string& input, const std::string& output) const;
  bool has_input(const std::string& name) const;
  bool has_output(const std::string& name) const;

  void add_input(std::string name, Eigen::MatrixXd block);
  void add_output(std::string name, Eigen::MatrixXd block);

  /// Throws kDimensionMismatch / kNonFinite / kInvalidArgument.
  void validate() const;
};

/// LU factorization of (j w I - A) for repeated solves at one frequency.
class ResolventSolver {
 public:
  static constexpr double kMinRcond = 1e-12;

  ResolventSolver(const Eigen::MatrixXd& A, double omega);

  Eigen::MatrixXcd solve(const Eigen::MatrixXd& rhs) const;
  double rcond() const { return rcond_; }

 private:
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
  double rcond_ = 0.0;
};

/// C_out (j w I - A)^-1 B_in + D. omega in rad/s.
Eigen::MatrixXcd eval_response(const StateSpaceModel& model, const std::string& input,
                               const std::string& output, double omega);

/// Same, reusing a factorization for several port pairs.
Eigen::MatrixXcd eval_response(const StateSpaceModel& model, const ResolventSolver& solver,
                               const std::string& input, const std::string& output);

/// Eigenvalues of a real matrix; throws kEigenNoConvergence.
Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& A);

bool is_hurwitz(const Eigen::MatrixXd& A, double* max_real = nullptr);

}  // namespace freqstab
