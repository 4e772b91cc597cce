#include "state_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "error.hpp"

namespace freqstab {

namespace {

const Port* find_port(const std::vector<Port>& ports, const std::string& name) {
  for (const auto& p : ports) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

}  // namespace

const Eigen::MatrixXd& StateSpaceModel::B(const std::string& input) const {
  const Port* p = find_port(inputs, input);
  if (!p) throw Error(ErrorCode::kInvalidArgument, "unknown input port '" + input + "'");
  return p->block;
}

const Eigen::MatrixXd& StateSpaceModel::C(const std::string& output) const {
  const Port* p = find_port(outputs, output);
  if (!p) throw Error(ErrorCode::kInvalidArgument, "unknown output port '" + output + "'");
  return p->block;
}

Eigen::MatrixXd StateSpaceModel::Dblock(const std::string& input, const std::string& output) const {
  const auto rows = C(output).rows();
  const auto cols = B(input).cols();
  auto it = D.find({input, output});
  if (it == D.end()) return Eigen::MatrixXd::Zero(rows, cols);
  return it->second;
}

bool StateSpaceModel::has_input(const std::string& name) const {
  return find_port(inputs, name) != nullptr;
}

bool StateSpaceModel::has_output(const std::string& name) const {
  return find_port(outputs, name) != nullptr;
}

void StateSpaceModel::add_input(std::string name, Eigen::MatrixXd block) {
  inputs.push_back({std::move(name), std::move(block)});
}

void StateSpaceModel::add_output(std::string name, Eigen::MatrixXd block) {
  outputs.push_back({std::move(name), std::move(block)});
}

void StateSpaceModel::validate() const {
  const auto nx = A.rows();
  if (A.cols() != nx) throw Error(ErrorCode::kDimensionMismatch, "A is not square");
  if (!A.allFinite()) throw Error(ErrorCode::kNonFinite, "A has non-finite entries");
  if (static_cast<Eigen::Index>(state_labels.size()) != nx) {
    throw Error(ErrorCode::kDimensionMismatch, "state label count differs from A");
  }
  std::set<std::string> seen(state_labels.begin(), state_labels.end());
  if (static_cast<Eigen::Index>(seen.size()) != nx) {
    throw Error(ErrorCode::kInvalidArgument, "state labels are not unique");
  }
  for (const auto& p : inputs) {
    if (p.block.rows() != nx) {
      throw Error(ErrorCode::kDimensionMismatch, "input '" + p.name + "' has wrong row count");
    }
    if (!p.block.allFinite()) throw Error(ErrorCode::kNonFinite, "input '" + p.name + "'");
  }
  for (const auto& p : outputs) {
    if (p.block.cols() != nx) {
      throw Error(ErrorCode::kDimensionMismatch, "output '" + p.name + "' has wrong column count");
    }
    if (!p.block.allFinite()) throw Error(ErrorCode::kNonFinite, "output '" + p.name + "'");
  }
  for (const auto& [key, d] : D) {
    if (!has_input(key.first) || !has_output(key.second)) {
      throw Error(ErrorCode::kInvalidArgument, "D block refers to unknown port");
    }
    if (d.rows() != C(key.second).rows() || d.cols() != B(key.first).cols()) {
      throw Error(ErrorCode::kDimensionMismatch, "D block shape");
    }
    if (!d.allFinite()) throw Error(ErrorCode::kNonFinite, "D block");
  }
}

ResolventSolver::ResolventSolver(const Eigen::MatrixXd& A, double omega) {
  if (!std::isfinite(omega)) throw Error(ErrorCode::kNonFinite, "frequency is not finite");
  const auto nx = A.rows();
  Eigen::MatrixXcd M = -A.cast<cd>();
  M.diagonal().array() += cd(0.0, omega);
  lu_.compute(M);
  rcond_ = nx == 0 ? 1.0 : lu_.rcond();
  if (!(rcond_ >= kMinRcond)) {
    throw Error(ErrorCode::kSingularResolvent,
                "j*omega is (numerically) an eigenvalue of A at omega = " + std::to_string(omega));
  }
}

Eigen::MatrixXcd ResolventSolver::solve(const Eigen::MatrixXd& rhs) const {
  return lu_.solve(rhs.cast<cd>());
}

Eigen::MatrixXcd eval_response(const StateSpaceModel& model, const ResolventSolver& solver,
                               const std::string& input, const std::string& output) {
  const auto& B = model.B(input);
  const auto& C = model.C(output);
  if (B.rows() != model.n() || C.cols() != model.n()) {
    throw Error(ErrorCode::kDimensionMismatch, "port blocks do not match A");
  }
  Eigen::MatrixXcd X = solver.solve(B);
  Eigen::MatrixXcd G = C.cast<cd>() * X;
  G += model.Dblock(input, output).cast<cd>();
  return G;
}

Eigen::MatrixXcd eval_response(const StateSpaceModel& model, const std::string& input,
                               const std::string& output, double omega) {
  if (model.A.rows() != model.A.cols()) throw Error(ErrorCode::kDimensionMismatch, "A not square");
  ResolventSolver solver(model.A, omega);
  return eval_response(model, solver, input, output);
}

Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& A) {
  if (!A.allFinite()) throw Error(ErrorCode::kNonFinite, "matrix has non-finite entries");
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::kEigenNoConvergence, "eigenvalue iteration did not converge");
  }
  return es.eigenvalues();
}

bool is_hurwitz(const Eigen::MatrixXd& A, double* max_real) {
  const auto ev = eigenvalues(A);
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& l : ev) m = std::max(m, l.real());
  if (max_real) *max_real = m;
  return m < 0.0;
}

}  // namespace freqstab
