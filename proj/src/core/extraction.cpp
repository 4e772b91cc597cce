#include "extraction.hpp"

#include <cmath>
#include <numbers>

#include "error.hpp"

namespace freqstab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinAdmittanceRcond = 1e-12;

void require_ports(const StateSpaceModel& m, std::initializer_list<const char*> in,
                   std::initializer_list<const char*> out) {
  for (const char* p : in) {
    if (!m.has_input(p)) throw Error(ErrorCode::kDimensionMismatch, std::string("model lacks input ") + p);
  }
  for (const char* p : out) {
    if (!m.has_output(p)) throw Error(ErrorCode::kDimensionMismatch, std::string("model lacks output ") + p);
  }
}

Eigen::Matrix2cd invert_admittance(const Eigen::MatrixXcd& G, double f_hz) {
  const Eigen::Matrix2cd G2 = G;
  Eigen::PartialPivLU<Eigen::Matrix2cd> lu(G2);
  if (!(lu.rcond() >= kMinAdmittanceRcond)) {
    throw Error(ErrorCode::kSingularAdmittance,
                "current response is singular at " + std::to_string(f_hz) + " Hz");
  }
  return lu.inverse();
}

template <class F>
TransferSamples sample(int rows, int cols, const std::vector<double>& f_hz, F&& at) {
  TransferSamples s(rows, cols);
  s.freq_hz.reserve(f_hz.size());
  s.values.reserve(f_hz.size());
  for (double f : f_hz) s.push_back(f, at(f));
  s.validate();
  return s;
}

}  // namespace

TransferSamples vsm_impedance(const StateSpaceModel& gfm, const std::vector<double>& f_hz) {
  require_ports(gfm, {"u"}, {"i"});
  return sample(2, 2, f_hz, [&](double f) -> Eigen::MatrixXcd {
    const ResolventSolver rs(gfm.A, kTwoPi * f);
    return -invert_admittance(eval_response(gfm, rs, "u", "i"), f);
  });
}

StateSpaceModel virtual_resistor_model(const StateSpaceModel& gfm, double R_v, bool* hurwitz) {
  require_ports(gfm, {"u"}, {"i", "omega"});
  if (!(R_v > 0.0)) throw Error(ErrorCode::kInvalidArgument, "virtual resistance must be > 0");
  // delivered current = u / R_v + i_sink  =>  u = (I/R_v - D)^-1 (C_i x - i_sink)
  const Eigen::MatrixXd D = gfm.Dblock("u", "i");
  const Eigen::Matrix2d K = (Eigen::Matrix2d::Identity() / R_v - D).inverse();
  const Eigen::MatrixXd& Bu = gfm.B("u");
  const Eigen::MatrixXd& Ci = gfm.C("i");
  StateSpaceModel m;
  m.A = gfm.A + Bu * K * Ci;
  m.state_labels = gfm.state_labels;
  m.add_input("i", -Bu * K);
  const Eigen::MatrixXd Du = gfm.Dblock("u", "omega");
  m.add_output("omega", gfm.C("omega") + Du * K * Ci);
  if (Du.cwiseAbs().maxCoeff() > 0.0) m.D[{"i", "omega"}] = -Du * K;
  m.validate();
  if (hurwitz) *hurwitz = is_hurwitz(m.A);
  return m;
}

TransferSamples vsm_frequency_impedance(const StateSpaceModel& gfm, GammaMethod method, double R_v,
                                        const std::vector<double>& f_hz) {
  require_ports(gfm, {"u"}, {"i", "omega"});
  if (method == GammaMethod::kExactInversion) {
    return sample(1, 2, f_hz, [&](double f) -> Eigen::MatrixXcd {
      const ResolventSolver rs(gfm.A, kTwoPi * f);
      const Eigen::Matrix2cd Gi_inv = invert_admittance(eval_response(gfm, rs, "u", "i"), f);
      return eval_response(gfm, rs, "u", "omega") * Gi_inv;
    });
  }
  bool stable = true;
  const StateSpaceModel m = virtual_resistor_model(gfm, R_v, &stable);
  TransferSamples s = sample(1, 2, f_hz, [&](double f) -> Eigen::MatrixXcd {
    return eval_response(m, "i", "omega", kTwoPi * f);
  });
  if (!stable) {
    s.warnings.push_back("virtual-resistor model is not Hurwitz at R_v = " + std::to_string(R_v) + " ohm");
  }
  return s;
}

Eigen::MatrixXd vsm_unloaded_matrix(const StateSpaceModel& gfm) {
  require_ports(gfm, {"u"}, {"i"});
  const Eigen::MatrixXd D = gfm.Dblock("u", "i");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(D);
  if (D.rows() != D.cols() || !lu.isInvertible()) {
    throw Error(ErrorCode::kSingularAdmittance, "grid-forming model has no direct voltage-to-current path");
  }
  return gfm.A - gfm.B("u") * lu.inverse() * gfm.C("i");
}

TransferSamples csm_admittance(const StateSpaceModel& gfl, const std::vector<double>& f_hz) {
  require_ports(gfl, {"u"}, {"i"});
  return sample(2, 2, f_hz, [&](double f) { return eval_response(gfl, "u", "i", kTwoPi * f); });
}

TransferSamples csm_frequency_admittance(const StateSpaceModel& gfl, const std::vector<double>& f_hz) {
  require_ports(gfl, {"omega"}, {"i"});
  return sample(2, 1, f_hz, [&](double f) { return eval_response(gfl, "omega", "i", kTwoPi * f); });
}

PointResponse extract_point(const StateSpaceModel& gfm, const StateSpaceModel& gfl, double f_hz) {
  const double w = kTwoPi * f_hz;
  const ResolventSolver rv(gfm.A, w);
  const Eigen::Matrix2cd Gi_inv = invert_admittance(eval_response(gfm, rv, "u", "i"), f_hz);
  PointResponse r;
  r.Zv = -Gi_inv;
  r.Gv = eval_response(gfm, rv, "u", "omega") * Gi_inv;
  const ResolventSolver rc(gfl.A, w);
  r.Yc = eval_response(gfl, rc, "u", "i");
  r.Pc = eval_response(gfl, rc, "omega", "i");
  return r;
}

StateSpaceModel assemble_system(const StateSpaceModel& gfm, const StateSpaceModel& gfl) {
  require_ports(gfm, {"u"}, {"i", "omega"});
  require_ports(gfl, {"pq", "u", "omega"}, {"i"});
  const auto nv = gfm.n(), nc = gfl.n();
  const Eigen::MatrixXd& CiV = gfm.C("i");
  const Eigen::MatrixXd& CwV = gfm.C("omega");
  const Eigen::MatrixXd& CC = gfl.C("i");
  if (CiV.rows() != 2 || CC.rows() != 2 || CwV.rows() != 1 || gfl.B("omega").cols() != 1) {
    throw Error(ErrorCode::kDimensionMismatch, "port widths do not match for interconnection");
  }
  // equal currents at the PCC: CiV xV + DV u = CC xC + DCu u + DCpq pq
  const Eigen::Matrix2d Mden = gfm.Dblock("u", "i") - gfl.Dblock("u", "i");
  Eigen::FullPivLU<Eigen::Matrix2d> lu(Mden);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::kSingularAdmittance, "PCC voltage is not determined by the interconnection");
  }
  const Eigen::Matrix2d M = lu.inverse();
  Eigen::MatrixXd Ku(2, nv + nc);
  Ku << -M * CiV, M * CC;
  const Eigen::MatrixXd Kpq = M * gfl.Dblock("pq", "i");
  // omega = CwV xV + Dwu u
  const Eigen::MatrixXd Dwu = gfm.Dblock("u", "omega");
  Eigen::MatrixXd Kw(1, nv + nc);
  Kw << CwV, Eigen::MatrixXd::Zero(1, nc);
  Kw += Dwu * Ku;
  const Eigen::MatrixXd Kwpq = Dwu * Kpq;

  StateSpaceModel m;
  m.A = Eigen::MatrixXd::Zero(nv + nc, nv + nc);
  m.A.topLeftCorner(nv, nv) = gfm.A;
  m.A.bottomRightCorner(nc, nc) = gfl.A;
  m.A.topRows(nv) += gfm.B("u") * Ku;
  m.A.bottomRows(nc) += gfl.B("u") * Ku + gfl.B("omega") * Kw;
  m.state_labels = gfm.state_labels;
  m.state_labels.insert(m.state_labels.end(), gfl.state_labels.begin(), gfl.state_labels.end());

  Eigen::MatrixXd Bpq(nv + nc, 2);
  Bpq.topRows(nv) = gfm.B("u") * Kpq;
  Bpq.bottomRows(nc) = gfl.B("pq") + gfl.B("u") * Kpq + gfl.B("omega") * Kwpq;
  m.add_input("pq", Bpq);

  Eigen::MatrixXd Ci(2, nv + nc);
  Ci << Eigen::MatrixXd::Zero(2, nv), CC;
  Ci += gfl.Dblock("u", "i") * Ku + gfl.Dblock("omega", "i") * Kw;
  m.add_output("i", Ci);
  m.add_output("u", Ku);
  m.add_output("omega", Kw);
  const Eigen::MatrixXd Dpqi = gfl.Dblock("pq", "i") + gfl.Dblock("u", "i") * Kpq + gfl.Dblock("omega", "i") * Kwpq;
  if (Dpqi.cwiseAbs().maxCoeff() > 0.0) m.D[{"pq", "i"}] = Dpqi;
  if (Kpq.cwiseAbs().maxCoeff() > 0.0) m.D[{"pq", "u"}] = Kpq;
  if (Kwpq.cwiseAbs().maxCoeff() > 0.0) m.D[{"pq", "omega"}] = Kwpq;
  m.validate();
  return m;
}

}  // namespace freqstab
