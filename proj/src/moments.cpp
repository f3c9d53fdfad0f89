#include "lnared/moments.hpp"

namespace lnared {

OriginalMomentState OriginalMomentState::zero(int n_s, int n_f) {
    OriginalMomentState s;
    s.x = Vec::Zero(n_s);
    s.z = Vec::Zero(n_f);
    s.m_x = Vec::Zero(n_s);
    s.m_z = Vec::Zero(n_f);
    s.M_xx = Mat::Zero(n_s, n_s);
    s.M_zx = Mat::Zero(n_f, n_s);
    s.M_zz = Mat::Zero(n_f, n_f);
    return s;
}

OriginalMomentState OriginalMomentState::deterministic(Vec x0, Vec z0, Vec psi_x0, Vec psi_z0) {
    OriginalMomentState s;
    s.M_xx = psi_x0 * psi_x0.transpose();
    s.M_zx = psi_z0 * psi_x0.transpose();
    s.M_zz = psi_z0 * psi_z0.transpose();
    s.x = std::move(x0);
    s.z = std::move(z0);
    s.m_x = std::move(psi_x0);
    s.m_z = std::move(psi_z0);
    return s;
}

ReducedMomentState ReducedMomentState::zero(int n_s) {
    ReducedMomentState s;
    s.xbar = Vec::Zero(n_s);
    s.m_x = Vec::Zero(n_s);
    s.M_xx = Mat::Zero(n_s, n_s);
    return s;
}

ReducedMomentState ReducedMomentState::deterministic(Vec x0, Vec psi_x0) {
    ReducedMomentState s;
    s.M_xx = psi_x0 * psi_x0.transpose();
    s.xbar = std::move(x0);
    s.m_x = std::move(psi_x0);
    return s;
}

void original_moment_rhs(const SingularPerturbedLNA& sp, const OriginalMomentState& s, double t,
                         double eps, OriginalMomentState& ds) {
    const BlockEval b = sp.blocks(s.x, s.z, t, eps);
    const int m_s = sp.m_s();

    ds.x = b.f_x;
    ds.z = b.f_z / eps;

    ds.m_x = b.A1 * s.m_x + b.A2 * s.m_z;
    ds.m_z = (b.B1 * s.m_x + b.B2 * s.m_z) / eps;

    ds.M_xx = b.A1 * s.M_xx + b.A2 * s.M_zx + s.M_xx * b.A1.transpose() +
              s.M_zx.transpose() * b.A2.transpose() + b.sigma_x * b.sigma_x.transpose();

    // sigma_z [sigma_x 0]^T only sees the shared slow channels.
    const Mat cross = b.sigma_z.leftCols(m_s) * b.sigma_x.transpose();
    ds.M_zx = s.M_zx * b.A1.transpose() + s.M_zz * b.A2.transpose() +
              (b.B1 * s.M_xx + b.B2 * s.M_zx + cross) / eps;

    ds.M_zz = (b.B1 * s.M_zx.transpose() + b.B2 * s.M_zz + s.M_zx * b.B1.transpose() +
               s.M_zz * b.B2.transpose()) /
                  eps +
              b.sigma_z * b.sigma_z.transpose() / (eps * eps);
}

void reduced_moment_rhs(const ReducedModel& red, const ReducedMomentState& s, double t,
                        ReducedMomentState& ds) {
    const ReducedModel::Eval e = red.eval(s.xbar, t);
    ds.xbar = e.drift;
    ds.m_x = e.Abar * s.m_x;
    ds.M_xx = e.Abar * s.M_xx + s.M_xx * e.Abar.transpose() + e.sigma * e.sigma.transpose();
}

double qss_consistency_residual(const SingularPerturbedLNA& sp, const ReducedModel& red,
                                const Vec& x, double t, const Vec& m_x, const Mat& M_xx) {
    const ReducedModel::Eval e = red.eval(x, t);
    const BlockEval b = sp.blocks(x, e.z, t, 0.0);

    const Vec m_z = e.g2 * m_x;
    const Mat M_zx = e.g2 * M_xx;

    const Vec dx = b.f_x;
    const Vec dm = b.A1 * m_x + b.A2 * m_z;
    const Mat dM = b.A1 * M_xx + b.A2 * M_zx + M_xx * b.A1.transpose() +
                   M_zx.transpose() * b.A2.transpose() + b.sigma_x * b.sigma_x.transpose();

    ReducedMomentState rs;
    rs.xbar = x;
    rs.m_x = m_x;
    rs.M_xx = M_xx;
    ReducedMomentState rds;
    reduced_moment_rhs(red, rs, t, rds);

    double r = 0.0;
    r = std::max(r, (dx - rds.xbar).cwiseAbs().maxCoeff());
    r = std::max(r, (dm - rds.m_x).cwiseAbs().maxCoeff());
    r = std::max(r, (dM - rds.M_xx).cwiseAbs().maxCoeff());
    return r;
}

namespace {

int original_dim(int n_s, int n_f) {
    return 2 * (n_s + n_f) + n_s * n_s + n_f * n_s + n_f * n_f;
}

} // namespace

Vec pack_original(const OriginalMomentState& s) {
    const int n_s = static_cast<int>(s.x.size());
    const int n_f = static_cast<int>(s.z.size());
    Vec v(original_dim(n_s, n_f));
    int o = 0;
    v.segment(o, n_s) = s.x; o += n_s;
    v.segment(o, n_f) = s.z; o += n_f;
    v.segment(o, n_s) = s.m_x; o += n_s;
    v.segment(o, n_f) = s.m_z; o += n_f;
    v.segment(o, n_s * n_s) = Eigen::Map<const Vec>(s.M_xx.data(), n_s * n_s); o += n_s * n_s;
    v.segment(o, n_f * n_s) = Eigen::Map<const Vec>(s.M_zx.data(), n_f * n_s); o += n_f * n_s;
    v.segment(o, n_f * n_f) = Eigen::Map<const Vec>(s.M_zz.data(), n_f * n_f);
    return v;
}

OriginalMomentState unpack_original(const Vec& v, int n_s, int n_f) {
    OriginalMomentState s;
    int o = 0;
    s.x = v.segment(o, n_s); o += n_s;
    s.z = v.segment(o, n_f); o += n_f;
    s.m_x = v.segment(o, n_s); o += n_s;
    s.m_z = v.segment(o, n_f); o += n_f;
    s.M_xx = Eigen::Map<const Mat>(v.data() + o, n_s, n_s); o += n_s * n_s;
    s.M_zx = Eigen::Map<const Mat>(v.data() + o, n_f, n_s); o += n_f * n_s;
    s.M_zz = Eigen::Map<const Mat>(v.data() + o, n_f, n_f);
    return s;
}

Vec pack_reduced(const ReducedMomentState& s) {
    const int n_s = static_cast<int>(s.xbar.size());
    Vec v(2 * n_s + n_s * n_s);
    v.segment(0, n_s) = s.xbar;
    v.segment(n_s, n_s) = s.m_x;
    v.segment(2 * n_s, n_s * n_s) = Eigen::Map<const Vec>(s.M_xx.data(), n_s * n_s);
    return v;
}

ReducedMomentState unpack_reduced(const Vec& v, int n_s) {
    ReducedMomentState s;
    s.xbar = v.segment(0, n_s);
    s.m_x = v.segment(n_s, n_s);
    s.M_xx = Eigen::Map<const Mat>(v.data() + 2 * n_s, n_s, n_s);
    return s;
}

namespace {

// Average a packed square block with its transpose in place.
void symmetrize_block(Vec& v, int offset, int n) {
    Eigen::Map<Mat> M(v.data() + offset, n, n);
    M = ((M + M.transpose()) / 2.0).eval();
}

} // namespace

OriginalMomentTrajectory integrate_original_moments(const SingularPerturbedLNA& sp,
                                                    const OriginalMomentState& init, double t0,
                                                    double t1, const std::vector<double>& t_out,
                                                    double eps, const IntegrateOptions& opt) {
    const int n_s = sp.n_s();
    const int n_f = sp.n_f();
    OriginalMomentState scratch = OriginalMomentState::zero(n_s, n_f);

    RhsFn rhs = [&sp, eps, n_s, n_f, &scratch](double t, const Vec& v, Vec& dv) {
        const OriginalMomentState s = unpack_original(v, n_s, n_f);
        original_moment_rhs(sp, s, t, eps, scratch);
        dv = pack_original(scratch);
    };
    const int off_Mxx = 2 * (n_s + n_f);
    const int off_Mzz = off_Mxx + n_s * n_s + n_f * n_s;
    auto post = [n_s, n_f, off_Mxx, off_Mzz](Vec& v) {
        symmetrize_block(v, off_Mxx, n_s);
        symmetrize_block(v, off_Mzz, n_f);
    };

    const Trajectory traj = integrate(rhs, pack_original(init), t0, t1, t_out, opt, post);
    OriginalMomentTrajectory out;
    out.t = traj.t;
    out.states.reserve(traj.y.size());
    for (const auto& v : traj.y) out.states.push_back(unpack_original(v, n_s, n_f));
    return out;
}

ReducedMomentTrajectory integrate_reduced_moments(const ReducedModel& red,
                                                  const ReducedMomentState& init, double t0,
                                                  double t1, const std::vector<double>& t_out,
                                                  const IntegrateOptions& opt) {
    const int n_s = red.n_s();
    ReducedMomentState scratch = ReducedMomentState::zero(n_s);

    RhsFn rhs = [&red, n_s, &scratch](double t, const Vec& v, Vec& dv) {
        const ReducedMomentState s = unpack_reduced(v, n_s);
        reduced_moment_rhs(red, s, t, scratch);
        dv = pack_reduced(scratch);
    };
    auto post = [n_s](Vec& v) { symmetrize_block(v, 2 * n_s, n_s); };

    const Trajectory traj = integrate(rhs, pack_reduced(init), t0, t1, t_out, opt, post);
    ReducedMomentTrajectory out;
    out.t = traj.t;
    out.states.reserve(traj.y.size());
    for (const auto& v : traj.y) out.states.push_back(unpack_reduced(v, n_s));
    return out;
}

} // namespace lnared
