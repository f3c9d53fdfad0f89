#include "lnared/reduction.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace lnared {

namespace {

constexpr double kHurwitzMargin = -1e-9;
constexpr double kCondLimit = 1e12;

double inf_norm(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Column-pivoted QR solve with a diagonal-ratio condition estimate.
Mat qr_solve(const Mat& A, const Mat& rhs, double& cond_out) {
    if (A.rows() == 0) { // no fast block at all
        cond_out = 1.0;
        return Mat::Zero(0, rhs.cols());
    }
    Eigen::ColPivHouseholderQR<Mat> qr(A);
    const Vec d = qr.matrixQR().diagonal().cwiseAbs();
    const double dmin = d.minCoeff();
    cond_out = dmin > 0.0 ? d.maxCoeff() / dmin : std::numeric_limits<double>::infinity();
    if (!(cond_out <= kCondLimit)) {
        throw SingularityError("B2 is numerically singular (estimated cond=" +
                                   std::to_string(cond_out) + ")",
                               cond_out);
    }
    return qr.solve(rhs);
}

double max_real_eig(const Mat& M) {
    if (M.rows() == 0) return -std::numeric_limits<double>::infinity();
    if (M.rows() == 1) return M(0, 0);
    Eigen::EigenSolver<Mat> es(M, /*computeEigenvectors=*/false);
    return es.eigenvalues().real().maxCoeff();
}

} // namespace

Vec newton_root(const SingularPerturbedLNA& sp, const Vec& x, double t, const Vec& z_guess,
                const NewtonOptions& opt) {
    Vec z = z_guess.size() ? z_guess : Vec::Zero(sp.n_f());
    Vec fz = sp.f_z_raw(x, z, t, 0.0);
    double res = inf_norm(fz);

    for (int it = 0; it < opt.max_iter; ++it) {
        if (res < opt.tol * (1.0 + inf_norm(z))) return z;

        const Mat B2 = sp.B2_raw(x, z, t, 0.0);
        double cond;
        const Vec step = qr_solve(B2, fz, cond).col(0);

        double lambda = 1.0;
        Vec z_next;
        Vec fz_next;
        double res_next = std::numeric_limits<double>::infinity();
        for (int halving = 0; halving <= opt.max_halvings; ++halving) {
            z_next = z - lambda * step;
            fz_next = sp.f_z_raw(x, z_next, t, 0.0);
            res_next = inf_norm(fz_next);
            if (res_next < res) break;
            lambda *= 0.5;
        }
        if (!(res_next < res)) {
            throw ConvergenceError("Newton stalled: damping exhausted at residual " +
                                       std::to_string(res),
                                   res);
        }
        if (inf_norm(z_next - z) < opt.stall_tol * (1.0 + inf_norm(z)) &&
            !(res_next < opt.tol * (1.0 + inf_norm(z_next)))) {
            throw ConvergenceError("Newton stagnated: step underflow at residual " +
                                       std::to_string(res_next),
                                   res_next);
        }
        z = z_next;
        fz = fz_next;
        res = res_next;
    }
    if (res < opt.tol * (1.0 + inf_norm(z))) return z;
    throw ConvergenceError("Newton did not converge in " + std::to_string(opt.max_iter) +
                               " iterations; residual " + std::to_string(res),
                           res);
}

Vec solve_gamma1(const SingularPerturbedLNA& sp, const Vec& x, double t, const Vec& z_guess,
                 const NewtonOptions& opt) {
    Vec z = newton_root(sp, x, t, z_guess, opt);
    const double margin = max_real_eig(sp.B2(x, z, t, 0.0));
    if (!(margin < kHurwitzMargin)) {
        throw ConvergenceError("root found but df_z/dz is not Hurwitz there (max Re eig = " +
                                   std::to_string(margin) + "); wrong branch",
                               margin);
    }
    return z;
}

Mat gamma2(const SingularPerturbedLNA& sp, const Vec& x, double t, const Vec& z_guess,
           const NewtonOptions& opt) {
    const Vec z = solve_gamma1(sp, x, t, z_guess, opt);
    const BlockEval b = sp.blocks(x, z, t, 0.0);
    double cond;
    return -qr_solve(b.B2, b.B1, cond);
}

StabilityReport check_hurwitz(const SingularPerturbedLNA& sp, const Vec& x, double t,
                              const Vec& z_guess, const NewtonOptions& opt) {
    const Vec z = newton_root(sp, x, t, z_guess, opt);
    const double margin = max_real_eig(sp.B2(x, z, t, 0.0));
    return {margin, margin < kHurwitzMargin};
}

ReducedModel::ReducedModel(SingularPerturbedLNA sp, Vec z0, NewtonOptions opt)
    : sp_(std::move(sp)), opt_(opt), z_warm_(std::move(z0)) {
    if (z_warm_.size() != sp_.n_f()) {
        throw ValidationError("warm-start z0 has length " + std::to_string(z_warm_.size()) +
                              ", expected n_f = " + std::to_string(sp_.n_f()));
    }
}

Vec ReducedModel::gamma1(const Vec& x, double t) const {
    if (closed_form_) return closed_form_(x, t);
    z_warm_ = solve_gamma1(sp_, x, t, z_warm_, opt_);
    return z_warm_;
}

Mat ReducedModel::gamma2(const Vec& x, double t) const {
    const Vec z = gamma1(x, t);
    const BlockEval b = sp_.blocks(x, z, t, 0.0);
    double cond;
    return -qr_solve(b.B2, b.B1, cond);
}

Vec ReducedModel::drift(const Vec& x, double t) const { return sp_.f_x(x, gamma1(x, t), t); }

Mat ReducedModel::Abar(const Vec& x, double t) const {
    const Eval e = eval(x, t);
    return e.Abar;
}

Mat ReducedModel::sigma(const Vec& x, double t) const { return sp_.sigma_x(x, gamma1(x, t), t); }

ReducedModel::Eval ReducedModel::eval(const Vec& x, double t) const {
    Eval e;
    e.z = gamma1(x, t);
    const BlockEval b = sp_.blocks(x, e.z, t, 0.0);
    e.drift = b.f_x;
    double cond;
    e.g2 = -qr_solve(b.B2, b.B1, cond);
    e.Abar = b.A1 + b.A2 * e.g2;
    e.sigma = b.sigma_x;
    return e;
}

void ReducedModel::set_closed_form_gamma1(std::function<Vec(const Vec&, double)> fn) {
    closed_form_ = std::move(fn);
}

ReducedModel reduce(const SingularPerturbedLNA& sp, const Vec& x0, const Vec& z0, double t0,
                    const NewtonOptions& opt) {
    // The fast noise must vanish at eps = 0, checked at the initial point.
    const Mat sz0 = sp.sigma_z(x0, z0, t0, 0.0);
    if (sz0.size() && sz0.norm() > 1e-12) {
        throw ValidationError("sigma_z(x0, z0, t0, 0) is nonzero (norm " +
                              std::to_string(sz0.norm()) + "); model violates the vanishing "
                              "fast-noise requirement");
    }
    // The manifold must be reachable from z0 with a Hurwitz Jacobian there.
    const Vec z_init = solve_gamma1(sp, x0, t0, z0, opt);
    ReducedModel red(sp, z_init, opt);
    return red;
}

AssumptionReport check_assumptions(const SingularPerturbedLNA& sp,
                                   const std::vector<PathPoint>& trajectory) {
    constexpr double eps_a = 1e-2, eps_b = 1e-3;
    AssumptionReport rep;
    rep.worst_margin = -std::numeric_limits<double>::infinity();
    for (const auto& p : trajectory) {
        AssumptionPoint a;
        a.t = p.t;
        try {
            const Vec z = newton_root(sp, p.x, p.t, p.z);
            const BlockEval b = sp.blocks(p.x, z, p.t, 0.0);
            a.hurwitz_margin = max_real_eig(b.B2);
            const Vec d = Eigen::ColPivHouseholderQR<Mat>(b.B2).matrixQR().diagonal().cwiseAbs();
            const double dmin = d.minCoeff();
            a.b2_cond = dmin > 0.0 ? d.maxCoeff() / dmin : std::numeric_limits<double>::infinity();
            a.sigma_z0_norm = b.sigma_z.norm();

            const Mat sa = sp.sigma_z(p.x, z, p.t, eps_a);
            const Mat sb = sp.sigma_z(p.x, z, p.t, eps_b);
            const Mat da = sa * sa.transpose() / eps_a;
            const Mat db = sb * sb.transpose() / eps_b;
            a.scaling_residual = (da - db).norm() / (1.0 + db.norm());

            a.pass = a.hurwitz_margin < kHurwitzMargin && a.b2_cond <= kCondLimit &&
                     a.sigma_z0_norm <= 1e-12 && a.scaling_residual <= 0.05;
            if (!a.pass) {
                if (!(a.hurwitz_margin < kHurwitzMargin)) a.note = "df_z/dz not Hurwitz";
                else if (!(a.b2_cond <= kCondLimit)) a.note = "B2 ill-conditioned";
                else if (!(a.sigma_z0_norm <= 1e-12)) a.note = "sigma_z nonzero at eps=0";
                else a.note = "sigma_z sigma_z^T / eps drifts with eps";
            }
        } catch (const LnaError& e) {
            a.pass = false;
            a.note = e.what();
            a.hurwitz_margin = std::numeric_limits<double>::quiet_NaN();
        }
        rep.worst_margin = std::isnan(a.hurwitz_margin)
                               ? rep.worst_margin
                               : std::max(rep.worst_margin, a.hurwitz_margin);
        rep.all_pass = rep.all_pass && a.pass;
        rep.points.push_back(std::move(a));
    }
    return rep;
}

} // namespace lnared
