#include "lnared/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

#include "lnared/errors.hpp"

namespace lnared {

namespace {

void check_same_grid(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw ValidationError("trajectories are sampled on different grids");
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a[i] - b[i]) > 1e-9 * std::max(1.0, std::abs(a[i]))) {
            throw ValidationError("trajectories are sampled on different grids");
        }
    }
}

} // namespace

MomentErrors moment_error(const OriginalMomentTrajectory& orig,
                          const ReducedMomentTrajectory& red) {
    check_same_grid(orig.t, red.t);
    if (orig.t.empty()) throw ValidationError("cannot compare empty trajectories");
    MomentErrors e{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < orig.t.size(); ++i) {
        const auto& o = orig.states[i];
        const auto& r = red.states[i];
        e.e_x = std::max(e.e_x, (o.x - r.xbar).norm());
        e.e_m = std::max(e.e_m, (o.m_x - r.m_x).norm());
        e.e_M = std::max(e.e_M, (o.M_xx - r.M_xx).norm());
    }
    return e;
}

SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.size() < 2) {
        throw ValidationError("slope fit needs at least two (eps, error) pairs");
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& [eps, err] : pairs) {
        if (!(eps > 0.0)) throw ValidationError("eps values must be positive");
        if (err == 0.0) {
            throw ValidationError(
                "error is exactly zero: the quantity does not depend on eps, no slope to fit");
        }
        if (!(err > 0.0)) throw ValidationError("errors must be positive for a log-log fit");
        const double lx = std::log(eps);
        const double ly = std::log(err);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = static_cast<double>(pairs.size());
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-14 * std::max(1.0, n * sxx)) {
        throw ValidationError("eps values are too close together to fit a slope");
    }
    SlopeFit fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    for (const auto& [eps, err] : pairs) {
        const double resid = std::log(err) - (fit.intercept + fit.slope * std::log(eps));
        fit.max_residual = std::max(fit.max_residual, std::abs(resid));
    }
    return fit;
}

namespace {

SlopeFit fit_family(const std::vector<SweepPoint>& pts, double MomentErrors::*field) {
    bool all_zero = true;
    for (const auto& p : pts) all_zero = all_zero && p.err.*field == 0.0;
    if (all_zero) {
        SlopeFit fit;
        fit.degenerate = true;
        return fit;
    }
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(pts.size());
    for (const auto& p : pts) pairs.emplace_back(p.eps, p.err.*field);
    return fit_loglog_slope(pairs);
}

} // namespace

SweepResult epsilon_sweep(const SingularPerturbedLNA& sp, const std::vector<double>& eps_list,
                          const SweepSetup& setup) {
    if (eps_list.size() < 2) {
        throw ValidationError("an eps sweep needs at least two eps values");
    }
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (!(eps_list[i] > 0.0)) throw ValidationError("eps values must be positive");
        if (i > 0 && eps_list[i] >= eps_list[i - 1]) {
            throw ValidationError("eps values must be strictly decreasing");
        }
    }
    if (!(setup.t1 > setup.t0)) throw ValidationError("sweep span must be forward in time");

    SweepResult result;
    result.t_grid = setup.t_grid;
    if (result.t_grid.empty()) {
        result.t_grid.resize(201);
        for (int i = 0; i < 201; ++i) {
            result.t_grid[i] = setup.t0 + (setup.t1 - setup.t0) * static_cast<double>(i) / 200.0;
        }
        result.t_grid.back() = setup.t1;
    }

    // The reduced system does not depend on eps: integrate it once.
    const ReducedModel red = reduce(sp, setup.x0, setup.z0, setup.t0, setup.newton);
    const auto red_init = ReducedMomentState::deterministic(setup.x0, setup.psi_x0);
    const auto red_traj =
        integrate_reduced_moments(red, red_init, setup.t0, setup.t1, result.t_grid, setup.integ);

    const auto orig_init =
        OriginalMomentState::deterministic(setup.x0, setup.z0, setup.psi_x0, setup.psi_z0);
    result.points.reserve(eps_list.size());
    for (const double eps : eps_list) {
        try {
            const auto orig_traj = integrate_original_moments(sp, orig_init, setup.t0, setup.t1,
                                                              result.t_grid, eps, setup.integ);
            result.points.push_back({eps, moment_error(orig_traj, red_traj)});
        } catch (const LnaError& e) {
            throw LnaError(e.kind(),
                           "sweep failed at eps = " + std::to_string(eps) + ": " + e.what());
        }
    }

    result.fit_x = fit_family(result.points, &MomentErrors::e_x);
    result.fit_m = fit_family(result.points, &MomentErrors::e_m);
    result.fit_M = fit_family(result.points, &MomentErrors::e_M);
    return result;
}

namespace {

// Symmetric PSD square root; eigenvalues below the roundoff floor are an
// error, those in [-floor, 0) clamp to zero.
Mat psd_sqrt(const Mat& C, const char* which) {
    const Mat S = 0.5 * (C + C.transpose());
    const Eigen::SelfAdjointEigenSolver<Mat> es(S);
    if (es.info() != Eigen::Success) {
        throw SingularityError(std::string("eigendecomposition failed for ") + which, 0.0);
    }
    const Vec& ev = es.eigenvalues();
    const double floor = 1e-9 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    Vec clamped(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] < -floor) {
            throw ValidationError(std::string(which) +
                                  " is not positive semidefinite (eigenvalue " +
                                  std::to_string(ev[i]) + ")");
        }
        clamped[i] = std::sqrt(std::max(0.0, ev[i]));
    }
    return es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace

double gaussian_distance(const Vec& m1, const Mat& M1, const Vec& m2, const Mat& M2) {
    if (m1.size() != m2.size() || M1.rows() != m1.size() || M2.rows() != m2.size() ||
        M1.rows() != M1.cols() || M2.rows() != M2.cols()) {
        throw ValidationError("moment dimensions do not match");
    }
    const Mat C1 = M1 - m1 * m1.transpose();
    const Mat C2 = M2 - m2 * m2.transpose();
    const Mat S2 = psd_sqrt(C2, "the second covariance");
    // tr((C2^1/2 C1 C2^1/2)^1/2) via the eigenvalues of the inner product.
    const Mat inner = S2 * (0.5 * (C1 + C1.transpose())) * S2;
    const Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (inner + inner.transpose()));
    if (es.info() != Eigen::Success) {
        throw SingularityError("eigendecomposition failed for the cross term", 0.0);
    }
    // C1 must be PSD too; check it directly so the error names the right input.
    psd_sqrt(C1, "the first covariance");
    double cross = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        cross += std::sqrt(std::max(0.0, es.eigenvalues()[i]));
    }
    const double d2 =
        (m1 - m2).squaredNorm() + C1.trace() + C2.trace() - 2.0 * cross;
    return std::sqrt(std::max(0.0, d2));
}

} // namespace lnared
