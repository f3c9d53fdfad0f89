#pragma once

#include <utility>
#include <vector>

#include "lnared/moments.hpp"

namespace lnared {

struct MomentErrors {
    double e_x; // sup_t ||x - xbar||_2
    double e_m; // sup_t ||E[psi_x] - E[psibar_x]||_2
    double e_M; // sup_t ||E[psi_x psi_x^T] - E[psibar_x psibar_x^T]||_F
};

// Sup-over-grid slow-block differences. Both trajectories must be sampled on
// the same grid.
MomentErrors moment_error(const OriginalMomentTrajectory& orig,
                          const ReducedMomentTrajectory& red);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;    // in ln-error space
    double max_residual = 0.0; // max |ln e - (intercept + slope ln eps)|
    bool degenerate = false;   // every error exactly zero: no eps dependence to fit
};

// Least squares on (ln eps, ln e). Nonpositive errors are rejected: a negative
// one is a bug upstream, an exactly-zero one means the quantity does not
// depend on eps at all and is reported as degenerate by epsilon_sweep instead.
SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& pairs);

struct SweepPoint {
    double eps;
    MomentErrors err;
};

struct SweepResult {
    std::vector<SweepPoint> points; // eps strictly decreasing
    SlopeFit fit_x, fit_m, fit_M;
    std::vector<double> t_grid;
};

struct SweepSetup {
    Vec x0, z0;         // deterministic initial state (z0 also seeds the Newton solve)
    Vec psi_x0, psi_z0; // initial fluctuation means; second moments are outer products
    double t0 = 0.0;
    double t1 = 50.0;
    std::vector<double> t_grid; // empty = 201 uniform points on [t0, t1]
    IntegrateOptions integ;
    NewtonOptions newton;
};

// Integrates the reduced moments once and the original moments per eps, then
// fits the decay of each error family. eps_list must be strictly decreasing
// with at least two entries.
SweepResult epsilon_sweep(const SingularPerturbedLNA& sp, const std::vector<double>& eps_list,
                          const SweepSetup& setup);

// 2-Wasserstein distance between the Gaussians N(m1, M1 - m1 m1^T) and
// N(m2, M2 - m2 m2^T), the natural metric for convergence in distribution of
// the fluctuation laws. Covariances must be PSD up to roundoff (eigenvalues
// >= -1e-9 * max(1, ||C||)); small negatives are clamped to zero.
double gaussian_distance(const Vec& m1, const Mat& M1, const Vec& m2, const Mat& M2);

} // namespace lnared
