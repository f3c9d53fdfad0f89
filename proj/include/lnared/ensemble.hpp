#pragma once

#include <cstdint>
#include <vector>

#include "lnared/integrate.hpp"
#include "lnared/reduction.hpp"

namespace lnared {

struct EnsembleConfig {
    std::size_t n_realizations = 100000;
    double dt = 1e-3;
    std::vector<double> t_grid;   // must lie on the step grid t0 + k*dt
    std::uint64_t master_seed = 0;
    int n_threads = 0;            // 0 = hardware concurrency; never changes the numbers
};

// Deterministic trajectory sampled at every Euler-Maruyama step time. The
// fluctuation equations are linear given (x, z, t), so freezing coefficients
// along this path is exact in distribution.
struct DeterministicPath {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<Vec> x;           // one entry per node
    std::vector<Vec> z;           // empty for reduced-model paths

    std::size_t nodes() const { return x.size(); }
    double t_at(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
    Vec x_at(double t) const;     // linear interpolation, clamped to the span
    Vec z_at(double t) const;
};

DeterministicPath compute_path(const SingularPerturbedLNA& sp, const Vec& x0, const Vec& z0,
                               double t0, double t1, double dt, double eps,
                               const IntegrateOptions& opt = {});
DeterministicPath compute_path(const ReducedModel& red, const Vec& x0, double t0, double t1,
                               double dt, const IntegrateOptions& opt = {});

// Per-step update matrices P_k = I + dt*M(t_k) and G_k = sqrt(dt)*Sigma(t_k),
// precomputed once and shared by every realization. Column-major blocks.
struct CoefficientTables {
    int n = 0;                    // state dimension
    int m = 0;                    // noise channels
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<double> P;        // steps() blocks of n*n
    std::vector<double> G;        // steps() blocks of n*m

    std::size_t steps() const { return n > 0 ? P.size() / (static_cast<std::size_t>(n) * n) : 0; }
};

// Original fluctuation system in (psi_x, psi_z): drift [[A1, A2], [B1, B2]/eps],
// noise [[sigma_x, 0], [sigma_z/eps]] with the slow channels shared.
CoefficientTables build_tables(const SingularPerturbedLNA& sp, const DeterministicPath& path,
                               double eps);
// Reduced system in psi_x: drift Abar, noise sigma, slow channels only.
CoefficientTables build_tables(const ReducedModel& red, const DeterministicPath& path);

struct EnsembleStats {
    std::vector<double> t;
    std::size_t n_realizations = 0;
    std::vector<Vec> mean;        // E[psi]
    std::vector<Mat> second;      // E[psi psi^T]
    std::vector<Mat> fourth;      // E[(psi_i psi_j)^2], feeds the second-moment SEs
    std::vector<Vec> mean_se;
    std::vector<Mat> second_se;
};

// One explicit Euler-Maruyama update: psi + drift*dt + noise*sqrt(dt)*draws.
// The production path uses the folded tables instead; this is the reference
// form the tables are tested against.
Vec em_step(const Vec& psi, const Vec& drift, const Mat& noise, double dt, const Vec& draws,
            long long step = -1);

// Fills mean_se / second_se from the stored moment estimates (unbiased sample
// variances over n_realizations >= 2).
void standard_errors(EnsembleStats& stats);

// Core Monte Carlo loop over precomputed tables. Realization r draws from the
// counter-based substream (master_seed, r, step, channel block); partial sums
// are accumulated per 4096-realization block and merged in ascending block
// order with compensated summation, so results are bit-identical for any
// n_threads.
EnsembleStats simulate_ensemble(const CoefficientTables& tab, const Vec& psi0,
                                const EnsembleConfig& cfg);

EnsembleStats simulate_ensemble(const SingularPerturbedLNA& sp, const DeterministicPath& path,
                                double eps, const Vec& psi_x0, const Vec& psi_z0,
                                const EnsembleConfig& cfg);
EnsembleStats simulate_ensemble(const ReducedModel& red, const DeterministicPath& path,
                                const Vec& psi_x0, const EnsembleConfig& cfg);

} // namespace lnared
