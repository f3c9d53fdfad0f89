#pragma once

#include "lnared/integrate.hpp"
#include "lnared/reduction.hpp"

namespace lnared {

// State and first/second fluctuation moments of the full system. In the
// original coordinates the fast equations carry 1/eps (and the fast-fast
// diffusion 1/eps^2), so trajectories stiffen as eps shrinks.
struct OriginalMomentState {
    Vec x;    // slow deterministic state
    Vec z;    // fast deterministic state
    Vec m_x;  // E[psi_x]
    Vec m_z;  // E[psi_z]
    Mat M_xx; // E[psi_x psi_x^T]
    Mat M_zx; // E[psi_z psi_x^T]
    Mat M_zz; // E[psi_z psi_z^T]

    static OriginalMomentState zero(int n_s, int n_f);
    // Deterministic initial fluctuations: second moments are the outer
    // products of the first ones.
    static OriginalMomentState deterministic(Vec x0, Vec z0, Vec psi_x0, Vec psi_z0);
};

struct ReducedMomentState {
    Vec xbar;
    Vec m_x;  // E[psibar_x]
    Mat M_xx; // E[psibar_x psibar_x^T]

    static ReducedMomentState zero(int n_s);
    static ReducedMomentState deterministic(Vec x0, Vec psi_x0);
};

// Time derivative of every field at (s, t) for the given eps. The fast-block
// equations are the eps-divided forms, ready for a plain explicit integrator.
void original_moment_rhs(const SingularPerturbedLNA& sp, const OriginalMomentState& s, double t,
                         double eps, OriginalMomentState& ds);

void reduced_moment_rhs(const ReducedModel& red, const ReducedMomentState& s, double t,
                        ReducedMomentState& ds);

// Executable consistency check: evaluate the slow components of the original
// moment RHS on the slow manifold (z = gamma1, m_z = gamma2 m_x,
// M_zx = gamma2 M_xx) and compare with the reduced RHS. Returns the max
// absolute entry difference across (dx, dm_x, dM_xx).
double qss_consistency_residual(const SingularPerturbedLNA& sp, const ReducedModel& red,
                                const Vec& x, double t, const Vec& m_x, const Mat& M_xx);

struct OriginalMomentTrajectory {
    std::vector<double> t;
    std::vector<OriginalMomentState> states;
};

struct ReducedMomentTrajectory {
    std::vector<double> t;
    std::vector<ReducedMomentState> states;
};

// Adaptive integration with per-step re-symmetrization of M_xx / M_zz.
// eps overrides the model default, so one SingularPerturbedLNA serves a sweep.
OriginalMomentTrajectory integrate_original_moments(const SingularPerturbedLNA& sp,
                                                    const OriginalMomentState& init, double t0,
                                                    double t1, const std::vector<double>& t_out,
                                                    double eps, const IntegrateOptions& opt = {});

ReducedMomentTrajectory integrate_reduced_moments(const ReducedModel& red,
                                                  const ReducedMomentState& init, double t0,
                                                  double t1, const std::vector<double>& t_out,
                                                  const IntegrateOptions& opt = {});

// Flat packing used by the integrator (also handy for tests).
Vec pack_original(const OriginalMomentState& s);
OriginalMomentState unpack_original(const Vec& v, int n_s, int n_f);
Vec pack_reduced(const ReducedMomentState& s);
ReducedMomentState unpack_reduced(const Vec& v, int n_s);

} // namespace lnared
