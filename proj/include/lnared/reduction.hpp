#pragma once

#include "lnared/lna.hpp"

namespace lnared {

struct NewtonOptions {
    int max_iter = 100;
    int max_halvings = 50;      // damping by halving within one iteration
    double tol = 1e-12;         // accept when ||f_z||_inf < tol * (1 + ||z||_inf)
    double stall_tol = 1e-14;   // step below this without convergence = stagnation
};

struct StabilityReport {
    double max_real_part;
    bool is_hurwitz; // max real part < -1e-9
};

// Damped Newton for the quasi-steady-state root f_z(x, z, t, 0) = 0.
// Converged roots are checked for the Hurwitz property of df_z/dz; a stable
// residual-minimizing root on the wrong branch raises ConvergenceError rather
// than being returned silently.
Vec solve_gamma1(const SingularPerturbedLNA& sp, const Vec& x, double t, const Vec& z_guess,
                 const NewtonOptions& opt = {});

// Root solve without the Hurwitz gate; used by diagnostics that must report
// instability instead of throwing on it.
Vec newton_root(const SingularPerturbedLNA& sp, const Vec& x, double t, const Vec& z_guess,
                const NewtonOptions& opt = {});

// gamma2 = -B2^-1 B1 evaluated on the slow manifold (eps = 0). The solve uses
// column-pivoted QR; an estimated condition number beyond 1e12 raises
// SingularityError. Pass z_guess when no warm start is available (empty means
// start from zero).
Mat gamma2(const SingularPerturbedLNA& sp, const Vec& x, double t, const Vec& z_guess = Vec(),
           const NewtonOptions& opt = {});

// Eigenvalues of df_z/dz at the manifold point.
StabilityReport check_hurwitz(const SingularPerturbedLNA& sp, const Vec& x, double t,
                              const Vec& z_guess = Vec(), const NewtonOptions& opt = {});

// Reduced slow model: drift f_x(x, gamma1(x,t), t), fluctuation matrix
// Abar = A1 + A2 gamma2 and noise sigma_x(x, gamma1(x,t), t).
//
// gamma1 evaluations warm-start from the previous root, so an instance is a
// single-owner object; give each concurrent consumer its own copy.
class ReducedModel {
public:
    ReducedModel(SingularPerturbedLNA sp, Vec z0, NewtonOptions opt = {});

    Vec gamma1(const Vec& x, double t) const;
    Mat gamma2(const Vec& x, double t) const;
    Vec drift(const Vec& x, double t) const;
    Mat Abar(const Vec& x, double t) const;
    Mat sigma(const Vec& x, double t) const;

    // One fused evaluation per (x, t); this is what the moment RHS consumes.
    struct Eval {
        Vec z;     // gamma1
        Vec drift;
        Mat g2;
        Mat Abar;
        Mat sigma;
    };
    Eval eval(const Vec& x, double t) const;

    // Analytic manifold evaluator (x, t) -> z, available for models with a
    // closed-form root; when set it replaces the Newton solve.
    void set_closed_form_gamma1(std::function<Vec(const Vec&, double)> fn);
    bool has_closed_form() const { return static_cast<bool>(closed_form_); }

    const SingularPerturbedLNA& sp() const { return sp_; }
    int n_s() const { return sp_.n_s(); }
    int n_f() const { return sp_.n_f(); }
    int m_s() const { return sp_.m_s(); }

private:
    SingularPerturbedLNA sp_;
    std::function<Vec(const Vec&, double)> closed_form_;
    NewtonOptions opt_;
    mutable Vec z_warm_;
};

// Validates the reduction prerequisites at the initial point (sigma_z
// vanishes at eps = 0; gamma1 reachable from z0 with a Hurwitz Jacobian),
// then packages the reduced model with the initial root as warm start.
ReducedModel reduce(const SingularPerturbedLNA& sp, const Vec& x0, const Vec& z0, double t0 = 0.0,
                    const NewtonOptions& opt = {});

struct PathPoint {
    Vec x;
    Vec z;
    double t;
};

struct AssumptionPoint {
    double t = 0.0;
    double hurwitz_margin = 0.0;   // max Re eig of df_z/dz at the manifold
    double b2_cond = 0.0;
    double sigma_z0_norm = 0.0;    // ||sigma_z(x,z,t,0)||_F
    double scaling_residual = 0.0; // drift of sigma_z sigma_z^T / eps between two eps
    bool pass = false;
    std::string note; // failure detail, empty when pass
};

struct AssumptionReport {
    std::vector<AssumptionPoint> points;
    bool all_pass = true;
    double worst_margin = 0.0; // largest (least stable) hurwitz margin seen
};

// Pointwise validation along a trajectory. Reports rather than throws: a
// non-Hurwitz manifold or a nonvanishing sigma_z(.,0) marks the point failed.
// Uniformity in x and t is not certified, only the worst margin is reported.
AssumptionReport check_assumptions(const SingularPerturbedLNA& sp,
                                   const std::vector<PathPoint>& trajectory);

} // namespace lnared
