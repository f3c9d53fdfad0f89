#pragma once

#include <memory>
#include <utility>

#include "lnared/network.hpp"

namespace lnared {

// Fluctuation dynamics about the deterministic trajectory:
//   dy/dt   = f(y, t)
//   dxi/dt  = A(y, t) xi + sigma(y, t) Gamma
// with f = sum_i v_i a~_i, A = df/dy and sigma column i = v_i sqrt(a~_i).
// Fast rates enter scaled by 1/epsilon (taken from the network).
//
// Rate values in [-1e-12, 0) are treated as roundoff and clamped to zero;
// anything more negative raises DomainError with the offending state.
class LnaModel {
public:
    explicit LnaModel(std::shared_ptr<const ReactionNetwork> net);

    Vec drift(const Vec& y, double t) const;
    Mat jacobian(const Vec& y, double t) const;
    Mat diffusion(const Vec& y, double t) const; // n x m, columns in network reaction order

    const ReactionNetwork& network() const { return *net_; }

private:
    std::shared_ptr<const ReactionNetwork> net_;
};

LnaModel assemble_lna(const ReactionNetwork& net);

// Linear change of coordinates x = A_x y, z = A_z y separating slow and fast
// variables. Stacked [A_x; A_z] must be invertible and A_x v_i = 0 must hold
// for every fast reaction (that is what removes the 1/epsilon terms from the
// slow equation).
struct TransformMatrices {
    Mat A_x; // n_s x n
    Mat A_z; // n_f x n
    std::vector<std::string> x_names; // optional slow coordinate names
    std::vector<std::string> z_names; // optional fast coordinate names

    Mat stacked() const;
};

// One-point evaluation of every block of the singularly perturbed system:
//   dx/dt          = f_x(x, z, t)
//   eps dz/dt      = f_z(x, z, t, eps)
//   dpsi_x/dt      = A1 psi_x + A2 psi_z + sigma_x Gamma_x
//   eps dpsi_z/dt  = B1 psi_x + B2 psi_z + sigma_z Gamma_z
// Gamma_z stacks the slow channels first, so sigma_z has m_s + m_f columns:
// slow columns carry a factor eps, fast columns a factor sqrt(eps).
struct BlockEval {
    Vec f_x, f_z;
    Mat A1, A2, B1, B2;
    Mat sigma_x; // n_s x m_s
    Mat sigma_z; // n_f x (m_s + m_f)
};

// Raw evaluators for building synthetic systems directly (tests, toy models).
// Unset entries default to zero results of the right shape.
struct SpEvaluators {
    std::function<Vec(const Vec&, const Vec&, double)> f_x;
    std::function<Vec(const Vec&, const Vec&, double, double)> f_z;
    std::function<Mat(const Vec&, const Vec&, double)> A1, A2, sigma_x;
    std::function<Mat(const Vec&, const Vec&, double, double)> B1, B2, sigma_z;
};

class SingularPerturbedLNA {
public:
    SingularPerturbedLNA(SpEvaluators ev, int n_s, int n_f, int m_s, int m_f, double epsilon);

    int n_s() const { return n_s_; }
    int n_f() const { return n_f_; }
    int m_s() const { return m_s_; }
    int m_f() const { return m_f_; }

    // Default epsilon used by the no-argument overloads; individual calls may
    // override it, so one instance serves a whole epsilon sweep.
    double epsilon() const { return epsilon_; }
    void set_epsilon(double eps);

    Vec f_x(const Vec& x, const Vec& z, double t) const;
    Vec f_z(const Vec& x, const Vec& z, double t, double eps) const;
    // Root-solver forms: no propensity domain checks. Newton trial iterates
    // may leave the physical region, and every propensity enters these two
    // blocks linearly, so the algebra stays well defined there.
    Vec f_z_raw(const Vec& x, const Vec& z, double t, double eps) const;
    Mat B2_raw(const Vec& x, const Vec& z, double t, double eps) const;
    Mat A1(const Vec& x, const Vec& z, double t) const;
    Mat A2(const Vec& x, const Vec& z, double t) const;
    Mat B1(const Vec& x, const Vec& z, double t, double eps) const;
    Mat B2(const Vec& x, const Vec& z, double t, double eps) const;
    Mat sigma_x(const Vec& x, const Vec& z, double t) const;
    Mat sigma_z(const Vec& x, const Vec& z, double t, double eps) const;

    BlockEval blocks(const Vec& x, const Vec& z, double t, double eps) const;
    BlockEval blocks(const Vec& x, const Vec& z, double t) const {
        return blocks(x, z, t, epsilon_);
    }

    // Round trip with the original coordinates; identity when the instance was
    // built from raw evaluators.
    Vec to_original(const Vec& x, const Vec& z) const;           // y = A^-1 [x; z]
    std::pair<Vec, Vec> from_original(const Vec& y) const;       // (A_x y, A_z y)
    const Mat& inverse_transform() const { return A_inv_; }
    double transform_cond() const { return cond_; }

private:
    friend SingularPerturbedLNA transform_to_sp(const LnaModel&, const TransformMatrices&,
                                                const ReactionNetwork&);
    struct NetworkData;

    SpEvaluators ev_;
    std::shared_ptr<const NetworkData> netdata_; // fused fast path when network-backed
    int n_s_, n_f_, m_s_, m_f_;
    double epsilon_;
    Mat A_inv_;
    Mat A_x_, A_z_;
    double cond_ = 1.0;
};

// Applies the coordinate change and packages the block evaluators. Checks the
// condition number of [A_x; A_z] (> 1e12 raises TransformError) and the
// structural requirement A_x v_i = 0 for fast reactions (ValidationError
// naming the reaction). The slow equation is assembled from slow reactions
// only, so epsilon cancellation is exact by construction, never numeric.
SingularPerturbedLNA transform_to_sp(const LnaModel& lna, const TransformMatrices& tm,
                                     const ReactionNetwork& net);

inline BlockEval sp_blocks(const SingularPerturbedLNA& sp, const Vec& x, const Vec& z,
                           double t, double eps) {
    return sp.blocks(x, z, t, eps);
}

// Transform for the phosphorylation example: v = x* + c, g stays, c is fast.
TransformMatrices phospho_transform();

} // namespace lnared
