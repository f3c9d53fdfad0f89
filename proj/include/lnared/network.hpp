#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lnared/errors.hpp"

namespace lnared {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Scalar input signal, e.g. a kinase drive Z(t). Assumed piecewise-continuous;
// smoothness of the assembled drift is the caller's responsibility.
using TimeFn = std::function<double(double)>;

enum class Timescale { slow, fast };

// Macroscopic reaction rate a~(y, t) in concentration units. Fast reactions
// store the unscaled rate; the 1/epsilon factor is applied by the lna module
// so epsilon can be swept without rebuilding the network.
//
// Implementations must be pure: no hidden mutable state, safe for concurrent
// evaluation.
class RateLaw {
public:
    virtual ~RateLaw() = default;
    virtual double value(const Vec& y, double t) const = 0;
    virtual bool has_gradient() const { return false; }
    // d a~/dy. Only called when has_gradient() is true.
    virtual void gradient(const Vec& y, double t, Vec& g) const;
};

using RatePtr = std::shared_ptr<const RateLaw>;

// k * [input(t)] * prod_f (F(f,0) + sum_j F(f,j+1) * y_j).
// Covers every rate in the phosphorylation example; gradient is analytic.
class AffineProductRate final : public RateLaw {
public:
    AffineProductRate(double k, Mat factors, TimeFn input = nullptr);
    double value(const Vec& y, double t) const override;
    bool has_gradient() const override { return true; }
    void gradient(const Vec& y, double t, Vec& g) const override;

    double k() const { return k_; }
    const Mat& factors() const { return factors_; }

private:
    double k_;
    Mat factors_; // one row per factor, column 0 is the constant term
    TimeFn input_;
};

// k * prod_j y_j^order_j with nonnegative integer orders.
class MassActionRate final : public RateLaw {
public:
    MassActionRate(double k, std::vector<int> orders);
    double value(const Vec& y, double t) const override;
    bool has_gradient() const override { return true; }
    void gradient(const Vec& y, double t, Vec& g) const override;

private:
    double k_;
    std::vector<int> orders_;
};

// Arbitrary callable; gradient falls back to central finite differences.
class GenericRate final : public RateLaw {
public:
    explicit GenericRate(std::function<double(const Vec&, double)> fn)
        : fn_(std::move(fn)) {}
    double value(const Vec& y, double t) const override { return fn_(y, t); }

private:
    std::function<double(const Vec&, double)> fn_;
};

// Analytic gradient when the form supports it, otherwise central differences
// with step h = sqrt(machine eps) * max(1, |y_j|).
void rate_gradient(const RateLaw& rate, const Vec& y, double t, Vec& g);

struct Reaction {
    std::string name;
    Vec stoich;          // state change per firing, length n
    Timescale timescale; // fast rates are stored unscaled
    RatePtr rate;
};

struct ReactionNetwork {
    std::vector<std::string> species_names;
    std::vector<Reaction> reactions;
    double volume = 1.0; // Omega; kept for the count/concentration correspondence
    double epsilon = 0.1;

    int n() const { return static_cast<int>(species_names.size()); }
    int m() const { return static_cast<int>(reactions.size()); }
    int m_slow() const;
    int m_fast() const;
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_network(const ReactionNetwork& net);

// Phosphorylation example (kinase Z, phosphatase Y, promoter binding,
// downstream expression). All parameters default to the reference simulation
// values. Conservation X_tot = X + X* + C and p_tot = p + C is already folded
// into the rates, so the state is y = (x*, c, g).
struct PhosphoParams {
    double k1 = 0.01;
    double k2 = 0.01;
    double kd = 100.0;
    double beta = 0.1;
    double delta = 0.1;
    double X_tot = 200.0;
    double Y = 20.0;
    double p_tot = 100.0;
    TimeFn Z; // defaults to constant 1
    double epsilon = 0.1;
};

// Six reactions: phosphorylation, dephosphorylation (slow); promoter
// binding/unbinding (fast, unscaled); production, decay (slow).
ReactionNetwork build_example_phospho(const PhosphoParams& p);

// Quasi-steady-state complex concentration for the example,
// c(v) = (1/2)(v + p_tot + kd) - (1/2)sqrt((v + p_tot + kd)^2 - 4 v p_tot),
// evaluated in the cancellation-free conjugate form. Valid branch satisfies
// 0 <= c <= p_tot and c <= v.
double phospho_cbar(double v, const PhosphoParams& p);

// Fluctuation projection for the example: psi_c = coeff * psi_v on the slow
// manifold, coeff = (p_tot - c) / (v + p_tot - 2c + kd).
double phospho_gamma2_scalar(double v, const PhosphoParams& p);

} // namespace lnared
