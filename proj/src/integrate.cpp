#include "lnared/integrate.hpp"

#include <algorithm>
#include <cmath>

namespace lnared {

namespace {

// Dormand-Prince RK5(4)7M coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
// Difference between the 5th and embedded 4th order weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

double scaled_rms(const Vec& err, const Vec& y0, const Vec& y1, double rtol, double atol) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double q = err[i] / sc;
        acc += q * q;
    }
    return std::sqrt(acc / static_cast<double>(err.size()));
}

double initial_step(const RhsFn& rhs, double t0, const Vec& y0, const Vec& f0, double t1,
                    double rtol, double atol) {
    const auto norm = [&](const Vec& v, const Vec& ref) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double sc = atol + rtol * std::abs(ref[i]);
            acc += (v[i] / sc) * (v[i] / sc);
        }
        return std::sqrt(acc / static_cast<double>(v.size()));
    };
    const double span = t1 - t0;
    const double d0 = norm(y0, y0);
    const double d1 = norm(f0, y0);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);

    Vec y1 = y0 + h0 * f0;
    Vec f1(y0.size());
    rhs(t0 + h0, y1, f1);
    const double d2 = norm(f1 - f0, y0) / h0;

    double h1;
    if (std::max(d1, d2) <= 1e-15) {
        h1 = std::max(1e-6, h0 * 1e-3);
    } else {
        h1 = std::pow(0.01 / std::max(d1, d2), 0.2);
    }
    return std::min({100.0 * h0, h1, span});
}

} // namespace

Trajectory integrate(const RhsFn& rhs, const Vec& y0, double t0, double t1,
                     const std::vector<double>& t_out, const IntegrateOptions& opt,
                     const std::function<void(Vec&)>& post_accept) {
    if (!(opt.rtol > 0.0) || !(opt.atol > 0.0)) {
        throw ConfigError("integrator tolerances must be positive");
    }
    if (!(t1 > t0)) throw ConfigError("integration span must be forward in time");
    for (size_t i = 0; i < t_out.size(); ++i) {
        if (t_out[i] < t0 || t_out[i] > t1 || (i > 0 && t_out[i] <= t_out[i - 1])) {
            throw ConfigError("output times must be strictly increasing inside the span");
        }
    }

    const double span = t1 - t0;
    const double h_min = 1e-14 * span;
    const Eigen::Index n = y0.size();

    Trajectory traj;
    traj.t.reserve(t_out.size());
    traj.y.reserve(t_out.size());

    Vec y = y0;
    double t = t0;
    size_t next_out = 0;
    if (next_out < t_out.size() && t_out[next_out] == t0) {
        traj.t.push_back(t0);
        traj.y.push_back(y);
        ++next_out;
    }

    Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);
    rhs(t, y, k1);

    double h_ctrl = initial_step(rhs, t0, y, k1, t1, opt.rtol, opt.atol);
    double facold = 1e-4;
    constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;
    constexpr double fac_min = 0.2, fac_max = 10.0;

    while (t < t1) {
        if (h_ctrl < h_min) {
            throw StiffnessError(
                "step size underflow; the problem is too stiff at this tolerance "
                "(reduce the epsilon coupling or loosen rtol)",
                t, h_ctrl);
        }
        // Land exactly on the next requested output time (or the endpoint).
        const double t_target = next_out < t_out.size() ? std::min(t_out[next_out], t1) : t1;
        double h = h_ctrl;
        bool clipped = false;
        if (t + h >= t_target) {
            h = t_target - t;
            clipped = true;
        }

        ytmp = y + h * (a21 * k1);
        rhs(t + c2 * h, ytmp, k2);
        ytmp = y + h * (a31 * k1 + a32 * k2);
        rhs(t + c3 * h, ytmp, k3);
        ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs(t + c4 * h, ytmp, k4);
        ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(t + c5 * h, ytmp, k5);
        ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rhs(t + h, ytmp, k6);
        ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        rhs(t + h, ynew, k7);
        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        const double errn = scaled_rms(err, y, ynew, opt.rtol, opt.atol);
        const double fac11 = std::pow(std::max(errn, 1e-32), expo1);
        if (errn <= 1.0) {
            t = clipped ? t_target : t + h;
            y = ynew;
            if (post_accept) {
                post_accept(y);
                rhs(t, y, k1); // state may have moved; refresh the FSAL stage
            } else {
                k1 = k7;
            }
            if (next_out < t_out.size() && t == t_out[next_out]) {
                traj.t.push_back(t);
                traj.y.push_back(y);
                ++next_out;
            }
            const double fac =
                std::clamp(fac11 / (std::pow(facold, beta) * safe), 1.0 / fac_max, 1.0 / fac_min);
            h_ctrl = h / fac;
            facold = std::max(errn, 1e-4);
        } else {
            h_ctrl = h / std::min(1.0 / fac_min, fac11 / safe);
        }
    }
    return traj;
}

} // namespace lnared
