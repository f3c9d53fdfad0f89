#pragma once

#include <functional>
#include <vector>

#include "lnared/network.hpp"

namespace lnared {

// rhs(t, y, dydt); dydt is preallocated to y.size().
using RhsFn = std::function<void(double, const Vec&, Vec&)>;

struct IntegrateOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
};

struct Trajectory {
    std::vector<double> t;
    std::vector<Vec> y;
};

// Explicit embedded Runge-Kutta 5(4) (Dormand-Prince) with PI step-size
// control. Per-step error is held below atol + rtol * |y| in an RMS-scaled
// norm. Steps are clipped to land exactly on the requested output times, so
// reported values are accepted states, not interpolants.
//
// post_accept, when provided, may adjust the state after each accepted step
// (used to re-symmetrize second-moment blocks).
//
// Throws StiffnessError when the controller drives the step below
// 1e-14 * (t1 - t0).
Trajectory integrate(const RhsFn& rhs, const Vec& y0, double t0, double t1,
                     const std::vector<double>& t_out, const IntegrateOptions& opt = {},
                     const std::function<void(Vec&)>& post_accept = nullptr);

} // namespace lnared
