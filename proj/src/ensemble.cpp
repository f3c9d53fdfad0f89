#include "lnared/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>
#include <thread>

#include "lnared/errors.hpp"
#include "lnared/rng.hpp"

namespace lnared {

namespace {

constexpr std::size_t kBlockRealizations = 4096;

// Neumaier variant of Kahan summation; order-sensitive but exact enough that
// the ascending-block merge is reproducible and accurate for N up to 1e6.
struct CompensatedSum {
    double s = 0.0, c = 0.0;
    void add(double x) {
        const double t = s + x;
        c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
        s = t;
    }
    double value() const { return s + c; }
};

long long node_of(double t, double t0, double dt, std::size_t max_node, const char* what) {
    const long long k = std::llround((t - t0) / dt);
    const double snapped = t0 + static_cast<double>(k) * dt;
    if (k < 0 || static_cast<std::size_t>(k) > max_node ||
        std::abs(snapped - t) > 1e-9 * std::max(1.0, std::abs(t))) {
        throw ValidationError(std::string(what) + " time " + std::to_string(t) +
                              " does not lie on the step grid (dt = " + std::to_string(dt) + ")");
    }
    return k;
}

} // namespace

Vec DeterministicPath::x_at(double t) const {
    const double rel = std::clamp((t - t0) / dt, 0.0, static_cast<double>(nodes() - 1));
    const auto k = std::min(static_cast<std::size_t>(rel), nodes() - 2);
    const double a = std::clamp(rel - static_cast<double>(k), 0.0, 1.0);
    return (1.0 - a) * x[k] + a * x[k + 1];
}

Vec DeterministicPath::z_at(double t) const {
    const double rel = std::clamp((t - t0) / dt, 0.0, static_cast<double>(z.size() - 1));
    const auto k = std::min(static_cast<std::size_t>(rel), z.size() - 2);
    const double a = std::clamp(rel - static_cast<double>(k), 0.0, 1.0);
    return (1.0 - a) * z[k] + a * z[k + 1];
}

namespace {

std::vector<double> node_times(double t0, double t1, double dt, std::size_t& n_steps) {
    if (!(dt > 0.0)) throw ValidationError("path step must be positive");
    if (!(t1 > t0)) throw ValidationError("path span must be forward in time");
    const long long k = std::llround((t1 - t0) / dt);
    if (k < 1 || std::abs(t0 + static_cast<double>(k) * dt - t1) > 1e-9 * std::max(1.0, std::abs(t1))) {
        throw ValidationError("path span is not a whole number of steps");
    }
    n_steps = static_cast<std::size_t>(k);
    std::vector<double> ts(n_steps + 1);
    for (std::size_t i = 0; i < n_steps; ++i) ts[i] = t0 + static_cast<double>(i) * dt;
    ts[n_steps] = t1;
    return ts;
}

} // namespace

DeterministicPath compute_path(const SingularPerturbedLNA& sp, const Vec& x0, const Vec& z0,
                               double t0, double t1, double dt, double eps,
                               const IntegrateOptions& opt) {
    const int ns = sp.n_s(), nf = sp.n_f();
    if (x0.size() != ns || z0.size() != nf) {
        throw ValidationError("initial state does not match the model dimensions");
    }
    std::size_t n_steps = 0;
    const auto ts = node_times(t0, t1, dt, n_steps);

    Vec y0(ns + nf);
    y0 << x0, z0;
    const auto rhs = [&](double t, const Vec& y, Vec& dy) {
        const Vec x = y.head(ns);
        const Vec z = y.tail(nf);
        dy.head(ns) = sp.f_x(x, z, t);
        dy.tail(nf) = sp.f_z(x, z, t, eps) / eps;
    };
    const auto traj = integrate(rhs, y0, t0, t1, ts, opt);

    DeterministicPath path;
    path.t0 = t0;
    path.dt = dt;
    path.x.reserve(traj.y.size());
    path.z.reserve(traj.y.size());
    for (const auto& y : traj.y) {
        path.x.push_back(y.head(ns));
        path.z.push_back(y.tail(nf));
    }
    return path;
}

DeterministicPath compute_path(const ReducedModel& red, const Vec& x0, double t0, double t1,
                               double dt, const IntegrateOptions& opt) {
    if (x0.size() != red.n_s()) {
        throw ValidationError("initial state does not match the reduced model dimension");
    }
    std::size_t n_steps = 0;
    const auto ts = node_times(t0, t1, dt, n_steps);
    const auto rhs = [&](double t, const Vec& y, Vec& dy) { dy = red.drift(y, t); };
    const auto traj = integrate(rhs, x0, t0, t1, ts, opt);

    DeterministicPath path;
    path.t0 = t0;
    path.dt = dt;
    path.x = traj.y;
    return path;
}

CoefficientTables build_tables(const SingularPerturbedLNA& sp, const DeterministicPath& path,
                               double eps) {
    if (path.nodes() < 2 || path.z.size() != path.nodes()) {
        throw ValidationError("deterministic path lacks fast-block samples");
    }
    if (!(eps > 0.0)) throw ValidationError("epsilon must be positive");
    const int ns = sp.n_s(), nf = sp.n_f(), ms = sp.m_s(), mf = sp.m_f();
    const int n = ns + nf, m = ms + mf;
    const std::size_t steps = path.nodes() - 1;
    const double sdt = std::sqrt(path.dt);

    CoefficientTables tab;
    tab.n = n;
    tab.m = m;
    tab.t0 = path.t0;
    tab.dt = path.dt;
    tab.P.resize(steps * static_cast<std::size_t>(n) * n);
    tab.G.resize(steps * static_cast<std::size_t>(n) * m);
    for (std::size_t k = 0; k < steps; ++k) {
        const auto b = sp.blocks(path.x[k], path.z[k], path.t_at(k), eps);
        Eigen::Map<Mat> P(tab.P.data() + k * n * n, n, n);
        Eigen::Map<Mat> G(tab.G.data() + k * n * m, n, m);
        P.topLeftCorner(ns, ns) = path.dt * b.A1;
        P.topRightCorner(ns, nf) = path.dt * b.A2;
        P.bottomLeftCorner(nf, ns) = (path.dt / eps) * b.B1;
        P.bottomRightCorner(nf, nf) = (path.dt / eps) * b.B2;
        P.diagonal().array() += 1.0;
        G.topLeftCorner(ns, ms) = sdt * b.sigma_x;
        G.topRightCorner(ns, mf).setZero();
        G.bottomRows(nf) = (sdt / eps) * b.sigma_z;
    }
    return tab;
}

CoefficientTables build_tables(const ReducedModel& red, const DeterministicPath& path) {
    if (path.nodes() < 2) throw ValidationError("deterministic path is too short");
    const int n = red.n_s(), m = red.m_s();
    const std::size_t steps = path.nodes() - 1;
    const double sdt = std::sqrt(path.dt);

    CoefficientTables tab;
    tab.n = n;
    tab.m = m;
    tab.t0 = path.t0;
    tab.dt = path.dt;
    tab.P.resize(steps * static_cast<std::size_t>(n) * n);
    tab.G.resize(steps * static_cast<std::size_t>(n) * m);
    for (std::size_t k = 0; k < steps; ++k) {
        const auto e = red.eval(path.x[k], path.t_at(k));
        Eigen::Map<Mat> P(tab.P.data() + k * n * n, n, n);
        Eigen::Map<Mat> G(tab.G.data() + k * n * m, n, m);
        P = path.dt * e.Abar;
        P.diagonal().array() += 1.0;
        G = sdt * e.sigma;
    }
    return tab;
}

Vec em_step(const Vec& psi, const Vec& drift, const Mat& noise, double dt, const Vec& draws,
            long long step) {
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    if (drift.size() != psi.size()) throw ValidationError("drift dimension mismatch");
    if (noise.size() > 0 && (noise.rows() != psi.size() || noise.cols() != draws.size())) {
        throw ValidationError("need one standard normal draw per noise channel");
    }
    Vec next = psi + dt * drift;
    if (noise.size() > 0) next += noise * (std::sqrt(dt) * draws);
    if (!next.allFinite()) {
        throw DivergenceError("nonfinite state after Euler-Maruyama step " + std::to_string(step),
                              -1, std::numeric_limits<double>::quiet_NaN());
    }
    return next;
}

void standard_errors(EnsembleStats& stats) {
    if (stats.n_realizations < 2) {
        throw ValidationError("standard errors require at least 2 realizations");
    }
    if (stats.fourth.size() != stats.second.size()) {
        throw ValidationError("fourth-moment estimates missing");
    }
    const double N = static_cast<double>(stats.n_realizations);
    const double bias = N / (N - 1.0);
    stats.mean_se.resize(stats.t.size());
    stats.second_se.resize(stats.t.size());
    for (std::size_t j = 0; j < stats.t.size(); ++j) {
        const Vec& mu = stats.mean[j];
        const Mat& M2 = stats.second[j];
        const Mat& M4 = stats.fourth[j];
        const auto n = mu.size();
        Vec se1(n);
        Mat se2(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            se1[i] = std::sqrt(std::max(0.0, (M2(i, i) - mu[i] * mu[i]) * bias) / N);
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index l = 0; l < n; ++l) {
                se2(i, l) = std::sqrt(std::max(0.0, (M4(i, l) - M2(i, l) * M2(i, l)) * bias) / N);
            }
        }
        stats.mean_se[j] = std::move(se1);
        stats.second_se[j] = std::move(se2);
    }
}

EnsembleStats simulate_ensemble(const CoefficientTables& tab, const Vec& psi0,
                                const EnsembleConfig& cfg) {
    const int n = tab.n, m = tab.m;
    if (n <= 0 || !(tab.dt > 0.0) || tab.steps() == 0) {
        throw ValidationError("coefficient tables are empty");
    }
    if (psi0.size() != n) throw ValidationError("initial fluctuation vector has the wrong size");
    if (!psi0.allFinite()) throw ValidationError("initial fluctuation vector is not finite");
    if (cfg.n_realizations < 2) throw ValidationError("need at least 2 realizations");
    if (cfg.t_grid.empty()) throw ValidationError("output grid is empty");

    std::vector<std::size_t> out_node(cfg.t_grid.size());
    for (std::size_t j = 0; j < cfg.t_grid.size(); ++j) {
        out_node[j] = static_cast<std::size_t>(
            node_of(cfg.t_grid[j], tab.t0, tab.dt, tab.steps(), "output"));
        if (j > 0 && out_node[j] <= out_node[j - 1]) {
            throw ValidationError("output times must be strictly increasing");
        }
    }
    const std::size_t n_out = out_node.size();
    const std::size_t last_node = out_node.back();
    const std::size_t N = cfg.n_realizations;
    const std::size_t n_blocks = (N + kBlockRealizations - 1) / kBlockRealizations;

    // Per (block, output time): sums of psi_i, psi_i psi_j, (psi_i psi_j)^2.
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    const std::size_t stride_time = static_cast<std::size_t>(n) + 2 * nn;
    const std::size_t stride_block = n_out * stride_time;
    std::vector<double> partials(n_blocks * stride_block, 0.0);

    std::atomic<std::size_t> next_block{0};
    std::atomic<bool> failed{false};
    std::mutex fail_mutex;
    std::size_t fail_block = std::numeric_limits<std::size_t>::max();
    long long fail_realization = 0;
    double fail_t = 0.0;

    const auto worker = [&]() {
        std::vector<double> state(kBlockRealizations * static_cast<std::size_t>(n));
        std::vector<double> draws(m);
        std::vector<double> next(n);
        for (;;) {
            const std::size_t b = next_block.fetch_add(1);
            if (b >= n_blocks) break;
            if (failed.load(std::memory_order_relaxed)) break;
            const std::size_t r0 = b * kBlockRealizations;
            const std::size_t nr = std::min(N, r0 + kBlockRealizations) - r0;
            for (std::size_t r = 0; r < nr; ++r) {
                for (int i = 0; i < n; ++i) state[r * n + i] = psi0[i];
            }
            double* part = partials.data() + b * stride_block;

            // Accumulates the block's contribution at output slot oi; returns
            // false after registering the first nonfinite realization.
            const auto record = [&](std::size_t oi) {
                double* S1 = part + oi * stride_time;
                double* S2 = S1 + n;
                double* S4 = S2 + nn;
                for (std::size_t r = 0; r < nr; ++r) {
                    const double* s = &state[r * n];
                    for (int i = 0; i < n; ++i) {
                        if (!std::isfinite(s[i])) {
                            const std::lock_guard<std::mutex> lock(fail_mutex);
                            if (b < fail_block) {
                                fail_block = b;
                                fail_realization = static_cast<long long>(r0 + r);
                                fail_t = tab.t0 + static_cast<double>(out_node[oi]) * tab.dt;
                            }
                            failed.store(true, std::memory_order_relaxed);
                            return false;
                        }
                    }
                    for (int i = 0; i < n; ++i) S1[i] += s[i];
                    for (int j = 0; j < n; ++j) {
                        for (int i = 0; i < n; ++i) {
                            const double p = s[i] * s[j];
                            S2[i + j * n] += p;
                            S4[i + j * n] += p * p;
                        }
                    }
                }
                return true;
            };

            std::size_t oi = 0;
            bool ok = true;
            if (out_node[0] == 0) {
                ok = record(0);
                oi = 1;
            }
            for (std::size_t k = 0; ok && k < last_node; ++k) {
                const double* P = tab.P.data() + k * nn;
                const double* G = tab.G.data() + k * static_cast<std::size_t>(n) * m;
                for (std::size_t r = 0; r < nr; ++r) {
                    for (int c = 0; c < m; c += 4) {
                        const auto w = philox4x64(r0 + r, k, static_cast<std::uint64_t>(c) / 4, 0,
                                                  cfg.master_seed, kNormalStreamTag);
                        const int lanes = std::min(4, m - c);
                        for (int l = 0; l < lanes; ++l) {
                            draws[c + l] = inv_normal_cdf(uniform_from_bits(w[l]));
                        }
                    }
                    double* s = &state[r * n];
                    for (int i = 0; i < n; ++i) {
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j) acc += P[i + j * n] * s[j];
                        for (int c = 0; c < m; ++c) acc += G[i + c * n] * draws[c];
                        next[i] = acc;
                    }
                    std::memcpy(s, next.data(), static_cast<std::size_t>(n) * sizeof(double));
                }
                if (oi < n_out && out_node[oi] == k + 1) {
                    ok = record(oi);
                    ++oi;
                }
            }
        }
    };

    unsigned n_threads = cfg.n_threads > 0 ? static_cast<unsigned>(cfg.n_threads)
                                           : std::max(1u, std::thread::hardware_concurrency());
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, n_blocks));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    if (failed.load()) {
        throw DivergenceError("realization " + std::to_string(fail_realization) +
                                  " diverged by t = " + std::to_string(fail_t) +
                                  " (reduce dt or check the model)",
                              fail_realization, fail_t);
    }

    EnsembleStats stats;
    stats.t = cfg.t_grid;
    stats.n_realizations = N;
    stats.mean.resize(n_out);
    stats.second.resize(n_out);
    stats.fourth.resize(n_out);
    const double invN = 1.0 / static_cast<double>(N);
    std::vector<double> total(stride_time);
    for (std::size_t oi = 0; oi < n_out; ++oi) {
        for (std::size_t e = 0; e < stride_time; ++e) {
            CompensatedSum acc;
            for (std::size_t b = 0; b < n_blocks; ++b) {
                acc.add(partials[b * stride_block + oi * stride_time + e]);
            }
            total[e] = acc.value();
        }
        stats.mean[oi] = invN * Eigen::Map<const Vec>(total.data(), n);
        stats.second[oi] = invN * Eigen::Map<const Mat>(total.data() + n, n, n);
        stats.fourth[oi] = invN * Eigen::Map<const Mat>(total.data() + n + nn, n, n);
    }
    standard_errors(stats);
    return stats;
}

namespace {

void check_grid_consistency(const DeterministicPath& path, const EnsembleConfig& cfg) {
    if (std::abs(path.dt - cfg.dt) > 1e-12 * cfg.dt) {
        throw ValidationError("deterministic path was sampled at a different dt than requested");
    }
    if (cfg.t_grid.empty()) throw ValidationError("output grid is empty");
}

} // namespace

EnsembleStats simulate_ensemble(const SingularPerturbedLNA& sp, const DeterministicPath& path,
                                double eps, const Vec& psi_x0, const Vec& psi_z0,
                                const EnsembleConfig& cfg) {
    check_grid_consistency(path, cfg);
    // The fast block carries 1/eps drift and 1/sqrt(eps) noise; an unresolved
    // step turns the stiff linear update unstable long before it is inaccurate.
    if (cfg.dt > eps / 20.0 * (1.0 + 1e-9)) {
        throw ValidationError("dt must not exceed eps/20 for the original system");
    }
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j < cfg.t_grid.size(); ++j) {
        min_gap = std::min(min_gap, cfg.t_grid[j] - cfg.t_grid[j - 1]);
    }
    if (cfg.t_grid.size() > 1 && cfg.dt > 0.1 * min_gap * (1.0 + 1e-9)) {
        throw ValidationError("dt must not exceed a tenth of the output spacing");
    }
    if (psi_x0.size() != sp.n_s() || psi_z0.size() != sp.n_f()) {
        throw ValidationError("fluctuation initial condition has the wrong size");
    }
    const auto tab = build_tables(sp, path, eps);
    Vec psi0(tab.n);
    psi0 << psi_x0, psi_z0;
    return simulate_ensemble(tab, psi0, cfg);
}

EnsembleStats simulate_ensemble(const ReducedModel& red, const DeterministicPath& path,
                                const Vec& psi_x0, const EnsembleConfig& cfg) {
    check_grid_consistency(path, cfg);
    if (psi_x0.size() != red.n_s()) {
        throw ValidationError("fluctuation initial condition has the wrong size");
    }
    const auto tab = build_tables(red, path);
    return simulate_ensemble(tab, psi_x0, cfg);
}

} // namespace lnared
