#include "lnared/network.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace lnared {

void RateLaw::gradient(const Vec&, double, Vec&) const {
    throw LnaError("internal", "rate law has no analytic gradient");
}

AffineProductRate::AffineProductRate(double k, Mat factors, TimeFn input)
    : k_(k), factors_(std::move(factors)), input_(std::move(input)) {}

double AffineProductRate::value(const Vec& y, double t) const {
    double r = k_ * (input_ ? input_(t) : 1.0);
    for (Eigen::Index f = 0; f < factors_.rows(); ++f) {
        r *= factors_(f, 0) + factors_.row(f).tail(y.size()).dot(y);
    }
    return r;
}

void AffineProductRate::gradient(const Vec& y, double t, Vec& g) const {
    const Eigen::Index nf = factors_.rows();
    const double scale = k_ * (input_ ? input_(t) : 1.0);
    Eigen::ArrayXd vals(nf);
    for (Eigen::Index f = 0; f < nf; ++f) {
        vals[f] = factors_(f, 0) + factors_.row(f).tail(y.size()).dot(y);
    }
    g.setZero(y.size());
    // d/dy_j = scale * sum_f F(f, j+1) * prod_{g != f} vals[g]
    for (Eigen::Index f = 0; f < nf; ++f) {
        double rest = scale;
        for (Eigen::Index h = 0; h < nf; ++h) {
            if (h != f) rest *= vals[h];
        }
        g += rest * factors_.row(f).tail(y.size()).transpose();
    }
}

MassActionRate::MassActionRate(double k, std::vector<int> orders)
    : k_(k), orders_(std::move(orders)) {
    for (int o : orders_) {
        if (o < 0) throw ConfigError("mass_action orders must be nonnegative");
    }
}

double MassActionRate::value(const Vec& y, double) const {
    double r = k_;
    for (size_t j = 0; j < orders_.size(); ++j) {
        for (int p = 0; p < orders_[j]; ++p) r *= y[static_cast<Eigen::Index>(j)];
    }
    return r;
}

void MassActionRate::gradient(const Vec& y, double, Vec& g) const {
    g.setZero(y.size());
    for (size_t j = 0; j < orders_.size(); ++j) {
        const int oj = orders_[j];
        if (oj == 0) continue;
        double d = k_ * oj;
        for (int p = 0; p < oj - 1; ++p) d *= y[static_cast<Eigen::Index>(j)];
        for (size_t h = 0; h < orders_.size(); ++h) {
            if (h == j) continue;
            for (int p = 0; p < orders_[h]; ++p) d *= y[static_cast<Eigen::Index>(h)];
        }
        g[static_cast<Eigen::Index>(j)] = d;
    }
}

void rate_gradient(const RateLaw& rate, const Vec& y, double t, Vec& g) {
    if (rate.has_gradient()) {
        rate.gradient(y, t, g);
        return;
    }
    static const double sqrt_eps = std::sqrt(std::numeric_limits<double>::epsilon());
    g.resize(y.size());
    Vec yp = y;
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        const double h = sqrt_eps * std::max(1.0, std::abs(y[j]));
        yp[j] = y[j] + h;
        const double fp = rate.value(yp, t);
        yp[j] = y[j] - h;
        const double fm = rate.value(yp, t);
        yp[j] = y[j];
        g[j] = (fp - fm) / (2.0 * h);
    }
}

int ReactionNetwork::m_slow() const {
    int c = 0;
    for (const auto& r : reactions) c += (r.timescale == Timescale::slow);
    return c;
}

int ReactionNetwork::m_fast() const { return m() - m_slow(); }

ValidationReport validate_network(const ReactionNetwork& net) {
    ValidationReport rep;
    const int n = net.n();
    for (int i = 0; i < net.m(); ++i) {
        const auto& r = net.reactions[i];
        if (r.stoich.size() != n) {
            rep.violations.push_back("reaction " + std::to_string(i) + " (" + r.name +
                                     "): stoich length " + std::to_string(r.stoich.size()) +
                                     " != species count " + std::to_string(n));
        }
        if (!r.rate) {
            rep.violations.push_back("reaction " + std::to_string(i) + " (" + r.name +
                                     "): missing rate law");
        }
    }
    if (!(net.epsilon > 0.0)) {
        rep.violations.push_back("epsilon must be positive, got " + std::to_string(net.epsilon));
    }
    if (!(net.volume > 0.0)) {
        rep.violations.push_back("volume must be positive, got " + std::to_string(net.volume));
    }
    return rep;
}

ReactionNetwork build_example_phospho(const PhosphoParams& p) {
    const bool params_ok = p.k1 > 0 && p.k2 > 0 && p.kd > 0 && p.beta > 0 && p.delta > 0 &&
                           p.X_tot > 0 && p.Y > 0 && p.p_tot > 0 && p.epsilon > 0;
    if (!params_ok) {
        throw ConfigError("phospho example requires strictly positive parameters");
    }
    TimeFn Z = p.Z ? p.Z : TimeFn([](double) { return 1.0; });

    auto stoich = [](double a, double b, double c) {
        Vec v(3);
        v << a, b, c;
        return v;
    };
    auto factor = [](double c0, double c1, double c2, double c3) {
        Mat f(1, 4);
        f << c0, c1, c2, c3;
        return f;
    };

    ReactionNetwork net;
    net.species_names = {"x*", "c", "g"};
    net.epsilon = p.epsilon;

    // k1 Z(t) (X_tot - x* - c)
    net.reactions.push_back({"phosphorylation", stoich(1, 0, 0), Timescale::slow,
                             std::make_shared<AffineProductRate>(p.k1, factor(p.X_tot, -1, -1, 0), Z)});
    // k2 Y x*
    net.reactions.push_back({"dephosphorylation", stoich(-1, 0, 0), Timescale::slow,
                             std::make_shared<AffineProductRate>(p.k2 * p.Y, factor(0, 1, 0, 0))});
    // (k2 Y / kd) x* (p_tot - c), unscaled fast rate
    Mat bind_factors(2, 4);
    bind_factors << 0, 1, 0, 0,
                    p.p_tot, 0, -1, 0;
    net.reactions.push_back({"binding", stoich(-1, 1, 0), Timescale::fast,
                             std::make_shared<AffineProductRate>(p.k2 * p.Y / p.kd, bind_factors)});
    // k2 Y c, unscaled fast rate
    net.reactions.push_back({"unbinding", stoich(1, -1, 0), Timescale::fast,
                             std::make_shared<AffineProductRate>(p.k2 * p.Y, factor(0, 0, 1, 0))});
    // beta c
    net.reactions.push_back({"production", stoich(0, 0, 1), Timescale::slow,
                             std::make_shared<AffineProductRate>(p.beta, factor(0, 0, 1, 0))});
    // delta g
    net.reactions.push_back({"decay", stoich(0, 0, -1), Timescale::slow,
                             std::make_shared<AffineProductRate>(p.delta, factor(0, 0, 0, 1))});
    return net;
}

double phospho_cbar(double v, const PhosphoParams& p) {
    const double s = v + p.p_tot + p.kd;
    const double disc = s * s - 4.0 * v * p.p_tot;
    // (s - sqrt(disc)) / 2 rewritten to avoid cancellation near v = 0
    return 2.0 * v * p.p_tot / (s + std::sqrt(std::max(disc, 0.0)));
}

double phospho_gamma2_scalar(double v, const PhosphoParams& p) {
    const double c = phospho_cbar(v, p);
    return (p.p_tot - c) / (v + p.p_tot - 2.0 * c + p.kd);
}

} // namespace lnared
