#include "lnared/lna.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace lnared {

namespace {

constexpr double kNegClamp = -1e-12;
constexpr double kCondLimit = 1e12;

double checked_rate(const ReactionNetwork& net, int i, const Vec& y, double t) {
    const double v = net.reactions[static_cast<size_t>(i)].rate->value(y, t);
    if (v < 0.0) {
        if (v >= kNegClamp) return 0.0;
        throw DomainError("propensity of reaction '" + net.reactions[static_cast<size_t>(i)].name +
                              "' evaluated to " + std::to_string(v) + " at t=" + std::to_string(t),
                          y, t, i);
    }
    return v;
}

} // namespace

LnaModel::LnaModel(std::shared_ptr<const ReactionNetwork> net) : net_(std::move(net)) {}

LnaModel assemble_lna(const ReactionNetwork& net) {
    auto rep = validate_network(net);
    if (!rep.ok()) {
        std::string msg = "network validation failed:";
        for (const auto& v : rep.violations) msg += " [" + v + "]";
        throw ValidationError(msg);
    }
    return LnaModel(std::make_shared<ReactionNetwork>(net));
}

Vec LnaModel::drift(const Vec& y, double t) const {
    Vec f = Vec::Zero(net_->n());
    for (int i = 0; i < net_->m(); ++i) {
        const auto& r = net_->reactions[static_cast<size_t>(i)];
        const double scale = r.timescale == Timescale::fast ? 1.0 / net_->epsilon : 1.0;
        f += r.stoich * (scale * checked_rate(*net_, i, y, t));
    }
    return f;
}

Mat LnaModel::jacobian(const Vec& y, double t) const {
    const int n = net_->n();
    Mat J = Mat::Zero(n, n);
    Vec g(n);
    for (int i = 0; i < net_->m(); ++i) {
        const auto& r = net_->reactions[static_cast<size_t>(i)];
        const double scale = r.timescale == Timescale::fast ? 1.0 / net_->epsilon : 1.0;
        rate_gradient(*r.rate, y, t, g);
        J.noalias() += (scale * r.stoich) * g.transpose();
    }
    return J;
}

Mat LnaModel::diffusion(const Vec& y, double t) const {
    Mat s(net_->n(), net_->m());
    for (int i = 0; i < net_->m(); ++i) {
        const auto& r = net_->reactions[static_cast<size_t>(i)];
        const double scale = r.timescale == Timescale::fast ? 1.0 / net_->epsilon : 1.0;
        s.col(i) = r.stoich * std::sqrt(scale * checked_rate(*net_, i, y, t));
    }
    return s;
}

Mat TransformMatrices::stacked() const {
    Mat A(A_x.rows() + A_z.rows(), A_x.cols());
    A.topRows(A_x.rows()) = A_x;
    A.bottomRows(A_z.rows()) = A_z;
    return A;
}

// Everything the fused block evaluation needs, shared by copies of the model.
struct SingularPerturbedLNA::NetworkData {
    std::shared_ptr<const ReactionNetwork> net;
    std::vector<int> slow_idx, fast_idx; // original reaction order within each class
    Mat A_x, A_z, A_inv;
    Mat Yx, Yz;        // A_inv column blocks: dy/dx and dy/dz
    Mat V_slow, V_fast; // stoichiometry columns, n x m_s and n x m_f
    Mat Ax_V_slow;      // A_x v_i for slow i
    Mat Az_V_slow, Az_V_fast;
};

SingularPerturbedLNA::SingularPerturbedLNA(SpEvaluators ev, int n_s, int n_f, int m_s, int m_f,
                                           double epsilon)
    : ev_(std::move(ev)), n_s_(n_s), n_f_(n_f), m_s_(m_s), m_f_(m_f), epsilon_(epsilon) {
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    const int n = n_s + n_f;
    A_inv_ = Mat::Identity(n, n);
    A_x_ = A_inv_.topRows(n_s);
    A_z_ = A_inv_.bottomRows(n_f);
}

void SingularPerturbedLNA::set_epsilon(double eps) {
    if (!(eps > 0.0)) throw ValidationError("epsilon must be positive");
    epsilon_ = eps;
}

Vec SingularPerturbedLNA::to_original(const Vec& x, const Vec& z) const {
    Vec xz(n_s_ + n_f_);
    xz << x, z;
    return A_inv_ * xz;
}

std::pair<Vec, Vec> SingularPerturbedLNA::from_original(const Vec& y) const {
    return {A_x_ * y, A_z_ * y};
}

BlockEval SingularPerturbedLNA::blocks(const Vec& x, const Vec& z, double t, double eps) const {
    if (!netdata_) {
        BlockEval b;
        b.f_x = ev_.f_x ? ev_.f_x(x, z, t) : Vec::Zero(n_s_);
        b.f_z = ev_.f_z ? ev_.f_z(x, z, t, eps) : Vec::Zero(n_f_);
        b.A1 = ev_.A1 ? ev_.A1(x, z, t) : Mat::Zero(n_s_, n_s_);
        b.A2 = ev_.A2 ? ev_.A2(x, z, t) : Mat::Zero(n_s_, n_f_);
        b.B1 = ev_.B1 ? ev_.B1(x, z, t, eps) : Mat::Zero(n_f_, n_s_);
        b.B2 = ev_.B2 ? ev_.B2(x, z, t, eps) : Mat::Zero(n_f_, n_f_);
        b.sigma_x = ev_.sigma_x ? ev_.sigma_x(x, z, t) : Mat::Zero(n_s_, m_s_);
        b.sigma_z = ev_.sigma_z ? ev_.sigma_z(x, z, t, eps) : Mat::Zero(n_f_, m_s_ + m_f_);
        return b;
    }

    const NetworkData& nd = *netdata_;
    const ReactionNetwork& net = *nd.net;
    const Vec y = to_original(x, z);

    Vec val_s(m_s_), val_f(m_f_);
    Mat G_s(m_s_, net.n()), G_f(m_f_, net.n());
    Vec g(net.n());
    for (int j = 0; j < m_s_; ++j) {
        const int i = nd.slow_idx[static_cast<size_t>(j)];
        val_s[j] = checked_rate(net, i, y, t);
        rate_gradient(*net.reactions[static_cast<size_t>(i)].rate, y, t, g);
        G_s.row(j) = g.transpose();
    }
    for (int j = 0; j < m_f_; ++j) {
        const int i = nd.fast_idx[static_cast<size_t>(j)];
        val_f[j] = checked_rate(net, i, y, t);
        rate_gradient(*net.reactions[static_cast<size_t>(i)].rate, y, t, g);
        G_f.row(j) = g.transpose();
    }

    BlockEval b;
    // Slow equation: fast reactions drop out exactly because A_x v_i = 0.
    const Vec f_slow = nd.V_slow * val_s;
    const Vec f_fast = nd.V_fast * val_f;
    b.f_x = nd.A_x * f_slow;
    b.f_z = eps * (nd.A_z * f_slow) + nd.A_z * f_fast;

    const Mat J_s = nd.V_slow * G_s; // d f_slow / dy
    const Mat J_f = nd.V_fast * G_f;
    b.A1 = nd.A_x * J_s * nd.Yx;
    b.A2 = nd.A_x * J_s * nd.Yz;
    b.B1 = eps * (nd.A_z * J_s * nd.Yx) + nd.A_z * J_f * nd.Yx;
    b.B2 = eps * (nd.A_z * J_s * nd.Yz) + nd.A_z * J_f * nd.Yz;

    b.sigma_x.resize(n_s_, m_s_);
    b.sigma_z.resize(n_f_, m_s_ + m_f_);
    const double sqrt_eps_scaled = std::sqrt(eps);
    for (int j = 0; j < m_s_; ++j) {
        const double root = std::sqrt(val_s[j]);
        b.sigma_x.col(j) = nd.Ax_V_slow.col(j) * root;
        b.sigma_z.col(j) = nd.Az_V_slow.col(j) * (eps * root);
    }
    for (int j = 0; j < m_f_; ++j) {
        b.sigma_z.col(m_s_ + j) = nd.Az_V_fast.col(j) * (sqrt_eps_scaled * std::sqrt(val_f[j]));
    }
    return b;
}

Vec SingularPerturbedLNA::f_x(const Vec& x, const Vec& z, double t) const {
    if (!netdata_) return ev_.f_x ? ev_.f_x(x, z, t) : Vec::Zero(n_s_);
    const NetworkData& nd = *netdata_;
    const Vec y = to_original(x, z);
    Vec val_s(m_s_);
    for (int j = 0; j < m_s_; ++j) {
        val_s[j] = checked_rate(*nd.net, nd.slow_idx[static_cast<size_t>(j)], y, t);
    }
    return nd.A_x * (nd.V_slow * val_s);
}

Vec SingularPerturbedLNA::f_z(const Vec& x, const Vec& z, double t, double eps) const {
    if (!netdata_) return ev_.f_z ? ev_.f_z(x, z, t, eps) : Vec::Zero(n_f_);
    const NetworkData& nd = *netdata_;
    const Vec y = to_original(x, z);
    Vec val_s(m_s_), val_f(m_f_);
    for (int j = 0; j < m_s_; ++j) {
        val_s[j] = checked_rate(*nd.net, nd.slow_idx[static_cast<size_t>(j)], y, t);
    }
    for (int j = 0; j < m_f_; ++j) {
        val_f[j] = checked_rate(*nd.net, nd.fast_idx[static_cast<size_t>(j)], y, t);
    }
    return eps * (nd.A_z * (nd.V_slow * val_s)) + nd.A_z * (nd.V_fast * val_f);
}

Vec SingularPerturbedLNA::f_z_raw(const Vec& x, const Vec& z, double t, double eps) const {
    if (!netdata_) return ev_.f_z ? ev_.f_z(x, z, t, eps) : Vec::Zero(n_f_);
    const NetworkData& nd = *netdata_;
    const Vec y = to_original(x, z);
    Vec val_s(m_s_), val_f(m_f_);
    for (int j = 0; j < m_s_; ++j) {
        const int i = nd.slow_idx[static_cast<size_t>(j)];
        val_s[j] = nd.net->reactions[static_cast<size_t>(i)].rate->value(y, t);
    }
    for (int j = 0; j < m_f_; ++j) {
        const int i = nd.fast_idx[static_cast<size_t>(j)];
        val_f[j] = nd.net->reactions[static_cast<size_t>(i)].rate->value(y, t);
    }
    return eps * (nd.A_z * (nd.V_slow * val_s)) + nd.A_z * (nd.V_fast * val_f);
}

Mat SingularPerturbedLNA::B2_raw(const Vec& x, const Vec& z, double t, double eps) const {
    if (!netdata_) return ev_.B2 ? ev_.B2(x, z, t, eps) : Mat::Zero(n_f_, n_f_);
    const NetworkData& nd = *netdata_;
    const ReactionNetwork& net = *nd.net;
    const Vec y = to_original(x, z);
    Mat G_s(m_s_, net.n()), G_f(m_f_, net.n());
    Vec g(net.n());
    for (int j = 0; j < m_s_; ++j) {
        const int i = nd.slow_idx[static_cast<size_t>(j)];
        rate_gradient(*net.reactions[static_cast<size_t>(i)].rate, y, t, g);
        G_s.row(j) = g.transpose();
    }
    for (int j = 0; j < m_f_; ++j) {
        const int i = nd.fast_idx[static_cast<size_t>(j)];
        rate_gradient(*net.reactions[static_cast<size_t>(i)].rate, y, t, g);
        G_f.row(j) = g.transpose();
    }
    return eps * (nd.A_z * (nd.V_slow * G_s) * nd.Yz) + nd.A_z * (nd.V_fast * G_f) * nd.Yz;
}

Mat SingularPerturbedLNA::A1(const Vec& x, const Vec& z, double t) const {
    return blocks(x, z, t, epsilon_).A1;
}
Mat SingularPerturbedLNA::A2(const Vec& x, const Vec& z, double t) const {
    return blocks(x, z, t, epsilon_).A2;
}
Mat SingularPerturbedLNA::B1(const Vec& x, const Vec& z, double t, double eps) const {
    return blocks(x, z, t, eps).B1;
}
Mat SingularPerturbedLNA::B2(const Vec& x, const Vec& z, double t, double eps) const {
    return blocks(x, z, t, eps).B2;
}
Mat SingularPerturbedLNA::sigma_x(const Vec& x, const Vec& z, double t) const {
    return blocks(x, z, t, epsilon_).sigma_x;
}
Mat SingularPerturbedLNA::sigma_z(const Vec& x, const Vec& z, double t, double eps) const {
    return blocks(x, z, t, eps).sigma_z;
}

SingularPerturbedLNA transform_to_sp(const LnaModel& lna, const TransformMatrices& tm,
                                     const ReactionNetwork& net) {
    const int n = net.n();
    const int n_s = static_cast<int>(tm.A_x.rows());
    const int n_f = static_cast<int>(tm.A_z.rows());
    if (tm.A_x.cols() != n || tm.A_z.cols() != n || n_s + n_f != n) {
        throw ValidationError("transform matrices must stack to an n x n matrix (n=" +
                              std::to_string(n) + ")");
    }

    const Mat A = tm.stacked();
    Eigen::JacobiSVD<Mat> svd(A);
    const double smin = svd.singularValues()(n - 1);
    const double cond = smin > 0.0 ? svd.singularValues()(0) / smin
                                   : std::numeric_limits<double>::infinity();
    if (!(cond <= kCondLimit)) {
        throw TransformError("stacked transform matrix is numerically singular (cond=" +
                                 std::to_string(cond) + ")",
                             cond);
    }

    auto nd = std::make_shared<SingularPerturbedLNA::NetworkData>();
    nd->net = std::make_shared<ReactionNetwork>(net);
    nd->A_x = tm.A_x;
    nd->A_z = tm.A_z;
    nd->A_inv = A.partialPivLu().inverse();
    nd->Yx = nd->A_inv.leftCols(n_s);
    nd->Yz = nd->A_inv.rightCols(n_f);

    const double ax_scale = std::max(1.0, tm.A_x.cwiseAbs().maxCoeff());
    for (int i = 0; i < net.m(); ++i) {
        const auto& r = net.reactions[static_cast<size_t>(i)];
        if (r.timescale == Timescale::fast) {
            const double res = (tm.A_x * r.stoich).cwiseAbs().maxCoeff();
            if (res > 1e-12 * ax_scale * std::max(1.0, r.stoich.cwiseAbs().maxCoeff())) {
                throw ValidationError("A_x v != 0 for fast reaction '" + r.name +
                                      "'; slow equation would retain 1/epsilon terms");
            }
            nd->fast_idx.push_back(i);
        } else {
            nd->slow_idx.push_back(i);
        }
    }

    const int m_s = static_cast<int>(nd->slow_idx.size());
    const int m_f = static_cast<int>(nd->fast_idx.size());
    nd->V_slow.resize(n, m_s);
    nd->V_fast.resize(n, m_f);
    for (int j = 0; j < m_s; ++j) nd->V_slow.col(j) = net.reactions[static_cast<size_t>(nd->slow_idx[static_cast<size_t>(j)])].stoich;
    for (int j = 0; j < m_f; ++j) nd->V_fast.col(j) = net.reactions[static_cast<size_t>(nd->fast_idx[static_cast<size_t>(j)])].stoich;
    nd->Ax_V_slow = nd->A_x * nd->V_slow;
    nd->Az_V_slow = nd->A_z * nd->V_slow;
    nd->Az_V_fast = nd->A_z * nd->V_fast;

    SingularPerturbedLNA sp(SpEvaluators{}, n_s, n_f, m_s, m_f, net.epsilon);
    sp.netdata_ = nd;
    sp.A_inv_ = nd->A_inv;
    sp.A_x_ = tm.A_x;
    sp.A_z_ = tm.A_z;
    sp.cond_ = cond;
    (void)lna; // the network carries everything the transform needs
    return sp;
}

TransformMatrices phospho_transform() {
    TransformMatrices tm;
    tm.A_x.resize(2, 3);
    tm.A_x << 1, 1, 0,
              0, 0, 1;
    tm.A_z.resize(1, 3);
    tm.A_z << 0, 1, 0;
    tm.x_names = {"v", "g"};
    tm.z_names = {"c"};
    return tm;
}

} // namespace lnared
