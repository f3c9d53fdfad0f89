#include "lnared/csvio.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "lnared/errors.hpp"

namespace lnared {

std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::scientific, 16);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ConfigError("not a number: '" + s + "'");
    }
    return v;
}

void write_csv(const CsvTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary); // binary: no newline translation anywhere
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i) out << ',';
        out << table.header[i];
    }
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << format_double(row[i]);
        }
        out << '\n';
    }
    out.flush();
    if (!out) throw ConfigError("write failed for '" + path + "'");
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "' for reading");
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("'" + path + "' is empty");
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) table.header.push_back(cell);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        row.reserve(table.header.size());
        std::stringstream rs(line);
        while (std::getline(rs, cell, ',')) row.push_back(parse_double(cell));
        if (row.size() != table.header.size()) {
            throw ConfigError("'" + path + "' row has " + std::to_string(row.size()) +
                              " cells, header has " + std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

namespace {

void moment_headers(std::vector<std::string>& h, int n, const char* prefix_m,
                    const char* prefix_M) {
    for (int i = 0; i < n; ++i) {
        h.push_back(std::string(prefix_m) + "[" + std::to_string(i) + "]");
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            h.push_back(std::string(prefix_M) + "[" + std::to_string(i) + "][" +
                        std::to_string(j) + "]");
        }
    }
}

void push_moments(std::vector<double>& row, const Vec& m, const Mat& M) {
    for (Eigen::Index i = 0; i < m.size(); ++i) row.push_back(m[i]);
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = i; j < M.cols(); ++j) row.push_back(M(i, j));
    }
}

} // namespace

CsvTable table_from_original(const OriginalMomentTrajectory& traj,
                             const std::vector<std::string>& x_names,
                             const std::vector<std::string>& z_names) {
    CsvTable t;
    const int ns = static_cast<int>(x_names.size());
    const int nf = static_cast<int>(z_names.size());
    t.header.push_back("t");
    for (const auto& s : x_names) t.header.push_back(s);
    for (const auto& s : z_names) t.header.push_back(s);
    moment_headers(t.header, ns + nf, "m", "M");
    for (std::size_t i = 0; i < traj.t.size(); ++i) {
        const auto& s = traj.states[i];
        std::vector<double> row;
        row.reserve(t.header.size());
        row.push_back(traj.t[i]);
        for (Eigen::Index j = 0; j < s.x.size(); ++j) row.push_back(s.x[j]);
        for (Eigen::Index j = 0; j < s.z.size(); ++j) row.push_back(s.z[j]);
        Vec m(ns + nf);
        m << s.m_x, s.m_z;
        Mat M(ns + nf, ns + nf);
        M.topLeftCorner(ns, ns) = s.M_xx;
        M.topRightCorner(ns, nf) = s.M_zx.transpose();
        M.bottomLeftCorner(nf, ns) = s.M_zx;
        M.bottomRightCorner(nf, nf) = s.M_zz;
        push_moments(row, m, M);
        t.rows.push_back(std::move(row));
    }
    return t;
}

CsvTable table_from_reduced(const ReducedMomentTrajectory& traj,
                            const std::vector<std::string>& x_names) {
    CsvTable t;
    t.header.push_back("t");
    for (const auto& s : x_names) t.header.push_back(s);
    moment_headers(t.header, static_cast<int>(x_names.size()), "m", "M");
    for (std::size_t i = 0; i < traj.t.size(); ++i) {
        const auto& s = traj.states[i];
        std::vector<double> row;
        row.reserve(t.header.size());
        row.push_back(traj.t[i]);
        for (Eigen::Index j = 0; j < s.xbar.size(); ++j) row.push_back(s.xbar[j]);
        push_moments(row, s.m_x, s.M_xx);
        t.rows.push_back(std::move(row));
    }
    return t;
}

CsvTable table_from_stats(const EnsembleStats& stats) {
    CsvTable t;
    const int n = stats.mean.empty() ? 0 : static_cast<int>(stats.mean.front().size());
    t.header.push_back("t");
    moment_headers(t.header, n, "m", "M");
    moment_headers(t.header, n, "se_m", "se_M");
    for (std::size_t i = 0; i < stats.t.size(); ++i) {
        std::vector<double> row;
        row.reserve(t.header.size());
        row.push_back(stats.t[i]);
        push_moments(row, stats.mean[i], stats.second[i]);
        push_moments(row, stats.mean_se[i], stats.second_se[i]);
        t.rows.push_back(std::move(row));
    }
    return t;
}

CsvTable table_from_sweep(const SweepResult& sweep) {
    CsvTable t;
    t.header = {"eps", "e_x", "e_m", "e_M"};
    for (const auto& p : sweep.points) {
        t.rows.push_back({p.eps, p.err.e_x, p.err.e_m, p.err.e_M});
    }
    return t;
}

} // namespace lnared
