#include "lnared/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>

#include "json.hpp"
#include "lnared/errors.hpp"

namespace lnared {

using nlohmann::json;

std::vector<double> RunConfig::t_grid() const {
    std::vector<double> g(static_cast<std::size_t>(t_points));
    for (int i = 0; i < t_points; ++i) {
        g[static_cast<std::size_t>(i)] =
            t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(t_points - 1);
    }
    g.back() = t1;
    return g;
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& why) {
    throw ConfigError(path + ": " + why);
}

const json& need(const json& j, const char* key, const std::string& path) {
    const auto it = j.find(key);
    if (it == j.end()) fail(path + "." + key, "missing required field");
    return *it;
}

double need_number(const json& j, const char* key, const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    return v.get<double>();
}

double opt_number(const json& j, const char* key, const std::string& path, double fallback) {
    const auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number()) fail(path + "." + key, "expected a number");
    return it->get<double>();
}

Vec parse_vec(const json& v, const std::string& path, Eigen::Index expect = -1) {
    if (!v.is_array()) fail(path, "expected an array of numbers");
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) fail(path + "[" + std::to_string(i) + "]", "expected a number");
        out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    if (expect >= 0 && out.size() != expect) {
        fail(path, "expected " + std::to_string(expect) + " entries, got " +
                       std::to_string(out.size()));
    }
    return out;
}

Mat parse_mat(const json& v, const std::string& path, Eigen::Index cols) {
    if (!v.is_array() || v.empty()) fail(path, "expected a nonempty array of rows");
    Mat out(v.size(), cols);
    for (std::size_t r = 0; r < v.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) =
            parse_vec(v[r], path + "[" + std::to_string(r) + "]", cols).transpose();
    }
    return out;
}

RatePtr parse_rate(const json& j, const std::string& path, int n) {
    const json& form = need(j, "form", path);
    if (!form.is_string()) fail(path + ".form", "expected a string");
    const double k = need_number(j, "k", path);
    const std::string f = form.get<std::string>();
    if (f == "affine_product") {
        const json& factors = need(j, "factors", path);
        const Mat F = parse_mat(factors, path + ".factors", n + 1);
        const double input = opt_number(j, "input_constant", path, 1.0);
        TimeFn in = input == 1.0 ? TimeFn() : TimeFn([input](double) { return input; });
        return std::make_shared<AffineProductRate>(k, F, std::move(in));
    }
    if (f == "mass_action") {
        const json& orders = need(j, "orders", path);
        if (!orders.is_array() || orders.size() != static_cast<std::size_t>(n)) {
            fail(path + ".orders", "expected one integer order per species");
        }
        std::vector<int> o(orders.size());
        for (std::size_t i = 0; i < orders.size(); ++i) {
            if (!orders[i].is_number_integer() || orders[i].get<int>() < 0) {
                fail(path + ".orders[" + std::to_string(i) + "]",
                     "expected a nonnegative integer");
            }
            o[i] = orders[i].get<int>();
        }
        return std::make_shared<MassActionRate>(k, std::move(o));
    }
    fail(path + ".form", "unknown rate form '" + f + "' (affine_product | mass_action)");
}

void apply_run_section(const json& j, const std::string& path, const TransformMatrices& tm,
                       RunConfig& run) {
    if (const auto it = j.find("t_span"); it != j.end()) {
        const Vec span = parse_vec(*it, path + ".t_span", 2);
        if (!(span[1] > span[0])) fail(path + ".t_span", "end must exceed start");
        run.t0 = span[0];
        run.t1 = span[1];
    }
    if (const auto it = j.find("t_points"); it != j.end()) {
        if (!it->is_number_integer() || it->get<int>() < 2) {
            fail(path + ".t_points", "expected an integer >= 2");
        }
        run.t_points = it->get<int>();
    }
    run.rtol = opt_number(j, "rtol", path, run.rtol);
    run.atol = opt_number(j, "atol", path, run.atol);
    if (!(run.rtol > 0.0) || !(run.atol > 0.0)) fail(path, "tolerances must be positive");
    if (const auto it = j.find("eps_list"); it != j.end()) {
        const Vec v = parse_vec(*it, path + ".eps_list");
        run.eps_list.assign(v.data(), v.data() + v.size());
        std::sort(run.eps_list.begin(), run.eps_list.end(), std::greater<double>());
        for (const double e : run.eps_list) {
            if (!(e > 0.0)) fail(path + ".eps_list", "entries must be positive");
        }
    }
    if (const auto it = j.find("ensemble"); it != j.end()) {
        const std::string ep = path + ".ensemble";
        if (const auto n = it->find("n"); n != it->end()) {
            if (!n->is_number_integer() || n->get<long long>() < 2) {
                fail(ep + ".n", "expected an integer >= 2");
            }
            run.ensemble_n = n->get<std::size_t>();
        }
        run.ensemble_dt = opt_number(*it, "dt", ep, run.ensemble_dt);
        if (!(run.ensemble_dt > 0.0)) fail(ep + ".dt", "must be positive");
        if (const auto s = it->find("seed"); s != it->end()) {
            if (!s->is_number_unsigned() && !s->is_number_integer()) {
                fail(ep + ".seed", "expected an integer");
            }
            run.seed = s->get<std::uint64_t>();
        }
    }
    const auto n_s = tm.A_x.rows();
    const auto n_f = tm.A_z.rows();
    const auto n = tm.A_x.cols();
    if (const auto it = j.find("y0"); it != j.end()) {
        const Vec y0 = parse_vec(*it, path + ".y0", n);
        run.x0 = tm.A_x * y0;
        run.z0 = tm.A_z * y0;
    }
    if (const auto it = j.find("xi0"); it != j.end()) {
        const Vec xi0 = parse_vec(*it, path + ".xi0", n);
        run.psi_x0 = tm.A_x * xi0;
        run.psi_z0 = tm.A_z * xi0;
    }
    if (run.x0.size() != n_s) run.x0 = Vec::Zero(n_s);
    if (run.z0.size() != n_f) run.z0 = Vec::Zero(n_f);
    if (run.psi_x0.size() != n_s) run.psi_x0 = Vec::Zero(n_s);
    if (run.psi_z0.size() != n_f) run.psi_z0 = Vec::Zero(n_f);
}

} // namespace

LoadedModel builtin_phospho() {
    LoadedModel lm;
    lm.net = std::make_shared<ReactionNetwork>(build_example_phospho(PhosphoParams{}));
    lm.tm = phospho_transform();
    lm.run.x0 = Vec::Zero(2);
    lm.run.z0 = Vec::Zero(1);
    lm.run.psi_x0 = Vec::Zero(2);
    lm.run.psi_z0 = Vec::Zero(1);
    return lm;
}

LoadedModel load_config(const std::string& path_or_builtin) {
    if (path_or_builtin == "phospho-example") return builtin_phospho();

    std::ifstream in(path_or_builtin);
    if (!in) throw ConfigError("cannot open model file '" + path_or_builtin + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path_or_builtin + "' is not valid JSON: " + e.what());
    }

    const json& sv = need(doc, "schema_version", "");
    if (!sv.is_number_integer() || sv.get<int>() != 1) {
        fail(".schema_version", "unsupported schema version (expected 1)");
    }

    const json& model = need(doc, "model", "");
    const json& species = need(model, "species", "model");
    if (!species.is_array() || species.empty()) fail("model.species", "expected a nonempty array");
    LoadedModel lm;
    lm.net = std::make_shared<ReactionNetwork>();
    for (std::size_t i = 0; i < species.size(); ++i) {
        if (!species[i].is_string()) {
            fail("model.species[" + std::to_string(i) + "]", "expected a string");
        }
        lm.net->species_names.push_back(species[i].get<std::string>());
    }
    const int n = lm.net->n();
    lm.net->epsilon = need_number(model, "epsilon", "model");
    if (!(lm.net->epsilon > 0.0)) fail("model.epsilon", "must be positive");
    lm.net->volume = opt_number(model, "volume", "model", 1.0);
    if (!(lm.net->volume > 0.0)) fail("model.volume", "must be positive");

    const json& reactions = need(model, "reactions", "model");
    if (!reactions.is_array() || reactions.empty()) {
        fail("model.reactions", "expected a nonempty array");
    }
    for (std::size_t i = 0; i < reactions.size(); ++i) {
        const std::string rp = "model.reactions[" + std::to_string(i) + "]";
        const json& rj = reactions[i];
        Reaction r;
        if (const auto it = rj.find("name"); it != rj.end() && it->is_string()) {
            r.name = it->get<std::string>();
        } else {
            r.name = "reaction" + std::to_string(i);
        }
        const json& ts = need(rj, "timescale", rp);
        const std::string tss = ts.is_string() ? ts.get<std::string>() : "";
        if (tss == "slow") {
            r.timescale = Timescale::slow;
        } else if (tss == "fast") {
            r.timescale = Timescale::fast;
        } else {
            fail(rp + ".timescale", "expected \"slow\" or \"fast\"");
        }
        r.stoich = parse_vec(need(rj, "stoich", rp), rp + ".stoich", n);
        r.rate = parse_rate(need(rj, "rate", rp), rp + ".rate", n);
        lm.net->reactions.push_back(std::move(r));
    }

    const json& transform = need(doc, "transform", "");
    lm.tm.A_x = parse_mat(need(transform, "A_x", "transform"), "transform.A_x", n);
    lm.tm.A_z = parse_mat(need(transform, "A_z", "transform"), "transform.A_z", n);
    if (lm.tm.A_x.rows() + lm.tm.A_z.rows() != n) {
        fail("transform", "A_x and A_z rows must add up to the species count");
    }
    const auto parse_names = [&](const char* key, Eigen::Index count,
                                 std::vector<std::string>& out) {
        const auto it = transform.find(key);
        if (it == transform.end()) return;
        if (!it->is_array() || it->size() != static_cast<std::size_t>(count)) {
            fail(std::string("transform.") + key, "expected one name per coordinate");
        }
        for (const auto& s : *it) {
            if (!s.is_string()) fail(std::string("transform.") + key, "expected strings");
            out.push_back(s.get<std::string>());
        }
    };
    parse_names("x_names", lm.tm.A_x.rows(), lm.tm.x_names);
    parse_names("z_names", lm.tm.A_z.rows(), lm.tm.z_names);

    if (const auto it = doc.find("run"); it != doc.end()) {
        if (!it->is_object()) fail(".run", "expected an object");
        apply_run_section(*it, "run", lm.tm, lm.run);
    } else {
        apply_run_section(json::object(), "run", lm.tm, lm.run);
    }

    const auto report = validate_network(*lm.net);
    if (!report.ok()) {
        std::string msg = "model validation failed:";
        for (const auto& v : report.violations) msg += "\n  - " + v;
        throw ValidationError(msg);
    }
    return lm;
}

} // namespace lnared
