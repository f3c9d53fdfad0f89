#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "lnared/cli.hpp"
#include "lnared/config.hpp"
#include "lnared/csvio.hpp"

using namespace lnared;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> full = {"lnar"};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : full) argv.push_back(a.c_str());
    return run_command(static_cast<int>(argv.size()), argv.data());
}

// Fresh working directory per test case, removed on destruction.
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("lnared_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& leaf = "") const {
        return leaf.empty() ? path.string() : (path / leaf).string();
    }
};

// Two-species slow/fast toy: a is produced, a <-> b interconverts fast,
// b decays. x = a + b is the conserved slow coordinate, z = b the fast one.
json toy_model_json() {
    json doc;
    doc["schema_version"] = 1;
    doc["model"] = {
        {"species", {"a", "b"}},
        {"epsilon", 0.05},
        {"reactions",
         json::array(
             {json{{"name", "make_a"},
                   {"timescale", "slow"},
                   {"stoich", {1, 0}},
                   {"rate", {{"form", "mass_action"}, {"k", 2.0}, {"orders", {0, 0}}}}},
              json{{"name", "fwd"},
                   {"timescale", "fast"},
                   {"stoich", {-1, 1}},
                   {"rate", {{"form", "mass_action"}, {"k", 1.0}, {"orders", {1, 0}}}}},
              json{{"name", "bak"},
                   {"timescale", "fast"},
                   {"stoich", {1, -1}},
                   {"rate", {{"form", "mass_action"}, {"k", 1.0}, {"orders", {0, 1}}}}},
              json{{"name", "loss"},
                   {"timescale", "slow"},
                   {"stoich", {0, -1}},
                   {"rate", {{"form", "affine_product"}, {"k", 0.5}, {"factors", {{0, 0, 1}}}}}}})}};
    doc["transform"] = {{"A_x", {{1, 1}}},
                        {"A_z", {{0, 1}}},
                        {"x_names", {"tot"}},
                        {"z_names", {"b"}}};
    doc["run"] = {{"t_span", {0, 20}},
                  {"t_points", 5},
                  {"rtol", 1e-7},
                  {"atol", 1e-9},
                  {"eps_list", {0.04, 0.08}},
                  {"ensemble", {{"n", 500}, {"dt", 0.002}, {"seed", 7}}},
                  {"y0", {2, 1}},
                  {"xi0", {0.5, -0.5}}};
    return doc;
}

std::string write_model(const TempDir& dir, const json& doc, const std::string& name) {
    const auto p = dir.str(name);
    std::ofstream out(p);
    out << doc.dump(2) << '\n';
    return p;
}

bool config_error_mentions(const std::string& file, const std::string& needle) {
    try {
        load_config(file);
    } catch (const ConfigError& e) {
        return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
}

} // namespace

TEST_SUITE("cli") {

    TEST_CASE("doubles round-trip through their text form") {
        for (const double v : {0.1, 1.0 / 3.0, -2.5e300, 1e-300, 0.0, 6.02214076e23,
                               4.9406564584124654e-324}) {
            const std::string s = format_double(v);
            CHECK(s.find('e') != std::string::npos);
            CHECK(parse_double(s) == v);
        }
        CHECK_THROWS_AS(parse_double("abc"), ConfigError);
        CHECK_THROWS_AS(parse_double("1.5x"), ConfigError);
        CHECK_THROWS_AS(parse_double(""), ConfigError);
    }

    TEST_CASE("csv files round-trip bit-exactly") {
        const TempDir dir("csv");
        CsvTable t;
        t.header = {"t", "a", "b"};
        t.rows = {{0.0, 0.1, -1.0 / 7.0}, {2.5, 1e-200, 3.14159265358979}};
        write_csv(t, dir.str("x.csv"));
        const auto r = read_csv(dir.str("x.csv"));
        REQUIRE(r.header == t.header);
        REQUIRE(r.rows.size() == t.rows.size());
        for (size_t i = 0; i < t.rows.size(); ++i) {
            for (size_t j = 0; j < t.rows[i].size(); ++j) {
                CHECK(r.rows[i][j] == t.rows[i][j]);
            }
        }

        CHECK_THROWS_AS(read_csv(dir.str("missing.csv")), ConfigError);
        std::ofstream bad(dir.str("bad.csv"));
        bad << "a,b\n1.0\n";
        bad.close();
        CHECK_THROWS_AS(read_csv(dir.str("bad.csv")), ConfigError);
    }

    TEST_CASE("the builtin model loads with its documented defaults") {
        const auto lm = load_config("phospho-example");
        REQUIRE(lm.net);
        CHECK(lm.net->n() == 3);
        CHECK(lm.net->m() == 6);
        CHECK(lm.net->epsilon == 0.1);
        CHECK(lm.net->species_names[0] == "x*");
        CHECK(lm.tm.x_names == std::vector<std::string>{"v", "g"});
        CHECK(lm.tm.z_names == std::vector<std::string>{"c"});
        CHECK(lm.run.t0 == 0.0);
        CHECK(lm.run.t1 == 50.0);
        CHECK(lm.run.t_points == 201);
        CHECK(lm.run.ensemble_n == 100000);
        CHECK(lm.run.ensemble_dt == 1e-3);
        CHECK(lm.run.x0.norm() == 0.0);
        CHECK(lm.run.psi_z0.norm() == 0.0);

        const auto grid = lm.run.t_grid();
        REQUIRE(grid.size() == 201);
        CHECK(grid.front() == 0.0);
        CHECK(grid.back() == 50.0);
        CHECK(grid[4] == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("json model files load with transformed initial conditions") {
        const TempDir dir("load");
        const auto file = write_model(dir, toy_model_json(), "toy.json");
        const auto lm = load_config(file);
        CHECK(lm.net->n() == 2);
        CHECK(lm.net->m() == 4);
        CHECK(lm.net->epsilon == 0.05);
        CHECK(lm.net->reactions[1].timescale == Timescale::fast);
        CHECK(lm.net->reactions[3].name == "loss");
        CHECK(lm.tm.x_names == std::vector<std::string>{"tot"});
        CHECK(lm.run.t1 == 20.0);
        CHECK(lm.run.t_points == 5);
        CHECK(lm.run.rtol == 1e-7);
        REQUIRE(lm.run.eps_list.size() == 2);
        CHECK(lm.run.eps_list[0] == 0.08); // sorted to decreasing order
        CHECK(lm.run.eps_list[1] == 0.04);
        CHECK(lm.run.ensemble_n == 500);
        CHECK(lm.run.seed == 7);
        // y0 = (2, 1) maps to x = a + b = 3, z = b = 1.
        REQUIRE(lm.run.x0.size() == 1);
        CHECK(lm.run.x0[0] == 3.0);
        CHECK(lm.run.z0[0] == 1.0);
        CHECK(lm.run.psi_x0[0] == 0.0);
        CHECK(lm.run.psi_z0[0] == -0.5);
    }

    TEST_CASE("schema violations name the offending field") {
        const TempDir dir("schema");
        auto doc = toy_model_json();

        doc["schema_version"] = 2;
        CHECK(config_error_mentions(write_model(dir, doc, "v2.json"), "schema_version"));

        doc = toy_model_json();
        doc["model"].erase("epsilon");
        CHECK(config_error_mentions(write_model(dir, doc, "noeps.json"), "model.epsilon"));

        doc = toy_model_json();
        doc["model"]["reactions"][1]["timescale"] = "medium";
        CHECK(config_error_mentions(write_model(dir, doc, "ts.json"),
                                    "model.reactions[1].timescale"));

        doc = toy_model_json();
        doc["run"]["eps_list"] = {0.1, 0.0};
        CHECK(config_error_mentions(write_model(dir, doc, "eps.json"), "run.eps_list"));

        doc = toy_model_json();
        doc["model"]["reactions"][0]["rate"]["form"] = "hill";
        CHECK(config_error_mentions(write_model(dir, doc, "form.json"), "rate.form"));

        doc = toy_model_json();
        doc["transform"]["A_z"] = json::array();
        CHECK(config_error_mentions(write_model(dir, doc, "az.json"), "transform.A_z"));

        std::ofstream(dir.str("broken.json")) << "{not json";
        CHECK(config_error_mentions(dir.str("broken.json"), "not valid JSON"));

        CHECK_THROWS_AS(load_config(dir.str("nope.json")), ConfigError);
    }

    TEST_CASE("bad command lines exit with the usage code") {
        CHECK(run_cli({"frobnicate"}) == 64);
        CHECK(run_cli({}) == 64);
        CHECK(run_cli({"moments", "--no-such-flag"}) == 64);
        CHECK(run_cli({"--help"}) == 0);
    }

    TEST_CASE("the moments command writes csv plus a manifest") {
        const TempDir dir("moments");
        CHECK(run_cli({"moments", "--model", "phospho-example", "--out", dir.str(),
                       "--tspan", "0:2", "--grid", "5", "--which", "both"}) == 0);

        const auto red = read_csv(dir.str("moments_reduced.csv"));
        REQUIRE(red.rows.size() == 5);
        CHECK(red.header[0] == "t");
        CHECK(red.header[1] == "v");
        CHECK(red.header[2] == "g");
        CHECK(red.header[3] == "m[0]");
        CHECK(red.rows[0][0] == 0.0);
        CHECK(red.rows[4][0] == 2.0);

        const auto orig = read_csv(dir.str("moments_original.csv"));
        REQUIRE(orig.rows.size() == 5);
        CHECK(orig.header[3] == "c"); // fast coordinate rides along

        const auto manifest = json::parse(std::ifstream(dir.str("manifest.json")));
        CHECK(manifest["command"] == "moments");
        CHECK(manifest["eps"] == 0.1);
        REQUIRE(manifest["files"].size() == 2);
    }

    TEST_CASE("the reduce command emits the manifold summary") {
        const TempDir dir("reduce");
        CHECK(run_cli({"reduce", "--model", "phospho-example", "--out", dir.str(),
                       "--tspan", "0:2", "--grid", "4"}) == 0);
        const auto doc = json::parse(std::ifstream(dir.str("reduce.json")));
        CHECK(doc["all_hurwitz"] == true);
        REQUIRE(doc["t"].size() == 4);
        REQUIRE(doc["xbar"].size() == 4);
        REQUIRE(doc["gamma1"].size() == 4);
        CHECK(doc["x_names"] == json({"v", "g"}));
        for (const auto& m : doc["hurwitz_margin"]) CHECK(m.get<double>() < -0.1);
    }

    TEST_CASE("the check command validates the example assumptions") {
        const TempDir dir("check");
        CHECK(run_cli({"check", "--model", "phospho-example", "--out", dir.str(),
                       "--tspan", "0:5", "--grid", "5"}) == 0);
        const auto doc = json::parse(std::ifstream(dir.str("check.json")));
        CHECK(doc["all_pass"] == true);
        REQUIRE(doc["points"].size() == 5);
        CHECK(doc["worst_margin"].get<double>() < 0.0);
    }

    TEST_CASE("the sde command writes ensemble statistics") {
        const TempDir dir("sde");
        CHECK(run_cli({"sde", "--model", "phospho-example", "--out", dir.str(),
                       "--system", "reduced", "--n", "64", "--dt", "0.01",
                       "--tspan", "0:0.5", "--grid", "2", "--seed", "3",
                       "--threads", "1"}) == 0);
        const auto table = read_csv(dir.str("sde.csv"));
        REQUIRE(table.rows.size() == 2);
        CHECK(table.header[0] == "t");
        bool has_se = false;
        for (const auto& h : table.header) has_se = has_se || h == "se_m[0]";
        CHECK(has_se);
        const auto manifest = json::parse(std::ifstream(dir.str("manifest.json")));
        CHECK(manifest["system"] == "reduced");
        CHECK(manifest["n_realizations"] == 64);
        CHECK(manifest["seed"] == 3);
    }

    TEST_CASE("the sweep command records errors and slope fits") {
        const TempDir dir("sweep");
        CHECK(run_cli({"sweep", "--model", "phospho-example", "--out", dir.str(),
                       "--eps", "0.1,0.05", "--tspan", "0:5", "--grid", "5"}) == 0);
        const auto table = read_csv(dir.str("sweep.csv"));
        REQUIRE(table.rows.size() == 2);
        CHECK(table.header == std::vector<std::string>{"eps", "e_x", "e_m", "e_M"});
        CHECK(table.rows[0][0] == 0.1);
        CHECK(table.rows[1][3] < table.rows[0][3]); // e_M shrinks with eps

        const auto doc = json::parse(std::ifstream(dir.str("sweep.json")));
        CHECK(doc["fit_M"]["degenerate"] == false);
        const double slope = doc["fit_M"]["slope"].get<double>();
        CHECK(slope > 0.2);
        CHECK(slope < 2.0);
    }

    TEST_CASE("input problems exit 1 and numerical failures exit 2") {
        const TempDir dir("fail");
        CHECK(run_cli({"moments", "--model", dir.str("absent.json"),
                       "--out", dir.str()}) == 1);
        CHECK(run_cli({"moments", "--model", "phospho-example", "--out", dir.str(),
                       "--which", "sideways"}) == 1);
        CHECK(run_cli({"moments", "--model", "phospho-example", "--out", dir.str(),
                       "--tspan", "5:1"}) == 1);
        CHECK(run_cli({"sde", "--model", "phospho-example", "--out", dir.str(),
                       "--system", "sideways"}) == 1);

        // Slow coordinate mixing a fast reaction: rejected at transform time.
        auto doc = toy_model_json();
        doc["transform"]["A_x"] = {{1, 0}};
        CHECK(run_cli({"moments", "--model", write_model(dir, doc, "badax.json"),
                       "--out", dir.str()}) == 1);

        // Negative initial copy number drives a rate negative: a domain fault.
        doc = toy_model_json();
        doc["run"]["y0"] = {-5, 1};
        CHECK(run_cli({"moments", "--model", write_model(dir, doc, "neg.json"),
                       "--out", dir.str(), "--which", "original", "--tspan", "0:1",
                       "--grid", "3"}) == 2);
    }
}
