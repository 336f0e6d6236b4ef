// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "doctest.h"

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "varfield");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = varfield::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string model(const char* name) { return std::string(VARFIELD_SOURCE_DIR) + "/models/" + name; }

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

}  // namespace

TEST_CASE("elform renders the free-particle equation") {
    const Result r = run({"elform", model("free_particle.vf")});
    CHECK(r.code == 0);
    CHECK(r.out == "-y_{1,1} ω∧dx\n");
    const Result latex = run({"elform", model("free_particle.vf"), "--format", "latex"});
    CHECK(latex.code == 0);
    CHECK(latex.out.find("\\omega") != std::string::npos);
    const Result json = run({"--format", "json", "elform", model("free_particle.vf")});
    REQUIRE(json.code == 0);
    const auto j = nlohmann::json::parse(json.out);
    CHECK(j["schema"] == "varfield-json/1");
    CHECK(j["kind"] == "form");
    CHECK(j["text"] == "-y_{1,1} ω∧dx");
}

TEST_CASE("missing model file exits 2 naming the path") {
    const Result r = run({"elform", "/nonexistent/model.vf"});
    CHECK(r.code == 2);
    CHECK(r.err.find("/nonexistent/model.vf") != std::string::npos);
}

TEST_CASE("parse errors carry the file position") {
    const std::string path = std::string(VARFIELD_SOURCE_DIR) + "/build_cli_bad_model.vf";
    {
        std::ofstream f(path);
        f << "dim 1\nfield y\nlagrangian = z^2\n";
    }
    const Result r = run({"elform", path});
    std::remove(path.c_str());
    CHECK(r.code == 2);
    CHECK(r.err.find(path + ":3:") != std::string::npos);
    CHECK(r.err.find("unknown symbol 'z'") != std::string::npos);
}

TEST_CASE("currents and operators") {
    const Result pc = run({"paircurrent", model("free_particle.vf"), "psiA", "psiB"});
    CHECK(pc.code == 0);
    CHECK((pc.out == "-1\n" || pc.out == "1\n"));
    const Result noether = run({"noether", model("free_particle.vf"), "psiA"});
    CHECK(noether.code == 0);
    CHECK(noether.out == "y_{1}\n");
    const Result wave = run({"noether", model("wave.vf"), "dt"});
    CHECK(wave.code == 0);
    CHECK(wave.out.find("ds_1") != std::string::npos);
    const Result jac = run({"jacobi", model("free_particle.vf"), "psiB"});
    CHECK(jac.code == 0);
    CHECK(jac.out == "0\n");
    CHECK(run({"noether", model("free_particle.vf"), "nope"}).code == 2);
}

TEST_CASE("varsplit prints the split and a zero residual") {
    const Result r = run({"varsplit", model("wave.vf"), "bump", "profile"});
    CHECK(r.code == 0);
    const auto ls = lines(r.out);
    REQUIRE(ls.size() == 4);
    CHECK(ls[0].rfind("euler term: ", 0) == 0);
    CHECK(ls[3] == "residual: 0");
    CHECK(run({"varsplit", model("wave.vf"), "bump", "--order", "2"}).code == 2);
    const Result j = run({"varsplit", model("wave.vf"), "bump", "--format", "json"});
    REQUIRE(j.code == 0);
    CHECK(nlohmann::json::parse(j.out)["kind"] == "variation_split");
}

TEST_CASE("verify exit codes") {
    const Result ok = run({"verify", model("free_particle.vf"), "paircurrent", "--section", "ext1"});
    CHECK(ok.code == 0);
    CHECK(ok.out.rfind("PASS", 0) == 0);
    const Result el = run({"verify", model("wave.vf"), "el", "--section", "separable"});
    CHECK(el.code == 1);
    CHECK(el.out.rfind("FAIL", 0) == 0);
    CHECK(run({"verify", model("wave.vf"), "el", "--section", "travelling"}).code == 0);
    const Result fd = run({"verify", model("free_particle.vf"), "fd", "--section", "ext1", "--field", "psiB"});
    CHECK(fd.code == 0);
    CHECK(fd.out.find("estimate") != std::string::npos);
    CHECK(run({"verify", model("free_particle.vf"), "el", "--section", "nope"}).code == 2);
    CHECK(run({"verify", model("free_particle.vf"), "bogus", "--section", "ext1"}).code == 2);
    CHECK(run({"verify", model("free_particle.vf"), "el"}).code == 2);
    CHECK(run({"verify", model("free_particle.vf"), "el", "--section", "ext1", "--grid", "0:1"}).code == 2);
    const Result json = run({"verify", model("free_particle.vf"), "el", "--section", "ext1", "--format", "json",
                             "--grid", "0:2:5", "--tol", "1e-12"});
    REQUIRE(json.code == 0);
    const auto j = nlohmann::json::parse(json.out);
    CHECK(j["samples"] == 5);
    CHECK(j["tolerance"].get<double>() == 1e-12);
}

TEST_CASE("output is deterministic") {
    for (const char* fmt : {"plain", "json"}) {
        const std::vector<std::string> args{"verify", model("wave.vf"), "fd", "--section", "separable", "--field",
                                            "profile", "--format", fmt};
        CHECK(run(args).out == run(args).out);
        const std::vector<std::string> demo{"ym-demo", "--dim", "2", "--format", fmt};
        CHECK(run(demo).out == run(demo).out);
    }
}

TEST_CASE("ym-demo prints four passing checks") {
    const Result r = run({"ym-demo", "--dim", "2"});
    CHECK(r.code == 0);
    const auto ls = lines(r.out);
    REQUIRE(ls.size() == 4);
    for (const auto& l : ls) CHECK(l.rfind("PASS ", 0) == 0);
    CHECK(run({"ym-demo", "--dim", "5"}).code == 2);
    CHECK(run({"ym-demo", "--group", "su3"}).code == 2);
}

TEST_CASE("config file, overrides and limits") {
    const std::string path = std::string(VARFIELD_SOURCE_DIR) + "/build_cli_config.json";
    {
        std::ofstream f(path);
        f << R"({"format": "json", "grid": "0:1:9", "tol": 1e-10})";
    }
    const Result cfg = run({"--config", path, "verify", model("free_particle.vf"), "el", "--section", "ext1"});
    REQUIRE(cfg.code == 0);
    const auto j = nlohmann::json::parse(cfg.out);
    CHECK(j["samples"] == 9);
    CHECK(j["tolerance"].get<double>() == 1e-10);
    const Result over =
        run({"--config", path, "--format", "plain", "verify", model("free_particle.vf"), "el", "--section", "ext1"});
    CHECK(over.code == 0);
    CHECK(over.out.rfind("PASS", 0) == 0);
    {
        std::ofstream f(path);
        f << R"({"colour": "blue"})";
    }
    CHECK(run({"--config", path, "elform", model("free_particle.vf")}).code == 2);
    std::remove(path.c_str());
    CHECK(run({"--config", path, "elform", model("free_particle.vf")}).code == 2);

    CHECK(run({"--max-order", "0", "elform", model("free_particle.vf")}).code == 2);
    CHECK(run({"--max-order", "1", "elform", model("free_particle.vf")}).code == 2);
    CHECK(run({"--max-order", "2", "elform", model("free_particle.vf")}).code == 0);
    CHECK(run({"--timeout-s", "0", "elform", model("free_particle.vf")}).code == 2);
    const Result slow = run({"--timeout-s", "1e-9", "ym-demo", "--dim", "4"});
    CHECK(slow.code == 2);
    CHECK(slow.err.find("timed out") != std::string::npos);
    CHECK(run({"--help"}).code == 0);
    CHECK(run({}).code == 2);
}
