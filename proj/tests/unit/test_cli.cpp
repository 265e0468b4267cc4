#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "ssmkit/cli.hpp"
#include "ssmkit/io.hpp"

using namespace ssmkit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    Result r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::path(SSMKIT_TEST_TMP) / "cli" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

cplx orbit_value(const json& R, int row, std::vector<int> counts) {
    cplx s = 0.0;
    for (const auto& t : R) {
        if (t[0].get<int>() != row) continue;
        std::vector<int> c(counts.size(), 0);
        for (int a : t[1]) ++c[static_cast<std::size_t>(a - 1)];
        if (c == counts) s += cplx(t[2].get<double>(), t[3].get<double>());
    }
    return s;
}

}  // namespace

TEST_CASE("model command writes manifests") {
    const fs::path dir = scratch("model");
    const auto r = run({"model", "--output.dir", (dir / "chain").string()});
    CHECK(r.code == cli::kOk);
    CHECK(r.out.find("N = 20") != std::string::npos);
    const auto lm = load_manifest(dir / "chain" / "manifest.json");
    CHECK(lm.system.N == 20);
    CHECK(lm.system.forcing.size() == 2);
    CHECK(lm.system.epsilon == 0.1);

    CHECK(run({"model", "--model.name", "lorenz", "--output.dir", (dir / "lorenz").string()}).code == cli::kOk);
    CHECK(load_system(dir / "lorenz" / "manifest.json").N == 4);

    const auto bad = run({"model", "--model.n", "0", "--output.dir", (dir / "bad").string()});
    CHECK(bad.code == cli::kValidation);
    CHECK(bad.err.find("error:") != std::string::npos);
    CHECK(run({"model", "--model.name", "pendulum"}).code == cli::kValidation);
    CHECK(run({"model", "--model.n", "ten"}).code == cli::kValidation);
    CHECK(run({"model", "--no.such.key", "1"}).code == cli::kValidation);
    CHECK(run({}).code == cli::kValidation);
    CHECK(run({"--help"}).code == cli::kOk);
}

TEST_CASE("ssm command on the Lorenz system") {
    const fs::path dir = scratch("ssm_lorenz");
    const auto r = run({"ssm", "--model.name", "lorenz", "--order", "3", "--output.dir", dir.string()});
    REQUIRE(r.code == cli::kOk);
    const json j = json::parse(slurp(dir / "manifold.json"));
    CHECK(j["order"] == 3);
    CHECK(j["N"] == 4);
    CHECK(j["M"] == 2);
    const json& orders = j["orders"];
    REQUIRE(orders.size() == 3);
    CHECK(std::abs(orbit_value(orders[1]["R"], 1, {1, 1}) - 0.5) <= 1e-12);
    CHECK(std::abs(orbit_value(orders[2]["R"], 1, {3, 0}) + 0.25) <= 1e-12);
    CHECK(std::abs(orbit_value(orders[2]["R"], 1, {1, 2}) + 0.125) <= 1e-12);
    CHECK(fs::exists(dir / "resonances.txt"));
    CHECK(r.out.find("order 2") != std::string::npos);

    const fs::path lin = scratch("ssm_linear");
    REQUIRE(run({"ssm", "--model.name", "lorenz", "--order", "1", "--output.dir", lin.string()}).code == cli::kOk);
    CHECK(json::parse(slurp(lin / "manifold.json"))["orders"].size() == 1);
}

TEST_CASE("ssm command on the chain") {
    const fs::path dir = scratch("ssm_chain");
    const auto r = run({"ssm", "--order", "3", "--output.dir", dir.string()});
    REQUIRE(r.code == cli::kOk);
    const json j = json::parse(slurp(dir / "manifold.json"));
    CHECK(j["N"] == 20);
    const auto& lam = j["master"]["lambdas"];
    CHECK(std::abs(lam[0][1].get<double>() - 0.2846) <= 1e-3);
    CHECK(j["master"]["partner"] == json::array({2, 1}));
}

TEST_CASE("frc command") {
    const fs::path dir = scratch("frc");
    const auto r = run({"frc", "--master.mode", "2", "--output.dir", dir.string()});
    REQUIRE(r.code == cli::kOk);
    std::istringstream csv(slurp(dir / "frc.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "Omega,rho,psi,stable,amp_dof_5");
    int stable = 0, unstable = 0, rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        const auto c3 = line.find(',', line.find(',', line.find(',') + 1) + 1);
        const char flag = line[c3 + 1];
        (flag == '1' ? stable : unstable) += 1;
    }
    CHECK(rows >= 200);
    CHECK(stable > 0);
    CHECK(unstable > 0);
    const json j = json::parse(slurp(dir / "frc.json"));
    CHECK(j["eta"] == 1);
    CHECK(j["points"].size() == static_cast<std::size_t>(rows));

    CHECK(run({"frc", "--forcing.epsilon", "0", "--output.dir", dir.string()}).code == cli::kValidation);

    const fs::path svg = scratch("frc_svg");
    const auto s = run({"frc", "--master.mode", "2", "--forcing.samples", "21", "--output.dofs", "1,5",
                        "--output.svg", "true", "--output.dir", svg.string()});
    REQUIRE(s.code == cli::kOk);
    CHECK(fs::exists(svg / "frc_dof_1.svg"));
    CHECK(fs::exists(svg / "frc_dof_5.svg"));
    CHECK(slurp(svg / "frc_dof_5.svg").find("<svg") != std::string::npos);
    CHECK(run({"frc", "--output.dofs", "[21]", "--output.dir", svg.string()}).code == cli::kValidation);
}

TEST_CASE("backbone command") {
    const fs::path dir = scratch("backbone");
    const auto r = run({"backbone", "--model.c", "0", "--backbone.samples", "11", "--output.dir", dir.string()});
    REQUIRE(r.code == cli::kOk);
    std::istringstream csv(slurp(dir / "backbone.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "rho,omega,amp_dof_5");
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 11);
    const auto damped = run({"backbone", "--output.dir", dir.string()});
    CHECK(damped.code == cli::kValidation);
    CHECK(damped.err.find("forced response") != std::string::npos);
}

TEST_CASE("verify command") {
    const fs::path dir = scratch("verify");
    const auto r = run({"verify", "--model.name", "lorenz", "--order", "3", "--output.dir", dir.string()});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.find("PASS") != std::string::npos);
    const json j = json::parse(slurp(dir / "verify.json"));
    CHECK(j["pass"] == true);
    CHECK(j["radii"].size() == 7);
}

TEST_CASE("outputs are reproducible across runs and thread counts") {
    const fs::path a = scratch("repro_a"), b = scratch("repro_b");
    const std::vector<std::string> common{"frc", "--master.mode", "2", "--forcing.samples", "31"};
    auto with = [&](const fs::path& d, const std::string& threads) {
        auto v = common;
        v.insert(v.end(), {"--output.dir", d.string(), "--threads", threads});
        return run(v);
    };
    REQUIRE(with(a, "1").code == cli::kOk);
    REQUIRE(with(b, "4").code == cli::kOk);
    CHECK(slurp(a / "frc.csv") == slurp(b / "frc.csv"));
    CHECK(slurp(a / "frc.json") == slurp(b / "frc.json"));
    REQUIRE(run({"ssm", "--output.dir", a.string()}).code == cli::kOk);
    REQUIRE(run({"ssm", "--output.dir", b.string()}).code == cli::kOk);
    CHECK(slurp(a / "manifold.json") == slurp(b / "manifold.json"));
}

TEST_CASE("configuration precedence") {
    const fs::path dir = scratch("config");
    std::ofstream(dir / "c.json") << R"({"order": 2, "model": {"name": "lorenz"}, "output": {"dir": ")"
                                  << (dir / "file").string() << R"("}})";
    const json file = json::parse(slurp(dir / "c.json"));
    CHECK(cli::resolve_config(file, {})["order"] == 2);
    CHECK(cli::resolve_config(file, {{"order", "3"}})["order"] == 3);
    CHECK(cli::resolve_config(json(), {})["order"] == 5);
    CHECK(cli::resolve_config(file, {})["model"]["n"] == 10);
    CHECK(cli::resolve_config(json(), {{"output.dofs", "1,2"}})["output"]["dofs"] == json::array({1, 2}));
    CHECK_THROWS_AS(cli::resolve_config(json::parse(R"({"ordr": 3})"), {}), ValidationError);
    CHECK_THROWS_AS(cli::resolve_config(json::parse(R"({"order": "three"})"), {}), ValidationError);

    const auto r = run({"ssm", "--config", (dir / "c.json").string(), "--order", "3"});
    REQUIRE(r.code == cli::kOk);
    CHECK(json::parse(slurp(dir / "file" / "manifold.json"))["order"] == 3);
    CHECK(run({"ssm", "--config", (dir / "missing.json").string()}).code == cli::kValidation);
}

TEST_CASE("error classes map to exit codes") {
    const fs::path dir = scratch("codes");
    {
        FirstOrderSystem sys;
        sys.N = 2;
        sys.A = SpMatR(2, 2);
        sys.A.insert(0, 0) = -1.0;
        sys.A.insert(1, 1) = -2.0;
        sys.B = SpMatR(2, 2);
        sys.B.setIdentity();
        PolyCoeffs F2(2, 2, 2);
        F2.add(1, {0, 0}, 1.0);
        F2.finalize();
        sys.F.push_back(std::move(F2));
        write_manifest(dir / "outer", sys);
    }
    const auto outer = run({"ssm", "--model.name", "manifest", "--model.manifest", (dir / "outer" / "manifest.json").string(),
                            "--master.select", "smallest", "--master.count", "1", "--order", "2", "--output.dir",
                            (dir / "o").string()});
    CHECK(outer.code == cli::kOuterResonance);
    CHECK(outer.err.find("outer resonance") != std::string::npos);
    const auto warned = run({"ssm", "--model.name", "manifest", "--model.manifest",
                             (dir / "outer" / "manifest.json").string(), "--master.select", "smallest",
                             "--master.count", "1", "--order", "2", "--style", "graph", "--output.dir",
                             (dir / "o").string()});
    CHECK(warned.code == cli::kOk);
    CHECK(warned.err.find("warning: outer resonance") != std::string::npos);
    {
        FirstOrderSystem sys;
        sys.N = 2;
        sys.A = SpMatR(2, 2);
        sys.A.insert(0, 1) = 1.0;
        sys.B = SpMatR(2, 2);
        sys.B.setIdentity();
        write_manifest(dir / "defective", sys);
    }
    const auto defective = run({"ssm", "--model.name", "manifest", "--model.manifest",
                                (dir / "defective" / "manifest.json").string(), "--master.select", "smallest",
                                "--output.dir", (dir / "d").string()});
    CHECK(defective.code == cli::kNumerical);
}

TEST_CASE("installed binary") {
#ifdef SSMKIT_CLI_PATH
    const char* path = SSMKIT_CLI_PATH;
    const fs::path dir = scratch("binary");
    const std::string cmd = std::string(path) + " verify --model.name lorenz --order 3 --output.dir " + dir.string() +
                            " > " + (dir / "stdout.txt").string();
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(slurp(dir / "stdout.txt").find("PASS") != std::string::npos);
    const std::string bad = std::string(path) + " model --model.n 0 --output.dir " + dir.string() + " 2> /dev/null";
    const int status = std::system(bad.c_str());
    CHECK(WEXITSTATUS(status) == cli::kValidation);
#endif
}
