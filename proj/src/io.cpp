#include "ssmkit/io.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace ssmkit {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
    return in;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
    return out;
}

std::vector<std::string> split(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

bool skip_line(const std::string& line) {
    const auto p = line.find_first_not_of(" \t\r");
    return p == std::string::npos || line[p] == '%' || line[p] == '#';
}

[[noreturn]] void fail(const fs::path& path, std::size_t line_no, const std::string& what) {
    throw IoError(fmt::format("{}:{}: {}", path.string(), line_no, what));
}

long long parse_int(const std::string& tok, const fs::path& path, std::size_t line_no) {
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(tok.c_str(), &end, 10);
    if (errno != 0 || end == tok.c_str() || *end != '\0') fail(path, line_no, fmt::format("'{}' is not an integer", tok));
    return v;
}

double parse_double(const std::string& tok, const fs::path& path, std::size_t line_no) {
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(tok.c_str(), &end);
    if (errno == ERANGE || end == tok.c_str() || *end != '\0') fail(path, line_no, fmt::format("'{}' is not a number", tok));
    return v;
}

json read_json(const fs::path& path) {
    auto in = open_in(path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw IoError(fmt::format("{}: invalid JSON: {}", path.string(), e.what()));
    }
}

fs::path resolve(const fs::path& base, const json& j, const char* key) {
    if (!j.is_string()) throw ValidationError(fmt::format("manifest field '{}' must be a file name", key));
    fs::path p = j.get<std::string>();
    return p.is_absolute() ? p : base / p;
}

std::vector<Harmonic> read_forcing(const json& manifest, int dim) {
    std::vector<Harmonic> out;
    if (!manifest.contains("forcing")) return out;
    const json& list = manifest.at("forcing");
    if (!list.is_array()) throw ValidationError("manifest field 'forcing' must be an array");
    for (std::size_t h = 0; h < list.size(); ++h) {
        const json& entry = list[h];
        if (entry.value("state_dependent", false) || entry.contains("tensor") || entry.contains("degree")) {
            throw ValidationError(
                "state-dependent forcing is not supported; only position-independent harmonics are accepted");
        }
        Harmonic harm;
        const json& kappa = entry.at("kappa");
        if (kappa.is_number_integer()) {
            harm.kappa = {kappa.get<int>()};
        } else {
            harm.kappa = kappa.get<std::vector<int>>();
        }
        const auto re = entry.at("re").get<std::vector<double>>();
        const auto im = entry.contains("im") ? entry.at("im").get<std::vector<double>>() : std::vector<double>(re.size(), 0.0);
        if (static_cast<int>(re.size()) != dim || static_cast<int>(im.size()) != dim) {
            throw ValidationError(fmt::format("forcing harmonic {} has length {}, expected {}", h + 1, re.size(), dim));
        }
        harm.amplitude.resize(dim);
        for (int r = 0; r < dim; ++r) harm.amplitude[r] = cplx(re[static_cast<std::size_t>(r)], im[static_cast<std::size_t>(r)]);
        out.push_back(std::move(harm));
    }
    return out;
}

json forcing_json(const std::vector<Harmonic>& forcing) {
    json list = json::array();
    for (const auto& h : forcing) {
        std::vector<double> re(static_cast<std::size_t>(h.amplitude.size())), im(re.size());
        for (Eigen::Index r = 0; r < h.amplitude.size(); ++r) {
            re[static_cast<std::size_t>(r)] = h.amplitude[r].real();
            im[static_cast<std::size_t>(r)] = h.amplitude[r].imag();
        }
        list.push_back({{"kappa", h.kappa}, {"re", re}, {"im", im}});
    }
    return list;
}

std::vector<PolyCoeffs> read_nonlinearity(const json& manifest, const fs::path& base, std::size_t rows,
                                          std::size_t vars) {
    std::map<int, PolyCoeffs> by_degree;
    if (!manifest.contains("nonlinearity")) return {};
    json files = manifest.at("nonlinearity");
    if (files.is_string()) files = json::array({files});
    for (const auto& f : files) {
        for (auto& pc : read_tensor(resolve(base, f, "nonlinearity"), rows, vars)) {
            auto [it, inserted] = by_degree.try_emplace(pc.degree(), pc.degree(), rows, vars);
            for (std::size_t t = 0; t < pc.nnz(); ++t) it->second.add(pc.row(t), pc.index(t), pc.value(t));
        }
    }
    std::vector<PolyCoeffs> out;
    for (auto& [deg, pc] : by_degree) {
        pc.finalize();
        out.push_back(std::move(pc));
    }
    return out;
}

}  // namespace

std::string to_string(Variant v) { return v == Variant::L1 ? "L1" : "L2"; }

std::string to_string(NChoice c) {
    switch (c) {
        case NChoice::MinusK: return "MinusK";
        case NChoice::MassM: return "MassM";
        case NChoice::Identity: return "Identity";
    }
    return "Identity";
}

Variant parse_variant(const std::string& s) {
    if (s == "L1") return Variant::L1;
    if (s == "L2") return Variant::L2;
    throw ValidationError(fmt::format("unknown first-order variant '{}' (expected L1 or L2)", s));
}

NChoice parse_n_choice(const std::string& s) {
    if (s == "MinusK") return NChoice::MinusK;
    if (s == "MassM") return NChoice::MassM;
    if (s == "Identity") return NChoice::Identity;
    throw ValidationError(fmt::format("unknown N choice '{}' (expected MinusK, MassM or Identity)", s));
}

SpMatR read_matrix_market(const fs::path& path) {
    auto in = open_in(path);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) fail(path, 1, "empty file");
    ++line_no;
    const auto header = split(line);
    if (header.size() < 5 || header[0] != "%%MatrixMarket" || header[1] != "matrix" || header[2] != "coordinate") {
        fail(path, line_no, "expected '%%MatrixMarket matrix coordinate <field> <symmetry>' header");
    }
    const std::string& field = header[3];
    const std::string& symmetry = header[4];
    if (field != "real" && field != "integer") fail(path, line_no, fmt::format("unsupported field '{}'", field));
    if (symmetry != "general" && symmetry != "symmetric") {
        fail(path, line_no, fmt::format("unsupported symmetry '{}'", symmetry));
    }
    long long rows = -1, cols = -1, nnz = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (skip_line(line)) continue;
        const auto tok = split(line);
        if (tok.size() != 3) fail(path, line_no, "expected 'rows cols entries'");
        rows = parse_int(tok[0], path, line_no);
        cols = parse_int(tok[1], path, line_no);
        nnz = parse_int(tok[2], path, line_no);
        if (rows < 0 || cols < 0 || nnz < 0) fail(path, line_no, "negative size");
        break;
    }
    if (rows < 0) fail(path, line_no, "missing size line");
    std::vector<Eigen::Triplet<double>> trip;
    long long seen = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (skip_line(line)) continue;
        const auto tok = split(line);
        if (tok.size() != 3) fail(path, line_no, "expected 'row col value'");
        const long long r = parse_int(tok[0], path, line_no);
        const long long c = parse_int(tok[1], path, line_no);
        const double v = parse_double(tok[2], path, line_no);
        if (r < 1 || r > rows || c < 1 || c > cols) {
            fail(path, line_no, fmt::format("index ({}, {}) out of range for a {}x{} matrix", r, c, rows, cols));
        }
        trip.emplace_back(static_cast<int>(r - 1), static_cast<int>(c - 1), v);
        if (symmetry == "symmetric" && r != c) trip.emplace_back(static_cast<int>(c - 1), static_cast<int>(r - 1), v);
        ++seen;
    }
    if (seen != nnz) fail(path, line_no, fmt::format("header declares {} entries, found {}", nnz, seen));
    SpMatR A(rows, cols);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

void write_matrix_market(const fs::path& path, const SpMatR& A) {
    auto out = open_out(path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << fmt::format("{} {} {}\n", A.rows(), A.cols(), A.nonZeros());
    for (int k = 0; k < A.outerSize(); ++k) {
        for (SpMatR::InnerIterator it(A, k); it; ++it) {
            out << fmt::format("{} {} {:.17g}\n", it.row() + 1, it.col() + 1, it.value());
        }
    }
}

std::vector<PolyCoeffs> read_tensor(const fs::path& path, std::size_t rows, std::size_t vars) {
    auto in = open_in(path);
    std::map<int, PolyCoeffs> by_degree;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (skip_line(line)) continue;
        const auto tok = split(line);
        if (tok.size() < 4) {
            fail(path, line_no, "expected 'row i1 ... ik value' with k >= 2");
        }
        const int degree = static_cast<int>(tok.size()) - 2;
        const long long row = parse_int(tok[0], path, line_no);
        if (row < 1 || static_cast<std::size_t>(row) > rows) {
            fail(path, line_no, fmt::format("row index {} out of range 1..{}", row, rows));
        }
        std::vector<int> idx(static_cast<std::size_t>(degree));
        for (int m = 0; m < degree; ++m) {
            const long long a = parse_int(tok[static_cast<std::size_t>(m + 1)], path, line_no);
            if (a < 1 || static_cast<std::size_t>(a) > vars) {
                fail(path, line_no, fmt::format("variable index {} out of range 1..{}", a, vars));
            }
            idx[static_cast<std::size_t>(m)] = static_cast<int>(a - 1);
        }
        const double value = parse_double(tok.back(), path, line_no);
        auto [it, inserted] = by_degree.try_emplace(degree, degree, rows, vars);
        it->second.add(static_cast<std::size_t>(row - 1), idx, value);
    }
    std::vector<PolyCoeffs> out;
    for (auto& [deg, pc] : by_degree) {
        pc.finalize();
        out.push_back(std::move(pc));
    }
    return out;
}

void write_tensor(const fs::path& path, const std::vector<PolyCoeffs>& coeffs) {
    auto out = open_out(path);
    out << "# row i1 ... ik value (1-based)\n";
    for (const auto& pc : coeffs) {
        if (!pc.is_real()) throw ValidationError("only real coefficients can be written to a tensor file");
        for (std::size_t t = 0; t < pc.nnz(); ++t) {
            std::string line = fmt::format("{}", pc.row(t) + 1);
            for (int a : pc.index(t)) line += fmt::format(" {}", a + 1);
            line += fmt::format(" {:.17g}\n", pc.value(t).real());
            out << line;
        }
    }
}

LoadedModel load_manifest(const fs::path& manifest) {
    const json j = read_json(manifest);
    const fs::path base = manifest.parent_path();
    LoadedModel model;
    try {
        const std::string kind = j.value("kind", "mechanical");
        if (kind == "mechanical") {
            if (!j.contains("stiffness")) throw ValidationError("stiffness matrix required");
            if (!j.contains("mass")) throw ValidationError("mass matrix required");
            MechanicalSystem mech;
            mech.K = read_matrix_market(resolve(base, j.at("stiffness"), "stiffness"));
            mech.M = read_matrix_market(resolve(base, j.at("mass"), "mass"));
            mech.n = static_cast<int>(mech.K.rows());
            if (j.contains("damping")) {
                mech.C = read_matrix_market(resolve(base, j.at("damping"), "damping"));
            } else {
                mech.C = SpMatR(mech.n, mech.n);
            }
            if (j.contains("n") && j.at("n").get<int>() != mech.n) {
                throw ValidationError(fmt::format("manifest declares n = {} but the stiffness matrix is {}x{}",
                                                  j.at("n").get<int>(), mech.K.rows(), mech.K.cols()));
            }
            const auto n = static_cast<std::size_t>(mech.n);
            // Velocity-dependent coefficients index (x, x'), i.e. 2n variables.
            mech.f = read_nonlinearity(j, base, n, j.value("velocity_dependent", false) ? 2 * n : n);
            mech.forcing = read_forcing(j, mech.n);
            mech.epsilon = j.value("epsilon", 0.0);
            mech.validate();
            const bool sym = mech.is_symmetric();
            model.variant = j.contains("variant") ? parse_variant(j.at("variant").get<std::string>())
                                                  : (sym ? Variant::L2 : Variant::L1);
            model.n_choice = j.contains("n_choice") ? parse_n_choice(j.at("n_choice").get<std::string>())
                                                    : (sym ? NChoice::MassM : NChoice::Identity);
            model.system = build_first_order(mech, model.variant, model.n_choice);
            model.mechanical = std::move(mech);
        } else if (kind == "first_order") {
            if (!j.contains("A") || !j.contains("B")) throw ValidationError("matrices A and B required");
            FirstOrderSystem sys;
            sys.A = read_matrix_market(resolve(base, j.at("A"), "A"));
            sys.B = read_matrix_market(resolve(base, j.at("B"), "B"));
            sys.N = static_cast<int>(sys.A.rows());
            const auto N = static_cast<std::size_t>(sys.N);
            sys.F = read_nonlinearity(j, base, N, N);
            sys.forcing = read_forcing(j, sys.N);
            sys.epsilon = j.value("epsilon", 0.0);
            sys.symmetric = j.value("symmetric", false);
            sys.n_dof = j.value("n_dof", 0);
            sys.validate();
            model.system = std::move(sys);
        } else {
            throw ValidationError(fmt::format("unknown manifest kind '{}'", kind));
        }
    } catch (const json::exception& e) {
        throw ValidationError(fmt::format("{}: malformed manifest: {}", manifest.string(), e.what()));
    }
    return model;
}

FirstOrderSystem load_system(const fs::path& manifest) { return load_manifest(manifest).system; }

fs::path write_manifest(const fs::path& dir, const MechanicalSystem& mech, std::optional<Variant> variant,
                        std::optional<NChoice> n_choice) {
    mech.validate();
    fs::create_directories(dir);
    write_matrix_market(dir / "mass.mtx", mech.M);
    write_matrix_market(dir / "damping.mtx", mech.C);
    write_matrix_market(dir / "stiffness.mtx", mech.K);
    json j{{"kind", "mechanical"}, {"n", mech.n}, {"mass", "mass.mtx"}, {"damping", "damping.mtx"},
           {"stiffness", "stiffness.mtx"}, {"epsilon", mech.epsilon}};
    if (!mech.f.empty()) {
        write_tensor(dir / "nonlinearity.tns", mech.f);
        j["nonlinearity"] = "nonlinearity.tns";
        for (const auto& pc : mech.f) {
            if (pc.vars() != static_cast<std::size_t>(mech.n)) j["velocity_dependent"] = true;
        }
    }
    if (variant) j["variant"] = to_string(*variant);
    if (n_choice) j["n_choice"] = to_string(*n_choice);
    if (!mech.forcing.empty()) j["forcing"] = forcing_json(mech.forcing);
    const fs::path path = dir / "manifest.json";
    open_out(path) << j.dump(2) << "\n";
    return path;
}

fs::path write_manifest(const fs::path& dir, const FirstOrderSystem& sys) {
    sys.validate();
    fs::create_directories(dir);
    write_matrix_market(dir / "A.mtx", sys.A);
    write_matrix_market(dir / "B.mtx", sys.B);
    json j{{"kind", "first_order"}, {"N", sys.N}, {"A", "A.mtx"}, {"B", "B.mtx"},
           {"epsilon", sys.epsilon}, {"symmetric", sys.symmetric}, {"n_dof", sys.n_dof}};
    if (!sys.F.empty()) {
        write_tensor(dir / "nonlinearity.tns", sys.F);
        j["nonlinearity"] = "nonlinearity.tns";
    }
    if (!sys.forcing.empty()) j["forcing"] = forcing_json(sys.forcing);
    const fs::path path = dir / "manifest.json";
    open_out(path) << j.dump(2) << "\n";
    return path;
}

}  // namespace ssmkit
