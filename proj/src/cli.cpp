#include "ssmkit/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ssmkit/analysis.hpp"
#include "ssmkit/io.hpp"
#include "ssmkit/parallel.hpp"
#include "ssmkit/serialize.hpp"
#include "ssmkit/verify.hpp"

namespace ssmkit::cli {

using nlohmann::json;
namespace fs = std::filesystem;

json default_config() {
    return json::parse(R"({
  "model": {
    "name": "chain",
    "manifest": "",
    "n": 10, "m": 1.0, "k": 1.0, "c": 0.1, "kappa": 0.3,
    "sigma": 1.0, "beta": 1.0,
    "variant": "auto", "n_choice": "auto"
  },
  "master": {"select": "mode", "mode": 1, "count": 2, "indices": []},
  "order": 5,
  "style": "normal_form",
  "style_per_mode": [],
  "tolerance": {"abs": -1.0, "rel": 0.001, "imag_only": false},
  "outer_policy": "auto",
  "forcing": {
    "epsilon": 0.1, "shape": "auto", "amplitude": [],
    "Omega_min": 0.54, "Omega_max": 0.70, "samples": 200, "Omegas": [], "eta": 0
  },
  "backbone": {"rho_max": 0.5, "samples": 51},
  "verify": {"r_min": 0.0001, "r_max": 0.01, "radii": 7, "directions": 16, "seed": 20240917},
  "output": {"dir": "ssmkit_out", "dofs": [5], "svg": false},
  "threads": 0
})");
}

namespace {

void collect_leaves(const json& j, const std::string& prefix, std::vector<std::string>& out) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it->is_object()) {
            collect_leaves(*it, key, out);
        } else {
            out.push_back(key);
        }
    }
}

json::json_pointer pointer_of(const std::string& dotted) {
    std::string p;
    std::stringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) p += "/" + part;
    return json::json_pointer(p);
}

bool same_kind(const json& like, const json& v) {
    if (like.is_number_integer()) return v.is_number_integer();
    if (like.is_number()) return v.is_number();
    if (like.is_boolean()) return v.is_boolean();
    if (like.is_string()) return v.is_string();
    if (like.is_array()) return v.is_array();
    return false;
}

json parse_scalar(const json& like, const std::string& text, const std::string& key) {
    try {
        if (like.is_string()) return text;
        if (like.is_boolean()) {
            if (text == "true" || text == "1") return true;
            if (text == "false" || text == "0") return false;
            throw ValidationError("");
        }
        std::size_t used = 0;
        if (like.is_number_integer()) {
            const long long v = std::stoll(text, &used);
            if (used != text.size()) throw ValidationError("");
            return v;
        }
        const double v = std::stod(text, &used);
        if (used != text.size()) throw ValidationError("");
        return v;
    } catch (const std::exception&) {
        throw ValidationError(fmt::format("invalid value '{}' for --{}", text, key));
    }
}

json parse_override(const json& like, const std::string& text, const std::string& key) {
    if (!like.is_array()) return parse_scalar(like, text, key);
    if (!text.empty() && text.front() == '[') {
        try {
            json v = json::parse(text);
            if (v.is_array()) return v;
        } catch (const json::exception&) {
        }
        throw ValidationError(fmt::format("invalid list '{}' for --{}", text, key));
    }
    json out = json::array();
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        try {
            std::size_t used = 0;
            const double v = std::stod(part, &used);
            if (used != part.size()) throw std::invalid_argument(part);
            if (v == std::floor(v) && part.find_first_of(".eE") == std::string::npos) {
                out.push_back(static_cast<long long>(v));
            } else {
                out.push_back(v);
            }
        } catch (const std::exception&) {
            out.push_back(part);
        }
    }
    return out;
}

void merge_file(json& base, const json& file, const std::string& prefix) {
    if (!file.is_object()) throw ValidationError("config file must hold a JSON object");
    for (auto it = file.begin(); it != file.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!base.contains(it.key())) throw ValidationError(fmt::format("unknown config key '{}'", key));
        json& slot = base[it.key()];
        if (slot.is_object()) {
            merge_file(slot, *it, key);
        } else if (!same_kind(slot, *it)) {
            throw ValidationError(fmt::format("config key '{}' has the wrong type", key));
        } else {
            slot = *it;
        }
    }
}

std::vector<int> int_list(const json& v, const char* key) {
    std::vector<int> out;
    for (const auto& e : v) {
        if (!e.is_number_integer()) throw ValidationError(fmt::format("'{}' must list integers", key));
        out.push_back(e.get<int>());
    }
    return out;
}

std::vector<double> real_list(const json& v, const char* key) {
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ValidationError(fmt::format("'{}' must list numbers", key));
        out.push_back(e.get<double>());
    }
    return out;
}

struct Built {
    FirstOrderSystem sys;
    std::optional<MechanicalSystem> mech;
    std::optional<Variant> variant;
    std::optional<NChoice> n_choice;
};

Built build_model(const json& cfg, bool with_forcing) {
    const json& m = cfg["model"];
    const std::string name = m["name"];
    Built b;
    if (name == "manifest") {
        const std::string path = m["manifest"];
        if (path.empty()) throw ValidationError("model.manifest is required for model.name = manifest");
        LoadedModel lm = load_manifest(path);
        b.sys = std::move(lm.system);
        b.mech = std::move(lm.mechanical);
        b.variant = lm.variant;
        b.n_choice = lm.n_choice;
        if (!with_forcing) b.sys.forcing.clear();
        return b;
    }
    if (name == "lorenz") {
        b.sys = lorenz_extended(m["sigma"].get<double>(), m["beta"].get<double>());
        return b;
    }
    MechanicalSystem mech;
    if (name == "chain") {
        mech = oscillator_chain(m["n"].get<int>(), m["m"].get<double>(), m["k"].get<double>(), m["c"].get<double>(),
                                m["kappa"].get<double>());
    } else if (name == "duffing") {
        mech = duffing(m["m"].get<double>(), m["c"].get<double>(), m["k"].get<double>(), m["kappa"].get<double>());
    } else {
        throw ValidationError(fmt::format("unknown model '{}' (chain, duffing, lorenz, manifest)", name));
    }
    const json& f = cfg["forcing"];
    const double eps = f["epsilon"].get<double>();
    if (with_forcing && eps != 0.0) {
        VecR f0;
        const std::vector<double> amp = real_list(f["amplitude"], "forcing.amplitude");
        std::string shape = f["shape"];
        if (shape == "auto") shape = name == "chain" ? "chain" : "uniform";
        if (!amp.empty()) {
            f0 = Eigen::Map<const VecR>(amp.data(), static_cast<Eigen::Index>(amp.size()));
        } else if (shape == "chain") {
            f0 = chain_forcing_shape();
        } else if (shape == "uniform") {
            f0 = VecR::Ones(mech.n);
        } else if (shape == "first") {
            f0 = VecR::Zero(mech.n);
            f0[0] = 1.0;
        } else {
            throw ValidationError(fmt::format("unknown forcing shape '{}' (auto, chain, uniform, first)", shape));
        }
        add_cosine_forcing(mech, f0, eps);
    }
    const std::string variant = m["variant"];
    const std::string nch = m["n_choice"];
    if (variant == "auto" && nch == "auto") {
        b.sys = build_first_order(mech);
    } else {
        const bool sym = mech.is_symmetric();
        b.variant = variant == "auto" ? (sym ? Variant::L2 : Variant::L1) : parse_variant(variant);
        b.n_choice = nch == "auto" ? (sym ? NChoice::MassM : NChoice::Identity) : parse_n_choice(nch);
        b.sys = build_first_order(mech, *b.variant, *b.n_choice);
    }
    b.mech = std::move(mech);
    return b;
}

Selection selection(const json& cfg) {
    const json& s = cfg["master"];
    const std::string kind = s["select"];
    if (kind == "smallest") return Selection::smallest(s["count"].get<int>());
    if (kind == "slowest") return Selection::slowest(s["count"].get<int>());
    if (kind == "mode") {
        const int mode = s["mode"].get<int>();
        if (mode < 1) throw ValidationError("master.mode must be >= 1");
        return Selection::at({2 * mode - 2, 2 * mode - 1});
    }
    if (kind == "indices") {
        std::vector<int> idx = int_list(s["indices"], "master.indices");
        if (idx.empty()) throw ValidationError("master.indices is empty");
        for (int& i : idx) {
            if (i < 1) throw ValidationError("master.indices are 1-based");
            --i;
        }
        return Selection::at(idx);
    }
    throw ValidationError(fmt::format("unknown master.select '{}' (smallest, slowest, mode, indices)", kind));
}

Style parse_style(const std::string& s) {
    if (s == "normal_form") return Style::NormalForm;
    if (s == "graph") return Style::Graph;
    throw ValidationError(fmt::format("unknown style '{}' (normal_form, graph)", s));
}

StyleSpec style_spec(const json& cfg) {
    StyleSpec spec;
    spec.fallback = parse_style(cfg["style"]);
    for (const auto& e : cfg["style_per_mode"]) {
        if (!e.is_string()) throw ValidationError("style_per_mode must list style names");
        spec.per_mode.push_back(parse_style(e.get<std::string>()));
    }
    return spec;
}

CohomologyOptions cohomology_options(const json& cfg) {
    CohomologyOptions o;
    o.tolerance.abs = cfg["tolerance"]["abs"].get<double>();
    o.tolerance.rel = cfg["tolerance"]["rel"].get<double>();
    o.tolerance.imag_only = cfg["tolerance"]["imag_only"].get<bool>();
    const std::string p = cfg["outer_policy"];
    if (p == "auto") o.outer_policy = OuterPolicy::Auto;
    else if (p == "error") o.outer_policy = OuterPolicy::Error;
    else if (p == "warn") o.outer_policy = OuterPolicy::Warn;
    else throw ValidationError(fmt::format("unknown outer_policy '{}' (auto, error, warn)", p));
    return o;
}

int order_of(const json& cfg) {
    const int order = cfg["order"].get<int>();
    if (order < 1) throw ValidationError("order must be >= 1");
    return order;
}

std::vector<int> output_dofs(const json& cfg, int N) {
    std::vector<int> dofs = int_list(cfg["output"]["dofs"], "output.dofs");
    for (int& d : dofs) {
        if (d < 1 || d > N) throw ValidationError(fmt::format("output dof {} outside 1..{}", d, N));
        --d;
    }
    return dofs;
}

fs::path output_dir(const json& cfg) {
    fs::path dir = cfg["output"]["dir"].get<std::string>();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(fmt::format("cannot create output directory {}: {}", dir.string(), ec.message()));
    return dir;
}

void write_text(const fs::path& path, const std::string& text, std::ostream& out) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError(fmt::format("cannot write {}", path.string()));
    f << text;
    if (!f) throw IoError(fmt::format("write to {} failed", path.string()));
    out << "wrote " << path.string() << "\n";
}

ManifoldExpansion manifold_for(const FirstOrderSystem& sys, const json& cfg, bool polar, std::ostream& err) {
    const SpectrumResult spec = master_spectrum(sys, selection(cfg));
    CohomologyOptions opts = cohomology_options(cfg);
    if (polar) opts.tolerance.imag_only = true;
    ManifoldExpansion me = compute_manifold(sys, spec, order_of(cfg), style_spec(cfg), opts);
    for (const auto& d : me.diagnostics) {
        for (const auto& w : d.warnings) err << "warning: " << w << "\n";
    }
    return me;
}

int cmd_model(const json& cfg, std::ostream& out) {
    const Built b = build_model(cfg, true);
    const fs::path dir = output_dir(cfg);
    const fs::path manifest = b.mech ? write_manifest(dir, *b.mech, b.variant, b.n_choice) : write_manifest(dir, b.sys);
    out << fmt::format("wrote {} (N = {}, {} nonlinear degree(s), {} forcing harmonic(s))\n", manifest.string(),
                       b.sys.N, b.sys.F.size(), b.sys.forcing.size());
    return kOk;
}

int cmd_ssm(const json& cfg, std::ostream& out, std::ostream& err) {
    const Built b = build_model(cfg, false);
    const ManifoldExpansion me = manifold_for(b.sys, cfg, false, err);
    const fs::path dir = output_dir(cfg);
    write_text(dir / "manifold.json", manifold_json(me), out);
    const std::string report = resonance_report_text(me);
    write_text(dir / "resonances.txt", report, out);
    out << report;
    return kOk;
}

int cmd_frc(const json& cfg, std::ostream& out, std::ostream& err) {
    const Built b = build_model(cfg, true);
    if (b.sys.forcing.empty() || b.sys.epsilon == 0.0) {
        throw ValidationError("model is unforced; set forcing.epsilon and a forcing shape, or use backbone");
    }
    const ManifoldExpansion me = manifold_for(b.sys, cfg, true, err);
    const json& f = cfg["forcing"];
    FrcOptions fo;
    fo.Omega_min = f["Omega_min"].get<double>();
    fo.Omega_max = f["Omega_max"].get<double>();
    fo.samples = f["samples"].get<int>();
    fo.Omegas = real_list(f["Omegas"], "forcing.Omegas");
    fo.eta = f["eta"].get<int>();
    fo.output_dofs = output_dofs(cfg, b.sys.N);
    fo.forcing.tolerance.rel = cfg["tolerance"]["rel"].get<double>();
    fo.forcing.tolerance.abs = cfg["tolerance"]["abs"].get<double>();
    const FrcResult res = frc_sweep(b.sys, me, fo);
    for (const auto& w : res.warnings) err << "warning: " << w << "\n";
    const fs::path dir = output_dir(cfg);
    write_text(dir / "frc.csv", frc_csv(res, fo.output_dofs), out);
    write_text(dir / "frc.json", frc_json(res, fo.output_dofs), out);
    if (cfg["output"]["svg"].get<bool>()) {
        for (std::size_t c = 0; c < fo.output_dofs.size(); ++c) {
            const int id = fo.output_dofs[c] + 1;
            write_text(dir / fmt::format("frc_dof_{}.svg", id), frc_svg(res, c, id), out);
        }
    }
    std::size_t stable = 0;
    for (const auto& p : res.points) stable += p.stable ? 1 : 0;
    out << fmt::format("eta = {}, {} fixed points ({} stable)\n", res.eta, res.points.size(), stable);
    return kOk;
}

int cmd_backbone(const json& cfg, std::ostream& out, std::ostream& err) {
    const Built b = build_model(cfg, false);
    const ManifoldExpansion me = manifold_for(b.sys, cfg, true, err);
    const double rho_max = cfg["backbone"]["rho_max"].get<double>();
    const int samples = cfg["backbone"]["samples"].get<int>();
    if (!(rho_max > 0.0) || samples < 2) throw ValidationError("backbone needs rho_max > 0 and samples >= 2");
    std::vector<double> rho;
    for (int k = 0; k < samples; ++k) rho.push_back(rho_max * k / (samples - 1));
    const std::vector<int> dofs = output_dofs(cfg, b.sys.N);
    const auto pts = backbone(me, rho, dofs);
    write_text(output_dir(cfg) / "backbone.csv", backbone_csv(pts, dofs), out);
    return kOk;
}

int cmd_verify(const json& cfg, std::ostream& out, std::ostream& err) {
    const Built b = build_model(cfg, false);
    const ManifoldExpansion me = manifold_for(b.sys, cfg, false, err);
    const json& v = cfg["verify"];
    ResidualOptions ro;
    ro.directions = v["directions"].get<int>();
    ro.seed = v["seed"].get<std::uint64_t>();
    const auto radii = log_radii(v["r_min"].get<double>(), v["r_max"].get<double>(), v["radii"].get<int>());
    const ResidualReport rep = invariance_residual(b.sys, me, radii, ro);
    write_text(output_dir(cfg) / "verify.json", residual_json(rep), out);
    out << fmt::format("residual slope {:.4f}, expected [{:.1f}, {:.1f}]: {}\n", rep.slope, rep.expected_min,
                       rep.expected_max, rep.pass ? "PASS" : "FAIL");
    return kOk;
}

}  // namespace

json resolve_config(const json& file, const std::vector<std::pair<std::string, std::string>>& overrides) {
    json cfg = default_config();
    if (!file.is_null()) merge_file(cfg, file, "");
    for (const auto& [key, text] : overrides) {
        const auto ptr = pointer_of(key);
        if (!cfg.contains(ptr) || cfg.at(ptr).is_object()) throw ValidationError(fmt::format("unknown option --{}", key));
        cfg[ptr] = parse_override(cfg.at(ptr), text, key);
    }
    return cfg;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spectral submanifold reduction of polynomial dynamical systems", "ssmkit"};
    app.require_subcommand(1);
    std::vector<std::string> leaves;
    collect_leaves(default_config(), "", leaves);

    struct Sub {
        const char* name;
        const char* help;
    };
    const Sub subs[] = {{"model", "write a model manifest (matrices, tensors, forcing)"},
                        {"ssm", "compute the invariant manifold and reduced dynamics"},
                        {"frc", "forced response curve of a two-dimensional SSM"},
                        {"backbone", "backbone curve of a conservative two-dimensional SSM"},
                        {"verify", "invariance-residual order test"}};
    std::string config_path;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::App*> apps;
    for (const auto& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        sub->add_option("--config", config_path, "JSON config file");
        for (const auto& key : leaves) sub->add_option("--" + key, values[key], "override " + key);
        apps[s.name] = sub;
    }

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kValidation;
    }

    try {
        json file;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw IoError(fmt::format("cannot open config {}", config_path));
            try {
                file = json::parse(in);
            } catch (const json::exception& e) {
                throw IoError(fmt::format("{}: {}", config_path, e.what()));
            }
        }
        std::vector<std::pair<std::string, std::string>> overrides;
        std::string chosen;
        for (const auto& [name, sub] : apps) {
            if (!sub->parsed()) continue;
            chosen = name;
            for (const auto& key : leaves) {
                if (sub->count("--" + key) > 0) overrides.emplace_back(key, values[key]);
            }
        }
        const json cfg = resolve_config(file, overrides);
        set_max_threads(cfg["threads"].get<int>());
        if (chosen == "model") return cmd_model(cfg, out);
        if (chosen == "ssm") return cmd_ssm(cfg, out, err);
        if (chosen == "frc") return cmd_frc(cfg, out, err);
        if (chosen == "backbone") return cmd_backbone(cfg, out, err);
        return cmd_verify(cfg, out, err);
    } catch (const OuterResonanceError& e) {
        err << "error: " << e.what() << "\n";
        return kOuterResonance;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kNumerical;
    }
}

}  // namespace ssmkit::cli
