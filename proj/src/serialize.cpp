#include "ssmkit/serialize.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace ssmkit {

using nlohmann::json;

namespace {

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

json triplets(const MatC& X, int degree, int M) {
    json out = json::array();
    if (degree < 1) return out;
    const MultiIndexSet set(degree, M);
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        MultiIndex t;
        bool have = false;
        for (Eigen::Index r = 0; r < X.rows(); ++r) {
            const cplx v = X(r, c);
            if (v == cplx(0.0, 0.0)) continue;
            if (!have) {
                t = set.tuple(static_cast<std::uint64_t>(c));
                for (int& a : t) ++a;
                have = true;
            }
            out.push_back(json::array({r + 1, t, v.real(), v.imag()}));
        }
    }
    return out;
}

json resonance_json(const ResonanceReport& rep) {
    auto pairs = [](const std::vector<ResonancePair>& v) {
        json a = json::array();
        for (const auto& p : v) {
            MultiIndex t = p.tuple;
            for (int& x : t) ++x;
            a.push_back({{"tuple", t}, {"mode", p.mode + 1}, {"gap", p.gap}});
        }
        return a;
    };
    return {{"order", rep.order},       {"inner", pairs(rep.inner)},     {"outer", pairs(rep.outer)},
            {"tol_abs", rep.tol_abs},   {"tol_rel", rep.tol_rel},        {"imag_only", rep.imag_only}};
}

std::string g17(double x) { return fmt::format("{:.17g}", x); }

}  // namespace

std::string manifold_json(const ManifoldExpansion& me, const NonAutonomousLeading* nonaut) {
    json doc;
    doc["order"] = me.order;
    doc["N"] = me.N();
    doc["M"] = me.M();
    json styles = json::array();
    for (int j = 0; j < me.M(); ++j) styles.push_back(me.style.for_mode(j) == Style::NormalForm ? "normal_form" : "graph");
    doc["style"] = styles;

    json master;
    json lam = json::array();
    for (Eigen::Index j = 0; j < me.master.lambdas.size(); ++j) lam.push_back(complex_json(me.master.lambdas[j]));
    master["lambdas"] = lam;
    auto columns = [](const MatC& X) {
        json cols = json::array();
        for (Eigen::Index c = 0; c < X.cols(); ++c) {
            json col = json::array();
            for (Eigen::Index r = 0; r < X.rows(); ++r) col.push_back(complex_json(X(r, c)));
            cols.push_back(col);
        }
        return cols;
    };
    master["V"] = columns(me.master.V);
    master["U"] = columns(me.master.U);
    json partner = json::array();
    for (int p : me.master.partner) partner.push_back(p + 1);
    master["partner"] = partner;
    doc["master"] = master;
    json outer = json::array();
    for (Eigen::Index k = 0; k < me.outer.size(); ++k) outer.push_back(complex_json(me.outer[k]));
    doc["outer"] = outer;

    json orders = json::array();
    for (int i = 1; i <= me.order; ++i) {
        json o;
        o["order"] = i;
        o["W"] = triplets(me.W[static_cast<std::size_t>(i)], i, me.M());
        o["R"] = triplets(me.R[static_cast<std::size_t>(i)], i, me.M());
        orders.push_back(o);
    }
    doc["orders"] = orders;

    json diag = json::array();
    for (const auto& d : me.diagnostics) {
        json blocks = json::array();
        for (const auto& b : d.blocks) {
            blocks.push_back({{"lambda", complex_json(b.lambda)},
                              {"columns", b.columns},
                              {"condition", std::isfinite(b.condition) ? json(b.condition) : json("inf")},
                              {"min_norm", b.min_norm}});
        }
        diag.push_back({{"order", d.order}, {"resonances", resonance_json(d.resonances)}, {"blocks", blocks},
                        {"warnings", d.warnings}});
    }
    doc["diagnostics"] = diag;

    if (nonaut != nullptr) {
        json na;
        na["Omega"] = std::vector<double>(nonaut->Omega.data(), nonaut->Omega.data() + nonaut->Omega.size());
        na["epsilon"] = nonaut->epsilon;
        json terms = json::array();
        for (const auto& t : nonaut->terms) {
            json x = json::array(), s = json::array();
            for (Eigen::Index r = 0; r < t.x.size(); ++r) x.push_back(complex_json(t.x[r]));
            for (Eigen::Index r = 0; r < t.s.size(); ++r) s.push_back(complex_json(t.s[r]));
            std::vector<int> res;
            for (int j : t.resonant_modes) res.push_back(j + 1);
            terms.push_back({{"kappa", t.kappa}, {"frequency", t.frequency}, {"x", x}, {"s", s},
                             {"resonant_modes", res}, {"min_norm", t.min_norm}});
        }
        na["terms"] = terms;
        na["warnings"] = nonaut->warnings;
        doc["nonautonomous"] = na;
    }
    return doc.dump(2) + "\n";
}

std::string resonance_report_text(const ManifoldExpansion& me) {
    std::string out = fmt::format("master eigenvalues ({}):\n", me.M());
    for (Eigen::Index j = 0; j < me.master.lambdas.size(); ++j) {
        out += fmt::format("  {}: {:.17g}{:+.17g}i\n", j + 1, me.master.lambdas[j].real(), me.master.lambdas[j].imag());
    }
    for (const auto& d : me.diagnostics) {
        out += fmt::format("order {}: {} inner, {} outer resonances (tol_abs {:.3g}, tol_rel {:.3g})\n", d.order,
                           d.resonances.inner.size(), d.resonances.outer.size(), d.resonances.tol_abs,
                           d.resonances.tol_rel);
        auto line = [&](const char* kind, const ResonancePair& p) {
            std::string t;
            for (std::size_t k = 0; k < p.tuple.size(); ++k) t += fmt::format("{}{}", k ? "," : "", p.tuple[k] + 1);
            out += fmt::format("  {} ({}) -> mode {} gap {:.3g}\n", kind, t, p.mode + 1, p.gap);
        };
        for (const auto& p : d.resonances.inner) line("inner", p);
        for (const auto& p : d.resonances.outer) line("outer", p);
        for (const auto& w : d.warnings) out += "  warning: " + w + "\n";
    }
    return out;
}

std::vector<int> branch_ranks(const FrcResult& frc) {
    std::vector<int> rank(frc.points.size(), 0);
    for (std::size_t k = 1; k < frc.points.size(); ++k) {
        if (frc.points[k].Omega == frc.points[k - 1].Omega) rank[k] = rank[k - 1] + 1;
    }
    return rank;
}

std::string frc_csv(const FrcResult& frc, const std::vector<int>& output_dofs) {
    std::string out = "Omega,rho,psi,stable";
    for (int d : output_dofs) out += fmt::format(",amp_dof_{}", d + 1);
    out += "\n";
    for (const auto& p : frc.points) {
        out += fmt::format("{},{},{},{}", g17(p.Omega), g17(p.rho), g17(p.psi), p.stable ? 1 : 0);
        for (double a : p.amplitudes) out += "," + g17(a);
        out += "\n";
    }
    return out;
}

std::string frc_json(const FrcResult& frc, const std::vector<int>& output_dofs) {
    json doc;
    doc["eta"] = frc.eta;
    std::vector<int> ids;
    for (int d : output_dofs) ids.push_back(d + 1);
    doc["output_dofs"] = ids;
    const auto rank = branch_ranks(frc);
    json pts = json::array();
    for (std::size_t k = 0; k < frc.points.size(); ++k) {
        const auto& p = frc.points[k];
        pts.push_back({{"Omega", p.Omega},
                       {"rho", p.rho},
                       {"psi", p.psi},
                       {"stable", p.stable},
                       {"branch", rank[k]},
                       {"eigenvalues", json::array({complex_json(p.eigenvalues[0]), complex_json(p.eigenvalues[1])})},
                       {"residual", p.residual},
                       {"amplitudes", p.amplitudes}});
    }
    doc["points"] = pts;
    json counts = json::array();
    for (std::size_t k = 0; k < frc.points.size(); ++k) {
        if (k + 1 == frc.points.size() || frc.points[k + 1].Omega != frc.points[k].Omega) {
            counts.push_back({{"Omega", frc.points[k].Omega}, {"roots", rank[k] + 1}});
        }
    }
    doc["root_counts"] = counts;
    doc["warnings"] = frc.warnings;
    return doc.dump(2) + "\n";
}

std::string frc_svg(const FrcResult& frc, std::size_t column, int dof_id) {
    const double W = 640, H = 420, L = 70, Rm = 20, T = 30, Bm = 50;
    double x0 = 0, x1 = 1, y1 = 0;
    if (!frc.points.empty()) {
        x0 = frc.points.front().Omega;
        x1 = frc.points.back().Omega;
        for (const auto& p : frc.points) y1 = std::max(y1, p.amplitudes.at(column));
    }
    if (x1 <= x0) x1 = x0 + 1.0;
    if (y1 <= 0.0) y1 = 1.0;
    y1 *= 1.05;
    auto X = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - Rm); };
    auto Y = [&](double v) { return H - Bm - v / y1 * (H - T - Bm); };

    std::string s = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        W, H, W, H);
    s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", L, H - Bm, W - Rm, H - Bm);
    s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", L, T, L, H - Bm);
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4.0;
        const double yv = y1 * k / 4.0;
        s += fmt::format("<text x=\"{:.2f}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{:.4g}</text>\n", X(xv),
                         H - Bm + 16, xv);
        s += fmt::format("<text x=\"{}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"end\">{:.3g}</text>\n", L - 6,
                         Y(yv) + 4, yv);
    }
    s += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">Omega</text>\n", (L + W - Rm) / 2,
                     H - 12);
    s += fmt::format("<text x=\"14\" y=\"{}\" font-size=\"13\" transform=\"rotate(-90 14 {})\" "
                     "text-anchor=\"middle\">amplitude dof {}</text>\n",
                     (T + H - Bm) / 2, (T + H - Bm) / 2, dof_id);

    // Connect equal-rank roots at consecutive frequencies with equal root counts.
    const auto rank = branch_ranks(frc);
    std::vector<std::size_t> start;
    for (std::size_t k = 0; k < frc.points.size(); ++k) {
        if (rank[k] == 0) start.push_back(k);
    }
    start.push_back(frc.points.size());
    for (std::size_t g = 0; g + 2 < start.size(); ++g) {
        const std::size_t a = start[g], b = start[g + 1], c = start[g + 2];
        if (b - a != c - b) continue;
        for (std::size_t r = 0; r < b - a; ++r) {
            const auto& p = frc.points[a + r];
            const auto& q = frc.points[b + r];
            const bool stable = p.stable && q.stable;
            s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" "
                             "stroke-width=\"1.5\"{}/>\n",
                             X(p.Omega), Y(p.amplitudes[column]), X(q.Omega), Y(q.amplitudes[column]),
                             stable ? "#1f4e9c" : "#c0392b", stable ? "" : " stroke-dasharray=\"4 3\"");
        }
    }
    for (const auto& p : frc.points) {
        s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"1.8\" fill=\"{}\"/>\n", X(p.Omega),
                         Y(p.amplitudes[column]), p.stable ? "#1f4e9c" : "#c0392b");
    }
    s += "</svg>\n";
    return s;
}

std::string backbone_csv(const std::vector<BackbonePoint>& points, const std::vector<int>& output_dofs) {
    std::string out = "rho,omega";
    for (int d : output_dofs) out += fmt::format(",amp_dof_{}", d + 1);
    out += "\n";
    for (const auto& p : points) {
        out += g17(p.rho) + "," + g17(p.omega);
        for (double a : p.amplitudes) out += "," + g17(a);
        out += "\n";
    }
    return out;
}

std::string residual_json(const ResidualReport& rep) {
    json doc{{"order", rep.order},
             {"radii", rep.radii},
             {"residuals", rep.residuals},
             {"slope", rep.slope},
             {"expected_slope", json::array({rep.expected_min, rep.expected_max})},
             {"pass", rep.pass}};
    return doc.dump(2) + "\n";
}

}  // namespace ssmkit
