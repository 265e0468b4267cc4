#pragma once

// Order-by-order solution of the invariance equation B DW R = A W + F(W).

#include <optional>
#include <string>
#include <vector>

#include "ssmkit/model.hpp"
#include "ssmkit/spectrum.hpp"

namespace ssmkit {

enum class Style { NormalForm, Graph };

/// Style per master mode, applied to the corresponding row of every R_i.
struct StyleSpec {
    Style fallback = Style::NormalForm;
    std::vector<Style> per_mode;  ///< empty: fallback everywhere

    Style for_mode(int j) const {
        return j < static_cast<int>(per_mode.size()) ? per_mode[static_cast<std::size_t>(j)] : fallback;
    }
    bool any(Style s, int M) const;
    static StyleSpec normal_form() { return {Style::NormalForm, {}}; }
    static StyleSpec graph() { return {Style::Graph, {}}; }
};

/// lambda_l and lambda_j are resonant when |lambda_l - lambda_j| <= abs + rel * |lambda_j|.
/// With imag_only the comparison uses imaginary parts, the usual light-damping convention.
struct ResonanceTolerance {
    double abs = -1.0;  ///< negative: 1e-8 * max |Lambda_E| (1e-8 when all are zero)
    double rel = 1e-3;
    bool imag_only = false;

    double resolved_abs(const VecC& master_lambdas) const;
    bool resonant(cplx lambda_l, cplx lambda_j, double abs_tol) const;
    double gap(cplx lambda_l, cplx lambda_j) const;
};

struct ResonancePair {
    MultiIndex tuple;  ///< 0-based master indices
    std::uint64_t position = 0;
    int mode = 0;      ///< master index, or outer index for outer pairs
    double gap = 0.0;
};

struct ResonanceReport {
    int order = 0;
    std::vector<ResonancePair> inner;
    std::vector<ResonancePair> outer;
    double tol_abs = 0.0;
    double tol_rel = 0.0;
    bool imag_only = false;
};

ResonanceReport classify_resonances(const MasterSubspace& master, const VecC& outer_lambdas, int order,
                                    const ResonanceTolerance& tol);

enum class OuterPolicy { Auto, Error, Warn };

struct CohomologyOptions {
    ResonanceTolerance tolerance;
    /// Auto: error when any master row uses the normal-form style, warning otherwise.
    OuterPolicy outer_policy = OuterPolicy::Auto;
    /// Condition number above which the minimum-norm solve replaces LU.
    double min_norm_condition = 1e12;
    /// Above this dimension the block solves use sparse LU.
    int dense_limit = 600;
};

struct BlockDiagnostic {
    cplx lambda;
    int columns = 0;      ///< monomials sharing this lambda_l
    double condition = 0; ///< 1-norm condition estimate (dense) or spectral-gap estimate (sparse)
    bool min_norm = false;
};

struct OrderDiagnostics {
    int order = 0;
    ResonanceReport resonances;
    std::vector<BlockDiagnostic> blocks;
    std::vector<std::string> warnings;
};

struct OrderSolution {
    MatC W;
    MatC R;
    OrderDiagnostics diagnostics;
};

/// Solves the order-i cohomological equation for W_i and R_i, given the assembled
/// right-hand side C_i = (F o W)_i - B sum_{j=2}^{i-1} W_j calR_{i,j}.
OrderSolution solve_order(const FirstOrderSystem& sys, const MasterSubspace& master, const VecC& outer_lambdas,
                          int order, const MatC& C_i, const StyleSpec& style, const CohomologyOptions& options);

/// C_i from the lower orders held in W and R (index 0 unused, orders 1..i-1 required).
MatC assemble_rhs(const FirstOrderSystem& sys, const std::vector<MatC>& W, const std::vector<MatC>& R, int order,
                  int master_dim);

struct ManifoldExpansion {
    int order = 0;
    MasterSubspace master;
    VecC outer;
    StyleSpec style;
    ResonanceTolerance tolerance;
    std::vector<MatC> W;  ///< W[i] is N x M^i, W[0] unused
    std::vector<MatC> R;  ///< R[i] is M x M^i, R[0] unused
    std::vector<OrderDiagnostics> diagnostics;  ///< orders 2..order

    int N() const { return static_cast<int>(master.V.rows()); }
    int M() const { return master.M; }

    VecC W_at(const VecC& p) const;
    VecC R_at(const VecC& p) const;
    /// DW(p) q.
    VecC DW_times(const VecC& p, const VecC& q) const;
    /// Conjugate-symmetric parametrization point for a complex amplitude vector:
    /// p[partner[j]] = conj(p[j]).
    bool is_conjugate_symmetric(const VecC& p, double tol = 0.0) const;
};

ManifoldExpansion compute_manifold(const FirstOrderSystem& sys, const SpectrumResult& spectrum, int order,
                                   const StyleSpec& style = StyleSpec::normal_form(),
                                   const CohomologyOptions& options = {});

}  // namespace ssmkit
