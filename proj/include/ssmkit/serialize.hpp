#pragma once

// Text artifacts: manifold JSON, FRC/backbone CSV and JSON, SVG plots, verification reports.
// Floating values use 17 significant digits so identical runs give identical bytes.

#include <string>
#include <vector>

#include "ssmkit/analysis.hpp"
#include "ssmkit/verify.hpp"

namespace ssmkit {

/// Per order, nonzero (row, tuple, re, im) entries of W_i and R_i (1-based indices),
/// master eigendata, resonance diagnostics, and optionally the leading forced terms.
std::string manifold_json(const ManifoldExpansion& manifold, const NonAutonomousLeading* nonaut = nullptr);

std::string resonance_report_text(const ManifoldExpansion& manifold);

/// Columns Omega, rho, psi, stable, amp_dof_<id>... (ids 1-based).
std::string frc_csv(const FrcResult& frc, const std::vector<int>& output_dofs);
std::string frc_json(const FrcResult& frc, const std::vector<int>& output_dofs);
/// Amplitude of one output column versus Omega; stable segments solid, unstable dashed.
std::string frc_svg(const FrcResult& frc, std::size_t column, int dof_id);

std::string backbone_csv(const std::vector<BackbonePoint>& points, const std::vector<int>& output_dofs);

std::string residual_json(const ResidualReport& report);

/// Branch label of each FRC point: rank of rho among the roots at the same Omega.
std::vector<int> branch_ranks(const FrcResult& frc);

}  // namespace ssmkit
