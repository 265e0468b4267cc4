#pragma once

// File formats: Matrix Market coordinate matrices, the line-based tensor format
// (`row i1 ... ik value`, 1-based, one coefficient per line) and a JSON manifest tying
// them together with the first-order variant, epsilon and forcing harmonics.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssmkit/model.hpp"

namespace ssmkit {

SpMatR read_matrix_market(const std::filesystem::path& path);
void write_matrix_market(const std::filesystem::path& path, const SpMatR& A);

/// Reads nonlinear coefficients for a map R^vars -> R^rows. Lines may mix degrees; the
/// result holds one finalized PolyCoeffs per degree present, in increasing degree.
std::vector<PolyCoeffs> read_tensor(const std::filesystem::path& path, std::size_t rows, std::size_t vars);
void write_tensor(const std::filesystem::path& path, const std::vector<PolyCoeffs>& coeffs);

struct LoadedModel {
    std::optional<MechanicalSystem> mechanical;
    Variant variant = Variant::L2;
    NChoice n_choice = NChoice::MassM;
    FirstOrderSystem system;
};

LoadedModel load_manifest(const std::filesystem::path& manifest);
FirstOrderSystem load_system(const std::filesystem::path& manifest);

/// Writes manifest.json plus matrix and tensor files into `dir`; returns the manifest path.
std::filesystem::path write_manifest(const std::filesystem::path& dir, const MechanicalSystem& mech,
                                     std::optional<Variant> variant = std::nullopt,
                                     std::optional<NChoice> n_choice = std::nullopt);
std::filesystem::path write_manifest(const std::filesystem::path& dir, const FirstOrderSystem& sys);

std::string to_string(Variant v);
std::string to_string(NChoice c);
Variant parse_variant(const std::string& s);
NChoice parse_n_choice(const std::string& s);

}  // namespace ssmkit
