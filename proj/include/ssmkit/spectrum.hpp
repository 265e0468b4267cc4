#pragma once

// Generalized eigenproblem A v = lambda B v: master-subspace selection and normalization.

#include <vector>

#include "ssmkit/model.hpp"

namespace ssmkit {

struct Selection {
    enum class Kind { SmallestMagnitude, Indices, SlowestDecay };
    Kind kind = Kind::SmallestMagnitude;
    int count = 2;
    /// 0-based positions in the smallest-magnitude ordering (Kind::Indices only).
    std::vector<int> indices;

    static Selection smallest(int count) { return {Kind::SmallestMagnitude, count, {}}; }
    static Selection slowest(int count) { return {Kind::SlowestDecay, count, {}}; }
    static Selection at(std::vector<int> idx) {
        return {Kind::Indices, static_cast<int>(idx.size()), std::move(idx)};
    }
};

struct SpectrumOptions {
    enum class Method { Auto, Dense, ShiftInvert };
    Method method = Method::Auto;
    /// Auto switches to shift-invert above this dimension.
    int dense_limit = 2000;
    cplx shift{0.0, 0.0};
    int max_iterations = 500;
    double tolerance = 1e-12;
};

struct MasterSubspace {
    int M = 0;
    VecC lambdas;
    MatC V;  ///< N x M right eigenvectors
    MatC U;  ///< N x M left eigenvectors, U^* B V = I
    /// partner[j] is the index of the conjugate mode, or j itself for a real eigenvalue.
    std::vector<int> partner;
    double max_residual = 0.0;

    bool is_conjugate_closed() const;
};

struct SpectrumResult {
    MasterSubspace master;
    VecC outer;  ///< next eigenvalues in the same ordering (no eigenvectors)
};

SpectrumResult master_spectrum(const FirstOrderSystem& sys, const Selection& select, int n_outer = 10,
                               const SpectrumOptions& options = {});

/// max |U^* B V - I|.
double check_normalization(const MasterSubspace& ms, const FirstOrderSystem& sys);

/// Largest relative residual of A v = lambda B v and u^* A = lambda u^* B.
double eigen_residual(const MasterSubspace& ms, const FirstOrderSystem& sys);

/// All generalized eigenvalues in smallest-magnitude order (dense; for tests and reports).
VecC all_eigenvalues(const FirstOrderSystem& sys);

}  // namespace ssmkit
