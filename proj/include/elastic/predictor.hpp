#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>

namespace elastic {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Bounds entering the confidence radius.
struct BetaParams {
    double n_alpha = 1.0;   // bound on ||alpha*||
    double n_x = 0.1;       // noise bound
    double n_v = 2.0;       // bound on context norm
    double epsilon = 0.1;   // confidence level
    double sigma_key = 0.8; // weight assigned to key frames

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Confidence radius (N_a + N_x sqrt(d ln((1 + M N_v^2) / eps))) / (1 - sigma_key).
double compute_beta(const BetaParams& params, std::uint64_t samples, std::size_t dim);

/// Online ridge estimator over context vectors.
///
/// Holds Q = gamma*I + sum v v^T and p = sum v*E. The coefficient estimate
/// Q^{-1} p is recomputed from a cached LDLT factorization that is refreshed
/// lazily after each update.
class RidgePredictor {
public:
    /// Requires gamma >= 1 and dim >= 1.
    RidgePredictor(double gamma, std::size_t dim);

    std::size_t dim() const { return static_cast<std::size_t>(p_.size()); }
    double gamma() const { return gamma_; }
    std::uint64_t samples() const { return samples_; }
    const Matrix& design() const { return q_; }
    const Vector& response() const { return p_; }

    Vector estimate() const;

    /// v^T Q^{-1} v.
    double uncertainty(const Vector& v) const;

    /// alpha_hat^T v.
    double point_prediction(const Vector& v) const;

    /// alpha_hat^T v - beta * sqrt((1 - sigma) v^T Q^{-1} v).
    double predict(const Vector& v, double sigma, double beta) const;

    void observe(const Vector& v, double observed);

    /// No-op branch of the update rule; kept so call sites mirror the algorithm.
    void hold() {}

    /// Back to gamma*I, p = 0, M = 0.
    void reset();

    /// Restore a serialized state. Q must be symmetric positive definite.
    static RidgePredictor from_parts(double gamma, Matrix q, Vector p, std::uint64_t samples);

private:
    void check_dim(const Vector& v) const;
    const Eigen::LDLT<Matrix>& factor() const;

    double gamma_;
    Matrix q_;
    Vector p_;
    std::uint64_t samples_ = 0;

    mutable std::optional<Eigen::LDLT<Matrix>> ldlt_;
    mutable std::optional<Vector> alpha_;
};

} // namespace elastic
