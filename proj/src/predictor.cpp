#include "elastic/predictor.hpp"

#include "elastic/error.hpp"

#include <fmt/format.h>

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace elastic {

void BetaParams::validate() const {
    if (!(n_alpha > 0.0)) throw ConfigError(fmt::format("n_alpha must be > 0 (got {})", n_alpha));
    if (!(n_x >= 0.0)) throw ConfigError(fmt::format("n_x must be >= 0 (got {})", n_x));
    if (!(n_v > 0.0)) throw ConfigError(fmt::format("n_v must be > 0 (got {})", n_v));
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw ConfigError(fmt::format("epsilon must be in (0, 1) (got {})", epsilon));
    if (!(sigma_key >= 0.0 && sigma_key < 1.0))
        throw ConfigError(fmt::format("sigma_key must be in [0, 1) (got {})", sigma_key));
}

double compute_beta(const BetaParams& params, std::uint64_t samples, std::size_t dim) {
    const double m = static_cast<double>(samples);
    const double log_term = std::log((1.0 + m * params.n_v * params.n_v) / params.epsilon);
    const double radius = params.n_alpha + params.n_x * std::sqrt(static_cast<double>(dim) * log_term);
    return radius / (1.0 - params.sigma_key);
}

RidgePredictor::RidgePredictor(double gamma, std::size_t dim) : gamma_(gamma) {
    if (!(gamma >= 1.0)) throw ConfigError(fmt::format("gamma must be >= 1 (got {})", gamma));
    if (dim == 0) throw ConfigError("context dimension must be >= 1");
    q_ = gamma * Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    p_ = Vector::Zero(static_cast<Eigen::Index>(dim));
}

RidgePredictor RidgePredictor::from_parts(double gamma, Matrix q, Vector p, std::uint64_t samples) {
    RidgePredictor out(gamma, static_cast<std::size_t>(p.size()));
    if (q.rows() != p.size() || q.cols() != p.size())
        throw ConfigError("predictor state: Q and p dimensions disagree");
    if (!q.isApprox(q.transpose(), 1e-12)) throw ConfigError("predictor state: Q is not symmetric");
    Eigen::LLT<Matrix> llt(q);
    if (llt.info() != Eigen::Success) throw ConfigError("predictor state: Q is not positive definite");
    out.q_ = std::move(q);
    out.p_ = std::move(p);
    out.samples_ = samples;
    return out;
}

void RidgePredictor::check_dim(const Vector& v) const {
    if (v.size() != p_.size())
        throw std::invalid_argument(
            fmt::format("context has dimension {}, predictor expects {}", v.size(), p_.size()));
}

const Eigen::LDLT<Matrix>& RidgePredictor::factor() const {
    if (!ldlt_) {
        ldlt_.emplace(q_);
        assert(ldlt_->info() == Eigen::Success && ldlt_->isPositive());
    }
    return *ldlt_;
}

Vector RidgePredictor::estimate() const {
    if (!alpha_) alpha_ = factor().solve(p_);
    return *alpha_;
}

double RidgePredictor::uncertainty(const Vector& v) const {
    check_dim(v);
    // Clamp tiny negative round-off; Q is SPD so the exact value is >= 0.
    return std::max(0.0, v.dot(factor().solve(v)));
}

double RidgePredictor::point_prediction(const Vector& v) const {
    check_dim(v);
    return estimate().dot(v);
}

double RidgePredictor::predict(const Vector& v, double sigma, double beta) const {
    if (!(sigma >= 0.0 && sigma <= 1.0))
        throw std::invalid_argument(fmt::format("frame weight must be in [0, 1] (got {})", sigma));
    const double mean = point_prediction(v);
    const double width = (1.0 - sigma) * uncertainty(v);
    return mean - beta * std::sqrt(width);
}

void RidgePredictor::observe(const Vector& v, double observed) {
    check_dim(v);
    q_.noalias() += v * v.transpose();
    p_.noalias() += v * observed;
    ++samples_;
    ldlt_.reset();
    alpha_.reset();
}

void RidgePredictor::reset() {
    const auto d = p_.size();
    q_ = gamma_ * Matrix::Identity(d, d);
    p_ = Vector::Zero(d);
    samples_ = 0;
    ldlt_.reset();
    alpha_.reset();
}

} // namespace elastic
