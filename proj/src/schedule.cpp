#include "elastic/schedule.hpp"

#include "elastic/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace elastic {

namespace {

std::uint64_t round_step(double raw) {
    return std::max<std::uint64_t>(2, static_cast<std::uint64_t>(std::llround(raw)));
}

} // namespace

std::uint64_t forced_step(std::uint64_t horizon, double i_param) {
    const double t = static_cast<double>(horizon);
    // Closed at sqrt(T) so I = sqrt(T) (e.g. T = 16, I = 4) is accepted.
    if (!(i_param > 1.0 && i_param <= std::sqrt(t)))
        throw ConfigError(fmt::format("forced-sampling I must lie in (1, sqrt(T)] = (1, {}] (got {})",
                                      std::sqrt(t), i_param));
    // T^(1 / log_I T) equals I analytically; evaluate the literal form anyway.
    const double log_i_t = std::log(t) / std::log(i_param);
    return round_step(std::pow(t, 1.0 / log_i_t));
}

std::vector<std::uint64_t> forced_sequence(std::uint64_t horizon, double i_param) {
    const std::uint64_t step = forced_step(horizon, i_param);
    std::vector<std::uint64_t> out;
    out.reserve(horizon / step);
    for (std::uint64_t t = step; t <= horizon; t += step) out.push_back(t);
    return out;
}

ForcedSchedule ForcedSchedule::known(std::uint64_t horizon, double i_param) {
    ForcedSchedule s;
    s.mode_ = Mode::known_horizon;
    s.step_ = forced_step(horizon, i_param);
    s.horizon_ = horizon;
    s.i_param_ = i_param;
    return s;
}

ForcedSchedule ForcedSchedule::unknown(std::uint64_t base_horizon, double i_param, double ratio) {
    if (base_horizon == 0) throw ConfigError("forced-sampling base horizon must be >= 1");
    if (!(i_param > 1.0)) throw ConfigError(fmt::format("forced-sampling I must be > 1 (got {})", i_param));
    if (!(ratio > 1.0)) throw ConfigError(fmt::format("horizon ratio r must be > 1 (got {})", ratio));
    ForcedSchedule s;
    s.mode_ = Mode::unknown_horizon;
    s.horizon_ = base_horizon;
    s.i_param_ = i_param;
    s.ratio_ = ratio;
    s.step_ = round_step(i_param);
    return s;
}

std::uint32_t ForcedSchedule::segment_of(std::uint64_t t) const {
    if (mode_ == Mode::known_horizon) return 0;
    const double rel = static_cast<double>(t > origin_ ? t - origin_ : 0);
    double bound = static_cast<double>(horizon_);
    std::uint32_t k = 0;
    while (rel > bound) {
        bound *= ratio_;
        ++k;
    }
    return k;
}

std::uint64_t ForcedSchedule::step_at(std::uint64_t t) const {
    if (mode_ == Mode::known_horizon) return step_;
    return round_step(i_param_ * std::pow(ratio_, 0.5 * segment_of(t)));
}

bool ForcedSchedule::is_forced(std::uint64_t t) const {
    if (mode_ == Mode::known_horizon) return t >= step_ && t <= horizon_ && t % step_ == 0;
    if (t <= origin_) return false;
    const std::uint64_t rel = t - origin_;
    return rel % step_at(t) == 0;
}

} // namespace elastic
