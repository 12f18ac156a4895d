#pragma once

#include <cstdint>
#include <vector>

namespace elastic {

/// Step between forced frames for a known horizon: round(T^(1 / log_I T)), at least 2.
/// Requires 1 < I <= sqrt(T).
std::uint64_t forced_step(std::uint64_t horizon, double i_param);

/// {n * step : n >= 1, n * step <= T}.
std::vector<std::uint64_t> forced_sequence(std::uint64_t horizon, double i_param);

/// Decides which frames must offload.
///
/// Known horizon: every forced_step(T, I)-th frame up to T.
/// Unknown horizon: frames are grouped into geometric segments
/// (0, T0], (T0, T0 r], (T0 r, T0 r^2], ...; in segment k every
/// round(I r^(k/2))-th frame is forced. Frames are counted from the last
/// restart(), so a drift reset returns to the densest segment.
class ForcedSchedule {
public:
    enum class Mode { known_horizon, unknown_horizon };

    static ForcedSchedule known(std::uint64_t horizon, double i_param);
    static ForcedSchedule unknown(std::uint64_t base_horizon, double i_param, double ratio);

    Mode mode() const { return mode_; }
    std::uint64_t horizon() const { return horizon_; }
    double i_param() const { return i_param_; }
    double ratio() const { return ratio_; }
    std::uint64_t origin() const { return origin_; }

    bool is_forced(std::uint64_t t) const;

    /// Segment index of frame t relative to the current origin (unknown horizon only).
    std::uint32_t segment_of(std::uint64_t t) const;

    /// Step used inside the segment containing frame t.
    std::uint64_t step_at(std::uint64_t t) const;

    /// Frames after `t` are counted from a fresh origin.
    void restart(std::uint64_t t) { origin_ = t; }

private:
    Mode mode_ = Mode::known_horizon;
    std::uint64_t horizon_ = 1;
    double i_param_ = 2.0;
    double ratio_ = 2.0;
    std::uint64_t step_ = 2;
    std::uint64_t origin_ = 0;
};

} // namespace elastic
