#pragma once

#include "elastic/action_space.hpp"
#include "elastic/predictor.hpp"
#include "elastic/schedule.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

namespace elastic {

/// Which side of the action space survives after a mis-prediction.
///   standard: predicted > actual keeps actions that transmit less data.
///   inverted: predicted > actual keeps actions that transmit more data.
enum class DirectionRule { standard, inverted };

struct DirectionFilter {
    std::optional<Action> last_action;
    double last_predicted = 0.0;
    std::optional<double> last_actual;

    bool populated() const { return last_action.has_value() && last_actual.has_value(); }

    void record(const Action& action, double predicted, double actual) {
        last_action = action;
        last_predicted = predicted;
        last_actual = actual;
    }
};

/// Candidate subset implied by the last (predicted, actual) pair. The last
/// action and pure-local are always kept; an unpopulated filter or an exact
/// match returns the input unchanged.
std::vector<Action> direction_filter(std::span<const Action> actions, const DirectionFilter& filter,
                                     DirectionRule rule = DirectionRule::standard);

/// Relative-error monitor over observed (offloaded) frames.
class DriftDetector {
public:
    DriftDetector(std::size_t window, double threshold, std::size_t consecutive_needed,
                  double floor = 1e-6);

    double relative_error(double predicted, double actual) const;
    bool accurate(double predicted, double actual) const {
        return relative_error(predicted, actual) <= threshold_;
    }

    /// Records the pair; true once `consecutive_needed` inaccurate frames occur in a row.
    /// An error no larger than `slack` (absolute) never counts as inaccurate.
    bool detect(double predicted, double actual, double slack = 0.0);

    /// Records the pair; true once `consecutive_needed` accurate frames occur in a row.
    bool recovered(double predicted, double actual);

    void clear_streaks() { bad_streak_ = good_streak_ = 0; }

    std::size_t bad_streak() const { return bad_streak_; }
    std::size_t good_streak() const { return good_streak_; }
    std::size_t consecutive_needed() const { return needed_; }
    double threshold() const { return threshold_; }
    const std::deque<std::pair<double, double>>& window() const { return window_; }

private:
    void push(double predicted, double actual);

    std::size_t capacity_;
    double threshold_;
    std::size_t needed_;
    double floor_;
    std::size_t bad_streak_ = 0;
    std::size_t good_streak_ = 0;
    std::deque<std::pair<double, double>> window_;
};

struct PolicyConfig {
    double gamma = 1.0;
    BetaParams beta;
    ForcedSchedule::Mode horizon_mode = ForcedSchedule::Mode::known_horizon;
    std::uint64_t horizon = 10000; // T (known) or T0 (unknown)
    double i_param = 10.0;
    double ratio = 2.0;
    double drift_threshold = 0.5;
    std::size_t drift_window = 20;
    std::size_t consecutive_needed = 3;
    /// Observations of an action (since the last reset) before its errors count toward drift.
    std::size_t drift_min_samples = 3;
    DirectionRule direction_rule = DirectionRule::standard;
    /// Multiplies the on-robot cost so it shares units with the observed objective.
    double local_cost_weight = 1.0;
    /// A fresh predictor cannot be trusted, so the first frames run as an update window.
    bool start_in_update_window = true;

    void validate() const;
};

struct CandidateScore {
    Action action;
    double local_cost = 0.0;
    double predicted = 0.0; // bonus-adjusted elastic estimate; 0 for pure local
    double score = 0.0;
};

struct Decision {
    std::uint64_t t = 0;
    bool forced = false;
    bool filtered = false;
    bool update_window = false;
    double sigma = 0.0;
    double beta = 0.0;
    Action action;
    double local_cost = 0.0;
    double predicted_e = 0.0; // point prediction alpha_hat^T v of the chosen action
    double confidence = 0.0;  // beta sqrt((1 - sigma) v^T Q^{-1} v) of the chosen action
    double score = 0.0;
    std::vector<CandidateScore> candidates;
};

/// Inputs of one argmin, independent of any policy object.
struct SelectionInput {
    const RidgePredictor* predictor = nullptr;
    double beta = 0.0;
    double sigma = 0.0;
    std::span<const Action> actions;
    std::span<const Vector> contexts;  // indexed by split_index
    std::span<const double> local_costs; // indexed by split_index
    bool forced = false;
    const DirectionFilter* filter = nullptr; // non-null when the single-direction rule applies
    DirectionRule rule = DirectionRule::standard;
};

/// Score E^c + alpha_hat^T v - beta sqrt((1 - sigma) v^T Q^{-1} v) for every
/// candidate and take the argmin. Forced frames exclude pure local; ties go to
/// the action that transmits fewer bytes.
Decision select_action(const SelectionInput& in);

/// ElasticAction decision loop for one elastic node.
class ElasticPolicy {
public:
    ElasticPolicy(Pipeline pipeline, PolicyConfig config);
    ElasticPolicy(Pipeline pipeline, ContextNorms norms, PolicyConfig config);

    /// Applies `feedback` (observed elastic cost of the previous action) or
    /// holds, advances t and returns the decision for the new frame.
    /// Feedback is checked for drift only once the action has been observed
    /// drift_min_samples times since the last reset, and an error counts only
    /// when it also falls outside the confidence radius plus the noise bound.
    /// Throws ProtocolViolation if feedback is given for a pure-local frame.
    Decision step(const FrameWeight& weight, std::optional<double> feedback, double cpu_scale = 1.0);

    const Pipeline& pipeline() const { return pipeline_; }
    const PolicyConfig& config() const { return config_; }
    const std::vector<Action>& actions() const { return actions_; }
    const std::vector<Vector>& contexts() const { return contexts_; }
    const RidgePredictor& predictor() const { return predictor_; }
    const ForcedSchedule& schedule() const { return schedule_; }
    const DirectionFilter& filter() const { return filter_; }
    const DriftDetector& drift() const { return drift_; }
    std::uint64_t t() const { return t_; }
    bool update_window() const { return update_window_; }
    double beta() const;
    const std::vector<std::uint64_t>& drift_events() const { return drift_events_; }
    std::size_t norm_violations() const { return norm_violations_; }

    /// Used by checkpoint restore.
    void restore_predictor(RidgePredictor predictor) { predictor_ = std::move(predictor); }

private:
    void apply_feedback(double actual);

    Pipeline pipeline_;
    ContextNorms norms_;
    PolicyConfig config_;
    std::vector<Action> actions_;
    std::vector<Vector> contexts_;
    RidgePredictor predictor_;
    ForcedSchedule schedule_;
    DirectionFilter filter_;
    DriftDetector drift_;
    std::uint64_t t_ = 0;
    bool update_window_ = true;
    std::optional<Decision> last_;
    std::vector<std::uint64_t> drift_events_;
    std::vector<std::uint64_t> observed_since_reset_; // per split index
    std::size_t norm_violations_ = 0;
};

} // namespace elastic
