#include "elastic/policy.hpp"

#include "elastic/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace elastic {

std::vector<Action> direction_filter(std::span<const Action> actions, const DirectionFilter& filter,
                                     DirectionRule rule) {
    std::vector<Action> out(actions.begin(), actions.end());
    if (!filter.populated() || filter.last_predicted == *filter.last_actual) return out;

    const bool over_predicted = filter.last_predicted > *filter.last_actual;
    const bool want_less = (rule == DirectionRule::standard) ? over_predicted : !over_predicted;
    const std::uint64_t pivot = filter.last_action->transmit_bytes;
    const std::size_t last_split = filter.last_action->split_index;

    std::erase_if(out, [&](const Action& a) {
        if (a.is_pure_local || a.split_index == last_split) return false;
        return want_less ? !(a.transmit_bytes < pivot) : !(a.transmit_bytes > pivot);
    });
    return out;
}

DriftDetector::DriftDetector(std::size_t window, double threshold, std::size_t consecutive_needed,
                             double floor)
    : capacity_(window), threshold_(threshold), needed_(consecutive_needed), floor_(floor) {
    if (window == 0) throw ConfigError("drift window W must be >= 1");
    if (!(threshold > 0.0)) throw ConfigError(fmt::format("drift threshold must be > 0 (got {})", threshold));
    if (consecutive_needed == 0) throw ConfigError("consecutive_needed must be >= 1");
}

double DriftDetector::relative_error(double predicted, double actual) const {
    return std::abs(predicted - actual) / std::max(std::abs(actual), floor_);
}

void DriftDetector::push(double predicted, double actual) {
    window_.emplace_back(predicted, actual);
    while (window_.size() > capacity_) window_.pop_front();
}

bool DriftDetector::detect(double predicted, double actual, double slack) {
    push(predicted, actual);
    if (accurate(predicted, actual) || std::abs(predicted - actual) <= slack) {
        bad_streak_ = 0;
        ++good_streak_;
    } else {
        good_streak_ = 0;
        ++bad_streak_;
    }
    return bad_streak_ >= needed_;
}

bool DriftDetector::recovered(double predicted, double actual) {
    detect(predicted, actual);
    return good_streak_ >= needed_;
}

void PolicyConfig::validate() const {
    if (!(gamma >= 1.0)) throw ConfigError(fmt::format("gamma must be >= 1 (got {})", gamma));
    beta.validate();
    if (horizon == 0) throw ConfigError("horizon must be >= 1");
    if (!(drift_threshold > 0.0)) throw ConfigError("theta must be > 0");
    if (drift_window == 0) throw ConfigError("drift window must be >= 1");
    if (consecutive_needed == 0) throw ConfigError("consecutive_needed must be >= 1");
    if (!(local_cost_weight > 0.0)) throw ConfigError("local_cost_weight must be > 0");
}

namespace {

ForcedSchedule make_schedule(const PolicyConfig& c) {
    if (c.horizon_mode == ForcedSchedule::Mode::known_horizon) return ForcedSchedule::known(c.horizon, c.i_param);
    return ForcedSchedule::unknown(c.horizon, c.i_param, c.ratio);
}

// Lexicographic (score, transmit_bytes, split) so ties resolve toward less data.
bool better(const CandidateScore& a, const CandidateScore& b) {
    return std::tie(a.score, a.action.transmit_bytes, a.action.split_index) <
           std::tie(b.score, b.action.transmit_bytes, b.action.split_index);
}

} // namespace

Decision select_action(const SelectionInput& in) {
    Decision d;
    d.forced = in.forced;
    d.sigma = in.sigma;
    d.beta = in.beta;

    std::vector<Action> pool;
    if (in.forced) {
        for (const auto& a : in.actions)
            if (!a.is_pure_local) pool.push_back(a);
    } else if (in.filter != nullptr) {
        pool = direction_filter(in.actions, *in.filter, in.rule);
        d.filtered = pool.size() != in.actions.size();
    } else {
        pool.assign(in.actions.begin(), in.actions.end());
    }
    if (pool.empty()) throw std::logic_error("empty candidate set");

    d.candidates.reserve(pool.size());
    for (const auto& a : pool) {
        CandidateScore c;
        c.action = a;
        c.local_cost = in.local_costs[a.split_index];
        if (!a.is_pure_local) c.predicted = in.predictor->predict(in.contexts[a.split_index], in.sigma, in.beta);
        c.score = c.local_cost + c.predicted;
        d.candidates.push_back(c);
    }

    const auto best = std::min_element(d.candidates.begin(), d.candidates.end(), better);
    d.action = best->action;
    d.local_cost = best->local_cost;
    d.score = best->score;
    if (!d.action.is_pure_local) {
        d.predicted_e = in.predictor->point_prediction(in.contexts[d.action.split_index]);
        d.confidence = d.predicted_e - best->predicted;
    }
    return d;
}

ElasticPolicy::ElasticPolicy(Pipeline pipeline, PolicyConfig config)
    : ElasticPolicy(pipeline, ContextNorms::for_pipeline(pipeline), std::move(config)) {}

ElasticPolicy::ElasticPolicy(Pipeline pipeline, ContextNorms norms, PolicyConfig config)
    : pipeline_(std::move(pipeline)),
      norms_(norms),
      config_(std::move(config)),
      predictor_(config_.gamma, kContextDim),
      schedule_(make_schedule(config_)),
      drift_(config_.drift_window, config_.drift_threshold, config_.consecutive_needed),
      update_window_(config_.start_in_update_window) {
    pipeline_.validate();
    config_.validate();
    actions_ = enumerate_actions(pipeline_);
    observed_since_reset_.assign(actions_.size(), 0);
    contexts_.reserve(actions_.size());
    for (const auto& a : actions_) {
        contexts_.push_back(context_of(pipeline_, a, norms_));
        if (contexts_.back().norm() > config_.beta.n_v) ++norm_violations_;
    }
}

double ElasticPolicy::beta() const { return compute_beta(config_.beta, predictor_.samples(), predictor_.dim()); }

void ElasticPolicy::apply_feedback(double actual) {
    const Decision& prev = *last_;
    const double predicted = prev.predicted_e;
    filter_.record(prev.action, predicted, actual);
    auto& seen = observed_since_reset_[prev.action.split_index];

    if (seen < config_.drift_min_samples) {
        // too few observations of this action to call its error drift
    } else if (update_window_) {
        if (drift_.recovered(predicted, actual)) {
            update_window_ = false;
            drift_.clear_streaks();
        }
    } else if (drift_.detect(predicted, actual, prev.confidence + config_.beta.n_x)) {
        predictor_.reset();
        std::fill(observed_since_reset_.begin(), observed_since_reset_.end(), 0);
        schedule_.restart(t_);
        update_window_ = true;
        drift_.clear_streaks();
        drift_events_.push_back(t_);
    }
    predictor_.observe(contexts_[prev.action.split_index], actual);
    ++seen;
}

Decision ElasticPolicy::step(const FrameWeight& weight, std::optional<double> feedback, double cpu_scale) {
    if (feedback) {
        if (!last_ || last_->action.is_pure_local)
            throw ProtocolViolation("feedback supplied for a frame that did not offload");
        apply_feedback(*feedback);
    } else {
        predictor_.hold();
    }

    ++t_;
    std::vector<double> local_costs;
    local_costs.reserve(actions_.size());
    for (const auto& a : actions_) local_costs.push_back(config_.local_cost_weight * on_robot_cost(pipeline_, a, cpu_scale));

    SelectionInput in;
    in.predictor = &predictor_;
    in.beta = beta();
    in.sigma = weight.sigma;
    in.actions = actions_;
    in.contexts = contexts_;
    in.local_costs = local_costs;
    in.forced = schedule_.is_forced(t_);
    in.filter = (update_window_ && filter_.populated()) ? &filter_ : nullptr;
    in.rule = config_.direction_rule;

    Decision d = select_action(in);
    d.t = t_;
    d.update_window = update_window_;
    last_ = d;
    return d;
}

} // namespace elastic
