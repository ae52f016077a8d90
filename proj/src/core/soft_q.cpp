#include "core/soft_q.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/error.hpp"

namespace qzero::softq {

namespace {

template <typename T>
double masked_max(std::span<const T> q, std::span<const uint8_t> mask) {
    if (q.size() != mask.size()) fail(ErrorCode::InvalidArgument, "Q vector and mask lengths differ");
    double m = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (size_t i = 0; i < q.size(); ++i) {
        if (mask[i]) {
            m = std::max(m, static_cast<double>(q[i]));
            any = true;
        }
    }
    if (!any) fail(ErrorCode::InvalidArgument, "empty legal mask");
    return m;
}

void require_alpha(double alpha) {
    if (!(alpha > 0.0)) fail(ErrorCode::InvalidArgument, "temperature alpha must be positive");
}

}  // namespace

void SoftQConfig::validate(int actions) const {
    if (!(alpha > 0.0)) fail(ErrorCode::Config, "alpha must be > 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) fail(ErrorCode::Config, "gamma must lie in (0, 1]");
    if (!(min_action_prob >= 0.0) || min_action_prob * actions >= 1.0) {
        fail(ErrorCode::Config, "min_action_prob * actions must be < 1");
    }
    if (anneal) {
        if (!(anneal->alpha_start > 0.0 && anneal->alpha_end > 0.0)) fail(ErrorCode::Config, "anneal temperatures must be > 0");
        if (anneal->horizon_steps < 0) fail(ErrorCode::Config, "anneal horizon must be >= 0");
    }
}

template <typename T>
PolicyDistribution policy_from_q(std::span<const T> q, std::span<const uint8_t> mask, double alpha) {
    require_alpha(alpha);
    const double m = masked_max(q, mask);
    PolicyDistribution out;
    out.probs.assign(q.size(), 0.0);
    out.support.assign(mask.begin(), mask.end());
    double z = 0.0;
    for (size_t i = 0; i < q.size(); ++i) {
        if (mask[i]) {
            out.probs[i] = std::exp((static_cast<double>(q[i]) - m) / alpha);
            z += out.probs[i];
        }
    }
    for (double& p : out.probs) p /= z;
    return out;
}

template <typename T>
double soft_state_value(std::span<const T> q, std::span<const uint8_t> mask, double alpha) {
    require_alpha(alpha);
    const double m = masked_max(q, mask);
    double z = 0.0;
    for (size_t i = 0; i < q.size(); ++i) {
        if (mask[i]) z += std::exp((static_cast<double>(q[i]) - m) / alpha);
    }
    return m + alpha * std::log(z);
}

template <typename T>
double soft_state_value_expectation(std::span<const T> q, std::span<const uint8_t> mask, double alpha) {
    const PolicyDistribution pi = policy_from_q(q, mask, alpha);
    double v = 0.0;
    for (size_t i = 0; i < q.size(); ++i) {
        if (mask[i] && pi.probs[i] > 0.0) v += pi.probs[i] * (static_cast<double>(q[i]) - alpha * std::log(pi.probs[i]));
    }
    return v;
}

template <typename T>
double policy_weighted_value(std::span<const T> q, std::span<const uint8_t> mask, double alpha) {
    const PolicyDistribution pi = policy_from_q(q, mask, alpha);
    double v = 0.0;
    for (size_t i = 0; i < q.size(); ++i) {
        if (mask[i]) v += pi.probs[i] * static_cast<double>(q[i]);
    }
    return v;
}

double entropy(const PolicyDistribution& policy) {
    double h = 0.0;
    for (double p : policy.probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

double q_target(double reward, int done, double next_value, double gamma) {
    if (done) return reward;
    return reward - gamma * next_value;
}

double ignition_target(std::optional<double> outcome) {
    if (!outcome) fail(ErrorCode::InvalidArgument, "ignition_target: transition carries no episode outcome");
    return *outcome > 0 ? 5.0 : -5.0;
}

PolicyDistribution exploration_mix(const PolicyDistribution& policy, double epsilon) {
    if (epsilon == 0.0) return policy;
    const auto legal = std::count_if(policy.support.begin(), policy.support.end(), [](uint8_t m) { return m != 0; });
    if (!(epsilon > 0.0) || epsilon * static_cast<double>(legal) >= 1.0) {
        fail(ErrorCode::InvalidArgument, "exploration_mix: epsilon * legal actions must be < 1");
    }
    PolicyDistribution out = policy;
    double z = 0.0;
    for (size_t i = 0; i < out.probs.size(); ++i) {
        if (out.support[i]) {
            out.probs[i] = std::max(out.probs[i], epsilon);
            z += out.probs[i];
        } else {
            out.probs[i] = 0.0;
        }
    }
    for (double& p : out.probs) p /= z;
    return out;
}

double alpha_at(int64_t step, const SoftQConfig& config) {
    if (!config.anneal) return config.alpha;
    const AnnealSchedule& a = *config.anneal;
    if (a.horizon_steps <= 0 || step >= a.horizon_steps) return a.alpha_end;
    if (step <= 0) return a.alpha_start;
    const double t = static_cast<double>(step) / static_cast<double>(a.horizon_steps);
    return a.alpha_start + (a.alpha_end - a.alpha_start) * t;
}

double actor_alpha(int64_t step, const SoftQConfig& config, Rng& rng) {
    const double current = alpha_at(step, config);
    if (!config.anneal || !config.anneal->support_sampling) return current;
    const double lo = std::min(current, config.anneal->alpha_start);
    const double hi = std::max(current, config.anneal->alpha_start);
    return rng.uniform(lo, hi);
}

int sample_action(const PolicyDistribution& policy, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    int last = -1;
    for (size_t i = 0; i < policy.probs.size(); ++i) {
        if (policy.probs[i] <= 0.0) continue;
        acc += policy.probs[i];
        last = static_cast<int>(i);
        if (u < acc) return last;
    }
    if (last < 0) fail(ErrorCode::InvalidArgument, "sample_action: distribution has no support");
    return last;
}

template <typename T>
int masked_argmax(std::span<const T> q, std::span<const uint8_t> mask) {
    int best = -1;
    for (size_t i = 0; i < q.size(); ++i) {
        if (mask[i] && (best < 0 || q[i] > q[best])) best = static_cast<int>(i);
    }
    if (best < 0) fail(ErrorCode::InvalidArgument, "masked_argmax: empty legal mask");
    return best;
}

#define QZ_INSTANTIATE(T)                                                                                    \
    template PolicyDistribution policy_from_q<T>(std::span<const T>, std::span<const uint8_t>, double);     \
    template double soft_state_value<T>(std::span<const T>, std::span<const uint8_t>, double);              \
    template double soft_state_value_expectation<T>(std::span<const T>, std::span<const uint8_t>, double);  \
    template double policy_weighted_value<T>(std::span<const T>, std::span<const uint8_t>, double);         \
    template int masked_argmax<T>(std::span<const T>, std::span<const uint8_t>);

QZ_INSTANTIATE(float)
QZ_INSTANTIATE(double)

#undef QZ_INSTANTIATE

}  // namespace qzero::softq
