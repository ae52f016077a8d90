#pragma once

// Entropy-regularized Q-learning core: softmax policies over masked
// Q-values, the soft state value, one-step targets and the temperature
// schedule.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "core/rng.hpp"

namespace qzero::softq {

struct AnnealSchedule {
    double alpha_start = 0.5;
    double alpha_end = 0.081;
    int64_t horizon_steps = 100000;
    bool support_sampling = true;
};

struct SoftQConfig {
    double alpha = 0.081;
    double gamma = 1.0;
    double min_action_prob = 3e-5;
    std::optional<AnnealSchedule> anneal;
    // Experimental: back up with the policy-weighted Q only, dropping the entropy term.
    bool entropy_cancellation = false;

    /// Throws Error(Config) when alpha <= 0, gamma outside (0, 1], or
    /// min_action_prob * actions >= 1.
    void validate(int actions) const;
};

struct PolicyDistribution {
    std::vector<double> probs;
    std::vector<uint8_t> support;
};

/// probs ∝ exp(Q / alpha) over the legal actions, exactly 0 elsewhere.
template <typename T>
PolicyDistribution policy_from_q(std::span<const T> q, std::span<const uint8_t> mask, double alpha);

/// alpha * log Σ_legal exp(Q / alpha), evaluated with max subtraction.
template <typename T>
double soft_state_value(std::span<const T> q, std::span<const uint8_t> mask, double alpha);

/// Σ_legal π(a) (Q(a) - alpha log π(a)); the summation form, kept for cross-checks.
template <typename T>
double soft_state_value_expectation(std::span<const T> q, std::span<const uint8_t> mask, double alpha);

/// Σ_legal π(a) Q(a): the backup used when entropy_cancellation is on.
template <typename T>
double policy_weighted_value(std::span<const T> q, std::span<const uint8_t> mask, double alpha);

/// Shannon entropy (nats) of a distribution, skipping zero entries.
double entropy(const PolicyDistribution& policy);

/// y_q = r - gamma (1 - d) y_v(s'): the next state belongs to the opponent.
double q_target(double reward, int done, double next_value, double gamma);

/// Core ±5 outcome for the mover; `outcome` must be present.
double ignition_target(std::optional<double> outcome);

/// p'(a) = max(p(a), eps) over the support, renormalized.
PolicyDistribution exploration_mix(const PolicyDistribution& policy, double epsilon);

/// Learner temperature at `step`. Linear decay from alpha_start to alpha_end
/// over horizon_steps when annealing is configured.
double alpha_at(int64_t step, const SoftQConfig& config);

/// Per-episode actor temperature: uniform in [alpha_at(step), alpha_start]
/// when annealing with support sampling, otherwise alpha_at(step).
double actor_alpha(int64_t step, const SoftQConfig& config, Rng& rng);

int sample_action(const PolicyDistribution& policy, Rng& rng);

/// Argmax over legal entries; lowest index wins ties.
template <typename T>
int masked_argmax(std::span<const T> q, std::span<const uint8_t> mask);

}  // namespace qzero::softq
