#pragma once

// Residual convolutional Q-network without normalization layers.
//
//   input (2, N, N)
//   -> conv 3x3 (F filters) -> relu
//   -> blocks x [conv 3x3 -> relu -> conv 3x3 -> + skip -> relu]
//   -> conv 1x1 (2 filters) -> relu -> fully connected (N*N + 1)
//
// All convolutions are stride 1 with same padding. Kernels are stored as
// (out_channels, kh, kw, in_channels); the fully connected weight as
// (N*N + 1, 2*N*N) reading the head output channel-major.

#include <cstddef>
#include <cstdint>
#include <new>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "core/go_engine.hpp"

namespace qzero::nn {

// Every numeric buffer handed to Eigen starts on a 64-byte boundary. Eigen picks
// its vectorized peeling from the runtime address, so unaligned buffers would
// make the rounding depend on where malloc happened to put them.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};
    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
    T* allocate(size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, size_t) noexcept { ::operator delete(p, kAlign); }
    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept {
        return true;
    }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

enum class Precision : uint8_t { Single = 0, Double = 1 };

struct NetConfig {
    int board_size = 9;
    int blocks = 4;
    int filters = 32;
    Precision precision = Precision::Single;

    int points() const { return board_size * board_size; }
    int actions() const { return board_size * board_size + 1; }
    void validate() const;
    bool operator==(const NetConfig&) const = default;
};

struct TensorSpec {
    std::string name;
    std::vector<int> shape;
    size_t offset = 0;
    size_t count = 0;
    bool is_weight = false;  // biases are excluded from L2
    bool operator==(const TensorSpec&) const = default;
};

/// Layer list implied by the config; offsets index one flat value array.
std::vector<TensorSpec> layer_specs(const NetConfig& config);
size_t parameter_count(const NetConfig& config);

template <typename T>
struct BasicParameters {
    NetConfig config;
    std::vector<TensorSpec> specs;
    AlignedVector<T> values;
    uint64_t version = 0;

    const TensorSpec& spec(std::string_view name) const;
    std::span<T> tensor(std::string_view name);
    std::span<const T> tensor(std::string_view name) const;
    size_t size() const { return values.size(); }
};

using Parameters = BasicParameters<float>;
using ParametersD = BasicParameters<double>;

// Gradients share the named-array layout of the parameters they belong to.
template <typename T>
using BasicGradients = BasicParameters<T>;
using Gradients = BasicGradients<float>;

/// Zero-valued parameters with the layout of `config`.
template <typename T>
BasicParameters<T> zeros(const NetConfig& config);

/// Fan-in scaled normal kernels, zero biases. Deterministic in (config, seed).
template <typename T>
BasicParameters<T> init(const NetConfig& config, uint64_t seed);

template <typename To, typename From>
BasicParameters<To> convert(const BasicParameters<From>& params);

/// Flat input batch: `batch` samples, each (2, N, N) as produced by go::features.
struct InputBatch {
    int board_size = 0;
    int batch = 0;
    std::vector<float> data;

    void push(const go::FeaturePlanes& planes);
    static InputBatch from(const std::vector<go::FeaturePlanes>& planes);
};

template <typename T>
struct LossResult {
    T loss = 0;
    T data_loss = 0;
    std::vector<T> q_taken;  // Q(s, a) for each sample before the step
};

/// Reusable activation buffers. One instance per thread; parameters stay read-only.
template <typename T>
class Workspace {
public:
    /// Q-values, row-major (batch, N*N + 1).
    void forward(const BasicParameters<T>& params, const InputBatch& inputs, std::vector<T>& q_out);

    /// Mean squared error on the taken actions plus l2 * sum(weights^2).
    /// Gradients are written into `grads` (resized and overwritten).
    LossResult<T> loss_and_grad(const BasicParameters<T>& params, const InputBatch& inputs, std::span<const int> actions,
                                std::span<const T> targets, double l2, BasicGradients<T>& grads);

private:
    void run_forward(const BasicParameters<T>& params, const InputBatch& inputs);

    int n_ = 0;
    int batch_ = 0;
    std::vector<int> neighbours_;           // (P, 9) same-padding taps, -1 off-board
    AlignedVector<T> input_;                  // (BP, 2) channel fastest
    std::vector<AlignedVector<T>> acts_;      // tower activations, (BP, F) channel fastest
    AlignedVector<T> head_;                   // (BP, 2)
    AlignedVector<T> flat_;                   // (B, 2P)
    AlignedVector<T> q_;                      // (B, A)
    AlignedVector<T> col_;                    // im2col scratch
    AlignedVector<T> scratch_a_, scratch_b_;  // backward buffers
};

/// Convenience wrapper: one Q vector per input position.
std::vector<std::vector<float>> forward(const Parameters& params, const std::vector<go::FeaturePlanes>& batch);

template <typename T>
LossResult<T> loss_and_grad(const BasicParameters<T>& params, const InputBatch& inputs, std::span<const int> actions,
                            std::span<const T> targets, double l2, BasicGradients<T>& grads);

/// Plain SGD with optional heavy-ball momentum: v = m*v + g; w -= lr*v.
template <typename T>
class SgdOptimizer {
public:
    void step(BasicParameters<T>& params, const BasicGradients<T>& grads, double lr, double momentum);

    const std::vector<T>& velocity() const { return velocity_; }
    void set_velocity(std::vector<T> v) { velocity_ = std::move(v); }

private:
    std::vector<T> velocity_;
};

/// target <- rho * target + (1 - rho) * online.
template <typename T>
void polyak(BasicParameters<T>& target, const BasicParameters<T>& online, double rho);

// --- serialization -----------------------------------------------------------

template <typename T>
std::string serialize(const BasicParameters<T>& params);

/// Parses a parameter stream, converting stored arrays to T.
/// Throws Error(Corrupt) for damaged streams and Error(Config) when the
/// arrays disagree with the declared NetConfig.
template <typename T>
BasicParameters<T> deserialize(std::string_view bytes);

void save(const Parameters& params, const std::string& path);
Parameters load(const std::string& path);

}  // namespace qzero::nn
