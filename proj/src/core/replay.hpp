#pragma once

// Fixed-capacity FIFO experience replay with uniform sampling.

#include <cstdint>
#include <mutex>
#include <optional>
#include <vector>

#include "core/binio.hpp"
#include "core/go_engine.hpp"
#include "core/rng.hpp"
#include "core/symmetry.hpp"

namespace qzero {

/// FeaturePlanes packed to one byte per point: channel 1 doubled
/// (-2 black, 2 white, 1 ko) plus the turn bit.
struct PackedPlanes {
    int8_t size = 0;
    uint8_t turn = 0;
    std::vector<int8_t> cells;

    static PackedPlanes pack(const go::FeaturePlanes& planes);
    go::FeaturePlanes unpack() const;
    bool operator==(const PackedPlanes&) const = default;
};

struct TransitionRecord {
    PackedPlanes state;
    int action = 0;
    float reward = 0.0f;  // mover's perspective
    PackedPlanes next_state;
    uint8_t done = 0;
    std::vector<uint8_t> legal_mask;       // for state
    std::vector<uint8_t> next_legal_mask;  // for next_state; all zero when done
    std::optional<float> ignition_outcome;  // +5 / -5 for the mover
    uint64_t serial = 0;                    // assigned by the buffer

    go::FeaturePlanes state_features() const { return state.unpack(); }
    go::FeaturePlanes next_state_features() const { return next_state.unpack(); }
    bool operator==(const TransitionRecord&) const = default;
};

/// Applies one D4 operation jointly to both positions, the action and both masks.
TransitionRecord augment(const TransitionRecord& record, d4::SymmetryOp op);

void write_record(BinaryWriter& w, const TransitionRecord& r);
TransitionRecord read_record(BinaryReader& r);

/// Many producers, one consumer. Each call holds an internal lock only for
/// the copy, so sampled records are never torn.
class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity);

    void push(TransitionRecord record);
    /// Inserts a whole episode under one lock acquisition.
    void push_episode(std::vector<TransitionRecord> records);

    /// Uniform with replacement over live records. Throws Error(NotReady)
    /// when fewer than max(min_fill, 1) records are live.
    std::vector<TransitionRecord> sample(size_t batch_size, Rng& rng, size_t min_fill = 0) const;

    size_t size() const;
    size_t capacity() const { return capacity_; }
    bool is_ready(size_t min_fill) const;
    uint64_t total_pushed() const;

    /// True when the record with this serial is still stored.
    bool is_live(uint64_t serial) const;

    void save(BinaryWriter& w) const;
    void load(BinaryReader& r);

private:
    void push_locked(TransitionRecord&& record);

    size_t capacity_;
    mutable std::mutex mutex_;
    std::vector<TransitionRecord> ring_;
    size_t cursor_ = 0;
    uint64_t next_serial_ = 0;
};

}  // namespace qzero
