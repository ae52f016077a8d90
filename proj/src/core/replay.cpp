#include "core/replay.hpp"

#include <algorithm>

#include "core/error.hpp"

namespace qzero {

PackedPlanes PackedPlanes::pack(const go::FeaturePlanes& planes) {
    const int points = planes.size * planes.size;
    PackedPlanes out;
    out.size = static_cast<int8_t>(planes.size);
    out.turn = planes.data[points] > 0.5f ? 1 : 0;
    out.cells.resize(points);
    for (int p = 0; p < points; ++p) out.cells[p] = static_cast<int8_t>(planes.data[p] * 2.0f);
    return out;
}

go::FeaturePlanes PackedPlanes::unpack() const {
    const int points = size * size;
    go::FeaturePlanes f;
    f.size = size;
    f.data.resize(2 * points);
    for (int p = 0; p < points; ++p) f.data[p] = 0.5f * cells[p];
    std::fill(f.data.begin() + points, f.data.end(), static_cast<float>(turn));
    return f;
}

namespace {

PackedPlanes transform(const PackedPlanes& in, const std::vector<int>& perm) {
    PackedPlanes out = in;
    for (size_t p = 0; p < in.cells.size(); ++p) out.cells[perm[p]] = in.cells[p];
    return out;
}

std::vector<uint8_t> transform_mask(const std::vector<uint8_t>& in, const std::vector<int>& perm) {
    std::vector<uint8_t> out(in.size());
    for (size_t a = 0; a < in.size(); ++a) out[perm[a]] = in[a];
    return out;
}

void write_planes(BinaryWriter& w, const PackedPlanes& p) {
    w.put<int8_t>(p.size);
    w.put<uint8_t>(p.turn);
    w.put_array(std::span<const int8_t>(p.cells));
}

PackedPlanes read_planes(BinaryReader& r) {
    PackedPlanes p;
    p.size = r.get<int8_t>();
    p.turn = r.get<uint8_t>();
    p.cells = r.get_array<int8_t>();
    if (p.cells.size() != static_cast<size_t>(p.size) * p.size) fail(ErrorCode::Corrupt, "replay record: plane size mismatch");
    return p;
}

}  // namespace

TransitionRecord augment(const TransitionRecord& record, d4::SymmetryOp op) {
    if (op == d4::SymmetryOp::identity()) return record;
    const auto perm = d4::action_permutation(op, record.state.size);
    TransitionRecord out = record;
    out.state = transform(record.state, perm);
    out.next_state = transform(record.next_state, perm);
    out.action = perm[record.action];
    out.legal_mask = transform_mask(record.legal_mask, perm);
    out.next_legal_mask = transform_mask(record.next_legal_mask, perm);
    return out;
}

void write_record(BinaryWriter& w, const TransitionRecord& r) {
    write_planes(w, r.state);
    w.put<int32_t>(r.action);
    w.put<float>(r.reward);
    write_planes(w, r.next_state);
    w.put<uint8_t>(r.done);
    w.put_array(std::span<const uint8_t>(r.legal_mask));
    w.put_array(std::span<const uint8_t>(r.next_legal_mask));
    w.put<uint8_t>(r.ignition_outcome ? 1 : 0);
    w.put<float>(r.ignition_outcome.value_or(0.0f));
    w.put<uint64_t>(r.serial);
}

TransitionRecord read_record(BinaryReader& r) {
    TransitionRecord t;
    t.state = read_planes(r);
    t.action = r.get<int32_t>();
    t.reward = r.get<float>();
    t.next_state = read_planes(r);
    t.done = r.get<uint8_t>();
    t.legal_mask = r.get_array<uint8_t>();
    t.next_legal_mask = r.get_array<uint8_t>();
    const bool has_outcome = r.get<uint8_t>() != 0;
    const float outcome = r.get<float>();
    if (has_outcome) t.ignition_outcome = outcome;
    t.serial = r.get<uint64_t>();
    return t;
}

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
    if (capacity == 0) fail(ErrorCode::Config, "replay capacity must be >= 1");
}

void ReplayBuffer::push_locked(TransitionRecord&& record) {
    record.serial = next_serial_++;
    if (ring_.size() < capacity_) {
        ring_.push_back(std::move(record));
    } else {
        ring_[cursor_] = std::move(record);
    }
    cursor_ = (cursor_ + 1) % capacity_;
}

void ReplayBuffer::push(TransitionRecord record) {
    std::lock_guard lock(mutex_);
    push_locked(std::move(record));
}

void ReplayBuffer::push_episode(std::vector<TransitionRecord> records) {
    std::lock_guard lock(mutex_);
    for (auto& r : records) push_locked(std::move(r));
}

std::vector<TransitionRecord> ReplayBuffer::sample(size_t batch_size, Rng& rng, size_t min_fill) const {
    std::lock_guard lock(mutex_);
    if (ring_.empty() || ring_.size() < min_fill) {
        fail(ErrorCode::NotReady, "replay buffer not ready: " + std::to_string(ring_.size()) + " of " + std::to_string(min_fill) +
                                      " records");
    }
    std::vector<TransitionRecord> out;
    out.reserve(batch_size);
    for (size_t i = 0; i < batch_size; ++i) out.push_back(ring_[rng.below(ring_.size())]);
    return out;
}

size_t ReplayBuffer::size() const {
    std::lock_guard lock(mutex_);
    return ring_.size();
}

bool ReplayBuffer::is_ready(size_t min_fill) const {
    std::lock_guard lock(mutex_);
    return ring_.size() >= min_fill;
}

uint64_t ReplayBuffer::total_pushed() const {
    std::lock_guard lock(mutex_);
    return next_serial_;
}

bool ReplayBuffer::is_live(uint64_t serial) const {
    std::lock_guard lock(mutex_);
    return serial < next_serial_ && serial >= next_serial_ - ring_.size();
}

void ReplayBuffer::save(BinaryWriter& w) const {
    std::lock_guard lock(mutex_);
    w.put<uint64_t>(capacity_);
    w.put<uint64_t>(cursor_);
    w.put<uint64_t>(next_serial_);
    w.put<uint64_t>(ring_.size());
    for (const auto& r : ring_) write_record(w, r);
}

void ReplayBuffer::load(BinaryReader& r) {
    std::lock_guard lock(mutex_);
    const auto cap = r.get<uint64_t>();
    if (cap != capacity_) fail(ErrorCode::Config, "replay snapshot capacity differs from configured capacity");
    cursor_ = r.get<uint64_t>();
    next_serial_ = r.get<uint64_t>();
    const auto n = r.get<uint64_t>();
    if (n > capacity_ || cursor_ >= capacity_) fail(ErrorCode::Corrupt, "replay snapshot: inconsistent ring");
    ring_.clear();
    ring_.reserve(n);
    for (uint64_t i = 0; i < n; ++i) ring_.push_back(read_record(r));
}

}  // namespace qzero
