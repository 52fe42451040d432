#include "wesac/replay_buffer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wesac {

namespace {

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
}

void ReplayBuffer::add(TransitionRecord record) {
    if (!all_finite(record.state) || !all_finite(record.action) || !all_finite(record.next_state) ||
        !std::isfinite(record.reward)) {
        throw std::invalid_argument("ReplayBuffer: non-finite transition");
    }
    if (record.state.size() != record.next_state.size()) {
        throw std::invalid_argument("ReplayBuffer: state and next_state sizes differ");
    }
    if (!records_.empty() && (record.state.size() != records_.front().state.size() ||
                              record.action.size() != records_.front().action.size())) {
        throw std::invalid_argument("ReplayBuffer: transition shape differs from stored ones");
    }
    if (records_.size() < capacity_) {
        records_.push_back(std::move(record));
    } else {
        records_[next_] = std::move(record);
    }
    next_ = (next_ + 1) % capacity_;
    ++insertions_;
}

Batch ReplayBuffer::sample(std::size_t batch_size, std::mt19937_64& rng) const {
    if (records_.empty()) throw std::logic_error("ReplayBuffer::sample on an empty buffer");
    if (batch_size == 0) throw std::invalid_argument("ReplayBuffer::sample: batch_size must be >= 1");
    const auto b = static_cast<Eigen::Index>(batch_size);
    const auto ds = static_cast<Eigen::Index>(records_.front().state.size());
    const auto da = static_cast<Eigen::Index>(records_.front().action.size());
    Batch out;
    out.states.resize(b, ds);
    out.next_states.resize(b, ds);
    out.actions.resize(b, da);
    out.rewards.resize(b, 1);
    out.dones.resize(b, 1);
    std::uniform_int_distribution<std::size_t> pick(0, records_.size() - 1);
    for (Eigen::Index i = 0; i < b; ++i) {
        const auto& r = records_[pick(rng)];
        for (Eigen::Index k = 0; k < ds; ++k) {
            out.states(i, k) = r.state[static_cast<std::size_t>(k)];
            out.next_states(i, k) = r.next_state[static_cast<std::size_t>(k)];
        }
        for (Eigen::Index k = 0; k < da; ++k) out.actions(i, k) = r.action[static_cast<std::size_t>(k)];
        out.rewards(i, 0) = r.reward;
        out.dones(i, 0) = r.done ? 1.0 : 0.0;
    }
    return out;
}

}  // namespace wesac
