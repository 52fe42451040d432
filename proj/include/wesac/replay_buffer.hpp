#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <random>
#include <vector>

namespace wesac {

struct TransitionRecord {
    std::vector<double> state;
    std::vector<double> action;
    double reward = 0.0;
    std::vector<double> next_state;
    /// True only for absorbing transitions; time-limit truncation stays false.
    bool done = false;
};

/// Stacked minibatch, one transition per row.
struct Batch {
    Eigen::MatrixXd states;
    Eigen::MatrixXd actions;
    Eigen::MatrixXd rewards;      ///< B x 1
    Eigen::MatrixXd next_states;
    Eigen::MatrixXd dones;        ///< B x 1, 1.0 for absorbing transitions

    Eigen::Index size() const { return states.rows(); }
};

/// Fixed-capacity ring buffer with FIFO eviction and uniform sampling.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    /// Throws std::invalid_argument on non-finite components or a shape that
    /// differs from the first record.
    void add(TransitionRecord record);

    /// `batch_size` draws with replacement, uniform over current contents.
    Batch sample(std::size_t batch_size, std::mt19937_64& rng) const;

    const TransitionRecord& at(std::size_t i) const { return records_.at(i); }
    std::size_t size() const { return records_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::size_t insertions() const { return insertions_; }
    bool empty() const { return records_.empty(); }

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::size_t insertions_ = 0;
    std::vector<TransitionRecord> records_;
};

}  // namespace wesac
