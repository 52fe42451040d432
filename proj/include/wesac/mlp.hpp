#pragma once

#include "wesac/autodiff.hpp"

#include <json.hpp>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace wesac::ad {

enum class Activation { Tanh, Relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/**
 * Fully connected network y = f(... f(x W0 + b0) ...) W_L + b_L with a
 * linear output layer. Weights are (fan_in x fan_out), biases (1 x fan_out),
 * inputs are batches stacked as rows.
 */
struct MlpParams {
    std::vector<std::size_t> sizes;
    Activation activation = Activation::Relu;
    std::vector<Matrix> weights;
    std::vector<Matrix> biases;

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
    static MlpParams init(std::vector<std::size_t> sizes, Activation activation,
                          std::mt19937_64& rng);
    static MlpParams zeros(std::vector<std::size_t> sizes, Activation activation);

    MlpParams zeros_like() const;
    std::size_t num_layers() const { return weights.size(); }
    std::size_t num_params() const;
    std::size_t input_dim() const { return sizes.front(); }
    std::size_t output_dim() const { return sizes.back(); }

    /// Layer by layer, each weight matrix row-major then its bias.
    Eigen::VectorXd flatten() const;
    void assign_flat(const Eigen::VectorXd& flat);

    bool all_finite() const;
    bool same_shape(const MlpParams& other) const;
};

/// Parameters bound to tape leaves during one forward pass.
struct MlpBinding {
    std::vector<Var> weights;
    std::vector<Var> biases;
    Var output;
};

/// Records the forward pass on `tape`. With `track_params` false the
/// parameters enter as constants (gradients still flow into `input`).
/// Throws std::invalid_argument on a dimension mismatch and NonFiniteError on
/// a non-finite output.
MlpBinding forward(const MlpParams& params, Var input, Tape& tape, bool track_params = true);

/// Single-sample convenience wrapper.
Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& input, Tape& tape);

/// Tape-free evaluation on a batch.
Matrix evaluate(const MlpParams& params, const Matrix& input);

/// Gradients of the last backward() with respect to the bound parameters.
MlpParams collect_grads(const Tape& tape, const MlpBinding& binding, const MlpParams& like);

/// target <- eta * source + (1 - eta) * target
void polyak_update(MlpParams& target, const MlpParams& source, double eta);

class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(MlpParams& params, const MlpParams& grads);

private:
    double lr_;
    double beta1_;
    double beta2_;
    double eps_;
    long t_ = 0;
    Eigen::VectorXd m_;
    Eigen::VectorXd v_;
};

nlohmann::json to_json(const MlpParams& p);
MlpParams mlp_from_json(const nlohmann::json& j);
void save_checkpoint(const MlpParams& p, const std::filesystem::path& path);
MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace wesac::ad
