#include "wesac/mlp.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace wesac::ad {

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

namespace {

void check_sizes(const std::vector<std::size_t>& sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("an MLP needs at least input and output sizes");
    for (auto s : sizes) {
        if (s == 0) throw std::invalid_argument("MLP layer sizes must be >= 1");
    }
}

}  // namespace

MlpParams MlpParams::zeros(std::vector<std::size_t> sizes, Activation activation) {
    check_sizes(sizes);
    MlpParams p;
    p.sizes = std::move(sizes);
    p.activation = activation;
    for (std::size_t l = 0; l + 1 < p.sizes.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(p.sizes[l]);
        const auto out = static_cast<Eigen::Index>(p.sizes[l + 1]);
        p.weights.push_back(Matrix::Zero(in, out));
        p.biases.push_back(Matrix::Zero(1, out));
    }
    return p;
}

MlpParams MlpParams::init(std::vector<std::size_t> sizes, Activation activation,
                          std::mt19937_64& rng) {
    MlpParams p = zeros(std::move(sizes), activation);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(p.sizes[l]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Eigen::Index i = 0; i < p.weights[l].size(); ++i) p.weights[l].data()[i] = dist(rng);
        for (Eigen::Index i = 0; i < p.biases[l].size(); ++i) p.biases[l].data()[i] = dist(rng);
    }
    return p;
}

MlpParams MlpParams::zeros_like() const { return zeros(sizes, activation); }

std::size_t MlpParams::num_params() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    }
    return n;
}

Eigen::VectorXd MlpParams::flatten() const {
    Eigen::VectorXd flat(static_cast<Eigen::Index>(num_params()));
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (Eigen::Index i = 0; i < weights[l].rows(); ++i) {
            for (Eigen::Index j = 0; j < weights[l].cols(); ++j) flat(k++) = weights[l](i, j);
        }
        for (Eigen::Index j = 0; j < biases[l].cols(); ++j) flat(k++) = biases[l](0, j);
    }
    return flat;
}

void MlpParams::assign_flat(const Eigen::VectorXd& flat) {
    if (static_cast<std::size_t>(flat.size()) != num_params()) {
        throw std::invalid_argument("assign_flat: wrong parameter count");
    }
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (Eigen::Index i = 0; i < weights[l].rows(); ++i) {
            for (Eigen::Index j = 0; j < weights[l].cols(); ++j) weights[l](i, j) = flat(k++);
        }
        for (Eigen::Index j = 0; j < biases[l].cols(); ++j) biases[l](0, j) = flat(k++);
    }
}

bool MlpParams::all_finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    }
    return true;
}

bool MlpParams::same_shape(const MlpParams& other) const { return sizes == other.sizes; }

MlpBinding forward(const MlpParams& params, Var input, Tape& tape, bool track_params) {
    if (static_cast<std::size_t>(input.cols()) != params.input_dim()) {
        throw std::invalid_argument("MLP input has " + std::to_string(input.cols()) +
                                    " columns, expected " + std::to_string(params.input_dim()));
    }
    MlpBinding b;
    Var h = input;
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        Var w = track_params ? tape.variable(params.weights[l]) : tape.constant(params.weights[l]);
        Var bias = track_params ? tape.variable(params.biases[l]) : tape.constant(params.biases[l]);
        b.weights.push_back(w);
        b.biases.push_back(bias);
        h = add_row(matmul(h, w), bias);
        if (l + 1 < params.num_layers()) h = params.activation == Activation::Tanh ? tanh(h) : relu(h);
    }
    require_finite(h.value(), "MLP output");
    b.output = h;
    return b;
}

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& input, Tape& tape) {
    Var x = tape.constant(input.transpose());
    return forward(params, x, tape).output.value().row(0).transpose();
}

Matrix evaluate(const MlpParams& params, const Matrix& input) {
    if (static_cast<std::size_t>(input.cols()) != params.input_dim()) {
        throw std::invalid_argument("MLP input has wrong width");
    }
    Matrix h = input;
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        Matrix z = h * params.weights[l];
        z.rowwise() += params.biases[l].row(0);
        if (l + 1 < params.num_layers()) {
            if (params.activation == Activation::Tanh) {
                z = z.array().tanh();
            } else {
                z = z.cwiseMax(0.0);
            }
        }
        h = std::move(z);
    }
    require_finite(h, "MLP output");
    return h;
}

MlpParams collect_grads(const Tape& tape, const MlpBinding& binding, const MlpParams& like) {
    MlpParams g = like.zeros_like();
    for (std::size_t l = 0; l < binding.weights.size(); ++l) {
        g.weights[l] = tape.grad(binding.weights[l]);
        g.biases[l] = tape.grad(binding.biases[l]);
    }
    return g;
}

void polyak_update(MlpParams& target, const MlpParams& source, double eta) {
    if (!target.same_shape(source)) throw std::invalid_argument("polyak_update: shape mismatch");
    for (std::size_t l = 0; l < target.weights.size(); ++l) {
        target.weights[l] = eta * source.weights[l] + (1.0 - eta) * target.weights[l];
        target.biases[l] = eta * source.biases[l] + (1.0 - eta) * target.biases[l];
    }
}

void Adam::step(MlpParams& params, const MlpParams& grads) {
    if (!params.same_shape(grads)) throw std::invalid_argument("Adam::step: shape mismatch");
    Eigen::VectorXd theta = params.flatten();
    const Eigen::VectorXd g = grads.flatten();
    if (m_.size() == 0) {
        m_ = Eigen::VectorXd::Zero(theta.size());
        v_ = Eigen::VectorXd::Zero(theta.size());
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * g;
    v_ = beta2_ * v_ + (1.0 - beta2_) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    theta.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
    params.assign_flat(theta);
}

nlohmann::json to_json(const MlpParams& p) {
    nlohmann::json j;
    j["layer_sizes"] = p.sizes;
    j["activation"] = to_string(p.activation);
    nlohmann::json arrays = nlohmann::json::array();
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        std::vector<double> w;
        for (Eigen::Index i = 0; i < p.weights[l].rows(); ++i) {
            for (Eigen::Index k = 0; k < p.weights[l].cols(); ++k) w.push_back(p.weights[l](i, k));
        }
        arrays.push_back(w);
        arrays.push_back(std::vector<double>(p.biases[l].data(), p.biases[l].data() + p.biases[l].size()));
    }
    j["parameters"] = std::move(arrays);
    return j;
}

MlpParams mlp_from_json(const nlohmann::json& j) {
    MlpParams p = MlpParams::zeros(j.at("layer_sizes").get<std::vector<std::size_t>>(),
                                   activation_from_string(j.value("activation", "relu")));
    const auto& arrays = j.at("parameters");
    if (!arrays.is_array() || arrays.size() != 2 * p.num_layers()) {
        throw std::invalid_argument("checkpoint: expected one weight and one bias array per layer");
    }
    for (std::size_t l = 0; l < p.num_layers(); ++l) {
        const auto w = arrays[2 * l].get<std::vector<double>>();
        const auto b = arrays[2 * l + 1].get<std::vector<double>>();
        if (w.size() != static_cast<std::size_t>(p.weights[l].size()) ||
            b.size() != static_cast<std::size_t>(p.biases[l].size())) {
            throw std::invalid_argument("checkpoint: array length does not match layer sizes");
        }
        std::size_t k = 0;
        for (Eigen::Index i = 0; i < p.weights[l].rows(); ++i) {
            for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c) p.weights[l](i, c) = w[k++];
        }
        for (Eigen::Index c = 0; c < p.biases[l].cols(); ++c) p.biases[l](0, c) = b[static_cast<std::size_t>(c)];
    }
    if (!p.all_finite()) throw std::invalid_argument("checkpoint: non-finite parameter");
    return p;
}

void save_checkpoint(const MlpParams& p, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out << to_json(p).dump() << '\n';
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    return mlp_from_json(nlohmann::json::parse(in));
}

}  // namespace wesac::ad
