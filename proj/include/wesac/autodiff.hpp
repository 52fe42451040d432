#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace wesac::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
};

/// Raised when a forward value is NaN or infinite.
struct NonFiniteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Op {
    Leaf,
    MatMul,
    AddRow,
    Add,
    Sub,
    Mul,
    Scale,
    AddScalar,
    Tanh,
    Relu,
    Exp,
    Log,
    Square,
    Softplus,
    Clamp,
    Min,
    SumCols,
    Sum,
    Mean,
    Cols,
    ConcatCols,
    Custom,
};

/**
 * Append-only record of matrix-valued primitives for reverse-mode
 * differentiation. Scalars are 1x1 matrices; batches are stacked as rows.
 *
 * Parents always precede their children, so backward() walks the nodes in
 * reverse insertion order and visits each one once. A Tape is not thread-safe.
 */
class Tape {
public:
    using CustomGrad = std::function<Matrix(const Matrix& input, const Matrix& output_grad)>;

    /// Differentiable input (parameter or input batch).
    Var variable(Matrix value);
    /// Input that never receives a gradient.
    Var constant(Matrix value);

    /// Elementwise op with a caller-supplied partial, for extensions and tests.
    Var custom_unary(Var x, Matrix value, CustomGrad grad);

    Var push(Op op, Matrix value, std::size_t a, std::size_t b = npos, double s0 = 0.0,
             double s1 = 0.0);

    const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

    /// Gradient of the last backward() output with respect to `v`; zeros if
    /// `v` does not influence it.
    Matrix grad(Var v) const;

    /// Seeds d(output) = seed and propagates to every node.
    void backward(Var output, const Matrix& seed);
    /// Backward from a 1x1 output with seed 1.
    void backward(Var scalar);

    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }
    void clear();

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    struct Node {
        Op op = Op::Leaf;
        Matrix value;
        std::size_t a = npos;
        std::size_t b = npos;
        double s0 = 0.0;
        double s1 = 0.0;
        bool requires_grad = false;
        CustomGrad custom;
    };

    void accumulate(std::size_t id, const Matrix& g);

    std::vector<Node> nodes_;
    std::vector<Matrix> grads_;
};

// Primitives. All throw std::invalid_argument on shape mismatch.
Var matmul(Var a, Var b);
/// a (B x n) + b (1 x n) broadcast over rows.
Var add_row(Var a, Var b);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
/// Elementwise product.
Var operator*(Var a, Var b);
Var operator*(double s, Var a);
Var operator*(Var a, double s);
Var operator+(Var a, double s);
Var operator-(Var a);
Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
/// ln(1 + e^x), evaluated stably.
Var softplus(Var a);
/// Clamps to [lo, hi]; the gradient is zero outside the interval.
Var clamp(Var a, double lo, double hi);
/// Elementwise minimum; ties send the gradient to `a`.
Var minimum(Var a, Var b);
/// Row sums: (B x n) -> (B x 1).
Var sum_cols(Var a);
Var sum(Var a);
Var mean(Var a);
/// Columns [start, start + count).
Var cols(Var a, Eigen::Index start, Eigen::Index count);
Var concat_cols(Var a, Var b);

/// Throws NonFiniteError naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

}  // namespace wesac::ad
