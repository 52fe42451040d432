#include "wesac/autodiff.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace wesac::ad {

namespace {

Tape& tape_of(Var a, Var b) {
    if (a.tape == nullptr || a.tape != b.tape) {
        throw std::invalid_argument("operands live on different tapes");
    }
    return *a.tape;
}

void require_same_shape(Var a, Var b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        std::ostringstream os;
        os << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
           << b.cols();
        throw std::invalid_argument(os.str());
    }
}

double softplus_scalar(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

const Matrix& Var::value() const { return tape->value(*this); }

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw NonFiniteError(std::string("non-finite value in ") + what);
}

Var Tape::variable(Matrix value) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::constant(Matrix value) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.requires_grad = false;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::push(Op op, Matrix value, std::size_t a, std::size_t b, double s0, double s1) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.a = a;
    n.b = b;
    n.s0 = s0;
    n.s1 = s1;
    n.requires_grad = (a != npos && nodes_[a].requires_grad) || (b != npos && nodes_[b].requires_grad);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::custom_unary(Var x, Matrix value, CustomGrad grad) {
    Var out = push(Op::Custom, std::move(value), x.id);
    nodes_[out.id].custom = std::move(grad);
    return out;
}

void Tape::clear() {
    nodes_.clear();
    grads_.clear();
}

Matrix Tape::grad(Var v) const {
    const auto& n = nodes_.at(v.id);
    if (v.id < grads_.size() && grads_[v.id].size() != 0) return grads_[v.id];
    return Matrix::Zero(n.value.rows(), n.value.cols());
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
    if (id == npos || !nodes_[id].requires_grad) return;
    Matrix& dst = grads_[id];
    if (dst.size() == 0) {
        dst = g;
    } else {
        dst += g;
    }
}

void Tape::backward(Var scalar) {
    if (scalar.rows() != 1 || scalar.cols() != 1) {
        throw std::invalid_argument("backward(): output is not a scalar; pass a seed");
    }
    backward(scalar, Matrix::Ones(1, 1));
}

void Tape::backward(Var output, const Matrix& seed) {
    if (nodes_.empty()) throw std::logic_error("backward() on an empty tape");
    const Node& out = nodes_.at(output.id);
    if (seed.rows() != out.value.rows() || seed.cols() != out.value.cols()) {
        throw std::invalid_argument("backward(): seed shape differs from output");
    }
    grads_.assign(nodes_.size(), Matrix());
    if (!out.requires_grad) return;
    grads_[output.id] = seed;

    for (std::size_t i = output.id + 1; i-- > 0;) {
        const Node& n = nodes_[i];
        if (!n.requires_grad || grads_[i].size() == 0 || n.op == Op::Leaf) continue;
        const Matrix& g = grads_[i];
        const Matrix* va = n.a != npos ? &nodes_[n.a].value : nullptr;
        const Matrix* vb = n.b != npos ? &nodes_[n.b].value : nullptr;
        switch (n.op) {
            case Op::MatMul:
                if (nodes_[n.a].requires_grad) accumulate(n.a, g * vb->transpose());
                if (nodes_[n.b].requires_grad) accumulate(n.b, va->transpose() * g);
                break;
            case Op::AddRow:
                accumulate(n.a, g);
                if (nodes_[n.b].requires_grad) accumulate(n.b, g.colwise().sum());
                break;
            case Op::Add:
                accumulate(n.a, g);
                accumulate(n.b, g);
                break;
            case Op::Sub:
                accumulate(n.a, g);
                if (nodes_[n.b].requires_grad) accumulate(n.b, -g);
                break;
            case Op::Mul:
                if (nodes_[n.a].requires_grad) accumulate(n.a, g.cwiseProduct(*vb));
                if (nodes_[n.b].requires_grad) accumulate(n.b, g.cwiseProduct(*va));
                break;
            case Op::Scale:
                accumulate(n.a, n.s0 * g);
                break;
            case Op::AddScalar:
                accumulate(n.a, g);
                break;
            case Op::Tanh:
                accumulate(n.a, g.array() * (1.0 - n.value.array().square()));
                break;
            case Op::Relu:
                accumulate(n.a, (va->array() > 0.0).select(g, 0.0));
                break;
            case Op::Exp:
                accumulate(n.a, g.cwiseProduct(n.value));
                break;
            case Op::Log:
                accumulate(n.a, g.cwiseQuotient(*va));
                break;
            case Op::Square:
                accumulate(n.a, 2.0 * g.cwiseProduct(*va));
                break;
            case Op::Softplus:
                accumulate(n.a, g.array() * va->unaryExpr([](double x) { return sigmoid(x); }).array());
                break;
            case Op::Clamp:
                accumulate(n.a, (va->array() >= n.s0 && va->array() <= n.s1).select(g, 0.0));
                break;
            case Op::Min: {
                const auto pick_a = (va->array() <= vb->array());
                if (nodes_[n.a].requires_grad) accumulate(n.a, pick_a.select(g, 0.0));
                if (nodes_[n.b].requires_grad) accumulate(n.b, pick_a.select(0.0, g));
                break;
            }
            case Op::SumCols:
                accumulate(n.a, g.replicate(1, va->cols()));
                break;
            case Op::Sum:
                accumulate(n.a, Matrix::Constant(va->rows(), va->cols(), g(0, 0)));
                break;
            case Op::Mean:
                accumulate(n.a, Matrix::Constant(va->rows(), va->cols(),
                                                 g(0, 0) / static_cast<double>(va->size())));
                break;
            case Op::Cols: {
                Matrix ga = Matrix::Zero(va->rows(), va->cols());
                ga.middleCols(static_cast<Eigen::Index>(n.s0), g.cols()) = g;
                accumulate(n.a, ga);
                break;
            }
            case Op::ConcatCols:
                if (nodes_[n.a].requires_grad) accumulate(n.a, g.leftCols(va->cols()));
                if (nodes_[n.b].requires_grad) accumulate(n.b, g.rightCols(vb->cols()));
                break;
            case Op::Custom:
                accumulate(n.a, n.custom(*va, g));
                break;
            case Op::Leaf:
                break;
        }
    }
}

Var matmul(Var a, Var b) {
    Tape& t = tape_of(a, b);
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
    return t.push(Op::MatMul, a.value() * b.value(), a.id, b.id);
}

Var add_row(Var a, Var b) {
    Tape& t = tape_of(a, b);
    if (b.rows() != 1 || b.cols() != a.cols()) throw std::invalid_argument("add_row: bias shape");
    return t.push(Op::AddRow, a.value().rowwise() + b.value().row(0), a.id, b.id);
}

Var operator+(Var a, Var b) {
    require_same_shape(a, b, "add");
    return tape_of(a, b).push(Op::Add, a.value() + b.value(), a.id, b.id);
}

Var operator-(Var a, Var b) {
    require_same_shape(a, b, "sub");
    return tape_of(a, b).push(Op::Sub, a.value() - b.value(), a.id, b.id);
}

Var operator*(Var a, Var b) {
    require_same_shape(a, b, "mul");
    return tape_of(a, b).push(Op::Mul, a.value().cwiseProduct(b.value()), a.id, b.id);
}

Var operator*(double s, Var a) { return a.tape->push(Op::Scale, s * a.value(), a.id, Tape::npos, s); }
Var operator*(Var a, double s) { return s * a; }
Var operator-(Var a) { return -1.0 * a; }

Var operator+(Var a, double s) {
    return a.tape->push(Op::AddScalar, a.value().array() + s, a.id, Tape::npos, s);
}

Var tanh(Var a) { return a.tape->push(Op::Tanh, a.value().array().tanh(), a.id); }
Var relu(Var a) { return a.tape->push(Op::Relu, a.value().cwiseMax(0.0), a.id); }
Var exp(Var a) { return a.tape->push(Op::Exp, a.value().array().exp(), a.id); }
Var log(Var a) { return a.tape->push(Op::Log, a.value().array().log(), a.id); }
Var square(Var a) { return a.tape->push(Op::Square, a.value().array().square(), a.id); }

Var softplus(Var a) {
    return a.tape->push(Op::Softplus, a.value().unaryExpr([](double x) { return softplus_scalar(x); }),
                        a.id);
}

Var clamp(Var a, double lo, double hi) {
    return a.tape->push(Op::Clamp, a.value().cwiseMax(lo).cwiseMin(hi), a.id, Tape::npos, lo, hi);
}

Var minimum(Var a, Var b) {
    require_same_shape(a, b, "minimum");
    return tape_of(a, b).push(Op::Min, a.value().cwiseMin(b.value()), a.id, b.id);
}

Var sum_cols(Var a) { return a.tape->push(Op::SumCols, a.value().rowwise().sum(), a.id); }

Var sum(Var a) { return a.tape->push(Op::Sum, Matrix::Constant(1, 1, a.value().sum()), a.id); }

Var mean(Var a) {
    if (a.value().size() == 0) throw std::invalid_argument("mean of an empty matrix");
    return a.tape->push(Op::Mean, Matrix::Constant(1, 1, a.value().mean()), a.id);
}

Var cols(Var a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.cols()) {
        throw std::invalid_argument("cols: range out of bounds");
    }
    return a.tape->push(Op::Cols, a.value().middleCols(start, count), a.id, Tape::npos,
                        static_cast<double>(start));
}

Var concat_cols(Var a, Var b) {
    Tape& t = tape_of(a, b);
    if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row counts differ");
    Matrix out(a.rows(), a.cols() + b.cols());
    out << a.value(), b.value();
    return t.push(Op::ConcatCols, std::move(out), a.id, b.id);
}

}  // namespace wesac::ad
