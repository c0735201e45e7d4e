#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ratekit/errors.hpp"

namespace ratekit::ad {

class Tape;

/// Handle to one scalar node on a tape. Cheap to copy; valid until the
/// owning tape is cleared or destroyed.
class Var {
public:
    Var() : tape_(nullptr), index_(0) {}

    double value() const;
    std::uint32_t index() const { return index_; }
    Tape* tape() const { return tape_; }

private:
    friend class Tape;
    Var(Tape* t, std::uint32_t i) : tape_(t), index_(i) {}

    Tape* tape_;
    std::uint32_t index_;
};

/// Result of a backward pass: adjoint of the output w.r.t. every node.
/// Leaves not reachable from the output get 0.
class Gradients {
public:
    double at(Var v) const { return adjoints_[v.index()]; }
    double operator[](Var v) const { return at(v); }
    std::size_t size() const { return adjoints_.size(); }

private:
    friend class Tape;
    std::vector<double> adjoints_;
};

/// Append-only reverse-mode computation record over scalars. Nodes store the
/// forward value plus local partials w.r.t. their parents; parents always
/// precede children, so one reverse sweep computes all gradients.
///
/// Values are eagerly checked: any non-finite forward value or domain
/// violation (ln of non-positive, division by zero) throws EvalError naming
/// the node. A tape is single-threaded; run one tape per worker.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Differentiable input (model parameter or data the caller wants
    /// gradients for).
    Var leaf(double value) { return push(Op::Leaf, value, nullptr, nullptr, 0); }

    /// Constant; structurally identical to a leaf (gradient simply unused).
    Var constant(double value) { return push(Op::Const, value, nullptr, nullptr, 0); }

    std::vector<Var> leaves(std::span<const double> values) {
        std::vector<Var> out;
        out.reserve(values.size());
        for (double v : values) out.push_back(leaf(v));
        return out;
    }

    // -- primitive operations -------------------------------------------

    Var add(Var a, Var b) {
        check_same_tape(a, b);
        std::uint32_t p[2] = {a.index_, b.index_};
        double d[2] = {1.0, 1.0};
        return push(Op::Add, val(a) + val(b), p, d, 2);
    }
    Var add(Var a, double c) {
        std::uint32_t p[1] = {a.index_};
        double d[1] = {1.0};
        return push(Op::Add, val(a) + c, p, d, 1);
    }
    Var sub(Var a, Var b) {
        check_same_tape(a, b);
        std::uint32_t p[2] = {a.index_, b.index_};
        double d[2] = {1.0, -1.0};
        return push(Op::Sub, val(a) - val(b), p, d, 2);
    }
    Var sub(Var a, double c) { return add(a, -c); }
    Var sub(double c, Var b) {
        std::uint32_t p[1] = {b.index_};
        double d[1] = {-1.0};
        return push(Op::Sub, c - val(b), p, d, 1);
    }
    Var mul(Var a, Var b) {
        check_same_tape(a, b);
        std::uint32_t p[2] = {a.index_, b.index_};
        double d[2] = {val(b), val(a)};
        return push(Op::Mul, val(a) * val(b), p, d, 2);
    }
    Var mul(Var a, double c) {
        std::uint32_t p[1] = {a.index_};
        double d[1] = {c};
        return push(Op::Mul, val(a) * c, p, d, 1);
    }
    Var div(Var a, Var b) {
        check_same_tape(a, b);
        if (val(b) == 0.0) throw EvalError("div: zero denominator at node " + std::to_string(b.index_));
        double inv = 1.0 / val(b);
        std::uint32_t p[2] = {a.index_, b.index_};
        double d[2] = {inv, -val(a) * inv * inv};
        // true division for the value: bit-identical to the plain computation
        return push(Op::Div, val(a) / val(b), p, d, 2);
    }
    Var div(Var a, double c) {
        if (c == 0.0) throw EvalError("div: zero constant denominator");
        std::uint32_t p[1] = {a.index_};
        double d[1] = {1.0 / c};
        return push(Op::Div, val(a) / c, p, d, 1);
    }
    Var div(double c, Var b) {
        if (val(b) == 0.0) throw EvalError("div: zero denominator at node " + std::to_string(b.index_));
        double inv = 1.0 / val(b);
        std::uint32_t p[1] = {b.index_};
        double d[1] = {-c * inv * inv};
        return push(Op::Div, c / val(b), p, d, 1);
    }
    Var neg(Var a) {
        std::uint32_t p[1] = {a.index_};
        double d[1] = {-1.0};
        return push(Op::Neg, -val(a), p, d, 1);
    }
    Var exp(Var a) {
        double e = std::exp(val(a));
        std::uint32_t p[1] = {a.index_};
        double d[1] = {e};
        return push(Op::Exp, e, p, d, 1);
    }
    Var ln(Var a) {
        if (!(val(a) > 0.0))
            throw EvalError("ln: non-positive argument " + std::to_string(val(a)) +
                            " at node " + std::to_string(a.index_));
        std::uint32_t p[1] = {a.index_};
        double d[1] = {1.0 / val(a)};
        return push(Op::Ln, std::log(val(a)), p, d, 1);
    }
    Var sigmoid(Var a) {
        double s = stable_sigmoid(val(a));
        std::uint32_t p[1] = {a.index_};
        double d[1] = {s * (1.0 - s)};
        return push(Op::Sigmoid, s, p, d, 1);
    }
    Var tanh(Var a) {
        double t = std::tanh(val(a));
        std::uint32_t p[1] = {a.index_};
        double d[1] = {1.0 - t * t};
        return push(Op::Tanh, t, p, d, 1);
    }
    /// Subgradient 0 at the kink.
    Var relu(Var a) {
        bool on = val(a) > 0.0;
        std::uint32_t p[1] = {a.index_};
        double d[1] = {on ? 1.0 : 0.0};
        return push(Op::Relu, on ? val(a) : 0.0, p, d, 1);
    }
    Var sqrt(Var a) {
        if (val(a) < 0.0)
            throw EvalError("sqrt: negative argument at node " + std::to_string(a.index_));
        double s = std::sqrt(val(a));
        if (s == 0.0) throw EvalError("sqrt: zero argument (derivative unbounded) at node " +
                                      std::to_string(a.index_));
        std::uint32_t p[1] = {a.index_};
        double d[1] = {0.5 / s};
        return push(Op::Sqrt, s, p, d, 1);
    }

    Var sum(std::span<const Var> xs) {
        scratch_p_.clear();
        scratch_d_.clear();
        double acc = 0.0;
        for (Var x : xs) {
            check_mine(x);
            acc += val(x);
            scratch_p_.push_back(x.index_);
            scratch_d_.push_back(1.0);
        }
        return push(Op::Sum, acc, scratch_p_.data(), scratch_d_.data(),
                    static_cast<std::uint32_t>(scratch_p_.size()));
    }

    Var mean(std::span<const Var> xs) {
        if (xs.empty()) throw EvalError("mean: empty operand list");
        double inv = 1.0 / static_cast<double>(xs.size());
        scratch_p_.clear();
        scratch_d_.clear();
        double acc = 0.0;
        for (Var x : xs) {
            check_mine(x);
            acc += val(x);
            scratch_p_.push_back(x.index_);
            scratch_d_.push_back(inv);
        }
        return push(Op::Mean, acc * inv, scratch_p_.data(), scratch_d_.data(),
                    static_cast<std::uint32_t>(scratch_p_.size()));
    }

    Var dot(std::span<const Var> a, std::span<const Var> b) {
        if (a.size() != b.size()) throw EvalError("dot: length mismatch");
        scratch_p_.clear();
        scratch_d_.clear();
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            check_mine(a[i]);
            check_mine(b[i]);
            acc += val(a[i]) * val(b[i]);
            scratch_p_.push_back(a[i].index_);
            scratch_d_.push_back(val(b[i]));
            scratch_p_.push_back(b[i].index_);
            scratch_d_.push_back(val(a[i]));
        }
        return push(Op::Dot, acc, scratch_p_.data(), scratch_d_.data(),
                    static_cast<std::uint32_t>(scratch_p_.size()));
    }

    /// Dot of variables against fixed coefficients (the common "weights
    /// times data row" case; one node instead of 2n).
    Var dot(std::span<const Var> a, std::span<const double> b) {
        if (a.size() != b.size()) throw EvalError("dot: length mismatch");
        scratch_p_.clear();
        scratch_d_.clear();
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            check_mine(a[i]);
            acc += val(a[i]) * b[i];
            scratch_p_.push_back(a[i].index_);
            scratch_d_.push_back(b[i]);
        }
        return push(Op::Dot, acc, scratch_p_.data(), scratch_d_.data(),
                    static_cast<std::uint32_t>(scratch_p_.size()));
    }

    // -- backward ---------------------------------------------------------

    /// Reverse sweep from `output`. Each node is visited exactly once;
    /// non-finite adjoints fail loudly.
    Gradients backward(Var output) const {
        check_mine(output);
        Gradients g;
        g.adjoints_.assign(nodes_.size(), 0.0);
        g.adjoints_[output.index_] = 1.0;
        for (std::uint32_t i = output.index_ + 1; i-- > 0;) {
            double a = g.adjoints_[i];
            if (a == 0.0) continue;
            if (!std::isfinite(a))
                throw EvalError("backward: non-finite adjoint at node " + std::to_string(i) +
                                " (" + op_name(nodes_[i].op) + ")");
            const Node& n = nodes_[i];
            for (std::uint32_t k = 0; k < n.count; ++k)
                g.adjoints_[parents_[n.first + k]] += a * partials_[n.first + k];
        }
        return g;
    }

    std::size_t size() const { return nodes_.size(); }

    void clear() {
        nodes_.clear();
        parents_.clear();
        partials_.clear();
    }

    double value_of(std::uint32_t index) const { return nodes_[index].value; }

private:
    enum class Op : std::uint8_t {
        Leaf, Const, Add, Sub, Mul, Div, Neg, Exp, Ln, Sigmoid, Tanh, Relu, Sqrt,
        Sum, Mean, Dot
    };

    struct Node {
        double value;
        std::uint32_t first;
        std::uint32_t count;
        Op op;
    };

    static const char* op_name(Op o) {
        switch (o) {
            case Op::Leaf: return "leaf";
            case Op::Const: return "const";
            case Op::Add: return "add";
            case Op::Sub: return "sub";
            case Op::Mul: return "mul";
            case Op::Div: return "div";
            case Op::Neg: return "neg";
            case Op::Exp: return "exp";
            case Op::Ln: return "ln";
            case Op::Sigmoid: return "sigmoid";
            case Op::Tanh: return "tanh";
            case Op::Relu: return "relu";
            case Op::Sqrt: return "sqrt";
            case Op::Sum: return "sum";
            case Op::Mean: return "mean";
            case Op::Dot: return "dot";
        }
        return "?";
    }

    static double stable_sigmoid(double x) {
        if (x >= 0.0) {
            return 1.0 / (1.0 + std::exp(-x));
        }
        double e = std::exp(x);
        return e / (1.0 + e);
    }

    double val(Var v) const { return nodes_[v.index_].value; }

    void check_mine(Var v) const {
        if (v.tape_ != this) throw EvalError("operand does not belong to this tape");
    }
    void check_same_tape(Var a, Var b) const {
        check_mine(a);
        check_mine(b);
    }

    Var push(Op op, double value, const std::uint32_t* p, const double* d, std::uint32_t count) {
        if (!std::isfinite(value))
            throw EvalError(std::string("non-finite value from op '") + op_name(op) +
                            "' at node " + std::to_string(nodes_.size()));
        Node n;
        n.value = value;
        n.first = static_cast<std::uint32_t>(parents_.size());
        n.count = count;
        n.op = op;
        for (std::uint32_t k = 0; k < count; ++k) {
            parents_.push_back(p[k]);
            partials_.push_back(d[k]);
        }
        nodes_.push_back(n);
        return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
    }

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> parents_;
    std::vector<double> partials_;
    // reused by the n-ary ops to avoid reallocating per call
    std::vector<std::uint32_t> scratch_p_;
    std::vector<double> scratch_d_;
};

inline double Var::value() const { return tape_->value_of(index_); }

// Operator sugar; everything routes through the tape of the left operand.
inline Var operator+(Var a, Var b) { return a.tape()->add(a, b); }
inline Var operator+(Var a, double c) { return a.tape()->add(a, c); }
inline Var operator+(double c, Var a) { return a.tape()->add(a, c); }
inline Var operator-(Var a, Var b) { return a.tape()->sub(a, b); }
inline Var operator-(Var a, double c) { return a.tape()->sub(a, c); }
inline Var operator-(double c, Var a) { return a.tape()->sub(c, a); }
inline Var operator-(Var a) { return a.tape()->neg(a); }
inline Var operator*(Var a, Var b) { return a.tape()->mul(a, b); }
inline Var operator*(Var a, double c) { return a.tape()->mul(a, c); }
inline Var operator*(double c, Var a) { return a.tape()->mul(a, c); }
inline Var operator/(Var a, Var b) { return a.tape()->div(a, b); }
inline Var operator/(Var a, double c) { return a.tape()->div(a, c); }
inline Var operator/(double c, Var a) { return a.tape()->div(c, a); }

// -- gradient checking ----------------------------------------------------

struct GradCheckEntry {
    double analytic;
    double numeric;
    double rel_error;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    bool pass = false;
};

/// Compares backward() against central finite differences, coordinate by
/// coordinate. `f` must build a scalar from the given leaves on the given
/// tape.
///
/// A coordinate passes when |analytic - numeric| <= max(tolerance *
/// max(|analytic|, |numeric|), atol): central differences carry an absolute
/// noise floor of roughly eps * |f| / step, so gradients below that floor
/// are compared absolutely rather than relatively. rel_error is reported
/// against the scale max(|analytic|, |numeric|, atol / tolerance).
inline GradCheckReport grad_check(const std::function<Var(Tape&, std::span<const Var>)>& f,
                                  std::span<const double> point, double step,
                                  double tolerance, double atol = 1e-9) {
    auto eval_at = [&](std::span<const double> x) {
        Tape t;
        std::vector<Var> vars = t.leaves(x);
        return f(t, vars).value();
    };

    GradCheckReport report;
    Tape t;
    std::vector<Var> vars = t.leaves(point);
    Var y = f(t, vars);
    Gradients g = t.backward(y);

    std::vector<double> x(point.begin(), point.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double keep = x[i];
        x[i] = keep + step;
        double up = eval_at(x);
        x[i] = keep - step;
        double down = eval_at(x);
        x[i] = keep;

        GradCheckEntry e;
        e.analytic = g.at(vars[i]);
        e.numeric = (up - down) / (2.0 * step);
        double scale = std::max({std::abs(e.analytic), std::abs(e.numeric), atol / tolerance});
        e.rel_error = std::abs(e.analytic - e.numeric) / scale;
        report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
        report.entries.push_back(e);
    }
    report.pass = report.max_rel_error <= tolerance;
    return report;
}

} // namespace ratekit::ad
