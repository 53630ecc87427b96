#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace dahcr::num {

// NaN/Inf guards at op boundaries. On in tests, off in the training hot
// path; see set_checked.
bool checked_mode();
void set_checked(bool on);

class Tape;

// Dense row-major 2-D tensor. Vectors are 1xN. Data is shared on copy;
// ops never mutate inputs. A tensor participates in differentiation
// when it carries a tape node (bound via Tape::var or produced by an op
// with a bound input).
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::shared_ptr<std::vector<double>> data;
    Tape* tape = nullptr;
    int node = -1;

    Tensor() = default;
    Tensor(int r, int c);

    static Tensor zeros(int r, int c) { return Tensor(r, c); }
    static Tensor full(int r, int c, double v);
    static Tensor from(std::vector<double> values, int r, int c);
    static Tensor row(std::vector<double> values);
    static Tensor scalar(double v) { return from({v}, 1, 1); }

    int size() const { return rows * cols; }
    double* ptr() { return data->data(); }
    const double* ptr() const { return data->data(); }
    double& at(int i, int j) { return (*data)[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return (*data)[static_cast<std::size_t>(i) * cols + j]; }
    double value() const;  // requires size()==1

    Tensor detached() const;  // same data, no tape binding
    Tensor clone() const;     // deep copy, no tape binding
};

// Per-node gradient buffers produced by Tape::backward.
class Gradients {
public:
    explicit Gradients(std::size_t nodes) : by_node_(nodes) {}

    std::vector<double>& buf(int node, int size);
    bool reached(int node) const {
        return node >= 0 && !by_node_[static_cast<std::size_t>(node)].empty();
    }
    // Gradient of a bound tensor; zeros when the loss never reached it.
    std::vector<double> of(const Tensor& t) const;
    const std::vector<double>* raw(int node) const;

private:
    std::vector<std::vector<double>> by_node_;
};

// Reverse-mode tape. Records one node per primitive application, in
// topological (creation) order; backward walks the record once in
// reverse. A tape and its tensors belong to one logical thread.
class Tape {
public:
    using BackFn = std::function<void(const std::vector<double>& gout, Gradients& grads)>;

    // Registers a leaf. The returned tensor shares data with t.
    Tensor var(const Tensor& t);

    int record(BackFn fn);
    std::size_t node_count() const { return nodes_.size(); }

    Gradients backward(const Tensor& loss);

    // Instrumentation: backward closure invocations in the last backward.
    std::size_t last_backward_visits() const { return visits_; }

private:
    struct Node {
        BackFn back;  // empty for leaves
    };
    std::vector<Node> nodes_;
    std::size_t visits_ = 0;
};

// Primitive ops. Each validates shapes, computes the forward value and,
// when an input is bound to a tape, records the backward rule.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);  // same shape, or b a 1xN row broadcast
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
Tensor negate(const Tensor& a);
Tensor add_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log_op(const Tensor& a);
Tensor exp_op(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor row_sum(const Tensor& a);   // m x n -> m x 1
Tensor mean_all(const Tensor& a);  // -> 1 x 1
Tensor sum_all(const Tensor& a);   // -> 1 x 1
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& a, int r0, int h);
Tensor slice_cols(const Tensor& a, int c0, int w);
Tensor gather_rows(const Tensor& a, const std::vector<int>& idx);
Tensor masked_fill(const Tensor& a, const Tensor& mask, double value);
Tensor reshape(const Tensor& a, int r, int c);

// Uniform dispatch over the primitive vocabulary (test convenience).
enum class Prim {
    kMatmul, kAdd, kScale, kConcat, kRelu, kTanh, kSigmoid, kLog, kExp,
    kNegate, kSoftmax, kRowSum, kMean, kGather, kMaskedFill,
};
Tensor apply_primitive(Prim kind, const std::vector<Tensor>& inputs);
const char* prim_name(Prim kind);

}  // namespace dahcr::num
