#include "dahcr/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace dahcr::num {

namespace {

std::atomic<bool> g_checked{false};

void check_finite(const Tensor& t, const char* op) {
    if (!g_checked.load(std::memory_order_relaxed)) return;
    for (double v : *t.data) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(std::string("non-finite output of ") + op);
        }
    }
}

[[noreturn]] void shape_error(const char* op, const Tensor& a) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                std::to_string(a.rows) + "x" + std::to_string(a.cols) + ")");
}

Tape* tape_of(const Tensor& a) { return a.tape; }
Tape* tape_of(const Tensor& a, const Tensor& b) {
    if (a.tape && b.tape && a.tape != b.tape) {
        throw std::invalid_argument("operands bound to different tapes");
    }
    return a.tape ? a.tape : b.tape;
}

// out = A (m x k) * B (k x n), accumulating into zeroed out.
void mm(const double* a, const double* b, double* out, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* orow = out + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

// out += A (m x k) * B^T where B is (n x k).
void mm_abt(const double* a, const double* b, double* out, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* orow = out + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<std::size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            orow[j] += acc;
        }
    }
}

// out += A^T * B where A is (k x m), B is (k x n).
void mm_atb(const double* a, const double* b, double* out, int m, int k, int n) {
    for (int p = 0; p < k; ++p) {
        const double* arow = a + static_cast<std::size_t>(p) * m;
        const double* brow = b + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* orow = out + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

Tensor like(const Tensor& a) { return Tensor(a.rows, a.cols); }

using Map = double (*)(double);

Tensor unary(const Tensor& a, const char* name, Map f,
             const std::function<void(const std::vector<double>&, const std::vector<double>&,
                                      const std::vector<double>&, std::vector<double>&)>& dback) {
    Tensor out = like(a);
    const double* x = a.ptr();
    double* y = out.ptr();
    for (int i = 0; i < a.size(); ++i) y[i] = f(x[i]);
    check_finite(out, name);
    if (Tape* tape = tape_of(a)) {
        out.tape = tape;
        auto xs = a.data;
        auto ys = out.data;
        int parent = a.node;
        int n = a.size();
        out.node = tape->record([xs, ys, parent, n, dback](const std::vector<double>& g, Gradients& grads) {
            if (parent < 0) return;
            auto& gx = grads.buf(parent, n);
            dback(g, *xs, *ys, gx);
        });
    }
    return out;
}

}  // namespace

bool checked_mode() { return g_checked.load(std::memory_order_relaxed); }
void set_checked(bool on) { g_checked.store(on, std::memory_order_relaxed); }

Tensor::Tensor(int r, int c)
    : rows(r), cols(c),
      data(std::make_shared<std::vector<double>>(static_cast<std::size_t>(r) * c, 0.0)) {}

Tensor Tensor::full(int r, int c, double v) {
    Tensor t(r, c);
    for (auto& x : *t.data) x = v;
    return t;
}

Tensor Tensor::from(std::vector<double> values, int r, int c) {
    if (values.size() != static_cast<std::size_t>(r) * c) {
        throw std::invalid_argument("Tensor::from: value count does not match shape");
    }
    Tensor t;
    t.rows = r;
    t.cols = c;
    t.data = std::make_shared<std::vector<double>>(std::move(values));
    return t;
}

Tensor Tensor::row(std::vector<double> values) {
    int n = static_cast<int>(values.size());
    return from(std::move(values), 1, n);
}

double Tensor::value() const {
    if (size() != 1) throw std::invalid_argument("value(): tensor is not scalar");
    return (*data)[0];
}

Tensor Tensor::detached() const {
    Tensor t = *this;
    t.tape = nullptr;
    t.node = -1;
    return t;
}

Tensor Tensor::clone() const {
    Tensor t;
    t.rows = rows;
    t.cols = cols;
    t.data = std::make_shared<std::vector<double>>(*data);
    return t;
}

std::vector<double>& Gradients::buf(int node, int size) {
    auto& g = by_node_[static_cast<std::size_t>(node)];
    if (g.empty()) g.assign(static_cast<std::size_t>(size), 0.0);
    return g;
}

std::vector<double> Gradients::of(const Tensor& t) const {
    if (t.node >= 0 && !by_node_[static_cast<std::size_t>(t.node)].empty()) {
        return by_node_[static_cast<std::size_t>(t.node)];
    }
    return std::vector<double>(static_cast<std::size_t>(t.size()), 0.0);
}

const std::vector<double>* Gradients::raw(int node) const {
    if (node < 0 || by_node_[static_cast<std::size_t>(node)].empty()) return nullptr;
    return &by_node_[static_cast<std::size_t>(node)];
}

Tensor Tape::var(const Tensor& t) {
    Tensor bound = t;
    bound.tape = this;
    bound.node = record(BackFn{});
    return bound;
}

int Tape::record(BackFn fn) {
    nodes_.push_back({std::move(fn)});
    return static_cast<int>(nodes_.size()) - 1;
}

Gradients Tape::backward(const Tensor& loss) {
    if (loss.size() != 1) throw std::invalid_argument("backward: loss is not scalar");
    if (loss.tape != this || loss.node < 0) {
        throw std::invalid_argument("backward: loss is not on this tape");
    }
    Gradients grads(nodes_.size());
    grads.buf(loss.node, 1)[0] = 1.0;
    visits_ = 0;
    for (int id = loss.node; id >= 0; --id) {
        if (!grads.reached(id)) continue;
        const auto& node = nodes_[static_cast<std::size_t>(id)];
        if (!node.back) continue;
        ++visits_;
        node.back(*grads.raw(id), grads);
    }
    return grads;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols != b.rows) shape_error("matmul", a);
    Tensor out(a.rows, b.cols);
    mm(a.ptr(), b.ptr(), out.ptr(), a.rows, a.cols, b.cols);
    check_finite(out, "matmul");
    if (Tape* tape = tape_of(a, b)) {
        out.tape = tape;
        auto ad = a.data, bd = b.data;
        int pa = a.node, pb = b.node;
        int m = a.rows, k = a.cols, n = b.cols;
        out.node = tape->record([ad, bd, pa, pb, m, k, n](const std::vector<double>& g, Gradients& grads) {
            if (pa >= 0) {
                auto& ga = grads.buf(pa, m * k);
                mm_abt(g.data(), bd->data(), ga.data(), m, n, k);  // G * B^T
            }
            if (pb >= 0) {
                auto& gb = grads.buf(pb, k * n);
                mm_atb(ad->data(), g.data(), gb.data(), k, m, n);  // A^T * G
            }
        });
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    Tensor out(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
    }
    if (Tape* tape = tape_of(a)) {
        out.tape = tape;
        int parent = a.node, r = a.rows, c = a.cols;
        out.node = tape->record([parent, r, c](const std::vector<double>& g, Gradients& grads) {
            if (parent < 0) return;
            auto& gx = grads.buf(parent, r * c);
            for (int i = 0; i < r; ++i) {
                for (int j = 0; j < c; ++j) {
                    gx[static_cast<std::size_t>(i) * c + j] += g[static_cast<std::size_t>(j) * r + i];
                }
            }
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    const bool broadcast = !(a.rows == b.rows && a.cols == b.cols);
    if (broadcast && !(b.rows == 1 && b.cols == a.cols)) shape_error("add", a);
    Tensor out = like(a);
    const double* x = a.ptr();
    const double* y = b.ptr();
    double* z = out.ptr();
    if (!broadcast) {
        for (int i = 0; i < a.size(); ++i) z[i] = x[i] + y[i];
    } else {
        for (int i = 0; i < a.rows; ++i) {
            for (int j = 0; j < a.cols; ++j) {
                z[static_cast<std::size_t>(i) * a.cols + j] =
                    x[static_cast<std::size_t>(i) * a.cols + j] + y[j];
            }
        }
    }
    check_finite(out, "add");
    if (Tape* tape = tape_of(a, b)) {
        out.tape = tape;
        int pa = a.node, pb = b.node;
        int r = a.rows, c = a.cols;
        out.node = tape->record([pa, pb, r, c, broadcast](const std::vector<double>& g, Gradients& grads) {
            if (pa >= 0) {
                auto& ga = grads.buf(pa, r * c);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (pb >= 0) {
                if (!broadcast) {
                    auto& gb = grads.buf(pb, r * c);
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                } else {
                    auto& gb = grads.buf(pb, c);
                    for (int i = 0; i < r; ++i) {
                        for (int j = 0; j < c; ++j) gb[j] += g[static_cast<std::size_t>(i) * c + j];
                    }
                }
            }
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (a.rows != b.rows || a.cols != b.cols) shape_error("sub", a);
    Tensor out = like(a);
    for (int i = 0; i < a.size(); ++i) out.ptr()[i] = a.ptr()[i] - b.ptr()[i];
    check_finite(out, "sub");
    if (Tape* tape = tape_of(a, b)) {
        out.tape = tape;
        int pa = a.node, pb = b.node, n = a.size();
        out.node = tape->record([pa, pb, n](const std::vector<double>& g, Gradients& grads) {
            if (pa >= 0) {
                auto& ga = grads.buf(pa, n);
                for (int i = 0; i < n; ++i) ga[i] += g[i];
            }
            if (pb >= 0) {
                auto& gb = grads.buf(pb, n);
                for (int i = 0; i < n; ++i) gb[i] -= g[i];
            }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.rows != b.rows || a.cols != b.cols) shape_error("mul", a);
    Tensor out = like(a);
    for (int i = 0; i < a.size(); ++i) out.ptr()[i] = a.ptr()[i] * b.ptr()[i];
    check_finite(out, "mul");
    if (Tape* tape = tape_of(a, b)) {
        out.tape = tape;
        auto ad = a.data, bd = b.data;
        int pa = a.node, pb = b.node, n = a.size();
        out.node = tape->record([ad, bd, pa, pb, n](const std::vector<double>& g, Gradients& grads) {
            if (pa >= 0) {
                auto& ga = grads.buf(pa, n);
                for (int i = 0; i < n; ++i) ga[i] += g[i] * (*bd)[i];
            }
            if (pb >= 0) {
                auto& gb = grads.buf(pb, n);
                for (int i = 0; i < n; ++i) gb[i] += g[i] * (*ad)[i];
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = like(a);
    for (int i = 0; i < a.size(); ++i) out.ptr()[i] = a.ptr()[i] * c;
    check_finite(out, "scale");
    if (Tape* tape = tape_of(a)) {
        out.tape = tape;
        int parent = a.node, n = a.size();
        out.node = tape->record([parent, n, c](const std::vector<double>& g, Gradients& grads) {
            if (parent < 0) return;
            auto& gx = grads.buf(parent, n);
            for (int i = 0; i < n; ++i) gx[i] += c * g[i];
        });
    }
    return out;
}

Tensor negate(const Tensor& a) { return scale(a, -1.0); }

Tensor add_scalar(const Tensor& a, double c) {
    Tensor out = like(a);
    for (int i = 0; i < a.size(); ++i) out.ptr()[i] = a.ptr()[i] + c;
    check_finite(out, "add_scalar");
    if (Tape* tape = tape_of(a)) {
        out.tape = tape;
        int parent = a.node, n = a.size();
        out.node = tape->record([parent, n](const std::vector<double>& g, Gradients& grads) {
            if (parent < 0) return;
            auto& gx = grads.buf(parent, n);
            for (int i = 0; i < n; ++i) gx[i] += g[i];
        });
    }
    return out;
}

Tensor relu(const Tensor& a) {
    return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                 [](const std::vector<double>& g, const std::vector<double>& x,
                    const std::vector<double>&, std::vector<double>& gx) {
                     for (std::size_t i = 0; i < g.size(); ++i) {
                         if (x[i] > 0.0) gx[i] += g[i];
                     }
                 });
}

Tensor tanh_op(const Tensor& a) {
    return unary(a, "tanh", [](double x) { return std::tanh(x); },
                 [](const std::vector<double>& g, const std::vector<double>&,
                    const std::vector<double>& y, std::vector<double>& gx) {
                     for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
                 });
}

Tensor sigmoid(const Tensor& a) {
    return unary(a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                 [](const std::vector<double>& g, const std::vector<double>&,
                    const std::vector<double>& y, std::vector<double>& gx) {
                     for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
                 });
}

Tensor log_op(const Tensor& a) {
    return unary(a, "log", [](double x) { return std::log(x); },
                 [](const std::vector<double>& g, const std::vector<double>& x,
                    const std::vector<double>&, std::vector<double>& gx) {
                     for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / x[i];
                 });
}

Tensor exp_op(const Tensor& a) {
    return unary(a, "exp", [](double x) { return std::exp(x); },
                 [](const std::vector<double>& g, const std::vector<double>&,
                    const std::vector<double>& y, std::vector<double>& gx) {
                     for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i];
                 });
}

Tensor softmax_rows(const Tensor& a) {
    Tensor out = like(a);
    for (int i = 0; i < a.rows; ++i) {
        const double* x = a.ptr() + static_cast<std::size_t>(i) * a.cols;
        double* y = out.ptr() + static_cast<std::size_t>(i) * a.cols;
        double mx = x[0];
        for (int j = 1; j < a.cols; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (int j = 0; j < a.cols; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        for (int j = 0; j < a.cols; ++j) y[j] /= sum;
    }
    check_finite(out, "softmax");
    if (Tape* tape = tape_of(a)) {
        out.tape = tape;
        auto ys = out.data;
        int parent = a.node, r = a.rows, c = a.cols;
        out.node = tape->record([ys, parent, r, c](const std::vector<double>& g, Gradients& grads) {
            if (parent < 0) return;
            auto& gx = grads.buf(parent, r * c);
            for (int i = 0; i < r; ++i) {
                const double* y = ys->data() + static_cast<std::size_t>(i) * c;
                const double* gr = g.data() + static_cast<std::size_t>(i) * c;
                double dot = 0.0;
                for (int j = 0; j < c; ++j) dot += gr[j] * y[j];
                double* gxr = gx.data() + static_cast<std::size_t>(i) * c;
                for (int j = 0; j < c; ++j) gxr[j] += y[j] * (gr[j] - dot);
            }
        });
    }
    return out;
}

Tensor row_sum(const Tensor& a) {
    Tensor out(a.rows, 1);
    for (int i = 0; i < a.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols; ++j) s += a.at(i, j);
        out.at(i, 0) = s;
    }
    check_finite(out, "row_sum");
    if (Tape* tape = tape_of(a)) {
        out.tape = tape;
        int parent = a.node, r = a.rows, c = a.cols;
        out.node = tape->record([parent, r, c](const std::vector<double>& g, Gradients& grads) {
            if (parent < 0) return;
            auto& gx = grads.buf(parent, r * c);
            for (int i = 0; i < r; ++i) {
                for (int j = 0; j < c; ++j) gx[static_cast<std::size_t>(i) * c + j] += g[i];
            }
        });
    }
    return out;
}

Tensor sum_all(const Tensor& a) {
    Tensor out(1, 1);
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += a.ptr()[i];
    out.at(0, 0) = s;
    check_finite(out, "sum");
    if (Tape* tape = tape_of(a)) {
        out.tape = tape;
        int parent = a.node, n = a.size();
        out.node = tape->record([parent, n](const std::vector<double>& g, Gradients& grads) {
            if (parent < 0) return;
            auto& gx = grads.buf(parent, n);
            for (int i = 0; i < n; ++i) gx[i] += g[0];
        });
    }
    return out;
}

Tensor mean_all(const Tensor& a) {
    return scale(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    if (a.size() == 0) return b;
    if (b.size() == 0) return a;
    if (a.cols != b.cols) shape_error("concat_rows", a);
    Tensor out(a.rows + b.rows, a.cols);
    std::memcpy(out.ptr(), a.ptr(), sizeof(double) * a.size());
    std::memcpy(out.ptr() + a.size(), b.ptr(), sizeof(double) * b.size());
    if (Tape* tape = tape_of(a, b)) {
        out.tape = tape;
        int pa = a.node, pb = b.node, na = a.size(), nb = b.size();
        out.node = tape->record([pa, pb, na, nb](const std::vector<double>& g, Gradients& grads) {
            if (pa >= 0) {
                auto& ga = grads.buf(pa, na);
                for (int i = 0; i < na; ++i) ga[i] += g[i];
            }
            if (pb >= 0) {
                auto& gb = grads.buf(pb, nb);
                for (int i = 0; i < nb; ++i) gb[i] += g[static_cast<std::size_t>(na) + i];
            }
        });
    }
    return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.size() == 0) return b;
    if (b.size() == 0) return a;
    if (a.rows != b.rows) shape_error("concat_cols", a);
    Tensor out(a.rows, a.cols + b.cols);
    for (int i = 0; i < a.rows; ++i) {
        std::memcpy(out.ptr() + static_cast<std::size_t>(i) * out.cols,
                    a.ptr() + static_cast<std::size_t>(i) * a.cols, sizeof(double) * a.cols);
        std::memcpy(out.ptr() + static_cast<std::size_t>(i) * out.cols + a.cols,
                    b.ptr() + static_cast<std::size_t>(i) * b.cols, sizeof(double) * b.cols);
    }
    if (Tape* tape = tape_of(a, b)) {
        out.tape = tape;
        int pa = a.node, pb = b.node, r = a.rows, ca = a.cols, cb = b.cols;
        out.node = tape->record([pa, pb, r, ca, cb](const std::vector<double>& g, Gradients& grads) {
            const int c = ca + cb;
            if (pa >= 0) {
                auto& ga = grads.buf(pa, r * ca);
                for (int i = 0; i < r; ++i) {
                    for (int j = 0; j < ca; ++j) {
                        ga[static_cast<std::size_t>(i) * ca + j] += g[static_cast<std::size_t>(i) * c + j];
                    }
                }
            }
            if (pb >= 0) {
                auto& gb = grads.buf(pb, r * cb);
                for (int i = 0; i < r; ++i) {
                    for (int j = 0; j < cb; ++j) {
                        gb[static_cast<std::size_t>(i) * cb + j] +=
                            g[static_cast<std::size_t>(i) * c + ca + j];
                    }
                }
            }
        });
    }
    return out;
}

Tensor slice_rows(const Tensor& a, int r0, int h) {
    if (r0 < 0 || h < 0 || r0 + h > a.rows) shape_error("slice_rows", a);
    Tensor out(h, a.cols);
    std::memcpy(out.ptr(), a.ptr() + static_cast<std::size_t>(r0) * a.cols,
                sizeof(double) * out.size());
    if (Tape* tape = tape_of(a)) {
        out.tape = tape;
        int parent = a.node, r = a.rows, c = a.cols;
        out.node = tape->record([parent, r, c, r0, h](const std::vector<double>& g, Gradients& grads) {
            if (parent < 0) return;
            auto& gx = grads.buf(parent, r * c);
            for (int i = 0; i < h; ++i) {
                for (int j = 0; j < c; ++j) {
                    gx[static_cast<std::size_t>(r0 + i) * c + j] += g[static_cast<std::size_t>(i) * c + j];
                }
            }
        });
    }
    return out;
}

Tensor slice_cols(const Tensor& a, int c0, int w) {
    if (c0 < 0 || w < 0 || c0 + w > a.cols) shape_error("slice_cols", a);
    Tensor out(a.rows, w);
    for (int i = 0; i < a.rows; ++i) {
        std::memcpy(out.ptr() + static_cast<std::size_t>(i) * w,
                    a.ptr() + static_cast<std::size_t>(i) * a.cols + c0, sizeof(double) * w);
    }
    if (Tape* tape = tape_of(a)) {
        out.tape = tape;
        int parent = a.node, r = a.rows, c = a.cols;
        out.node = tape->record([parent, r, c, c0, w](const std::vector<double>& g, Gradients& grads) {
            if (parent < 0) return;
            auto& gx = grads.buf(parent, r * c);
            for (int i = 0; i < r; ++i) {
                for (int j = 0; j < w; ++j) {
                    gx[static_cast<std::size_t>(i) * c + c0 + j] += g[static_cast<std::size_t>(i) * w + j];
                }
            }
        });
    }
    return out;
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& idx) {
    Tensor out(static_cast<int>(idx.size()), a.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= a.rows) shape_error("gather_rows", a);
        std::memcpy(out.ptr() + i * a.cols, a.ptr() + static_cast<std::size_t>(idx[i]) * a.cols,
                    sizeof(double) * a.cols);
    }
    if (Tape* tape = tape_of(a)) {
        out.tape = tape;
        int parent = a.node, r = a.rows, c = a.cols;
        out.node = tape->record([parent, r, c, idx](const std::vector<double>& g, Gradients& grads) {
            if (parent < 0) return;
            auto& gx = grads.buf(parent, r * c);
            for (std::size_t i = 0; i < idx.size(); ++i) {
                double* dst = gx.data() + static_cast<std::size_t>(idx[i]) * c;
                const double* src = g.data() + i * c;
                for (int j = 0; j < c; ++j) dst[j] += src[j];
            }
        });
    }
    return out;
}

Tensor masked_fill(const Tensor& a, const Tensor& mask, double value) {
    if (a.rows != mask.rows || a.cols != mask.cols) shape_error("masked_fill", a);
    Tensor out = like(a);
    for (int i = 0; i < a.size(); ++i) {
        out.ptr()[i] = mask.ptr()[i] != 0.0 ? value : a.ptr()[i];
    }
    if (Tape* tape = tape_of(a)) {
        out.tape = tape;
        auto md = mask.data;
        int parent = a.node, n = a.size();
        out.node = tape->record([md, parent, n](const std::vector<double>& g, Gradients& grads) {
            if (parent < 0) return;
            auto& gx = grads.buf(parent, n);
            for (int i = 0; i < n; ++i) {
                if ((*md)[i] == 0.0) gx[i] += g[i];
            }
        });
    }
    return out;
}

Tensor reshape(const Tensor& a, int r, int c) {
    if (r * c != a.size()) shape_error("reshape", a);
    Tensor out = a;
    out.rows = r;
    out.cols = c;
    if (Tape* tape = tape_of(a)) {
        out.tape = tape;
        int parent = a.node, n = a.size();
        out.node = tape->record([parent, n](const std::vector<double>& g, Gradients& grads) {
            if (parent < 0) return;
            auto& gx = grads.buf(parent, n);
            for (int i = 0; i < n; ++i) gx[i] += g[i];
        });
    }
    return out;
}

Tensor apply_primitive(Prim kind, const std::vector<Tensor>& inputs) {
    switch (kind) {
        case Prim::kMatmul: return matmul(inputs.at(0), inputs.at(1));
        case Prim::kAdd: return add(inputs.at(0), inputs.at(1));
        case Prim::kScale: return scale(inputs.at(0), 0.5);
        case Prim::kConcat: return concat_cols(inputs.at(0), inputs.at(1));
        case Prim::kRelu: return relu(inputs.at(0));
        case Prim::kTanh: return tanh_op(inputs.at(0));
        case Prim::kSigmoid: return sigmoid(inputs.at(0));
        case Prim::kLog: return log_op(inputs.at(0));
        case Prim::kExp: return exp_op(inputs.at(0));
        case Prim::kNegate: return negate(inputs.at(0));
        case Prim::kSoftmax: return softmax_rows(inputs.at(0));
        case Prim::kRowSum: return row_sum(inputs.at(0));
        case Prim::kMean: return mean_all(inputs.at(0));
        case Prim::kGather: return gather_rows(inputs.at(0), {0});
        case Prim::kMaskedFill: return masked_fill(inputs.at(0), inputs.at(1), 0.0);
    }
    throw std::invalid_argument("unknown primitive");
}

const char* prim_name(Prim kind) {
    switch (kind) {
        case Prim::kMatmul: return "matmul";
        case Prim::kAdd: return "add";
        case Prim::kScale: return "scale";
        case Prim::kConcat: return "concat";
        case Prim::kRelu: return "relu";
        case Prim::kTanh: return "tanh";
        case Prim::kSigmoid: return "sigmoid";
        case Prim::kLog: return "log";
        case Prim::kExp: return "exp";
        case Prim::kNegate: return "negate";
        case Prim::kSoftmax: return "softmax";
        case Prim::kRowSum: return "row_sum";
        case Prim::kMean: return "mean";
        case Prim::kGather: return "gather";
        case Prim::kMaskedFill: return "masked_fill";
    }
    return "?";
}

}  // namespace dahcr::num
