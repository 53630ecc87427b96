#include "dahcr/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace dahcr::num {

Tensor& ParamSet::add(const std::string& name, int rows, int cols) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    index_[name] = names_.size();
    names_.push_back(name);
    tensors_.emplace_back(rows, cols);
    return tensors_.back();
}

Tensor& ParamSet::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown parameter " + name);
    return tensors_[it->second];
}

const Tensor& ParamSet::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown parameter " + name);
    return tensors_[it->second];
}

std::size_t ParamSet::total_values() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += static_cast<std::size_t>(t.size());
    return n;
}

ParamSet ParamSet::clone() const {
    ParamSet out;
    for (std::size_t i = 0; i < names_.size(); ++i) {
        auto& t = out.add(names_[i], tensors_[i].rows, tensors_[i].cols);
        *t.data = *tensors_[i].data;
    }
    return out;
}

void ParamSet::copy_from(const ParamSet& src) {
    if (src.names_.size() != names_.size()) {
        throw std::invalid_argument("ParamSet::copy_from: different parameter lists");
    }
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] != src.names_[i] || tensors_[i].size() != src.tensors_[i].size()) {
            throw std::invalid_argument("ParamSet::copy_from: mismatched parameter " + names_[i]);
        }
        *tensors_[i].data = *src.tensors_[i].data;
    }
}

bool ParamSet::same_values(const ParamSet& other) const {
    if (names_ != other.names_) return false;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        if (*tensors_[i].data != *other.tensors_[i].data) return false;
    }
    return true;
}

BoundParams::BoundParams(Tape* tape, const ParamSet& params) : params_(&params) {
    if (!tape) return;
    for (const auto& name : params.names()) {
        bound_.emplace(name, tape->var(params.at(name)));
    }
}

const Tensor& BoundParams::operator[](const std::string& name) const {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    return params_->at(name);
}

std::vector<double> BoundParams::grad_of(const std::string& name, const Gradients& grads) const {
    return grads.of((*this)[name]);
}

void init_fan_in(Tensor& w, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : *w.data) v = rng.next_uniform(-bound, bound);
}

void add_mlp(ParamSet& ps, const std::string& prefix, const std::vector<int>& dims, Rng& rng) {
    if (dims.size() < 2) throw std::invalid_argument("mlp needs at least one layer");
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        auto tag = std::to_string(i);
        auto& w = ps.add(prefix + ".w" + tag, dims[i], dims[i + 1]);
        init_fan_in(w, dims[i], rng);
        ps.add(prefix + ".b" + tag, 1, dims[i + 1]);
    }
}

MlpWeights mlp_weights(const BoundParams& bp, const std::string& prefix, int layers) {
    MlpWeights w;
    for (int i = 0; i < layers; ++i) {
        auto tag = std::to_string(i);
        w.w.push_back(bp[prefix + ".w" + tag]);
        w.b.push_back(bp[prefix + ".b" + tag]);
    }
    return w;
}

Tensor mlp(const Tensor& x, const MlpWeights& w) {
    if (w.w.empty()) throw std::invalid_argument("mlp: empty layer spec");
    Tensor h = x;
    for (std::size_t i = 0; i < w.w.size(); ++i) {
        h = add(matmul(h, w.w[i]), w.b[i]);
        if (i + 1 < w.w.size()) h = relu(h);
    }
    return h;
}

void add_gru(ParamSet& ps, const std::string& prefix, int input, int hidden, Rng& rng) {
    for (const char* gate : {"r", "z", "c"}) {
        auto g = std::string(gate);
        auto& w = ps.add(prefix + ".w" + g, input, hidden);
        init_fan_in(w, input, rng);
        auto& u = ps.add(prefix + ".u" + g, hidden, hidden);
        init_fan_in(u, hidden, rng);
        ps.add(prefix + ".b" + g, 1, hidden);
    }
}

GruWeights gru_weights(const BoundParams& bp, const std::string& prefix) {
    return GruWeights{
        bp[prefix + ".wr"], bp[prefix + ".ur"], bp[prefix + ".br"],
        bp[prefix + ".wz"], bp[prefix + ".uz"], bp[prefix + ".bz"],
        bp[prefix + ".wc"], bp[prefix + ".uc"], bp[prefix + ".bc"],
    };
}

Tensor gru_cell(const Tensor& h_prev, const Tensor& x, const GruWeights& w) {
    if (h_prev.rows != 1 || x.rows != 1 || x.cols != w.wr.rows || h_prev.cols != w.ur.rows) {
        throw std::invalid_argument("gru_cell: shape mismatch");
    }
    Tensor r = sigmoid(add(add(matmul(x, w.wr), matmul(h_prev, w.ur)), w.br));
    Tensor z = sigmoid(add(add(matmul(x, w.wz), matmul(h_prev, w.uz)), w.bz));
    Tensor c = tanh_op(add(add(matmul(x, w.wc), matmul(mul(r, h_prev), w.uc)), w.bc));
    Tensor keep = mul(add_scalar(negate(z), 1.0), h_prev);
    return add(keep, mul(z, c));
}

void add_mhsa(ParamSet& ps, const std::string& prefix, int dim, Rng& rng) {
    for (const char* part : {"q", "k", "v", "o"}) {
        auto p = std::string(part);
        auto& w = ps.add(prefix + ".w" + p, dim, dim);
        init_fan_in(w, dim, rng);
        ps.add(prefix + ".b" + p, 1, dim);
    }
}

MhsaWeights mhsa_weights(const BoundParams& bp, const std::string& prefix) {
    return MhsaWeights{
        bp[prefix + ".wq"], bp[prefix + ".bq"], bp[prefix + ".wk"], bp[prefix + ".bk"],
        bp[prefix + ".wv"], bp[prefix + ".bv"], bp[prefix + ".wo"], bp[prefix + ".bo"],
    };
}

Tensor multi_head_self_attention(const Tensor& x, const MhsaWeights& w, int heads) {
    const int d = x.cols;
    if (heads < 1 || d % heads != 0) {
        throw std::invalid_argument("mhsa: dim not divisible by head count");
    }
    if (x.rows == 0) return x;
    const int dh = d / heads;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor q = add(matmul(x, w.wq), w.bq);
    Tensor k = add(matmul(x, w.wk), w.bk);
    Tensor v = add(matmul(x, w.wv), w.bv);

    Tensor merged;
    for (int h = 0; h < heads; ++h) {
        Tensor qh = heads == 1 ? q : slice_cols(q, h * dh, dh);
        Tensor kh = heads == 1 ? k : slice_cols(k, h * dh, dh);
        Tensor vh = heads == 1 ? v : slice_cols(v, h * dh, dh);
        Tensor scores = scale(matmul(qh, transpose(kh)), inv_scale);
        Tensor attn = softmax_rows(scores);
        Tensor oh = matmul(attn, vh);
        merged = h == 0 ? oh : concat_cols(merged, oh);
    }
    return add(matmul(merged, w.wo), w.bo);
}

}  // namespace dahcr::num
