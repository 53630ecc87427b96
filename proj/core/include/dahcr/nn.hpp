#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "dahcr/rng.hpp"
#include "dahcr/tensor.hpp"

namespace dahcr::num {

// Named, insertion-ordered parameter registry. The order defines the
// serialization layout of checkpoints.
class ParamSet {
public:
    Tensor& add(const std::string& name, int rows, int cols);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) != 0; }
    const std::vector<std::string>& names() const { return names_; }
    std::size_t total_values() const;

    ParamSet clone() const;               // deep copy
    void copy_from(const ParamSet& src);  // hard sync; shapes must match
    bool same_values(const ParamSet& other) const;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Per-forward view of a ParamSet. With a tape, every parameter is bound
// as a leaf so gradients can be read back by name; without one the raw
// tensors are returned (inference path).
class BoundParams {
public:
    BoundParams(Tape* tape, const ParamSet& params);
    const Tensor& operator[](const std::string& name) const;
    std::vector<double> grad_of(const std::string& name, const Gradients& grads) const;
    // Substitute one binding (gradient probes in tests).
    void rebind(const std::string& name, Tensor t) { bound_[name] = std::move(t); }

private:
    const ParamSet* params_;
    std::unordered_map<std::string, Tensor> bound_;
};

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for weight matrices, zeros
// stay for biases.
void init_fan_in(Tensor& w, int fan_in, Rng& rng);

struct MlpWeights {
    std::vector<Tensor> w;  // layer i: [in_i x out_i]
    std::vector<Tensor> b;  // [1 x out_i]
};

// Registers an MLP (alternating affine+ReLU, final affine) under
// prefix.w0/.b0/...; dims = {in, hidden..., out}.
void add_mlp(ParamSet& ps, const std::string& prefix, const std::vector<int>& dims, Rng& rng);
MlpWeights mlp_weights(const BoundParams& bp, const std::string& prefix, int layers);

// x: [n x in] -> [n x out].
Tensor mlp(const Tensor& x, const MlpWeights& w);

struct GruWeights {
    Tensor wr, ur, br;  // reset gate
    Tensor wz, uz, bz;  // update gate
    Tensor wc, uc, bc;  // candidate
};

void add_gru(ParamSet& ps, const std::string& prefix, int input, int hidden, Rng& rng);
GruWeights gru_weights(const BoundParams& bp, const std::string& prefix);

// h_prev: [1 x hidden], x: [1 x input] -> [1 x hidden].
// h' = (1-z) * h_prev + z * tanh(x Wc + (r*h_prev) Uc + bc).
Tensor gru_cell(const Tensor& h_prev, const Tensor& x, const GruWeights& w);

struct MhsaWeights {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

void add_mhsa(ParamSet& ps, const std::string& prefix, int dim, Rng& rng);
MhsaWeights mhsa_weights(const BoundParams& bp, const std::string& prefix);

// Scaled dot-product self attention, heads over column blocks, output
// projection. x: [n x d] -> [n x d]; d must be divisible by heads.
Tensor multi_head_self_attention(const Tensor& x, const MhsaWeights& w, int heads);

}  // namespace dahcr::num
