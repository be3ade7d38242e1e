#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "illumflow/graph.hpp"

namespace illumflow {

struct NetworkSpec {
    int in_channels = 1;
    int hidden_channels = 16;
    int depth = 2;      // residual blocks
    int embed_dim = 8;  // sinusoidal width for each of t and d
};

// Velocity-field network v(z, t, d): conv stem, (t,d) embedding added to the
// stem features, pre-activation residual blocks, zero-initialized output head.
struct Network {
    NetworkSpec spec;
    std::vector<std::pair<std::string, ad::Tensor>> params;

    static Network create(const NetworkSpec& spec, uint64_t seed);
    ad::Tensor& param(const std::string& name);
    const ad::Tensor& param(const std::string& name) const;
    size_t param_count() const;
};

// Network with parameters lifted onto the tape; reuse one binding for a whole
// batch so parameter gradients accumulate.
struct BoundNetwork {
    NetworkSpec spec;
    std::vector<std::pair<std::string, ad::Var>> vars;

    ad::Var operator()(const ad::Var& z, double t, double d) const;
    const ad::Var& var(const std::string& name) const;
};

BoundNetwork bind(const Network& net, bool trainable);

// Single item [C,H,W] -> [C,H,W], no gradient bookkeeping kept.
ad::Tensor forward_item(const Network& net, const ad::Tensor& z, double t, double d);

// Batched z:[B,C,H,W] with per-item t and d.
ad::Tensor forward(const Network& net, const ad::Tensor& z, const std::vector<double>& t,
                   const std::vector<double>& d);

std::vector<double> sinusoidal_embedding(double v, int dim);

struct AdamState {
    int64_t step = 0;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<ad::Tensor> m;  // aligned with Network::params
    std::vector<ad::Tensor> v;

    static AdamState init(const Network& net, double lr = 1e-4);
};

// Bias-corrected Adam update; grads aligned with net.params.
void adam_step(Network& net, const std::vector<ad::Tensor>& grads, AdamState& state);

// Collects accumulated parameter gradients from a trainable binding.
std::vector<ad::Tensor> collect_grads(const Network& net, const BoundNetwork& bound);

// Worst relative error of backward vs central finite differences on a random
// scalar loss; deterministic in the seed.
double gradient_check(const Network& net, uint64_t seed);

// "IFLW" + version + spec + named float32 parameter blobs, little-endian.
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace illumflow
