#include "illumflow/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace illumflow {

using ad::Tensor;
using ad::Var;

namespace {

constexpr char kMagic[4] = {'I', 'F', 'L', 'W'};
constexpr uint32_t kVersion = 1;

Tensor he_init(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    Tensor t(std::move(shape));
    for (double& v : t.data) v = dist(rng);
    return t;
}

void write_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
}

uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

Network Network::create(const NetworkSpec& spec, uint64_t seed) {
    if (spec.in_channels < 1 || spec.hidden_channels < 1 || spec.depth < 1 || spec.embed_dim < 1)
        throw std::invalid_argument("NetworkSpec: all fields must be >= 1");
    std::mt19937_64 rng(seed ^ 0xa0761d6478bd642fULL);
    Network net;
    net.spec = spec;
    int hc = spec.hidden_channels, ic = spec.in_channels, ed = spec.embed_dim;

    net.params.emplace_back("in.w", he_init({hc, ic, 3, 3}, ic * 9, rng));
    net.params.emplace_back("in.b", Tensor({hc}));
    net.params.emplace_back("emb1.w", he_init({hc, 2 * ed}, 2 * ed, rng));
    net.params.emplace_back("emb1.b", Tensor({hc}));
    net.params.emplace_back("emb2.w", he_init({hc, hc}, hc, rng));
    net.params.emplace_back("emb2.b", Tensor({hc}));
    for (int i = 0; i < spec.depth; ++i) {
        std::string p = "blk" + std::to_string(i);
        net.params.emplace_back(p + ".c1.w", he_init({hc, hc, 3, 3}, hc * 9, rng));
        net.params.emplace_back(p + ".c1.b", Tensor({hc}));
        net.params.emplace_back(p + ".c2.w", he_init({hc, hc, 3, 3}, hc * 9, rng));
        net.params.emplace_back(p + ".c2.b", Tensor({hc}));
    }
    // zero head: freshly created networks are the identity flow
    net.params.emplace_back("out.w", Tensor({ic, hc, 3, 3}));
    net.params.emplace_back("out.b", Tensor({ic}));
    return net;
}

ad::Tensor& Network::param(const std::string& name) {
    for (auto& [n, t] : params)
        if (n == name) return t;
    throw std::invalid_argument("unknown parameter " + name);
}

const ad::Tensor& Network::param(const std::string& name) const {
    return const_cast<Network*>(this)->param(name);
}

size_t Network::param_count() const {
    size_t n = 0;
    for (const auto& [name, t] : params) n += t.size();
    return n;
}

std::vector<double> sinusoidal_embedding(double v, int dim) {
    std::vector<double> e(dim);
    for (int i = 0; i < dim; ++i) {
        double freq = std::pow(2.0, i / 2) * 3.14159265358979323846;
        e[i] = (i % 2 == 0) ? std::sin(freq * v) : std::cos(freq * v);
    }
    return e;
}

BoundNetwork bind(const Network& net, bool trainable) {
    BoundNetwork b;
    b.spec = net.spec;
    for (const auto& [name, t] : net.params)
        b.vars.emplace_back(name, trainable ? Var::leaf(t) : Var::constant(t));
    return b;
}

const Var& BoundNetwork::var(const std::string& name) const {
    for (const auto& [n, v] : vars)
        if (n == name) return v;
    throw std::invalid_argument("unknown parameter " + name);
}

Var BoundNetwork::operator()(const Var& z, double t, double d) const {
    const Tensor& zv = z.value();
    if (zv.shape.size() != 3 || zv.shape[0] != spec.in_channels)
        throw std::invalid_argument("forward: input shape mismatch with spec");

    std::vector<double> e = sinusoidal_embedding(t, spec.embed_dim);
    std::vector<double> ed = sinusoidal_embedding(d, spec.embed_dim);
    e.insert(e.end(), ed.begin(), ed.end());
    Var emb = Var::constant(Tensor({2 * spec.embed_dim}, std::move(e)));

    Var g = ad::dense(ad::silu(ad::dense(emb, var("emb1.w"), var("emb1.b"))), var("emb2.w"),
                      var("emb2.b"));
    Var h = ad::bias_broadcast(ad::conv2d(z, var("in.w"), var("in.b")), g);
    for (int i = 0; i < spec.depth; ++i) {
        std::string p = "blk" + std::to_string(i);
        Var u = ad::conv2d(ad::silu(h), var(p + ".c1.w"), var(p + ".c1.b"));
        u = ad::conv2d(ad::silu(u), var(p + ".c2.w"), var(p + ".c2.b"));
        h = ad::add(h, u);
    }
    return ad::conv2d(ad::silu(h), var("out.w"), var("out.b"));
}

ad::Tensor forward_item(const Network& net, const ad::Tensor& z, double t, double d) {
    return bind(net, false)(Var::constant(z), t, d).value();
}

ad::Tensor forward(const Network& net, const ad::Tensor& z, const std::vector<double>& t,
                   const std::vector<double>& d) {
    if (z.shape.size() != 4) throw std::invalid_argument("forward: expects [B,C,H,W]");
    size_t batch = static_cast<size_t>(z.shape[0]);
    if (t.size() != batch || d.size() != batch)
        throw std::invalid_argument("forward: conditioning length mismatch");
    std::vector<int> item_shape(z.shape.begin() + 1, z.shape.end());
    size_t item_size = Tensor::count(item_shape);
    Tensor out(z.shape);
    BoundNetwork b = bind(net, false);
    for (size_t i = 0; i < batch; ++i) {
        Tensor item(item_shape);
        std::copy_n(z.data.begin() + i * item_size, item_size, item.data.begin());
        Tensor y = b(Var::constant(std::move(item)), t[i], d[i]).value();
        std::copy_n(y.data.begin(), item_size, out.data.begin() + i * item_size);
    }
    return out;
}

AdamState AdamState::init(const Network& net, double lr) {
    AdamState s;
    s.lr = lr;
    for (const auto& [name, t] : net.params) {
        s.m.emplace_back(t.shape);
        s.v.emplace_back(t.shape);
    }
    return s;
}

void adam_step(Network& net, const std::vector<ad::Tensor>& grads, AdamState& state) {
    if (grads.size() != net.params.size() || state.m.size() != net.params.size())
        throw std::invalid_argument("adam_step: gradient/state misalignment");
    state.step += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t p = 0; p < grads.size(); ++p) {
        Tensor& theta = net.params[p].second;
        const Tensor& g = grads[p];
        if (!g.same_shape(theta)) throw std::invalid_argument("adam_step: gradient shape mismatch");
        for (size_t i = 0; i < g.size(); ++i) {
            double gi = g.data[i];
            if (!std::isfinite(gi)) throw std::runtime_error("adam_step: non-finite gradient");
            double& m = state.m[p].data[i];
            double& v = state.v[p].data[i];
            m = state.beta1 * m + (1.0 - state.beta1) * gi;
            v = state.beta2 * v + (1.0 - state.beta2) * gi * gi;
            theta.data[i] -= state.lr * (m / bc1) / (std::sqrt(v / bc2) + state.eps);
        }
    }
}

std::vector<ad::Tensor> collect_grads(const Network& net, const BoundNetwork& bound) {
    std::vector<Tensor> grads;
    grads.reserve(net.params.size());
    for (size_t i = 0; i < net.params.size(); ++i) {
        const Tensor& g = bound.vars[i].second.grad();
        grads.push_back(g.data.empty() ? Tensor(net.params[i].second.shape) : g);
    }
    return grads;
}

double gradient_check(const Network& net, uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0xe7037ed1a0b428dbULL);
    std::uniform_real_distribution<double> uni(0.1, 0.9);
    Tensor z({net.spec.in_channels, 6, 6});
    for (double& v : z.data) v = uni(rng);
    Tensor target(z.shape);
    for (double& v : target.data) v = uni(rng);
    double t = uni(rng), d = 0.5 * uni(rng);

    Network work = net;  // finite differences perturb a copy
    auto loss_value = [&]() {
        Tensor y = forward_item(work, z, t, d);
        double acc = 0.0;
        for (size_t i = 0; i < y.size(); ++i) {
            double r = y.data[i] - target.data[i];
            acc += r * r;
        }
        return acc / static_cast<double>(y.size());
    };

    BoundNetwork bound = bind(work, true);
    Var loss = ad::mse(bound(Var::constant(z), t, d), Var::constant(target));
    ad::backward(loss);
    std::vector<Tensor> grads = collect_grads(work, bound);

    const double h = 1e-4;
    double worst = 0.0;
    for (size_t p = 0; p < work.params.size(); ++p) {
        Tensor& theta = work.params[p].second;
        // probe a deterministic subset of entries per parameter
        size_t stride = std::max<size_t>(1, theta.size() / 16);
        for (size_t i = rng() % stride; i < theta.size(); i += stride) {
            double orig = theta.data[i];
            theta.data[i] = orig + h;
            double fp = loss_value();
            theta.data[i] = orig - h;
            double fm = loss_value();
            theta.data[i] = orig;
            double fd = (fp - fm) / (2.0 * h);
            double an = grads[p].data[i];
            double rel = std::abs(fd - an) / std::max(std::abs(fd) + std::abs(an), 1e-3);
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

void save_checkpoint(const Network& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<uint32_t>(net.spec.in_channels));
    write_u32(out, static_cast<uint32_t>(net.spec.hidden_channels));
    write_u32(out, static_cast<uint32_t>(net.spec.depth));
    write_u32(out, static_cast<uint32_t>(net.spec.embed_dim));
    for (const auto& [name, t] : net.params) {
        uint16_t len = static_cast<uint16_t>(name.size());
        unsigned char lb[2] = {static_cast<unsigned char>(len),
                               static_cast<unsigned char>(len >> 8)};
        out.write(reinterpret_cast<char*>(lb), 2);
        out.write(name.data(), len);
        unsigned char rank = static_cast<unsigned char>(t.shape.size());
        out.write(reinterpret_cast<char*>(&rank), 1);
        for (int dmn : t.shape) write_u32(out, static_cast<uint32_t>(dmn));
        for (double v : t.data) {
            float f = static_cast<float>(v);
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            write_u32(out, bits);
        }
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

Network load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    uint32_t version = read_u32(in);
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    Network net;
    net.spec.in_channels = static_cast<int>(read_u32(in));
    net.spec.hidden_channels = static_cast<int>(read_u32(in));
    net.spec.depth = static_cast<int>(read_u32(in));
    net.spec.embed_dim = static_cast<int>(read_u32(in));
    while (true) {
        unsigned char lb[2];
        in.read(reinterpret_cast<char*>(lb), 2);
        if (in.eof()) break;
        if (!in) throw std::runtime_error("truncated checkpoint " + path);
        uint16_t len = static_cast<uint16_t>(lb[0]) | (static_cast<uint16_t>(lb[1]) << 8);
        std::string name(len, '\0');
        in.read(name.data(), len);
        unsigned char rank;
        in.read(reinterpret_cast<char*>(&rank), 1);
        std::vector<int> shape(rank);
        for (int i = 0; i < rank; ++i) shape[i] = static_cast<int>(read_u32(in));
        Tensor t(shape);
        for (double& v : t.data) {
            uint32_t bits = read_u32(in);
            float f;
            std::memcpy(&f, &bits, 4);
            v = f;
        }
        if (!in) throw std::runtime_error("truncated checkpoint " + path);
        net.params.emplace_back(std::move(name), std::move(t));
    }
    return net;
}

}  // namespace illumflow
