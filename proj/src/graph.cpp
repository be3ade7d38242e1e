#include "illumflow/graph.hpp"

#include <cmath>
#include <unordered_set>

namespace illumflow::ad {

namespace {

using NodePtr = std::shared_ptr<Node>;

NodePtr make_node(Tensor value, std::vector<NodePtr> parents, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const NodePtr& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a.value().same_shape(b.value()))
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

Tensor& ensure_grad(Node& n) {
    if (n.grad.data.empty()) n.grad = Tensor(n.value.shape);
    return n.grad;
}

}  // namespace

Var Var::constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    return Var(n);
}

Var Var::leaf(Tensor t) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    n->requires_grad = true;
    return Var(n);
}

void backward(const Var& loss) {
    if (loss.value().size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    // iterative post-order topo sort
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            Node* p = n->parents[idx++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    for (Node* n : order) n->grad = Tensor(n->value.shape);
    loss.node()->grad.data[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out = a.value();
    for (size_t i = 0; i < out.size(); ++i) out.data[i] += b.value().data[i];
    return Var(make_node(std::move(out), {a.node(), b.node()}, [](Node& n) {
        for (int k = 0; k < 2; ++k)
            if (n.parents[k]->requires_grad) {
                Tensor& g = ensure_grad(*n.parents[k]);
                for (size_t i = 0; i < g.size(); ++i) g.data[i] += n.grad.data[i];
            }
    }));
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a.value();
    for (size_t i = 0; i < out.size(); ++i) out.data[i] -= b.value().data[i];
    return Var(make_node(std::move(out), {a.node(), b.node()}, [](Node& n) {
        if (n.parents[0]->requires_grad) {
            Tensor& g = ensure_grad(*n.parents[0]);
            for (size_t i = 0; i < g.size(); ++i) g.data[i] += n.grad.data[i];
        }
        if (n.parents[1]->requires_grad) {
            Tensor& g = ensure_grad(*n.parents[1]);
            for (size_t i = 0; i < g.size(); ++i) g.data[i] -= n.grad.data[i];
        }
    }));
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a.value();
    for (size_t i = 0; i < out.size(); ++i) out.data[i] *= b.value().data[i];
    return Var(make_node(std::move(out), {a.node(), b.node()}, [](Node& n) {
        const Tensor& av = n.parents[0]->value;
        const Tensor& bv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) {
            Tensor& g = ensure_grad(*n.parents[0]);
            for (size_t i = 0; i < g.size(); ++i) g.data[i] += n.grad.data[i] * bv.data[i];
        }
        if (n.parents[1]->requires_grad) {
            Tensor& g = ensure_grad(*n.parents[1]);
            for (size_t i = 0; i < g.size(); ++i) g.data[i] += n.grad.data[i] * av.data[i];
        }
    }));
}

Var divide(const Var& a, const Var& b) {
    check_same_shape(a, b, "divide");
    Tensor out = a.value();
    for (size_t i = 0; i < out.size(); ++i) out.data[i] /= b.value().data[i];
    return Var(make_node(std::move(out), {a.node(), b.node()}, [](Node& n) {
        const Tensor& av = n.parents[0]->value;
        const Tensor& bv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) {
            Tensor& g = ensure_grad(*n.parents[0]);
            for (size_t i = 0; i < g.size(); ++i) g.data[i] += n.grad.data[i] / bv.data[i];
        }
        if (n.parents[1]->requires_grad) {
            Tensor& g = ensure_grad(*n.parents[1]);
            for (size_t i = 0; i < g.size(); ++i)
                g.data[i] -= n.grad.data[i] * av.data[i] / (bv.data[i] * bv.data[i]);
        }
    }));
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    for (double& v : out.data) v *= s;
    return Var(make_node(std::move(out), {a.node()}, [s](Node& n) {
        Tensor& g = ensure_grad(*n.parents[0]);
        for (size_t i = 0; i < g.size(); ++i) g.data[i] += s * n.grad.data[i];
    }));
}

Var add_scalar(const Var& a, double s) {
    Tensor out = a.value();
    for (double& v : out.data) v += s;
    return Var(make_node(std::move(out), {a.node()}, [](Node& n) {
        Tensor& g = ensure_grad(*n.parents[0]);
        for (size_t i = 0; i < g.size(); ++i) g.data[i] += n.grad.data[i];
    }));
}

Var silu(const Var& a) {
    Tensor out = a.value();
    for (double& v : out.data) v = v / (1.0 + std::exp(-v));
    return Var(make_node(std::move(out), {a.node()}, [](Node& n) {
        Tensor& g = ensure_grad(*n.parents[0]);
        const Tensor& x = n.parents[0]->value;
        for (size_t i = 0; i < g.size(); ++i) {
            double s = 1.0 / (1.0 + std::exp(-x.data[i]));
            g.data[i] += n.grad.data[i] * (s + x.data[i] * s * (1.0 - s));
        }
    }));
}

Var clamp01(const Var& a) {
    Tensor out = a.value();
    for (double& v : out.data) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return Var(make_node(std::move(out), {a.node()}, [](Node& n) {
        Tensor& g = ensure_grad(*n.parents[0]);
        const Tensor& x = n.parents[0]->value;
        for (size_t i = 0; i < g.size(); ++i)
            if (x.data[i] >= 0.0 && x.data[i] <= 1.0) g.data[i] += n.grad.data[i];
    }));
}

Var conv2d(const Var& x, const Var& w, const Var& b) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.shape.size() != 3 || wv.shape.size() != 4 || bv.shape.size() != 1)
        throw std::invalid_argument("conv2d: bad ranks");
    int cin = xv.shape[0], h = xv.shape[1], wd = xv.shape[2];
    int cout = wv.shape[0], k = wv.shape[2];
    if (wv.shape[1] != cin || wv.shape[3] != k || bv.shape[0] != cout || k % 2 == 0)
        throw std::invalid_argument("conv2d: shape mismatch");
    int pad = k / 2;

    Tensor out({cout, h, wd});
    for (int co = 0; co < cout; ++co) {
        double bias = bv.data[co];
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < wd; ++xx) {
                double acc = bias;
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < k; ++ky) {
                        int sy = y + ky - pad;
                        if (sy < 0 || sy >= h) continue;
                        const double* xrow = &xv.data[(static_cast<size_t>(ci) * h + sy) * wd];
                        const double* wrow = &wv.data[((static_cast<size_t>(co) * cin + ci) * k + ky) * k];
                        for (int kx = 0; kx < k; ++kx) {
                            int sx = xx + kx - pad;
                            if (sx < 0 || sx >= wd) continue;
                            acc += xrow[sx] * wrow[kx];
                        }
                    }
                out.data[(static_cast<size_t>(co) * h + y) * wd + xx] = acc;
            }
    }
    auto back = [cin, cout, h, wd, k, pad](Node& n) {
        const Tensor& xv = n.parents[0]->value;
        const Tensor& wv = n.parents[1]->value;
        const Tensor& go = n.grad;
        bool need_x = n.parents[0]->requires_grad;
        bool need_w = n.parents[1]->requires_grad;
        bool need_b = n.parents[2]->requires_grad;
        Tensor* gx = need_x ? &ensure_grad(*n.parents[0]) : nullptr;
        Tensor* gw = need_w ? &ensure_grad(*n.parents[1]) : nullptr;
        Tensor* gb = need_b ? &ensure_grad(*n.parents[2]) : nullptr;
        for (int co = 0; co < cout; ++co) {
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < wd; ++xx) {
                    double g = go.data[(static_cast<size_t>(co) * h + y) * wd + xx];
                    if (g == 0.0) continue;
                    if (need_b) gb->data[co] += g;
                    for (int ci = 0; ci < cin; ++ci)
                        for (int ky = 0; ky < k; ++ky) {
                            int sy = y + ky - pad;
                            if (sy < 0 || sy >= h) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                int sx = xx + kx - pad;
                                if (sx < 0 || sx >= wd) continue;
                                size_t xi = (static_cast<size_t>(ci) * h + sy) * wd + sx;
                                size_t wi = ((static_cast<size_t>(co) * cin + ci) * k + ky) * k + kx;
                                if (need_w) gw->data[wi] += g * xv.data[xi];
                                if (need_x) gx->data[xi] += g * wv.data[wi];
                            }
                        }
                }
        }
    };
    return Var(make_node(std::move(out), {x.node(), w.node(), b.node()}, back));
}

Var bias_broadcast(const Var& x, const Var& b) {
    const Tensor& xv = x.value();
    const Tensor& bv = b.value();
    if (xv.shape.size() != 3 || bv.shape.size() != 1 || bv.shape[0] != xv.shape[0])
        throw std::invalid_argument("bias_broadcast: shape mismatch");
    int c = xv.shape[0];
    size_t plane = xv.size() / c;
    Tensor out = xv;
    for (int ch = 0; ch < c; ++ch)
        for (size_t i = 0; i < plane; ++i) out.data[ch * plane + i] += bv.data[ch];
    return Var(make_node(std::move(out), {x.node(), b.node()}, [c, plane](Node& n) {
        if (n.parents[0]->requires_grad) {
            Tensor& g = ensure_grad(*n.parents[0]);
            for (size_t i = 0; i < g.size(); ++i) g.data[i] += n.grad.data[i];
        }
        if (n.parents[1]->requires_grad) {
            Tensor& g = ensure_grad(*n.parents[1]);
            for (int ch = 0; ch < c; ++ch)
                for (size_t i = 0; i < plane; ++i) g.data[ch] += n.grad.data[ch * plane + i];
        }
    }));
}

Var dense(const Var& x, const Var& w, const Var& b) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.shape.size() != 1 || wv.shape.size() != 2 || bv.shape.size() != 1 ||
        wv.shape[1] != xv.shape[0] || wv.shape[0] != bv.shape[0])
        throw std::invalid_argument("dense: shape mismatch");
    int m = wv.shape[0], nn = wv.shape[1];
    Tensor out({m});
    for (int i = 0; i < m; ++i) {
        double acc = bv.data[i];
        for (int j = 0; j < nn; ++j) acc += wv.data[static_cast<size_t>(i) * nn + j] * xv.data[j];
        out.data[i] = acc;
    }
    return Var(make_node(std::move(out), {x.node(), w.node(), b.node()}, [m, nn](Node& n) {
        const Tensor& xv = n.parents[0]->value;
        const Tensor& wv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) {
            Tensor& g = ensure_grad(*n.parents[0]);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < nn; ++j)
                    g.data[j] += n.grad.data[i] * wv.data[static_cast<size_t>(i) * nn + j];
        }
        if (n.parents[1]->requires_grad) {
            Tensor& g = ensure_grad(*n.parents[1]);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < nn; ++j)
                    g.data[static_cast<size_t>(i) * nn + j] += n.grad.data[i] * xv.data[j];
        }
        if (n.parents[2]->requires_grad) {
            Tensor& g = ensure_grad(*n.parents[2]);
            for (int i = 0; i < m; ++i) g.data[i] += n.grad.data[i];
        }
    }));
}

Var blur_separable_valid(const Var& x, const std::vector<double>& kernel) {
    const Tensor& xv = x.value();
    if (xv.shape.size() != 3) throw std::invalid_argument("blur: expects [C,H,W]");
    int c = xv.shape[0], h = xv.shape[1], w = xv.shape[2];
    int k = static_cast<int>(kernel.size());
    if (h < k || w < k) throw std::invalid_argument("blur: image smaller than kernel");
    int oh = h - k + 1, ow = w - k + 1;

    // rows pass: [C,H,W] -> [C,H,OW]; cols pass: -> [C,OH,OW]
    Tensor mid({c, h, ow});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xo = 0; xo < ow; ++xo) {
                double acc = 0.0;
                const double* row = &xv.data[(static_cast<size_t>(ch) * h + y) * w + xo];
                for (int i = 0; i < k; ++i) acc += row[i] * kernel[i];
                mid.data[(static_cast<size_t>(ch) * h + y) * ow + xo] = acc;
            }
    Tensor out({c, oh, ow});
    for (int ch = 0; ch < c; ++ch)
        for (int yo = 0; yo < oh; ++yo)
            for (int xo = 0; xo < ow; ++xo) {
                double acc = 0.0;
                for (int i = 0; i < k; ++i)
                    acc += mid.data[(static_cast<size_t>(ch) * h + yo + i) * ow + xo] * kernel[i];
                out.data[(static_cast<size_t>(ch) * oh + yo) * ow + xo] = acc;
            }

    auto back = [c, h, w, oh, ow, k, kernel](Node& n) {
        Tensor& gx = ensure_grad(*n.parents[0]);
        const Tensor& go = n.grad;
        Tensor gmid({c, h, ow});
        for (int ch = 0; ch < c; ++ch)
            for (int yo = 0; yo < oh; ++yo)
                for (int xo = 0; xo < ow; ++xo) {
                    double g = go.data[(static_cast<size_t>(ch) * oh + yo) * ow + xo];
                    if (g == 0.0) continue;
                    for (int i = 0; i < k; ++i)
                        gmid.data[(static_cast<size_t>(ch) * h + yo + i) * ow + xo] += g * kernel[i];
                }
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int xo = 0; xo < ow; ++xo) {
                    double g = gmid.data[(static_cast<size_t>(ch) * h + y) * ow + xo];
                    if (g == 0.0) continue;
                    double* row = &gx.data[(static_cast<size_t>(ch) * h + y) * w + xo];
                    for (int i = 0; i < k; ++i) row[i] += g * kernel[i];
                }
    };
    return Var(make_node(std::move(out), {x.node()}, back));
}

Var mean(const Var& a) {
    double acc = 0.0;
    for (double v : a.value().data) acc += v;
    size_t n = a.value().size();
    Tensor out = Tensor::scalar(acc / static_cast<double>(n));
    return Var(make_node(std::move(out), {a.node()}, [n](Node& nd) {
        Tensor& g = ensure_grad(*nd.parents[0]);
        double go = nd.grad.data[0] / static_cast<double>(n);
        for (double& v : g.data) v += go;
    }));
}

Var mse(const Var& a, const Var& b) {
    Var d = sub(a, b);
    return mean(mul(d, d));
}

}  // namespace illumflow::ad
