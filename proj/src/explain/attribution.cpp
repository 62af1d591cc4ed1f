#include "har/explain/attribution.hpp"

#include "har/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace har::explain {

using Kind = Node::Kind;

std::string_view method_name(Method m) {
    switch (m) {
    case Method::lrp0: return "lrp0";
    case Method::lrp_eps: return "lrp_eps";
    case Method::lrp_cmp: return "lrp_cmp";
    case Method::saliency: return "saliency";
    case Method::gbp: return "gbp";
    case Method::ig: return "ig";
    }
    return "?";
}

Method parse_method(std::string_view s) {
    for (auto m : {Method::lrp0, Method::lrp_eps, Method::lrp_cmp, Method::saliency, Method::gbp, Method::ig})
        if (method_name(m) == s) return m;
    throw ConfigError(fmt::format("unknown attribution method '{}'", s));
}

void LrpConfig::validate() const {
    if (!(gamma >= 0.0)) throw ConfigError("LRP gamma must be >= 0");
    for (std::size_t i = 0; i < epsilon.size(); ++i) {
        if (!(epsilon[i] > 0.0)) throw ConfigError("LRP epsilons must be positive");
        if (i > 0 && !(epsilon[i] > epsilon[i - 1])) throw ConfigError("LRP epsilons must be ascending");
    }
    if (!(uniform_epsilon > 0.0)) throw ConfigError("uniform epsilon must be positive");
    if (ig_steps < 1) throw ConfigError("IG needs at least one step");
}

double RelevanceMap::sum() const {
    double s = 0.0;
    for (double v : scores) s += v;
    return s;
}

std::vector<double> RelevanceMap::per_timestep() const {
    std::vector<double> out(T, 0.0);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t = 0; t < T; ++t) out[t] += scores[c * T + t];
    return out;
}

namespace {

struct Rule {
    double eps = 0.0;
    double gamma = 0.0;
};

Rule rule_for(const Node& n, int n_stages, Method m, const LrpConfig& cfg) {
    if (m == Method::lrp0) return {};
    if (m == Method::lrp_eps) return {cfg.uniform_epsilon, 0.0};
    // Composite: gamma for the stem and first stage, ascending epsilon over
    // the later stages and the final conv, LRP-0 for pooling and heads.
    if (n.group < 0) return {};
    if (n.group == 0) return {0.0, cfg.gamma};
    if (n.group >= n_stages) return {cfg.epsilon.back(), 0.0};
    const int later = n_stages - 1; // number of stages after the first
    const auto idx = static_cast<std::size_t>(
        std::min<int>(static_cast<int>(cfg.epsilon.size()) - 1,
                      (n.group - 1) * static_cast<int>(cfg.epsilon.size()) / std::max(later, 1)));
    return {cfg.epsilon[idx], 0.0};
}

double stabilize(double z, double eps) {
    const double s = z >= 0.0 ? 1.0 : -1.0;
    return z + s * (eps + 1e-300);
}

// Contribution of input activation a through weight w under the gamma rule.
inline double contrib(double a, double w, double gamma) {
    const double z = a * w;
    return gamma > 0.0 && z > 0.0 ? z * (1.0 + gamma) : z;
}

} // namespace

RelevanceMap lrp(const EvalGraph& g, const SignalWindow& x, nn::Head head, int cls, Method rule,
                 const LrpConfig& cfg) {
    if (rule != Method::lrp0 && rule != Method::lrp_eps && rule != Method::lrp_cmp)
        throw ConfigError("lrp() takes an LRP method");
    cfg.validate();
    const auto& nodes = g.nodes();
    const int out_node = g.head_node(head);
    if (cls < 0 || static_cast<std::size_t>(cls) >= nodes[out_node].C) throw InputError("class out of range");
    const auto act = g.forward(x);

    std::vector<std::vector<double>> R(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) R[i].assign(act[i].size(), 0.0);
    RelevanceMap map;
    map.output = act[out_node][cls];
    R[out_node][cls] = map.output;
    // A node is a cut when no edge jumps over it: all relevance passes
    // through it, so its sum is comparable to the output.
    std::vector<char> cut(nodes.size(), 1);
    for (int j = 1; j <= out_node; ++j)
        for (int in : nodes[j].inputs)
            for (int k = in + 1; k < j; ++k) cut[k] = 0;

    for (int i = out_node; i >= 1; --i) {
        const auto& n = nodes[i];
        const auto& Ri = R[i];
        bool any = false;
        for (double v : Ri)
            if (v != 0.0) {
                any = true;
                break;
            }
        if (!any) continue;
        const int src = n.inputs[0];
        const auto& a = act[src];
        auto& Rs = R[src];
        const Rule r = rule_for(n, g.n_stages(), rule, cfg);
        switch (n.kind) {
        case Kind::input: break;
        case Kind::relu:
            for (std::size_t j = 0; j < Ri.size(); ++j) Rs[j] += Ri[j];
            break;
        case Kind::affine:
            for (std::size_t c = 0; c < n.C; ++c)
                for (std::size_t t = 0; t < n.L; ++t) {
                    const std::size_t j = c * n.L + t;
                    if (Ri[j] == 0.0) continue;
                    const double z = n.w[c] * a[j];
                    Rs[j] += z / stabilize(z + n.b[c], r.eps) * Ri[j];
                }
            break;
        case Kind::add: {
            const int src2 = n.inputs[1];
            const auto& b = act[src2];
            auto& Rs2 = R[src2];
            for (std::size_t j = 0; j < Ri.size(); ++j) {
                if (Ri[j] == 0.0) continue;
                const double s = Ri[j] / stabilize(a[j] + b[j], r.eps);
                Rs[j] += a[j] * s;
                Rs2[j] += b[j] * s;
            }
            break;
        }
        case Kind::gap: {
            const std::size_t Lin = nodes[src].L;
            for (std::size_t c = 0; c < n.C; ++c) {
                if (Ri[c] == 0.0) continue;
                double z = 0.0;
                for (std::size_t t = 0; t < Lin; ++t) z += a[c * Lin + t];
                const double s = Ri[c] / stabilize(z, r.eps);
                for (std::size_t t = 0; t < Lin; ++t) Rs[c * Lin + t] += a[c * Lin + t] * s;
            }
            break;
        }
        case Kind::dense:
            for (std::size_t o = 0; o < n.cout; ++o) {
                if (Ri[o] == 0.0) continue;
                double z = n.b[o];
                for (std::size_t j = 0; j < n.cin; ++j) z += contrib(a[j], n.w[o * n.cin + j], r.gamma);
                const double s = Ri[o] / stabilize(z, r.eps);
                for (std::size_t j = 0; j < n.cin; ++j) Rs[j] += contrib(a[j], n.w[o * n.cin + j], r.gamma) * s;
            }
            break;
        case Kind::conv: {
            const std::size_t Lin = nodes[src].L;
            for (std::size_t co = 0; co < n.cout; ++co)
                for (std::size_t to = 0; to < n.L; ++to) {
                    const double rj = Ri[co * n.L + to];
                    if (rj == 0.0) continue;
                    const auto t0 = static_cast<std::ptrdiff_t>(to * n.stride) - static_cast<std::ptrdiff_t>(n.pad);
                    double z = n.b[co];
                    for (std::size_t ci = 0; ci < n.cin; ++ci)
                        for (std::size_t kk = 0; kk < n.k; ++kk) {
                            const auto t = t0 + static_cast<std::ptrdiff_t>(kk);
                            if (t < 0 || t >= static_cast<std::ptrdiff_t>(Lin)) continue;
                            z += contrib(a[ci * Lin + static_cast<std::size_t>(t)], n.w[(co * n.cin + ci) * n.k + kk],
                                         r.gamma);
                        }
                    const double s = rj / stabilize(z, r.eps);
                    for (std::size_t ci = 0; ci < n.cin; ++ci)
                        for (std::size_t kk = 0; kk < n.k; ++kk) {
                            const auto t = t0 + static_cast<std::ptrdiff_t>(kk);
                            if (t < 0 || t >= static_cast<std::ptrdiff_t>(Lin)) continue;
                            const auto ti = ci * Lin + static_cast<std::size_t>(t);
                            Rs[ti] += contrib(a[ti], n.w[(co * n.cin + ci) * n.k + kk], r.gamma) * s;
                        }
                }
            break;
        }
        }
        if (cut[i]) {
            double entering = 0.0;
            for (double v : Ri) entering += v;
            map.layer_sums.emplace_back(n.name, entering);
        }
    }
    const auto& in = nodes.front();
    map.C = in.C;
    map.T = in.L;
    map.scores = R[0];
    map.head = head;
    map.cls = cls;
    map.method = rule;
    double total = 0.0;
    for (double v : R[0]) total += v;
    map.layer_sums.emplace_back("input", total);
    return map;
}

std::vector<double> input_gradient(const EvalGraph& g, const std::vector<double>& x, nn::Head head, int cls,
                                   bool guided) {
    const auto& nodes = g.nodes();
    const int out_node = g.head_node(head);
    if (cls < 0 || static_cast<std::size_t>(cls) >= nodes[out_node].C) throw InputError("class out of range");
    const auto act = g.forward(x);
    std::vector<std::vector<double>> G(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) G[i].assign(act[i].size(), 0.0);
    G[out_node][cls] = 1.0;
    for (int i = out_node; i >= 1; --i) {
        const auto& n = nodes[i];
        const auto& gi = G[i];
        const int src = n.inputs[0];
        auto& gs = G[src];
        switch (n.kind) {
        case Kind::input: break;
        case Kind::relu:
            for (std::size_t j = 0; j < gi.size(); ++j)
                if (act[src][j] > 0.0 && (!guided || gi[j] > 0.0)) gs[j] += gi[j];
            break;
        case Kind::affine:
            for (std::size_t c = 0; c < n.C; ++c)
                for (std::size_t t = 0; t < n.L; ++t) gs[c * n.L + t] += n.w[c] * gi[c * n.L + t];
            break;
        case Kind::add: {
            auto& gs2 = G[n.inputs[1]];
            for (std::size_t j = 0; j < gi.size(); ++j) {
                gs[j] += gi[j];
                gs2[j] += gi[j];
            }
            break;
        }
        case Kind::gap: {
            const std::size_t Lin = nodes[src].L;
            for (std::size_t c = 0; c < n.C; ++c)
                for (std::size_t t = 0; t < Lin; ++t) gs[c * Lin + t] += gi[c] / static_cast<double>(Lin);
            break;
        }
        case Kind::dense:
            for (std::size_t o = 0; o < n.cout; ++o) {
                if (gi[o] == 0.0) continue;
                for (std::size_t j = 0; j < n.cin; ++j) gs[j] += n.w[o * n.cin + j] * gi[o];
            }
            break;
        case Kind::conv: {
            const std::size_t Lin = nodes[src].L;
            for (std::size_t co = 0; co < n.cout; ++co)
                for (std::size_t to = 0; to < n.L; ++to) {
                    const double gj = gi[co * n.L + to];
                    if (gj == 0.0) continue;
                    const auto t0 = static_cast<std::ptrdiff_t>(to * n.stride) - static_cast<std::ptrdiff_t>(n.pad);
                    for (std::size_t ci = 0; ci < n.cin; ++ci)
                        for (std::size_t kk = 0; kk < n.k; ++kk) {
                            const auto t = t0 + static_cast<std::ptrdiff_t>(kk);
                            if (t < 0 || t >= static_cast<std::ptrdiff_t>(Lin)) continue;
                            gs[ci * Lin + static_cast<std::size_t>(t)] += n.w[(co * n.cin + ci) * n.k + kk] * gj;
                        }
                }
            break;
        }
        }
    }
    return G[0];
}

namespace {

RelevanceMap gradient_map(const EvalGraph& g, const SignalWindow& x, nn::Head head, int cls, Method m) {
    RelevanceMap map;
    map.scores = input_gradient(g, x.samples(), head, cls, m == Method::gbp);
    if (m == Method::saliency)
        for (auto& v : map.scores) v = std::abs(v);
    map.C = kChannels;
    map.T = x.length();
    map.head = head;
    map.cls = cls;
    map.method = m;
    map.output = g.forward(x)[g.head_node(head)][cls];
    return map;
}

} // namespace

RelevanceMap saliency(const EvalGraph& g, const SignalWindow& x, nn::Head head, int cls) {
    return gradient_map(g, x, head, cls, Method::saliency);
}

RelevanceMap guided_backprop(const EvalGraph& g, const SignalWindow& x, nn::Head head, int cls) {
    return gradient_map(g, x, head, cls, Method::gbp);
}

RelevanceMap integrated_gradients(const EvalGraph& g, const SignalWindow& x, nn::Head head, int cls, int steps) {
    if (steps < 1) throw ConfigError("IG needs at least one step");
    const auto& xs = x.samples();
    RelevanceMap map;
    map.scores.assign(xs.size(), 0.0);
    std::vector<double> p(xs.size());
    for (int k = 0; k < steps; ++k) {
        const double alpha = (k + 0.5) / steps;
        for (std::size_t j = 0; j < xs.size(); ++j) p[j] = alpha * xs[j];
        const auto grad = input_gradient(g, p, head, cls, false);
        for (std::size_t j = 0; j < xs.size(); ++j) map.scores[j] += grad[j];
    }
    for (std::size_t j = 0; j < xs.size(); ++j) map.scores[j] *= xs[j] / steps;
    map.C = kChannels;
    map.T = x.length();
    map.head = head;
    map.cls = cls;
    map.method = Method::ig;
    map.output = g.forward(x)[g.head_node(head)][cls];
    return map;
}

RelevanceMap attribute(const EvalGraph& g, const SignalWindow& x, nn::Head head, int cls, Method m,
                       const LrpConfig& cfg) {
    switch (m) {
    case Method::lrp0:
    case Method::lrp_eps:
    case Method::lrp_cmp: return lrp(g, x, head, cls, m, cfg);
    case Method::saliency: return saliency(g, x, head, cls);
    case Method::gbp: return guided_backprop(g, x, head, cls);
    case Method::ig: return integrated_gradients(g, x, head, cls, cfg.ig_steps);
    }
    throw ConfigError("unknown attribution method");
}

} // namespace har::explain
