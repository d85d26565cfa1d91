#include "auwgcn/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "auwgcn/binio.hpp"
#include "auwgcn/feature_io.hpp"
#include "auwgcn/ops.hpp"
#include "auwgcn/rng.hpp"

namespace auwgcn {

void ModelConfig::validate() const {
    if (gcn_layers < 1) throw std::invalid_argument("gcn_layers must be >= 1");
    if (static_cast<int>(gcn_hidden.size()) != gcn_layers) {
        throw std::invalid_argument("gcn_hidden must list one dimension per layer");
    }
    for (int d : gcn_hidden) {
        if (d < 1) throw std::invalid_argument("gcn hidden dimensions must be positive");
    }
    if (neck_channels[0] < 1 || neck_channels[1] < 1) throw std::invalid_argument("neck channels must be positive");
    if (head_channels != 10) throw std::invalid_argument("head emits 10 channels (5 per expression kind)");
    if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("kernel must be odd");
    for (int d : dilations) {
        if (d < 1) throw std::invalid_argument("dilations must be positive");
    }
}

std::vector<Parameter*> ModelParams::all() {
    std::vector<Parameter*> out;
    for (auto& w : gcn_w) out.push_back(&w);
    out.push_back(&conv1_w);
    out.push_back(&conv1_b);
    out.push_back(&conv2_w);
    out.push_back(&conv2_b);
    out.push_back(&conv3_w);
    out.push_back(&conv3_b);
    return out;
}

std::vector<const Parameter*> ModelParams::all() const {
    std::vector<const Parameter*> out;
    for (const auto& w : gcn_w) out.push_back(&w);
    out.push_back(&conv1_w);
    out.push_back(&conv1_b);
    out.push_back(&conv2_w);
    out.push_back(&conv2_b);
    out.push_back(&conv3_w);
    out.push_back(&conv3_b);
    return out;
}

std::size_t ModelParams::total_params() const {
    std::size_t n = 0;
    for (const Parameter* p : all()) n += p->value.numel();
    return n;
}

void ModelParams::zero_grads() {
    for (Parameter* p : all()) p->zero_grad();
}

static Tensor glorot_uniform(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
    Tensor t(std::move(shape));
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(-bound, bound));
    return t;
}

ModelParams init_params(const ModelConfig& cfg) {
    cfg.validate();
    Rng rng(mix_seed(cfg.init_seed, 0xA0));
    ModelParams p;
    p.cfg = cfg;
    int d_in = cfg.input_dim();
    for (int l = 0; l < cfg.gcn_layers; ++l) {
        const int d_out = cfg.gcn_hidden[static_cast<std::size_t>(l)];
        p.gcn_w.emplace_back(glorot_uniform({d_in, d_out}, d_in, d_out, rng));
        d_in = d_out;
    }
    const int flat = cfg.flatten_dim();
    const int k = cfg.kernel;
    const int c1 = cfg.neck_channels[0], c2 = cfg.neck_channels[1], c3 = cfg.head_channels;
    p.conv1_w = Parameter(glorot_uniform({c1, flat, k}, flat * k, c1 * k, rng));
    p.conv1_b = Parameter(Tensor({c1}));
    p.conv2_w = Parameter(glorot_uniform({c2, c1, k}, c1 * k, c2 * k, rng));
    p.conv2_b = Parameter(Tensor({c2}));
    p.conv3_w = Parameter(glorot_uniform({c3, c2, k}, c2 * k, c3 * k, rng));
    p.conv3_b = Parameter(Tensor({c3}));
    return p;
}

static void check_inputs(const ModelParams& params, const Tensor& adjacency, const Tensor& feats) {
    const int n = params.cfg.node_count();
    if (adjacency.ndim() != 2 || adjacency.dim(0) != n || adjacency.dim(1) != n) {
        throw std::invalid_argument("adjacency must be 12 x 12");
    }
    if (feats.ndim() != 3 || feats.dim(1) != n || feats.dim(2) != params.cfg.input_dim()) {
        throw std::invalid_argument("features must be T x 12 x 2");
    }
}

namespace {

// copy frame t of a T x n x d tensor into / out of an n x d matrix
void slice_frame(const Tensor& src, int t, Tensor& dst) {
    const std::size_t n = static_cast<std::size_t>(dst.dim(0)) * dst.dim(1);
    std::memcpy(dst.data.data(), &src.data[static_cast<std::size_t>(t) * n], sizeof(float) * n);
}

void store_frame(Tensor& dst, int t, const Tensor& src) {
    const std::size_t n = static_cast<std::size_t>(src.dim(0)) * src.dim(1);
    std::memcpy(&dst.data[static_cast<std::size_t>(t) * n], src.data.data(), sizeof(float) * n);
}

}  // namespace

Tensor gcn_embed(const ModelParams& params, const Tensor& adjacency, const Tensor& feats) {
    check_inputs(params, adjacency, feats);
    const int T = feats.dim(0);
    const int n = params.cfg.node_count();
    Tensor x = feats;
    for (const auto& w : params.gcn_w) {
        const int d_in = w.value.dim(0), d_out = w.value.dim(1);
        Tensor next({T, n, d_out});
        Tensor frame({n, d_in});
        for (int t = 0; t < T; ++t) {
            slice_frame(x, t, frame);
            store_frame(next, t, relu(matmul(matmul(adjacency, frame), w.value)));
        }
        x = std::move(next);
    }
    return x;
}

// flatten T x n x d -> (n*d) x T, node-major rows
static Tensor flatten_embedding(const Tensor& emb) {
    const int T = emb.dim(0), n = emb.dim(1), d = emb.dim(2);
    Tensor flat({n * d, T});
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) flat(i * d + j, t) = emb(t, i, j);
        }
    }
    return flat;
}

Tensor forward(const ModelParams& params, const Tensor& adjacency, const Tensor& feats, ForwardTape* tape) {
    check_inputs(params, adjacency, feats);
    const int T = feats.dim(0);
    const int n = params.cfg.node_count();
    const int layers = params.cfg.gcn_layers;

    if (tape) {
        tape->adjacency = adjacency;
        tape->gcn_in.assign(static_cast<std::size_t>(layers), Tensor());
        tape->gcn_ax.assign(static_cast<std::size_t>(layers), Tensor());
        tape->gcn_pre.assign(static_cast<std::size_t>(layers), Tensor());
    }

    Tensor x = feats;
    for (int l = 0; l < layers; ++l) {
        const Tensor& w = params.gcn_w[static_cast<std::size_t>(l)].value;
        const int d_in = w.dim(0), d_out = w.dim(1);
        Tensor ax({T, n, d_in});
        Tensor pre({T, n, d_out});
        Tensor post({T, n, d_out});
        Tensor frame({n, d_in});
        for (int t = 0; t < T; ++t) {
            slice_frame(x, t, frame);
            const Tensor axf = matmul(adjacency, frame);
            const Tensor pref = matmul(axf, w);
            store_frame(ax, t, axf);
            store_frame(pre, t, pref);
            store_frame(post, t, relu(pref));
        }
        if (tape) {
            tape->gcn_in[static_cast<std::size_t>(l)] = std::move(x);
            tape->gcn_ax[static_cast<std::size_t>(l)] = std::move(ax);
            tape->gcn_pre[static_cast<std::size_t>(l)] = std::move(pre);
        }
        x = std::move(post);
    }

    Tensor flat = flatten_embedding(x);
    Tensor conv1_pre = conv1d(flat, params.conv1_w.value, params.conv1_b.value, params.cfg.dilations[0]);
    Tensor conv1_out = relu(conv1_pre);
    Tensor conv2_pre = conv1d(conv1_out, params.conv2_w.value, params.conv2_b.value, params.cfg.dilations[1]);
    Tensor conv2_out = relu(conv2_pre);
    Tensor logits = conv1d(conv2_out, params.conv3_w.value, params.conv3_b.value, params.cfg.dilations[2]);

    if (tape) {
        tape->flat = std::move(flat);
        tape->conv1_pre = std::move(conv1_pre);
        tape->conv1_out = std::move(conv1_out);
        tape->conv2_pre = std::move(conv2_pre);
        tape->conv2_out = std::move(conv2_out);
        tape->logits = logits;
    }
    return logits;
}

void backward(ModelParams& params, const ForwardTape& tape, const Tensor& upstream) {
    if (tape.logits.shape.empty()) throw std::invalid_argument("backward requires a tape recorded by forward");
    if (!upstream.same_shape(tape.logits)) throw std::invalid_argument("upstream grad shape mismatch");
    const int T = tape.flat.dim(1);
    const int n = params.cfg.node_count();
    const int layers = params.cfg.gcn_layers;
    if (static_cast<int>(tape.gcn_pre.size()) != layers) throw std::invalid_argument("tape does not match model");

    Tensor d_conv2out(tape.conv2_out.shape);
    conv1d_backward(tape.conv2_out, params.conv3_w.value, upstream, params.cfg.dilations[2],
                    d_conv2out, params.conv3_w.grad, params.conv3_b.grad);
    const Tensor d_conv2pre = relu_backward(tape.conv2_pre, d_conv2out);

    Tensor d_conv1out(tape.conv1_out.shape);
    conv1d_backward(tape.conv1_out, params.conv2_w.value, d_conv2pre, params.cfg.dilations[1],
                    d_conv1out, params.conv2_w.grad, params.conv2_b.grad);
    const Tensor d_conv1pre = relu_backward(tape.conv1_pre, d_conv1out);

    Tensor d_flat(tape.flat.shape);
    conv1d_backward(tape.flat, params.conv1_w.value, d_conv1pre, params.cfg.dilations[0],
                    d_flat, params.conv1_w.grad, params.conv1_b.grad);

    // unflatten to T x n x d_last
    const int d_last = params.cfg.gcn_hidden.back();
    Tensor dx({T, n, d_last});
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d_last; ++j) dx(t, i, j) = d_flat(i * d_last + j, t);
        }
    }

    for (int l = layers - 1; l >= 0; --l) {
        Parameter& w = params.gcn_w[static_cast<std::size_t>(l)];
        const int d_in = w.value.dim(0), d_out = w.value.dim(1);
        const Tensor& ax = tape.gcn_ax[static_cast<std::size_t>(l)];
        const Tensor& pre = tape.gcn_pre[static_cast<std::size_t>(l)];
        const Tensor& xin = tape.gcn_in[static_cast<std::size_t>(l)];
        Tensor dx_prev({T, n, d_in});
        Tensor pre_f({n, d_out}), dpost_f({n, d_out});
        Tensor ax_f({n, d_in}), xin_f({n, d_in});
        for (int t = 0; t < T; ++t) {
            slice_frame(pre, t, pre_f);
            slice_frame(dx, t, dpost_f);
            const Tensor dpre_f = relu_backward(pre_f, dpost_f);
            slice_frame(ax, t, ax_f);
            Tensor d_ax_f({n, d_in});
            matmul_backward(ax_f, w.value, dpre_f, d_ax_f, w.grad);
            slice_frame(xin, t, xin_f);
            Tensor d_adj({n, n});  // discarded, adjacency is not trained
            Tensor d_xin_f({n, d_in});
            matmul_backward(tape.adjacency, xin_f, d_ax_f, d_adj, d_xin_f);
            store_frame(dx_prev, t, d_xin_f);
        }
        dx = std::move(dx_prev);
    }
}

std::uint64_t relu_signature(const ForwardTape& tape) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto mix = [&h](const Tensor& t) {
        for (float v : t.data) {
            h ^= v > 0.0f ? 0x9EULL : 0x61ULL;
            h *= 0x100000001B3ULL;
        }
    };
    for (const auto& pre : tape.gcn_pre) mix(pre);
    mix(tape.conv1_pre);
    mix(tape.conv2_pre);
    return h;
}

ProbabilityMaps decode_probabilities(const Tensor& logits) {
    if (logits.ndim() != 2 || logits.dim(0) != 10) throw std::invalid_argument("logits must be 10 x T");
    const int T = logits.dim(1);
    ProbabilityMaps maps;
    maps.length = T;
    for (int half = 0; half < 2; ++half) {
        KindMaps& km = half == 0 ? maps.macro : maps.micro;
        const int base = half * 5;
        Tensor exp_logit({1, T});
        for (int t = 0; t < T; ++t) exp_logit(0, t) = logits(base, t);
        const Tensor exp_p = sigmoid(exp_logit);
        km.exp.assign(exp_p.data.begin(), exp_p.data.end());

        Tensor cls_logit({4, T});
        for (int c = 0; c < 4; ++c) {
            for (int t = 0; t < T; ++t) cls_logit(c, t) = logits(base + 1 + c, t);
        }
        const Tensor p = softmax_over_channels(cls_logit);
        km.s.resize(static_cast<std::size_t>(T));
        km.ap.resize(static_cast<std::size_t>(T));
        km.e.resize(static_cast<std::size_t>(T));
        km.bg.resize(static_cast<std::size_t>(T));
        for (int t = 0; t < T; ++t) {
            km.s[static_cast<std::size_t>(t)] = p(0, t);
            km.ap[static_cast<std::size_t>(t)] = p(1, t);
            km.e[static_cast<std::size_t>(t)] = p(2, t);
            km.bg[static_cast<std::size_t>(t)] = p(3, t);
        }
    }
    return maps;
}

static constexpr char kCheckpointMagic[4] = {'A', 'U', 'W', 'C'};
static constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::string buf;
    buf.append(kCheckpointMagic, 4);
    binio::put_le(buf, kCheckpointVersion);
    const ModelConfig& c = params.cfg;
    binio::put_le(buf, static_cast<std::uint32_t>(c.gcn_layers));
    for (int d : c.gcn_hidden) binio::put_le(buf, static_cast<std::uint32_t>(d));
    binio::put_le(buf, static_cast<std::uint32_t>(c.neck_channels[0]));
    binio::put_le(buf, static_cast<std::uint32_t>(c.neck_channels[1]));
    binio::put_le(buf, static_cast<std::uint32_t>(c.head_channels));
    binio::put_le(buf, static_cast<std::uint32_t>(c.kernel));
    for (int d : c.dilations) binio::put_le(buf, static_cast<std::uint32_t>(d));
    binio::put_le(buf, static_cast<std::uint64_t>(c.init_seed));
    for (const Parameter* p : params.all()) {
        binio::put_le(buf, static_cast<std::uint32_t>(p->value.ndim()));
        for (int d : p->value.shape) binio::put_le(buf, static_cast<std::uint32_t>(d));
        for (float v : p->value.data) binio::put_f32(buf, v);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::io_failure, "cannot open " + path + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError(IoErrorKind::io_failure, "write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrorKind::io_failure, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string buf = ss.str();

    binio::Reader r(buf, path);
    r.need(4);
    if (std::memcmp(buf.data(), kCheckpointMagic, 4) != 0) {
        throw IoError(IoErrorKind::bad_magic, path + ": bad checkpoint magic");
    }
    r.skip(4);
    const auto version = r.get_le<std::uint16_t>();
    if (version != kCheckpointVersion) {
        throw IoError(IoErrorKind::bad_version, path + ": unsupported checkpoint version");
    }
    ModelConfig cfg;
    cfg.gcn_layers = static_cast<int>(r.get_le<std::uint32_t>());
    if (cfg.gcn_layers < 1 || cfg.gcn_layers > 64) {
        throw IoError(IoErrorKind::malformed, path + ": implausible gcn_layers");
    }
    cfg.gcn_hidden.clear();
    for (int l = 0; l < cfg.gcn_layers; ++l) cfg.gcn_hidden.push_back(static_cast<int>(r.get_le<std::uint32_t>()));
    cfg.neck_channels[0] = static_cast<int>(r.get_le<std::uint32_t>());
    cfg.neck_channels[1] = static_cast<int>(r.get_le<std::uint32_t>());
    cfg.head_channels = static_cast<int>(r.get_le<std::uint32_t>());
    cfg.kernel = static_cast<int>(r.get_le<std::uint32_t>());
    for (auto& d : cfg.dilations) d = static_cast<int>(r.get_le<std::uint32_t>());
    cfg.init_seed = r.get_le<std::uint64_t>();
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw IoError(IoErrorKind::malformed, path + ": " + e.what());
    }

    ModelParams params = init_params(cfg);
    for (Parameter* p : params.all()) {
        const auto ndim = r.get_le<std::uint32_t>();
        if (ndim != static_cast<std::uint32_t>(p->value.ndim())) {
            throw IoError(IoErrorKind::shape_mismatch, path + ": parameter rank mismatch");
        }
        for (int d : p->value.shape) {
            if (r.get_le<std::uint32_t>() != static_cast<std::uint32_t>(d)) {
                throw IoError(IoErrorKind::shape_mismatch, path + ": parameter shape mismatch");
            }
        }
        for (auto& v : p->value.data) {
            v = r.get_f32();
            if (!std::isfinite(v)) throw IoError(IoErrorKind::non_finite, path + ": non-finite parameter");
        }
    }
    if (r.remaining() != 0) {
        throw IoError(IoErrorKind::trailing_bytes, path + ": trailing bytes");
    }
    return params;
}

}  // namespace auwgcn
