#include "auwgcn/ops.hpp"

#include <algorithm>
#include <cmath>

namespace auwgcn {

void check_finite(const Tensor& t, const char* op) {
    for (float v : t.data) {
        if (!std::isfinite(v)) {
            throw std::logic_error(std::string("non-finite value produced by ") + op);
        }
    }
}

static void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.ndim() == 2 && b.ndim() == 2, "matmul expects 2-d tensors");
    require(a.dim(1) == b.dim(0), "matmul inner dimensions disagree");
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += static_cast<double>(a(i, p)) * b(p, j);
            out(i, j) = static_cast<float>(acc);
        }
    }
    check_finite(out, "matmul");
    return out;
}

void matmul_backward(const Tensor& a, const Tensor& b, const Tensor& gout, Tensor& ga, Tensor& gb) {
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    require(gout.ndim() == 2 && gout.dim(0) == m && gout.dim(1) == n, "matmul grad shape mismatch");
    require(ga.same_shape(a) && gb.same_shape(b), "matmul grad accumulator shape mismatch");
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += static_cast<double>(gout(i, j)) * b(p, j);
            ga(i, p) += static_cast<float>(acc);
        }
    }
    for (int p = 0; p < k; ++p) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i) acc += static_cast<double>(a(i, p)) * gout(i, j);
            gb(p, j) += static_cast<float>(acc);
        }
    }
}

Tensor relu(const Tensor& x) {
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = x.data[i] > 0.0f ? x.data[i] : 0.0f;
    check_finite(out, "relu");
    return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& gout) {
    require(x.same_shape(gout), "relu grad shape mismatch");
    Tensor gin(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) gin.data[i] = x.data[i] > 0.0f ? gout.data[i] : 0.0f;
    return gin;
}

static void conv_check(const Tensor& input, const Tensor& weight, const Tensor& bias, int dilation) {
    require(input.ndim() == 2, "conv1d input must be C_in x T");
    require(weight.ndim() == 3, "conv1d weight must be C_out x C_in x k");
    require(bias.ndim() == 1 && bias.dim(0) == weight.dim(0), "conv1d bias shape mismatch");
    require(weight.dim(1) == input.dim(0), "conv1d channel mismatch");
    require(weight.dim(2) % 2 == 1, "conv1d kernel size must be odd");
    require(dilation >= 1, "conv1d dilation must be positive");
}

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, int dilation) {
    conv_check(input, weight, bias, dilation);
    const int cin = input.dim(0), T = input.dim(1);
    const int cout = weight.dim(0), k = weight.dim(2);
    const int pad = (k - 1) / 2 * dilation;
    Tensor out({cout, T});
    std::vector<double> acc(static_cast<std::size_t>(T));
    for (int co = 0; co < cout; ++co) {
        std::fill(acc.begin(), acc.end(), static_cast<double>(bias.data[co]));
        for (int ci = 0; ci < cin; ++ci) {
            const float* x = &input.data[static_cast<std::size_t>(ci) * T];
            const float* w = &weight.data[(static_cast<std::size_t>(co) * cin + ci) * k];
            for (int j = 0; j < k; ++j) {
                const int off = j * dilation - pad;
                const double wj = w[j];
                const int t0 = std::max(0, -off);
                const int t1 = std::min(T, T - off);
                for (int t = t0; t < t1; ++t) acc[t] += wj * x[t + off];
            }
        }
        float* o = &out.data[static_cast<std::size_t>(co) * T];
        for (int t = 0; t < T; ++t) o[t] = static_cast<float>(acc[t]);
    }
    check_finite(out, "conv1d");
    return out;
}

void conv1d_backward(const Tensor& input, const Tensor& weight, const Tensor& gout, int dilation,
                     Tensor& ginput, Tensor& gweight, Tensor& gbias) {
    const int cin = input.dim(0), T = input.dim(1);
    const int cout = weight.dim(0), k = weight.dim(2);
    require(gout.ndim() == 2 && gout.dim(0) == cout && gout.dim(1) == T, "conv1d grad shape mismatch");
    require(ginput.same_shape(input) && gweight.same_shape(weight), "conv1d grad accumulator mismatch");
    require(gbias.ndim() == 1 && gbias.dim(0) == cout, "conv1d bias grad mismatch");
    const int pad = (k - 1) / 2 * dilation;

    std::vector<double> acc(static_cast<std::size_t>(T));
    for (int co = 0; co < cout; ++co) {
        const float* g = &gout.data[static_cast<std::size_t>(co) * T];
        double bacc = 0.0;
        for (int t = 0; t < T; ++t) bacc += g[t];
        gbias.data[co] += static_cast<float>(bacc);
        for (int ci = 0; ci < cin; ++ci) {
            const float* x = &input.data[static_cast<std::size_t>(ci) * T];
            float* gw = &gweight.data[(static_cast<std::size_t>(co) * cin + ci) * k];
            for (int j = 0; j < k; ++j) {
                const int off = j * dilation - pad;
                const int t0 = std::max(0, -off);
                const int t1 = std::min(T, T - off);
                double wacc = 0.0;
                for (int t = t0; t < t1; ++t) wacc += static_cast<double>(g[t]) * x[t + off];
                gw[j] += static_cast<float>(wacc);
            }
        }
    }
    for (int ci = 0; ci < cin; ++ci) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int co = 0; co < cout; ++co) {
            const float* g = &gout.data[static_cast<std::size_t>(co) * T];
            const float* w = &weight.data[(static_cast<std::size_t>(co) * cin + ci) * k];
            for (int j = 0; j < k; ++j) {
                const int off = j * dilation - pad;
                const double wj = w[j];
                // din[u] += w[j] * gout[u + off'] where u = t + off
                const int t0 = std::max(0, -off);
                const int t1 = std::min(T, T - off);
                for (int t = t0; t < t1; ++t) acc[t + off] += wj * g[t];
            }
        }
        float* gi = &ginput.data[static_cast<std::size_t>(ci) * T];
        for (int t = 0; t < T; ++t) gi[t] += static_cast<float>(acc[t]);
    }
}

Tensor sigmoid(const Tensor& x) {
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double v = x.data[i];
        out.data[i] = static_cast<float>(v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                                  : std::exp(v) / (1.0 + std::exp(v)));
    }
    check_finite(out, "sigmoid");
    return out;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& gout) {
    require(y.same_shape(gout), "sigmoid grad shape mismatch");
    Tensor gin(y.shape);
    for (std::size_t i = 0; i < y.numel(); ++i) {
        const double p = y.data[i];
        gin.data[i] = static_cast<float>(gout.data[i] * p * (1.0 - p));
    }
    return gin;
}

Tensor softmax_over_channels(const Tensor& x) {
    require(x.ndim() == 2, "softmax expects C x T");
    const int C = x.dim(0), T = x.dim(1);
    Tensor out(x.shape);
    for (int t = 0; t < T; ++t) {
        double mx = x(0, t);
        for (int c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(x(c, t)));
        double sum = 0.0;
        for (int c = 0; c < C; ++c) sum += std::exp(static_cast<double>(x(c, t)) - mx);
        for (int c = 0; c < C; ++c) {
            out(c, t) = static_cast<float>(std::exp(static_cast<double>(x(c, t)) - mx) / sum);
        }
    }
    check_finite(out, "softmax");
    return out;
}

Tensor softmax_backward(const Tensor& p, const Tensor& gout) {
    require(p.same_shape(gout), "softmax grad shape mismatch");
    const int C = p.dim(0), T = p.dim(1);
    Tensor gin(p.shape);
    for (int t = 0; t < T; ++t) {
        double dot = 0.0;
        for (int c = 0; c < C; ++c) dot += static_cast<double>(gout(c, t)) * p(c, t);
        for (int c = 0; c < C; ++c) {
            gin(c, t) = static_cast<float>(p(c, t) * (gout(c, t) - dot));
        }
    }
    return gin;
}

}  // namespace auwgcn
