#include "core/network.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "core/binio.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"

namespace qzero::nn {

namespace {

template <typename T>
using MatC = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

constexpr char kMagic[8] = {'Q', 'Z', 'N', 'E', 'T', 'P', 'R', 'M'};
constexpr uint32_t kFormatVersion = 1;

std::string conv_name(int block, int conv) {
    return "block" + std::to_string(block) + ".conv" + std::to_string(conv);
}

// Same-padding 3x3 taps for every point, row-major kernel order.
std::vector<int> build_neighbours(int n) {
    std::vector<int> taps(static_cast<size_t>(n) * n * 9);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            for (int k = 0; k < 9; ++k) {
                const int rr = r + k / 3 - 1;
                const int cc = c + k % 3 - 1;
                taps[(r * n + c) * 9 + k] = (rr >= 0 && rr < n && cc >= 0 && cc < n) ? rr * n + cc : -1;
            }
        }
    }
    return taps;
}

template <typename T>
struct ConvRef {
    const T* weight;
    const T* bias;
    int in_channels;
    int out_channels;
};

template <typename T>
ConvRef<T> conv_ref(const BasicParameters<T>& p, const std::string& base) {
    const TensorSpec& w = p.spec(base + ".weight");
    const TensorSpec& b = p.spec(base + ".bias");
    return {p.values.data() + w.offset, p.values.data() + b.offset, w.shape.back(), w.shape.front()};
}

template <typename T>
struct ConvGrad {
    T* weight;
    T* bias;
};

template <typename T>
ConvGrad<T> conv_grad(BasicGradients<T>& g, const std::string& base) {
    return {g.values.data() + g.spec(base + ".weight").offset, g.values.data() + g.spec(base + ".bias").offset};
}

// im2col with (tap, channel) row order matching the (out, kh, kw, in) kernel layout.
template <typename T>
void im2col(const std::vector<int>& taps, const T* in, int channels, int batch, int points, AlignedVector<T>& col) {
    const size_t rows = static_cast<size_t>(9) * channels;
    col.resize(rows * batch * points);
    for (int b = 0; b < batch; ++b) {
        for (int p = 0; p < points; ++p) {
            T* dst = col.data() + (static_cast<size_t>(b) * points + p) * rows;
            for (int k = 0; k < 9; ++k) {
                const int q = taps[p * 9 + k];
                if (q < 0) {
                    std::fill(dst + k * channels, dst + (k + 1) * channels, T(0));
                } else {
                    std::memcpy(dst + k * channels, in + (static_cast<size_t>(b) * points + q) * channels, sizeof(T) * channels);
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const std::vector<int>& taps, const T* col, int channels, int batch, int points, T* din) {
    const size_t rows = static_cast<size_t>(9) * channels;
    for (int b = 0; b < batch; ++b) {
        for (int p = 0; p < points; ++p) {
            const T* src = col + (static_cast<size_t>(b) * points + p) * rows;
            for (int k = 0; k < 9; ++k) {
                const int q = taps[p * 9 + k];
                if (q < 0) continue;
                T* dst = din + (static_cast<size_t>(b) * points + q) * channels;
                for (int c = 0; c < channels; ++c) dst[c] += src[k * channels + c];
            }
        }
    }
}

template <typename T>
void conv3x3_forward(const ConvRef<T>& conv, const std::vector<int>& taps, const T* in, int batch, int points,
                     AlignedVector<T>& col, T* out) {
    im2col(taps, in, conv.in_channels, batch, points, col);
    const int rows = 9 * conv.in_channels;
    Eigen::Map<const MatR<T>> w(conv.weight, conv.out_channels, rows);
    Eigen::Map<const Vec<T>> bias(conv.bias, conv.out_channels);
    // One product per sample: a sample's output never depends on its batch position.
    for (int b = 0; b < batch; ++b) {
        Eigen::Map<const MatC<T>> x(col.data() + static_cast<size_t>(b) * points * rows, rows, points);
        Eigen::Map<MatC<T>> y(out + static_cast<size_t>(b) * points * conv.out_channels, conv.out_channels, points);
        y.noalias() = w * x;
        y.colwise() += bias;
    }
}

// Accumulates kernel/bias gradients; when din is non-null also adds dL/dinput.
template <typename T>
void conv3x3_backward(const ConvRef<T>& conv, ConvGrad<T> grad, const std::vector<int>& taps, const T* in, const T* dout,
                      int batch, int points, AlignedVector<T>& col, AlignedVector<T>& dcol, T* din) {
    im2col(taps, in, conv.in_channels, batch, points, col);
    const Eigen::Index cols = static_cast<Eigen::Index>(batch) * points;
    const int rows = 9 * conv.in_channels;
    Eigen::Map<const MatC<T>> x(col.data(), rows, cols);
    Eigen::Map<const MatC<T>> dy(dout, conv.out_channels, cols);
    Eigen::Map<MatR<T>> dw(grad.weight, conv.out_channels, rows);
    Eigen::Map<Vec<T>> db(grad.bias, conv.out_channels);
    dw.noalias() += dy * x.transpose();
    db += dy.rowwise().sum();
    if (din) {
        Eigen::Map<const MatR<T>> w(conv.weight, conv.out_channels, rows);
        dcol.resize(static_cast<size_t>(rows) * cols);
        Eigen::Map<MatC<T>> dx(dcol.data(), rows, cols);
        dx.noalias() = w.transpose() * dy;
        col2im_add(taps, dcol.data(), conv.in_channels, batch, points, din);
    }
}

template <typename T>
void relu_inplace(T* x, size_t n) {
    for (size_t i = 0; i < n; ++i) x[i] = x[i] > T(0) ? x[i] : T(0);
}

// d *= (activation > 0)
template <typename T>
void relu_mask(T* d, const T* activation, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        if (!(activation[i] > T(0))) d[i] = T(0);
    }
}

template <typename T>
void check_batch(const BasicParameters<T>& params, const InputBatch& inputs) {
    if (inputs.batch <= 0) fail(ErrorCode::InvalidArgument, "forward: empty batch");
    if (inputs.board_size != params.config.board_size) {
        fail(ErrorCode::InvalidArgument, "forward: input board size " + std::to_string(inputs.board_size) +
                                             " does not match network board size " + std::to_string(params.config.board_size));
    }
    const size_t expected = static_cast<size_t>(inputs.batch) * 2 * params.config.points();
    if (inputs.data.size() != expected) fail(ErrorCode::InvalidArgument, "forward: input tensor has the wrong shape");
    if (params.values.size() != parameter_count(params.config)) {
        fail(ErrorCode::InvalidArgument, "forward: parameter array does not match its config");
    }
}

}  // namespace

void NetConfig::validate() const {
    if (board_size < go::kMinSize || board_size > go::kMaxSize) fail(ErrorCode::Config, "net board_size out of range");
    if (blocks < 1) fail(ErrorCode::Config, "net blocks must be >= 1");
    if (filters < 1) fail(ErrorCode::Config, "net filters must be >= 1");
}

std::vector<TensorSpec> layer_specs(const NetConfig& config) {
    config.validate();
    const int f = config.filters;
    const int p = config.points();
    std::vector<TensorSpec> specs;
    size_t offset = 0;
    auto add = [&](std::string name, std::vector<int> shape, bool weight) {
        size_t count = 1;
        for (int d : shape) count *= static_cast<size_t>(d);
        specs.push_back({std::move(name), std::move(shape), offset, count, weight});
        offset += count;
    };
    add("input.conv.weight", {f, 3, 3, 2}, true);
    add("input.conv.bias", {f}, false);
    for (int b = 0; b < config.blocks; ++b) {
        for (int c = 1; c <= 2; ++c) {
            add(conv_name(b, c) + ".weight", {f, 3, 3, f}, true);
            add(conv_name(b, c) + ".bias", {f}, false);
        }
    }
    add("head.conv.weight", {2, 1, 1, f}, true);
    add("head.conv.bias", {2}, false);
    add("head.fc.weight", {p + 1, 2 * p}, true);
    add("head.fc.bias", {p + 1}, false);
    return specs;
}

size_t parameter_count(const NetConfig& config) {
    const auto specs = layer_specs(config);
    return specs.back().offset + specs.back().count;
}

template <typename T>
const TensorSpec& BasicParameters<T>::spec(std::string_view name) const {
    for (const auto& s : specs) {
        if (s.name == name) return s;
    }
    fail(ErrorCode::NotFound, "no tensor named '" + std::string(name) + "'");
}

template <typename T>
std::span<T> BasicParameters<T>::tensor(std::string_view name) {
    const TensorSpec& s = spec(name);
    return {values.data() + s.offset, s.count};
}

template <typename T>
std::span<const T> BasicParameters<T>::tensor(std::string_view name) const {
    const TensorSpec& s = spec(name);
    return {values.data() + s.offset, s.count};
}

template <typename T>
BasicParameters<T> zeros(const NetConfig& config) {
    BasicParameters<T> p;
    p.config = config;
    p.specs = layer_specs(config);
    p.values.assign(parameter_count(config), T(0));
    return p;
}

template <typename T>
BasicParameters<T> init(const NetConfig& config, uint64_t seed) {
    BasicParameters<T> p = zeros<T>(config);
    Rng rng(derive_seed(seed, 0x1417));
    const double residual_scale = 1.0 / std::sqrt(static_cast<double>(config.blocks));
    for (const auto& s : p.specs) {
        if (!s.is_weight) continue;
        double fan_in = 1;
        for (size_t d = 1; d < s.shape.size(); ++d) fan_in *= s.shape[d];
        double stddev = std::sqrt(2.0 / fan_in);
        if (s.name == "head.fc.weight") stddev = std::sqrt(1.0 / fan_in);
        // Second conv of each residual branch starts small so the tower's
        // activation scale stays bounded without normalization.
        if (s.name.ends_with(".conv2.weight")) stddev *= residual_scale;
        for (size_t i = 0; i < s.count; ++i) p.values[s.offset + i] = static_cast<T>(stddev * rng.normal());
    }
    return p;
}

template <typename To, typename From>
BasicParameters<To> convert(const BasicParameters<From>& params) {
    BasicParameters<To> out;
    out.config = params.config;
    out.config.precision = std::is_same_v<To, double> ? Precision::Double : Precision::Single;
    out.specs = params.specs;
    out.values.assign(params.values.begin(), params.values.end());
    out.version = params.version;
    return out;
}

void InputBatch::push(const go::FeaturePlanes& planes) {
    if (batch == 0) board_size = planes.size;
    if (planes.size != board_size) fail(ErrorCode::InvalidArgument, "InputBatch: mixed board sizes");
    data.insert(data.end(), planes.data.begin(), planes.data.end());
    ++batch;
}

InputBatch InputBatch::from(const std::vector<go::FeaturePlanes>& planes) {
    InputBatch b;
    for (const auto& p : planes) b.push(p);
    return b;
}

template <typename T>
void Workspace<T>::run_forward(const BasicParameters<T>& params, const InputBatch& inputs) {
    check_batch(params, inputs);
    const NetConfig& cfg = params.config;
    if (n_ != cfg.board_size) {
        n_ = cfg.board_size;
        neighbours_ = build_neighbours(n_);
    }
    batch_ = inputs.batch;
    const int points = cfg.points();
    const int f = cfg.filters;
    const size_t bp = static_cast<size_t>(batch_) * points;

    // (B, 2, P) -> (BP, 2)
    input_.resize(bp * 2);
    for (int b = 0; b < batch_; ++b) {
        for (int c = 0; c < 2; ++c) {
            for (int p = 0; p < points; ++p) {
                input_[(static_cast<size_t>(b) * points + p) * 2 + c] =
                    static_cast<T>(inputs.data[(static_cast<size_t>(b) * 2 + c) * points + p]);
            }
        }
    }

    acts_.resize(1 + 2 * cfg.blocks);
    for (auto& a : acts_) a.resize(bp * f);

    conv3x3_forward(conv_ref(params, "input.conv"), neighbours_, input_.data(), batch_, points, col_, acts_[0].data());
    relu_inplace(acts_[0].data(), bp * f);

    for (int blk = 0; blk < cfg.blocks; ++blk) {
        const T* x = acts_[2 * blk].data();
        T* h = acts_[2 * blk + 1].data();
        T* y = acts_[2 * blk + 2].data();
        conv3x3_forward(conv_ref(params, conv_name(blk, 1)), neighbours_, x, batch_, points, col_, h);
        relu_inplace(h, bp * f);
        conv3x3_forward(conv_ref(params, conv_name(blk, 2)), neighbours_, h, batch_, points, col_, y);
        for (size_t i = 0; i < bp * f; ++i) y[i] += x[i];
        relu_inplace(y, bp * f);
    }

    const auto head = conv_ref(params, "head.conv");
    const T* tower = acts_.back().data();
    head_.resize(bp * 2);
    {
        Eigen::Map<const MatR<T>> w(head.weight, 2, f);
        for (int b = 0; b < batch_; ++b) {
            Eigen::Map<const MatC<T>> x(tower + static_cast<size_t>(b) * points * f, f, points);
            Eigen::Map<MatC<T>> y(head_.data() + static_cast<size_t>(b) * points * 2, 2, points);
            y.noalias() = w * x;
            y.colwise() += Eigen::Map<const Vec<T>>(head.bias, 2);
        }
    }
    relu_inplace(head_.data(), bp * 2);

    flat_.resize(bp * 2);
    for (int b = 0; b < batch_; ++b) {
        for (int c = 0; c < 2; ++c) {
            for (int p = 0; p < points; ++p) {
                flat_[static_cast<size_t>(b) * 2 * points + c * points + p] = head_[(static_cast<size_t>(b) * points + p) * 2 + c];
            }
        }
    }

    const int actions = cfg.actions();
    const TensorSpec& fw = params.spec("head.fc.weight");
    const TensorSpec& fb = params.spec("head.fc.bias");
    q_.resize(static_cast<size_t>(batch_) * actions);
    Eigen::Map<const MatR<T>> w(params.values.data() + fw.offset, actions, 2 * points);
    Eigen::Map<const Vec<T>> fc_bias(params.values.data() + fb.offset, actions);
    for (int b = 0; b < batch_; ++b) {
        Eigen::Map<const Vec<T>> z(flat_.data() + static_cast<size_t>(b) * 2 * points, 2 * points);
        Eigen::Map<Vec<T>> q(q_.data() + static_cast<size_t>(b) * actions, actions);
        q.noalias() = w * z;
        q += fc_bias;
    }
}

template <typename T>
void Workspace<T>::forward(const BasicParameters<T>& params, const InputBatch& inputs, std::vector<T>& q_out) {
    run_forward(params, inputs);
    q_out.assign(q_.begin(), q_.end());
}

template <typename T>
LossResult<T> Workspace<T>::loss_and_grad(const BasicParameters<T>& params, const InputBatch& inputs, std::span<const int> actions,
                                          std::span<const T> targets, double l2, BasicGradients<T>& grads) {
    const size_t batch = static_cast<size_t>(inputs.batch);
    if (actions.size() != batch || targets.size() != batch) {
        fail(ErrorCode::InvalidArgument, "loss_and_grad: batch, actions and targets must have equal length");
    }
    for (T y : targets) {
        if (!std::isfinite(static_cast<double>(y))) fail(ErrorCode::NonFinite, "loss_and_grad: non-finite target");
    }
    const NetConfig& cfg = params.config;
    const int n_actions = cfg.actions();
    for (int a : actions) {
        if (a < 0 || a >= n_actions) fail(ErrorCode::InvalidArgument, "loss_and_grad: action index out of range");
    }
    run_forward(params, inputs);

    grads.config = params.config;
    grads.specs = params.specs;
    grads.version = params.version;
    grads.values.assign(params.values.size(), T(0));

    const int points = cfg.points();
    const int f = cfg.filters;
    const size_t bp = batch * points;

    LossResult<T> result;
    result.q_taken.resize(batch);
    AlignedVector<T> dq(batch * n_actions, T(0));
    double data_loss = 0;
    for (size_t b = 0; b < batch; ++b) {
        const T q = q_[b * n_actions + actions[b]];
        result.q_taken[b] = q;
        const double diff = static_cast<double>(q) - static_cast<double>(targets[b]);
        data_loss += diff * diff;
        dq[b * n_actions + actions[b]] = static_cast<T>(2.0 * diff / static_cast<double>(batch));
    }
    data_loss /= static_cast<double>(batch);

    double reg = 0;
    if (l2 != 0.0) {
        for (const auto& s : params.specs) {
            if (!s.is_weight) continue;
            for (size_t i = 0; i < s.count; ++i) {
                const double w = params.values[s.offset + i];
                reg += w * w;
                grads.values[s.offset + i] += static_cast<T>(2.0 * l2 * w);
            }
        }
    }
    result.data_loss = static_cast<T>(data_loss);
    result.loss = static_cast<T>(data_loss + l2 * reg);

    // Fully connected layer.
    const TensorSpec& fw = params.spec("head.fc.weight");
    const TensorSpec& fb = params.spec("head.fc.bias");
    Eigen::Map<const MatC<T>> dQ(dq.data(), n_actions, static_cast<Eigen::Index>(batch));
    Eigen::Map<const MatC<T>> z(flat_.data(), 2 * points, static_cast<Eigen::Index>(batch));
    Eigen::Map<MatR<T>>(grads.values.data() + fw.offset, n_actions, 2 * points).noalias() += dQ * z.transpose();
    Eigen::Map<Vec<T>>(grads.values.data() + fb.offset, n_actions) += dQ.rowwise().sum();
    AlignedVector<T> dz(batch * 2 * points);
    Eigen::Map<MatC<T>>(dz.data(), 2 * points, static_cast<Eigen::Index>(batch)).noalias() =
        Eigen::Map<const MatR<T>>(params.values.data() + fw.offset, n_actions, 2 * points).transpose() * dQ;

    // Head 1x1 conv: un-flatten to (BP, 2) and apply the relu mask.
    AlignedVector<T> dhead(bp * 2);
    for (size_t b = 0; b < batch; ++b) {
        for (int c = 0; c < 2; ++c) {
            for (int p = 0; p < points; ++p) dhead[(b * points + p) * 2 + c] = dz[b * 2 * points + c * points + p];
        }
    }
    relu_mask(dhead.data(), head_.data(), bp * 2);
    const auto head = conv_ref(params, "head.conv");
    const auto head_grad = conv_grad(grads, "head.conv");
    const T* tower = acts_.back().data();
    Eigen::Map<const MatC<T>> dH(dhead.data(), 2, static_cast<Eigen::Index>(bp));
    Eigen::Map<const MatC<T>> xt(tower, f, static_cast<Eigen::Index>(bp));
    Eigen::Map<MatR<T>>(head_grad.weight, 2, f).noalias() += dH * xt.transpose();
    Eigen::Map<Vec<T>>(head_grad.bias, 2) += dH.rowwise().sum();

    AlignedVector<T>& d_act = scratch_a_;
    d_act.assign(bp * f, T(0));
    Eigen::Map<MatC<T>>(d_act.data(), f, static_cast<Eigen::Index>(bp)).noalias() =
        Eigen::Map<const MatR<T>>(head.weight, 2, f).transpose() * dH;

    // Residual tower, last block first. d_act holds dL/d(block output).
    AlignedVector<T>& d_hidden = scratch_b_;
    AlignedVector<T> dcol;
    for (int blk = cfg.blocks - 1; blk >= 0; --blk) {
        const T* x = acts_[2 * blk].data();
        const T* h = acts_[2 * blk + 1].data();
        const T* y = acts_[2 * blk + 2].data();
        relu_mask(d_act.data(), y, bp * f);  // d(pre-activation sum); also flows through the skip
        d_hidden.assign(bp * f, T(0));
        conv3x3_backward(conv_ref(params, conv_name(blk, 2)), conv_grad(grads, conv_name(blk, 2)), neighbours_, h,
                         d_act.data(), static_cast<int>(batch), points, col_, dcol, d_hidden.data());
        relu_mask(d_hidden.data(), h, bp * f);
        conv3x3_backward(conv_ref(params, conv_name(blk, 1)), conv_grad(grads, conv_name(blk, 1)), neighbours_, x,
                         d_hidden.data(), static_cast<int>(batch), points, col_, dcol, d_act.data());
    }

    relu_mask(d_act.data(), acts_[0].data(), bp * f);
    conv3x3_backward(conv_ref(params, "input.conv"), conv_grad(grads, "input.conv"), neighbours_, input_.data(), d_act.data(),
                     static_cast<int>(batch), points, col_, dcol, static_cast<T*>(nullptr));
    return result;
}

std::vector<std::vector<float>> forward(const Parameters& params, const std::vector<go::FeaturePlanes>& batch) {
    Workspace<float> ws;
    std::vector<float> q;
    ws.forward(params, InputBatch::from(batch), q);
    const size_t actions = params.config.actions();
    std::vector<std::vector<float>> out(batch.size());
    for (size_t b = 0; b < batch.size(); ++b) out[b].assign(q.begin() + b * actions, q.begin() + (b + 1) * actions);
    return out;
}

template <typename T>
LossResult<T> loss_and_grad(const BasicParameters<T>& params, const InputBatch& inputs, std::span<const int> actions,
                            std::span<const T> targets, double l2, BasicGradients<T>& grads) {
    Workspace<T> ws;
    return ws.loss_and_grad(params, inputs, actions, targets, l2, grads);
}

template <typename T>
void SgdOptimizer<T>::step(BasicParameters<T>& params, const BasicGradients<T>& grads, double lr, double momentum) {
    if (grads.values.size() != params.values.size()) fail(ErrorCode::InvalidArgument, "sgd_step: gradient shape mismatch");
    const size_t n = params.values.size();
    if (momentum != 0.0) {
        if (velocity_.size() != n) velocity_.assign(n, T(0));
        const T m = static_cast<T>(momentum);
        const T rate = static_cast<T>(lr);
        for (size_t i = 0; i < n; ++i) {
            velocity_[i] = m * velocity_[i] + grads.values[i];
            params.values[i] -= rate * velocity_[i];
        }
    } else {
        const T rate = static_cast<T>(lr);
        for (size_t i = 0; i < n; ++i) params.values[i] -= rate * grads.values[i];
    }
    ++params.version;
}

template <typename T>
void polyak(BasicParameters<T>& target, const BasicParameters<T>& online, double rho) {
    if (target.values.size() != online.values.size() || target.specs != online.specs) {
        fail(ErrorCode::InvalidArgument, "polyak: parameter shapes differ");
    }
    if (!(rho >= 0.0 && rho <= 1.0)) fail(ErrorCode::InvalidArgument, "polyak: rho must lie in [0, 1]");
    if (rho == 1.0) return;
    if (rho == 0.0) {
        target.values = online.values;
        return;
    }
    const T keep = static_cast<T>(rho);
    const T take = static_cast<T>(1.0 - rho);
    for (size_t i = 0; i < target.values.size(); ++i) target.values[i] = keep * target.values[i] + take * online.values[i];
}

template <typename T>
std::string serialize(const BasicParameters<T>& params) {
    BinaryWriter w;
    w.put_raw(std::string_view(kMagic, sizeof(kMagic)));
    w.put<uint32_t>(kFormatVersion);
    w.put<uint32_t>(params.config.board_size);
    w.put<uint32_t>(params.config.blocks);
    w.put<uint32_t>(params.config.filters);
    w.put<uint32_t>(static_cast<uint32_t>(std::is_same_v<T, double> ? Precision::Double : Precision::Single));
    w.put<uint64_t>(params.version);
    w.put<uint32_t>(static_cast<uint32_t>(params.specs.size()));
    for (const auto& s : params.specs) {
        w.put_string(s.name);
        w.put<uint32_t>(static_cast<uint32_t>(s.shape.size()));
        for (int d : s.shape) w.put<uint32_t>(static_cast<uint32_t>(d));
        w.put<uint8_t>(std::is_same_v<T, double> ? 1 : 0);
        w.put_array(std::span<const T>(params.values.data() + s.offset, s.count));
    }
    const uint64_t checksum = fnv1a(w.bytes());
    w.put<uint64_t>(checksum);
    return w.take();
}

template <typename T>
BasicParameters<T> deserialize(std::string_view bytes) {
    if (bytes.size() < sizeof(kMagic) + 8) fail(ErrorCode::Corrupt, "parameter stream truncated");
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) fail(ErrorCode::Corrupt, "parameter stream: bad magic header");
    const uint64_t stored = [&] {
        uint64_t v;
        std::memcpy(&v, bytes.data() + bytes.size() - 8, 8);
        return v;
    }();
    BinaryReader r(bytes.substr(0, bytes.size() - 8));
    r.get_raw(sizeof(kMagic));
    const auto format = r.get<uint32_t>();
    if (format != kFormatVersion) fail(ErrorCode::Corrupt, "parameter stream: unsupported format version " + std::to_string(format));
    NetConfig cfg;
    cfg.board_size = static_cast<int>(r.get<uint32_t>());
    cfg.blocks = static_cast<int>(r.get<uint32_t>());
    cfg.filters = static_cast<int>(r.get<uint32_t>());
    const auto precision = r.get<uint32_t>();
    if (precision > 1) fail(ErrorCode::Corrupt, "parameter stream: bad precision tag");
    const uint64_t version = r.get<uint64_t>();
    try {
        cfg.validate();
    } catch (const Error& e) {
        fail(ErrorCode::Config, std::string("parameter stream header: ") + e.what());
    }
    cfg.precision = std::is_same_v<T, double> ? Precision::Double : Precision::Single;

    BasicParameters<T> p = zeros<T>(cfg);
    p.version = version;
    const auto count = r.get<uint32_t>();
    if (count != p.specs.size()) {
        fail(ErrorCode::Config, "parameter stream: " + std::to_string(count) + " arrays, config declares " + std::to_string(p.specs.size()));
    }
    for (const auto& s : p.specs) {
        const std::string name = r.get_string();
        const auto ndim = r.get<uint32_t>();
        if (ndim > 8) fail(ErrorCode::Corrupt, "parameter stream: implausible rank");
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = static_cast<int>(r.get<uint32_t>());
        if (name != s.name || shape != s.shape) {
            fail(ErrorCode::Config, "parameter stream: array '" + name + "' does not match declared config (expected '" + s.name + "')");
        }
        const auto dtype = r.get<uint8_t>();
        if (dtype == 0) {
            const auto data = r.get_array<float>();
            if (data.size() != s.count) fail(ErrorCode::Corrupt, "parameter stream: element count mismatch in '" + name + "'");
            std::copy(data.begin(), data.end(), p.values.begin() + static_cast<std::ptrdiff_t>(s.offset));
        } else if (dtype == 1) {
            const auto data = r.get_array<double>();
            if (data.size() != s.count) fail(ErrorCode::Corrupt, "parameter stream: element count mismatch in '" + name + "'");
            std::transform(data.begin(), data.end(), p.values.begin() + static_cast<std::ptrdiff_t>(s.offset),
                           [](double v) { return static_cast<T>(v); });
        } else {
            fail(ErrorCode::Corrupt, "parameter stream: unknown dtype");
        }
    }
    if (!r.at_end()) fail(ErrorCode::Corrupt, "parameter stream: trailing bytes");
    if (fnv1a(bytes.substr(0, bytes.size() - 8)) != stored) fail(ErrorCode::Corrupt, "parameter stream: checksum mismatch");
    return p;
}

void save(const Parameters& params, const std::string& path) { write_file(path, serialize(params)); }

Parameters load(const std::string& path) { return deserialize<float>(read_file(path)); }

template struct BasicParameters<float>;
template struct BasicParameters<double>;
template class Workspace<float>;
template class Workspace<double>;
template class SgdOptimizer<float>;
template class SgdOptimizer<double>;
template BasicParameters<float> zeros<float>(const NetConfig&);
template BasicParameters<double> zeros<double>(const NetConfig&);
template BasicParameters<float> init<float>(const NetConfig&, uint64_t);
template BasicParameters<double> init<double>(const NetConfig&, uint64_t);
template BasicParameters<double> convert<double, float>(const BasicParameters<float>&);
template BasicParameters<float> convert<float, double>(const BasicParameters<double>&);
template LossResult<float> loss_and_grad<float>(const BasicParameters<float>&, const InputBatch&, std::span<const int>,
                                                std::span<const float>, double, BasicGradients<float>&);
template LossResult<double> loss_and_grad<double>(const BasicParameters<double>&, const InputBatch&, std::span<const int>,
                                                  std::span<const double>, double, BasicGradients<double>&);
template void polyak<float>(BasicParameters<float>&, const BasicParameters<float>&, double);
template void polyak<double>(BasicParameters<double>&, const BasicParameters<double>&, double);
template std::string serialize<float>(const BasicParameters<float>&);
template std::string serialize<double>(const BasicParameters<double>&);
template BasicParameters<float> deserialize<float>(std::string_view);
template BasicParameters<double> deserialize<double>(std::string_view);

}  // namespace qzero::nn
