// SPDX-License-Identifier: Apache-2.0

#include "csiloc/nn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "csiloc/binary_io.hpp"
#include "csiloc/errors.hpp"

namespace csiloc::nn {

template <class T>
BatchNormLayer<T>::BatchNormLayer(std::size_t dim)
    : gamma(RowVector<T>::Ones(static_cast<Eigen::Index>(dim))),
      beta(RowVector<T>::Zero(static_cast<Eigen::Index>(dim))),
      running_mean(RowVector<T>::Zero(static_cast<Eigen::Index>(dim))),
      running_var(RowVector<T>::Ones(static_cast<Eigen::Index>(dim))) {}

template <class T>
std::vector<std::size_t> MlpModel<T>::hidden_widths() const {
    std::vector<std::size_t> w;
    for (std::size_t i = 0; i + 1 < blocks.size(); ++i) w.push_back(blocks[i].fc.out_dim());
    return w;
}

template <class T>
void MlpModel<T>::validate() const {
    if (blocks.empty()) throw std::invalid_argument("model has no blocks");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& b = blocks[i];
        if (b.bn.dim() != b.fc.in_dim() || static_cast<std::size_t>(b.fc.bias.size()) != b.fc.out_dim())
            throw std::invalid_argument("block " + std::to_string(i) + " has inconsistent dimensions");
        if (i > 0 && blocks[i - 1].fc.out_dim() != b.bn.dim())
            throw std::invalid_argument("block " + std::to_string(i) + " input does not match previous output");
        const bool last = i + 1 == blocks.size();
        if ((b.activation == Activation::none) != last)
            throw std::invalid_argument("only the last block may (and must) omit the ReLU");
    }
    if (static_cast<std::size_t>(output_offset.size()) != output_dim() ||
        static_cast<std::size_t>(output_scale.size()) != output_dim())
        throw std::invalid_argument("output affine has the wrong size");
}

template <class T>
MlpModel<T> build_mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t output_dim,
                      HeadKind head, std::uint64_t seed) {
    if (input_dim < 1 || output_dim < 1) throw std::invalid_argument("model dimensions must be >= 1");
    MlpModel<T> model;
    model.head = head;
    std::mt19937_64 rng(seed);
    std::size_t in = input_dim;
    std::vector<std::size_t> widths(hidden.begin(), hidden.end());
    widths.push_back(output_dim);
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const std::size_t out = widths[i];
        Block<T> b;
        b.bn = BatchNormLayer<T>(in);
        // Glorot uniform.
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> u(-limit, limit);
        b.fc.weight.resize(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
        for (Eigen::Index r = 0; r < b.fc.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < b.fc.weight.cols(); ++c) b.fc.weight(r, c) = static_cast<T>(u(rng));
        b.fc.bias = RowVector<T>::Zero(static_cast<Eigen::Index>(out));
        b.activation = i + 1 == widths.size() ? Activation::none : Activation::relu;
        model.blocks.push_back(std::move(b));
        in = out;
    }
    model.output_offset = RowVector<T>::Zero(static_cast<Eigen::Index>(output_dim));
    model.output_scale = RowVector<T>::Ones(static_cast<Eigen::Index>(output_dim));
    return model;
}

template <class T>
MlpModel<T> build_regressor(std::size_t input_dim, std::uint64_t seed) {
    return build_mlp<T>(input_dim, kRegressorWidths, 2, HeadKind::regression, seed);
}

template <class T>
MlpModel<T> build_floor_classifier(std::size_t input_dim, std::size_t n_classes, std::uint64_t seed) {
    if (n_classes < 2) throw std::invalid_argument("classifier needs at least 2 classes");
    const std::span<const std::size_t> widths(kRegressorWidths);
    return build_mlp<T>(input_dim, widths.subspan(2), n_classes, HeadKind::classification, seed);
}

template <class T>
std::size_t param_count(const MlpModel<T>& model) {
    std::size_t n = 0;
    for (const auto& b : model.blocks)
        n += 2 * b.bn.dim() + static_cast<std::size_t>(b.fc.weight.size() + b.fc.bias.size());
    return n;
}

// ---------------------------------------------------------------------------

template <class T>
ForwardResult<T> forward(MlpModel<T>& model, const Matrix<T>& batch, Mode mode) {
    if (static_cast<std::size_t>(batch.cols()) != model.input_dim())
        throw std::invalid_argument("batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                                    std::to_string(model.input_dim()));
    const Eigen::Index rows = batch.rows();
    if (mode == Mode::train && rows < 2)
        throw std::invalid_argument("train-mode batch normalization needs at least 2 rows (variance is degenerate)");

    ForwardResult<T> res;
    res.cache.mode = mode;
    res.cache.model_version = model.version();
    res.cache.blocks.resize(model.blocks.size());
    const Matrix<T>* x = &batch;
    for (std::size_t k = 0; k < model.blocks.size(); ++k) {
        auto& blk = model.blocks[k];
        auto& c = res.cache.blocks[k];
        if (mode == Mode::train) {
            const RowVector<T> mean = x->colwise().mean();
            c.x_hat = x->rowwise() - mean;
            const RowVector<T> var = c.x_hat.array().square().colwise().mean();
            c.inv_std = (var.array() + blk.bn.eps).rsqrt();
            const T unbias = static_cast<T>(rows) / static_cast<T>(rows - 1);
            blk.bn.running_mean = blk.bn.momentum * blk.bn.running_mean + (T(1) - blk.bn.momentum) * mean;
            blk.bn.running_var = blk.bn.momentum * blk.bn.running_var + (T(1) - blk.bn.momentum) * unbias * var;
        } else {
            c.x_hat = x->rowwise() - blk.bn.running_mean;
            c.inv_std = (blk.bn.running_var.array() + blk.bn.eps).rsqrt();
        }
        c.x_hat.array().rowwise() *= c.inv_std.array();
        Matrix<T> y = (c.x_hat.array().rowwise() * blk.bn.gamma.array()).rowwise() + blk.bn.beta.array();
        c.out.noalias() = y * blk.fc.weight;
        if (blk.activation == Activation::relu)
            c.out = (c.out.rowwise() + blk.fc.bias).cwiseMax(T(0));
        else
            c.out.rowwise() += blk.fc.bias;
        x = &c.out;
    }
    res.output = (x->array().rowwise() * model.output_scale.array()).rowwise() + model.output_offset.array();
    return res;
}

template <class T>
Matrix<T> predict(const MlpModel<T>& model, const Matrix<T>& batch) {
    if (static_cast<std::size_t>(batch.cols()) != model.input_dim())
        throw std::invalid_argument("batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                                    std::to_string(model.input_dim()));
    Matrix<T> x = batch;
    for (const auto& blk : model.blocks) {
        const RowVector<T> inv_std = (blk.bn.running_var.array() + blk.bn.eps).rsqrt();
        // Same arithmetic order as forward(eval) so both agree bit for bit.
        Matrix<T> xh = x.rowwise() - blk.bn.running_mean;
        xh.array().rowwise() *= inv_std.array();
        Matrix<T> y = (xh.array().rowwise() * blk.bn.gamma.array()).rowwise() + blk.bn.beta.array();
        Matrix<T> out;
        out.noalias() = y * blk.fc.weight;
        if (blk.activation == Activation::relu)
            out = (out.rowwise() + blk.fc.bias).cwiseMax(T(0));
        else
            out.rowwise() += blk.fc.bias;
        x = std::move(out);
    }
    return (x.array().rowwise() * model.output_scale.array()).rowwise() + model.output_offset.array();
}

template <class T>
std::vector<int> argmax_rows(const Matrix<T>& logits) {
    std::vector<int> out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < logits.cols(); ++c)
            if (logits(r, c) > logits(r, best)) best = c;
        out[static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
    return out;
}

template <class T>
Gradients<T> backward(const MlpModel<T>& model, const ForwardCache<T>& cache, const Matrix<T>& loss_grad,
                      Matrix<T>* input_grad) {
    if (cache.mode != Mode::train)
        throw ContractViolation("backward needs a train-mode forward cache");
    if (cache.model_version != model.version() || cache.blocks.size() != model.blocks.size())
        throw ContractViolation("stale forward cache: the model changed since the forward pass");
    const auto& last = cache.blocks.back().out;
    if (loss_grad.rows() != last.rows() || loss_grad.cols() != last.cols())
        throw std::invalid_argument("loss gradient shape does not match the model output");

    Gradients<T> grads;
    grads.blocks.resize(model.blocks.size());
    Matrix<T> g = loss_grad.array().rowwise() * model.output_scale.array();
    const T rows = static_cast<T>(loss_grad.rows());
    for (std::size_t k = model.blocks.size(); k-- > 0;) {
        const auto& blk = model.blocks[k];
        const auto& c = cache.blocks[k];
        auto& gb = grads.blocks[k];
        if (blk.activation == Activation::relu) g = (c.out.array() > T(0)).select(g, T(0));

        gb.bias = g.colwise().sum();
        if (k == 0 && input_grad == nullptr) {
            // A = x_hat^T g gives dW = diag(gamma) A + beta^T db, dgamma = rowsum(W .* A)
            // and dbeta = W db without forming g W^T.
            Matrix<T> a;
            a.noalias() = c.x_hat.transpose() * g;
            gb.gamma = (blk.fc.weight.array() * a.array()).rowwise().sum().transpose();
            gb.beta = (blk.fc.weight * gb.bias.transpose()).transpose();
            a.array().colwise() *= blk.bn.gamma.transpose().array();
            a.noalias() += blk.bn.beta.transpose() * gb.bias;
            gb.weight = std::move(a);
            break;
        }
        const Matrix<T> y = (c.x_hat.array().rowwise() * blk.bn.gamma.array()).rowwise() + blk.bn.beta.array();
        gb.weight.noalias() = y.transpose() * g;
        Matrix<T> dy;
        dy.noalias() = g * blk.fc.weight.transpose();
        gb.gamma = (dy.array() * c.x_hat.array()).colwise().sum();
        gb.beta = dy.colwise().sum();

        // dx = inv_std * (dxh - mean(dxh) - x_hat * mean(dxh * x_hat)), dxh = dy * gamma
        // The two batch means are gamma * dbeta / B and gamma * dgamma / B.
        const RowVector<T> mean_dxh = (blk.bn.gamma.array() * gb.beta.array() / rows).matrix();
        const RowVector<T> mean_dxh_xh = (blk.bn.gamma.array() * gb.gamma.array() / rows).matrix();
        g.resize(dy.rows(), dy.cols());
        g.array() = (((dy.array().rowwise() * blk.bn.gamma.array()).rowwise() - mean_dxh.array()) -
                     c.x_hat.array().rowwise() * mean_dxh_xh.array())
                        .rowwise() *
                    c.inv_std.array();
    }
    if (input_grad) *input_grad = std::move(g);
    return grads;
}

template <class T>
LossResult<T> mse_loss(const Matrix<T>& out, const Matrix<T>& target) {
    if (out.rows() != target.rows() || out.cols() != target.cols())
        throw std::invalid_argument("mse: output and target shapes differ");
    LossResult<T> r;
    const Matrix<T> diff = out - target;
    const double n = static_cast<double>(diff.size());
    r.loss = diff.template cast<double>().squaredNorm() / n;
    r.grad = diff * static_cast<T>(2.0 / n);
    return r;
}

template <class T>
LossResult<T> cross_entropy_loss(const Matrix<T>& logits, std::span<const int> labels) {
    if (static_cast<std::size_t>(logits.rows()) != labels.size())
        throw std::invalid_argument("cross-entropy: label count does not match batch rows");
    LossResult<T> r;
    r.grad.resize(logits.rows(), logits.cols());
    const double n = static_cast<double>(logits.rows());
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const int label = labels[static_cast<std::size_t>(i)];
        if (label < 0 || label >= logits.cols())
            throw std::out_of_range("class label " + std::to_string(label) + " out of range");
        const double mx = static_cast<double>(logits.row(i).maxCoeff());
        double sum = 0.0;
        for (Eigen::Index c = 0; c < logits.cols(); ++c) sum += std::exp(static_cast<double>(logits(i, c)) - mx);
        const double log_sum = std::log(sum);
        total += -(static_cast<double>(logits(i, label)) - mx - log_sum);
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            const double p = std::exp(static_cast<double>(logits(i, c)) - mx - log_sum);
            r.grad(i, c) = static_cast<T>((p - (c == label ? 1.0 : 0.0)) / n);
        }
    }
    r.loss = total / n;
    return r;
}

template <class T>
void adam_step(MlpModel<T>& model, const Gradients<T>& grads, AdamState<T>& state) {
    std::vector<std::span<const T>> g;
    grads.for_each([&](std::span<const T> s) { g.push_back(s); });
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> gi(g[i].data(), static_cast<Eigen::Index>(g[i].size()));
        if (!gi.allFinite()) {
            std::size_t j = 0;
            while (std::isfinite(g[i][j])) ++j;
            throw NumericalError("non-finite gradient in parameter tensor " + std::to_string(i) + " entry " +
                                 std::to_string(j) + " at Adam step " + std::to_string(state.step + 1));
        }
    }

    std::size_t idx = 0;
    if (state.m.empty()) {
        model.for_each_param([&](std::span<T> p) {
            state.m.emplace_back(p.size(), T(0));
            state.v.emplace_back(p.size(), T(0));
        });
    }
    if (state.m.size() != g.size()) throw std::invalid_argument("Adam state does not match the model");

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
    const T corr1 = static_cast<T>(1.0 - std::pow(state.beta1, t));
    const T corr2 = static_cast<T>(1.0 - std::pow(state.beta2, t));
    const T lr = static_cast<T>(state.lr), eps = static_cast<T>(state.eps);
    model.for_each_param([&](std::span<T> p) {
        auto& m = state.m[idx];
        auto& v = state.v[idx];
        const auto& gi = g[idx];
        if (m.size() != p.size() || gi.size() != p.size())
            throw std::invalid_argument("Adam state does not match the model");
        using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
        const auto n = static_cast<Eigen::Index>(p.size());
        Eigen::Map<Arr> pm(p.data(), n), mm(m.data(), n), vm(v.data(), n);
        const Eigen::Map<const Arr> gm(gi.data(), n);
        mm = b1 * mm + (T(1) - b1) * gm;
        vm = b2 * vm + (T(1) - b2) * gm.square();
        pm -= lr * (mm / corr1) / ((vm / corr2).sqrt() + eps);
        ++idx;
    });
    model.touch();
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2 (batch normalization needs statistics)");
    if (!(lr > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0))
        throw std::invalid_argument("invalid Adam hyperparameters");
}

template <class T>
TrainResult<T> train(MlpModel<T>& model, const Matrix<T>& features, const Targets& targets, const TrainConfig& cfg,
                     const AdamState<T>* resume, const std::function<void(const EpochStats&)>& on_epoch) {
    cfg.validate();
    model.validate();
    const auto n = static_cast<std::size_t>(features.rows());
    if (n < 2) throw std::invalid_argument("training needs at least 2 samples");

    Matrix<T> reg_targets;
    const std::vector<int>* class_targets = nullptr;
    if (cfg.loss == LossKind::mse) {
        const auto* m = std::get_if<Matrix<double>>(&targets);
        if (!m) throw std::invalid_argument("mse loss needs real-valued targets");
        if (static_cast<std::size_t>(m->rows()) != n || static_cast<std::size_t>(m->cols()) != model.output_dim())
            throw std::invalid_argument("target matrix shape does not match features/model");
        if (cfg.standardize_targets && model.head == HeadKind::regression && resume == nullptr) {
            const Eigen::RowVectorXd mean = m->colwise().mean();
            const Eigen::RowVectorXd sd =
                ((m->rowwise() - mean).array().square().colwise().mean()).sqrt().max(1e-12).matrix();
            model.output_offset = mean.cast<T>();
            model.output_scale = sd.cast<T>();
        }
        reg_targets = m->template cast<T>();
    } else {
        class_targets = std::get_if<std::vector<int>>(&targets);
        if (!class_targets) throw std::invalid_argument("cross-entropy loss needs integer class targets");
        if (class_targets->size() != n) throw std::invalid_argument("label count does not match features");
    }

    TrainResult<T> result;
    if (resume) {
        result.adam = *resume;
    }
    result.adam.lr = cfg.lr;
    result.adam.beta1 = cfg.beta1;
    result.adam.beta2 = cfg.beta2;
    result.adam.eps = cfg.eps;

    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(cfg.seed);
    Matrix<T> xb;
    std::vector<int> yb_class;
    Matrix<T> yb;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t used = 0;
        for (std::size_t first = 0, batch = 0; first < n; first += cfg.batch_size, ++batch) {
            const std::size_t rows = std::min(cfg.batch_size, n - first);
            if (rows < 2) break;
            const std::span<const Eigen::Index> idx(order.data() + first, rows);
            xb = features(idx, Eigen::all);
            auto fwd = forward(model, xb, Mode::train);
            LossResult<T> loss;
            if (class_targets) {
                yb_class.resize(rows);
                for (std::size_t i = 0; i < rows; ++i) yb_class[i] = (*class_targets)[static_cast<std::size_t>(idx[i])];
                loss = cross_entropy_loss(fwd.output, yb_class);
            } else {
                yb = reg_targets(idx, Eigen::all);
                loss = mse_loss(fwd.output, yb);
            }
            if (!std::isfinite(loss.loss))
                throw NumericalError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                                     std::to_string(batch + 1));
            const auto grads = backward(model, fwd.cache, loss.grad);
            adam_step(model, grads, result.adam);
            loss_sum += loss.loss * static_cast<double>(rows);
            used += rows;
        }
        const double mean = loss_sum / static_cast<double>(used);
        result.loss_history.push_back(mean);
        if (on_epoch)
            on_epoch({epoch + 1, mean,
                      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    }
    return result;
}

// ---------------------------------------------------------------------------

std::string Architecture::describe() const {
    std::ostringstream os;
    os << (head == HeadKind::regression ? "regression" : "classification") << " " << input_dim;
    for (auto h : hidden) os << "-" << h;
    os << "-" << output_dim;
    return os.str();
}

template <class T>
Architecture architecture_of(const MlpModel<T>& model) {
    return {model.head, model.input_dim(), model.hidden_widths(), model.output_dim()};
}

namespace {

constexpr char kCheckpointMagic[8] = {'C', 'S', 'I', 'L', 'O', 'C', 'N', 'N'};

class CrcWriter {
public:
    explicit CrcWriter(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
        if (!out_) throw FormatError(FormatError::Kind::io, "cannot open " + path.string() + " for writing");
    }
    template <class V>
    void put(V v) {
        raw(&v, sizeof(V));
    }
    template <class Vec>
    void put_doubles(const Vec& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) put(static_cast<double>(v.data()[i]));
    }
    void raw(const void* p, std::size_t n) {
        crc_ = io::crc32(crc_, p, n);
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    void finish() {
        const auto c = crc_;
        out_.write(reinterpret_cast<const char*>(&c), 4);
        out_.close();
        if (!out_) throw FormatError(FormatError::Kind::io, "failed writing " + path_.string());
    }

private:
    std::ofstream out_;
    std::filesystem::path path_;
    std::uint32_t crc_ = 0;
};

template <class T, class Vec>
void get_doubles(io::Reader& r, Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = static_cast<T>(r.get<double>());
}

}  // namespace

template <class T>
void save_checkpoint(const std::filesystem::path& path, const MlpModel<T>& model, const AdamState<T>* adam,
                     const std::string& manifest) {
    model.validate();
    CrcWriter w(path);
    w.raw(kCheckpointMagic, 8);
    w.put(kCheckpointVersion);
    w.put(static_cast<std::uint32_t>(model.head == HeadKind::regression ? 0 : 1));
    w.put(static_cast<std::uint32_t>(model.blocks.size()));
    for (const auto& b : model.blocks) {
        w.put(static_cast<std::uint32_t>(b.fc.in_dim()));
        w.put(static_cast<std::uint32_t>(b.fc.out_dim()));
        w.put(static_cast<std::uint32_t>(b.activation == Activation::relu ? 1 : 0));
        w.put(static_cast<double>(b.bn.momentum));
        w.put(static_cast<double>(b.bn.eps));
    }
    for (const auto& b : model.blocks) {
        w.put_doubles(b.bn.gamma);
        w.put_doubles(b.bn.beta);
        w.put_doubles(b.bn.running_mean);
        w.put_doubles(b.bn.running_var);
        // Weights row-major (in, out).
        for (Eigen::Index r = 0; r < b.fc.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < b.fc.weight.cols(); ++c) w.put(static_cast<double>(b.fc.weight(r, c)));
        w.put_doubles(b.fc.bias);
    }
    w.put_doubles(model.output_offset);
    w.put_doubles(model.output_scale);
    w.put(model.version());
    w.put(static_cast<std::uint8_t>(adam != nullptr && !adam->m.empty() ? 1 : 0));
    if (adam != nullptr && !adam->m.empty()) {
        w.put(adam->step);
        w.put(adam->lr);
        w.put(adam->beta1);
        w.put(adam->beta2);
        w.put(adam->eps);
        // Moments follow the parameter visiting order; weights are stored in
        // the in-memory (column-major) order.
        for (std::size_t i = 0; i < adam->m.size(); ++i) {
            w.put(static_cast<std::uint64_t>(adam->m[i].size()));
            for (T x : adam->m[i]) w.put(static_cast<double>(x));
            for (T x : adam->v[i]) w.put(static_cast<double>(x));
        }
    }
    w.put(static_cast<std::uint32_t>(manifest.size()));
    w.raw(manifest.data(), manifest.size());
    w.finish();
}

template <class T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path, const Architecture* expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatError::Kind::io, "cannot open " + path.string());
    io::Reader r(in, path.string());
    r.start_crc();
    if (r.get_bytes(8) != std::string_view(kCheckpointMagic, 8))
        throw FormatError(FormatError::Kind::bad_magic, path.string() + ": not a model checkpoint");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw FormatError(FormatError::Kind::version,
                          path.string() + ": unsupported checkpoint version " + std::to_string(version));
    Checkpoint<T> ck;
    auto& model = ck.model;
    const auto head = r.get<std::uint32_t>();
    if (head > 1) throw FormatError(FormatError::Kind::corrupt, path.string() + ": unknown head kind");
    model.head = head == 0 ? HeadKind::regression : HeadKind::classification;
    const auto n_blocks = r.get<std::uint32_t>();
    if (n_blocks == 0 || n_blocks > 1024)
        throw FormatError(FormatError::Kind::corrupt, path.string() + ": implausible block count");
    model.blocks.resize(n_blocks);
    for (auto& b : model.blocks) {
        const auto in_dim = r.get<std::uint32_t>();
        const auto out_dim = r.get<std::uint32_t>();
        const auto act = r.get<std::uint32_t>();
        if (in_dim == 0 || out_dim == 0 || in_dim > (1u << 20) || out_dim > (1u << 20) || act > 1)
            throw FormatError(FormatError::Kind::corrupt, path.string() + ": implausible layer description");
        b.bn = BatchNormLayer<T>(in_dim);
        b.bn.momentum = static_cast<T>(r.get<double>());
        b.bn.eps = static_cast<T>(r.get<double>());
        b.fc.weight.resize(in_dim, out_dim);
        b.fc.bias.resize(out_dim);
        b.activation = act == 1 ? Activation::relu : Activation::none;
    }
    model.output_offset.resize(static_cast<Eigen::Index>(model.output_dim()));
    model.output_scale.resize(static_cast<Eigen::Index>(model.output_dim()));
    try {
        model.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(FormatError::Kind::corrupt, path.string() + ": " + e.what());
    }
    if (expected && !(architecture_of(model) == *expected))
        throw FormatError(FormatError::Kind::architecture_mismatch,
                          path.string() + ": checkpoint architecture " + architecture_of(model).describe() +
                              " does not match expected " + expected->describe());

    for (auto& b : model.blocks) {
        get_doubles<T>(r, b.bn.gamma);
        get_doubles<T>(r, b.bn.beta);
        get_doubles<T>(r, b.bn.running_mean);
        get_doubles<T>(r, b.bn.running_var);
        for (Eigen::Index i = 0; i < b.fc.weight.rows(); ++i)
            for (Eigen::Index c = 0; c < b.fc.weight.cols(); ++c) b.fc.weight(i, c) = static_cast<T>(r.get<double>());
        get_doubles<T>(r, b.fc.bias);
    }
    get_doubles<T>(r, model.output_offset);
    get_doubles<T>(r, model.output_scale);
    (void)r.get<std::uint64_t>();  // saved model version, informational
    if (r.get<std::uint8_t>() == 1) {
        AdamState<T> a;
        a.step = r.get<std::uint64_t>();
        a.lr = r.get<double>();
        a.beta1 = r.get<double>();
        a.beta2 = r.get<double>();
        a.eps = r.get<double>();
        model.for_each_param([&](std::span<T> p) {
            const auto size = r.get<std::uint64_t>();
            if (size != p.size())
                throw FormatError(FormatError::Kind::corrupt, path.string() + ": Adam state does not match the model");
            a.m.emplace_back(size);
            a.v.emplace_back(size);
            for (auto& x : a.m.back()) x = static_cast<T>(r.get<double>());
            for (auto& x : a.v.back()) x = static_cast<T>(r.get<double>());
        });
        ck.adam = std::move(a);
    }
    ck.manifest = r.get_string();
    const auto crc = r.stop_crc();
    if (r.get<std::uint32_t>() != crc)
        throw FormatError(FormatError::Kind::corrupt, path.string() + ": checksum mismatch");
    if (in.peek() != std::char_traits<char>::eof())
        throw FormatError(FormatError::Kind::corrupt, path.string() + ": trailing bytes after checksum");
    for (auto& b : model.blocks)
        if (!b.fc.weight.allFinite() || !b.bn.gamma.allFinite() || !(b.bn.running_var.array() >= T(0)).all())
            throw FormatError(FormatError::Kind::corrupt, path.string() + ": non-finite or negative parameters");
    return ck;
}

#define CSILOC_NN_INSTANTIATE(T)                                                                                     \
    template struct BatchNormLayer<T>;                                                                               \
    template class MlpModel<T>;                                                                                      \
    template MlpModel<T> build_mlp<T>(std::size_t, std::span<const std::size_t>, std::size_t, HeadKind,             \
                                      std::uint64_t);                                                                \
    template MlpModel<T> build_regressor<T>(std::size_t, std::uint64_t);                                             \
    template MlpModel<T> build_floor_classifier<T>(std::size_t, std::size_t, std::uint64_t);                         \
    template std::size_t param_count<T>(const MlpModel<T>&);                                                         \
    template ForwardResult<T> forward<T>(MlpModel<T>&, const Matrix<T>&, Mode);                                      \
    template Matrix<T> predict<T>(const MlpModel<T>&, const Matrix<T>&);                                             \
    template std::vector<int> argmax_rows<T>(const Matrix<T>&);                                                      \
    template Gradients<T> backward<T>(const MlpModel<T>&, const ForwardCache<T>&, const Matrix<T>&, Matrix<T>*);     \
    template LossResult<T> mse_loss<T>(const Matrix<T>&, const Matrix<T>&);                                          \
    template LossResult<T> cross_entropy_loss<T>(const Matrix<T>&, std::span<const int>);                            \
    template void adam_step<T>(MlpModel<T>&, const Gradients<T>&, AdamState<T>&);                                    \
    template TrainResult<T> train<T>(MlpModel<T>&, const Matrix<T>&, const Targets&, const TrainConfig&,             \
                                     const AdamState<T>*, const std::function<void(const EpochStats&)>&);            \
    template Architecture architecture_of<T>(const MlpModel<T>&);                                                    \
    template void save_checkpoint<T>(const std::filesystem::path&, const MlpModel<T>&, const AdamState<T>*,          \
                                     const std::string&);                                                            \
    template Checkpoint<T> load_checkpoint<T>(const std::filesystem::path&, const Architecture*);

CSILOC_NN_INSTANTIATE(float)
CSILOC_NN_INSTANTIATE(double)

}  // namespace csiloc::nn
