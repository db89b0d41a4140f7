// SPDX-License-Identifier: Apache-2.0
//
// Minimal dense network engine: batch normalization, fully connected layers,
// ReLU, MSE / softmax cross-entropy, hand-written backpropagation and Adam.
// Templated on the scalar type; float and double are instantiated. Training
// runs in float, gradient checking in double.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace csiloc::nn {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;  // batch rows x features
template <class T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

enum class Activation { relu, none };
enum class HeadKind { regression, classification };
enum class Mode { train, eval };
enum class LossKind { mse, cross_entropy };

// Hidden widths of the localization regressor.
inline const std::vector<std::size_t> kRegressorWidths{4096, 1024, 512, 256, 128, 64};

template <class T>
struct BatchNormLayer {
    RowVector<T> gamma, beta;                // trainable
    RowVector<T> running_mean, running_var;  // not trainable
    T momentum = T(0.99);
    T eps = T(1e-5);

    BatchNormLayer() = default;
    explicit BatchNormLayer(std::size_t dim);
    std::size_t dim() const { return static_cast<std::size_t>(gamma.size()); }
};

template <class T>
struct DenseLayer {
    Matrix<T> weight;  // in x out
    RowVector<T> bias;
    std::size_t in_dim() const { return static_cast<std::size_t>(weight.rows()); }
    std::size_t out_dim() const { return static_cast<std::size_t>(weight.cols()); }
};

template <class T>
struct Block {
    BatchNormLayer<T> bn;
    DenseLayer<T> fc;
    Activation activation = Activation::relu;
};

// Chain of BN -> FC (-> ReLU) blocks. The last block has no activation.
// Regression outputs are mapped through a fixed affine output_scale * z +
// output_offset (not trainable; identity unless set by train()).
template <class T>
class MlpModel {
public:
    HeadKind head = HeadKind::regression;
    std::vector<Block<T>> blocks;
    RowVector<T> output_offset;
    RowVector<T> output_scale;

    std::size_t input_dim() const { return blocks.empty() ? 0 : blocks.front().bn.dim(); }
    std::size_t output_dim() const { return blocks.empty() ? 0 : blocks.back().fc.out_dim(); }
    std::vector<std::size_t> hidden_widths() const;

    // Incremented on every parameter update; caches remember the version they
    // were computed with.
    std::uint64_t version() const { return version_; }
    void touch() { ++version_; }

    // Visits trainable tensors in a fixed order: per block gamma, beta, W, b.
    template <class F>
    void for_each_param(F&& f) {
        for (auto& b : blocks) {
            f(std::span<T>(b.bn.gamma.data(), b.bn.gamma.size()));
            f(std::span<T>(b.bn.beta.data(), b.bn.beta.size()));
            f(std::span<T>(b.fc.weight.data(), b.fc.weight.size()));
            f(std::span<T>(b.fc.bias.data(), b.fc.bias.size()));
        }
    }

    void validate() const;

private:
    std::uint64_t version_ = 0;
};

// Generic chain: input BN, one block per hidden width, BN + linear head.
template <class T>
MlpModel<T> build_mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t output_dim,
                      HeadKind head, std::uint64_t seed);

// BN(in) FC(in,4096) ReLU ... BN(64) FC(64,2).
template <class T>
MlpModel<T> build_regressor(std::size_t input_dim, std::uint64_t seed = 0);

// Regressor chain without its first two blocks, ending in n_classes logits.
template <class T>
MlpModel<T> build_floor_classifier(std::size_t input_dim, std::size_t n_classes, std::uint64_t seed = 0);

template <class T>
std::size_t param_count(const MlpModel<T>& model);

template <class T>
struct ForwardCache {
    struct BlockCache {
        Matrix<T> x_hat;       // normalized BN input
        RowVector<T> inv_std;  // 1/sqrt(var + eps) used for x_hat
        Matrix<T> out;         // block output after activation
    };
    std::vector<BlockCache> blocks;
    Mode mode = Mode::eval;
    std::uint64_t model_version = 0;
};

template <class T>
struct ForwardResult {
    Matrix<T> output;
    ForwardCache<T> cache;
};

// Train mode normalizes with batch statistics and updates running statistics;
// eval mode uses running statistics and leaves the model untouched.
template <class T>
ForwardResult<T> forward(MlpModel<T>& model, const Matrix<T>& batch, Mode mode);

// Eval-mode forward. Thread-safe for concurrent readers.
template <class T>
Matrix<T> predict(const MlpModel<T>& model, const Matrix<T>& batch);

// Row-wise argmax, ties broken by the lowest class index.
template <class T>
std::vector<int> argmax_rows(const Matrix<T>& logits);

template <class T>
struct Gradients {
    struct BlockGrad {
        RowVector<T> gamma, beta;
        Matrix<T> weight;
        RowVector<T> bias;
    };
    std::vector<BlockGrad> blocks;

    template <class F>
    void for_each(F&& f) const {
        for (const auto& b : blocks) {
            f(std::span<const T>(b.gamma.data(), b.gamma.size()));
            f(std::span<const T>(b.beta.data(), b.beta.size()));
            f(std::span<const T>(b.weight.data(), b.weight.size()));
            f(std::span<const T>(b.bias.data(), b.bias.size()));
        }
    }
};

// Gradients of all trainable parameters given dLoss/dOutput. Requires a
// train-mode cache produced by the current model version. If `input_grad` is
// non-null it receives dLoss/dInput.
template <class T>
Gradients<T> backward(const MlpModel<T>& model, const ForwardCache<T>& cache, const Matrix<T>& loss_grad,
                      Matrix<T>* input_grad = nullptr);

template <class T>
struct LossResult {
    double loss = 0.0;
    Matrix<T> grad;  // dLoss/dOutput
};

// Mean over all output entries of (out - target)^2.
template <class T>
LossResult<T> mse_loss(const Matrix<T>& out, const Matrix<T>& target);

// Mean over rows of -log softmax(logits)[label].
template <class T>
LossResult<T> cross_entropy_loss(const Matrix<T>& logits, std::span<const int> labels);

template <class T>
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<std::vector<T>> m, v;  // one entry per parameter tensor
};

// t <- t+1; m, v moment updates; bias-corrected step. Throws NumericalError on
// non-finite gradients (parameters untouched in that case).
template <class T>
void adam_step(MlpModel<T>& model, const Gradients<T>& grads, AdamState<T>& state);

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 1000;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    LossKind loss = LossKind::mse;
    bool standardize_targets = true;  // regression only: set output_offset/scale from the labels

    void validate() const;
};

using Targets = std::variant<Matrix<double>, std::vector<int>>;

struct EpochStats {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double seconds = 0.0;
};

template <class T>
struct TrainResult {
    std::vector<double> loss_history;
    AdamState<T> adam;
};

// Seeded mini-batch training. The final partial batch is used if it has at
// least 2 rows and dropped otherwise. Pass `resume` to continue from a saved
// optimizer state (the step counter keeps increasing).
template <class T>
TrainResult<T> train(MlpModel<T>& model, const Matrix<T>& features, const Targets& targets, const TrainConfig& cfg,
                     const AdamState<T>* resume = nullptr,
                     const std::function<void(const EpochStats&)>& on_epoch = {});

// ---------------------------------------------------------------------------
// Checkpoints: architecture header + parameters and running statistics in
// float64, optional Adam state, CRC trailer.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Architecture {
    HeadKind head = HeadKind::regression;
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t output_dim = 0;
    bool operator==(const Architecture&) const = default;
    std::string describe() const;
};

template <class T>
Architecture architecture_of(const MlpModel<T>& model);

template <class T>
struct Checkpoint {
    MlpModel<T> model;
    std::optional<AdamState<T>> adam;
    std::string manifest = "{}";
};

template <class T>
void save_checkpoint(const std::filesystem::path& path, const MlpModel<T>& model, const AdamState<T>* adam = nullptr,
                     const std::string& manifest = "{}");

// Throws FormatError(architecture_mismatch) if `expected` is given and differs.
template <class T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path, const Architecture* expected = nullptr);

}  // namespace csiloc::nn
