#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "goldspot/random.hpp"

namespace goldspot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One autoencoder layer with tied weights. The decoder is W^T; there is no
/// separate decoder matrix.
struct LayerParams {
    Matrix W;  // hidden x inputs
    Vector b;  // hidden bias
    Vector c;  // reconstruction bias

    std::size_t inputs() const noexcept { return static_cast<std::size_t>(W.cols()); }
    std::size_t hidden() const noexcept { return static_cast<std::size_t>(W.rows()); }

    /// Uniform(+-sqrt(6 / (inputs + hidden))) weights, zero biases.
    static LayerParams glorot(std::size_t inputs, std::size_t hidden, Rng& rng);

    void validate() const;
    bool all_finite() const;
    bool operator==(const LayerParams& o) const;
};

/// Softmax classification layer on top of the stack.
struct LogisticLayer {
    Matrix V;  // classes x inputs
    Vector d;  // classes

    std::size_t inputs() const noexcept { return static_cast<std::size_t>(V.cols()); }
    std::size_t classes() const noexcept { return static_cast<std::size_t>(V.rows()); }

    static LogisticLayer glorot(std::size_t inputs, std::size_t classes, Rng& rng);
    static LogisticLayer zeros(std::size_t inputs, std::size_t classes);

    void validate() const;
    bool all_finite() const;
    bool operator==(const LogisticLayer& o) const;
};

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t epochs = 1;
    std::size_t batch_size = 100;
    std::uint64_t seed = 0;

    /// Zero epochs is allowed and means "no update".
    void validate() const;
};

double sigmoid(double z) noexcept;
Vector sigmoid(const Vector& z);
Matrix sigmoid(const Matrix& z);

Vector softmax(const Vector& logits);

/// h = s(b + W x)
Vector encode(const LayerParams& layer, const Vector& x);
/// x_hat = s(c + W^T h)
Vector decode(const LayerParams& layer, const Vector& h);

/// Column-wise versions; each column is one sample.
Matrix encode_batch(const LayerParams& layer, const Matrix& x);
Matrix decode_batch(const LayerParams& layer, const Matrix& h);

/// Clamp applied to reconstructions before taking logs.
inline constexpr double kProbClamp = 1e-12;

/// Mean binary cross-entropy per input dimension.
double cross_entropy(const Vector& x, const Vector& x_hat);

/// Mean per-dimension cross-entropy in excess of the entropy of x itself
/// (the Bernoulli KL divergence). Zero for a perfect reconstruction even when
/// x is not binary; same gradient as cross_entropy.
double reconstruction_loss(const Vector& x, const Vector& x_hat);

struct DaeGradients {
    Matrix W;
    Vector b;
    Vector c;
};

/// DAE training objective on a batch: the mean over samples of the summed
/// per-pixel cross-entropy between the clean columns and the reconstruction of
/// the corrupted columns. When grads is non-null it receives the gradient.
double dae_objective(const LayerParams& layer, const Matrix& clean, const Matrix& corrupted,
                     DaeGradients* grads = nullptr);

struct NetworkGradients {
    std::vector<Matrix> W;
    std::vector<Vector> b;
    Matrix V;
    Vector d;
};

/// Mean negative log-likelihood of a softmax layer over a stack of encoders.
/// labels[i] is the class index of column i of x.
double classification_objective(std::span<const LayerParams> layers, const LogisticLayer& output,
                                const Matrix& x, std::span<const int> labels,
                                NetworkGradients* grads = nullptr);

/// The two objectives above evaluated in extended precision (long double),
/// so central differences at small steps are not swamped by rounding.
long double dae_objective_extended(const LayerParams& layer, const Matrix& clean, const Matrix& corrupted);
long double classification_objective_extended(std::span<const LayerParams> layers, const LogisticLayer& output,
                                              const Matrix& x, std::span<const int> labels);

/// theta <- theta - learning_rate * grad
void sgd_step(Matrix& param, const Matrix& grad, double learning_rate);
void sgd_step(Vector& param, const Vector& grad, double learning_rate);

/// Flat views of parameters, used by the gradient checker.
std::vector<double> flatten(const LayerParams& layer);
void unflatten(std::span<const double> flat, LayerParams& layer);
std::vector<double> flatten(const DaeGradients& g);
std::vector<double> flatten(std::span<const LayerParams> layers, const LogisticLayer& output);
void unflatten(std::span<const double> flat, std::vector<LayerParams>& layers, LogisticLayer& output);
std::vector<double> flatten(const NetworkGradients& g);

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t coordinates = 0;

    bool passed(double tol) const noexcept { return max_rel_error < tol; }
};

/// Compare an analytic gradient against central differences.
///
/// Checks min(sample, theta.size()) coordinates chosen with the seed, using
/// relative error |ga - gn| / max(1e-8, |ga| + |gn|). Throws on a non-finite
/// loss. The loss may return long double; with a double-valued loss the
/// rounding of the loss itself limits how small a gradient can be checked.
GradCheckResult grad_check(const std::function<long double(std::span<const double>)>& loss,
                           std::span<const double> theta, std::span<const double> analytic,
                           std::size_t sample, std::uint64_t seed, double step = 1e-6);

}  // namespace goldspot
