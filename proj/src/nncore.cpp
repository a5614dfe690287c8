#include "goldspot/nncore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "goldspot/error.hpp"

namespace goldspot {

namespace {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double limit, Rng& rng) {
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    // Row-major fill so the draw order matches the serialized layout.
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-limit, limit);
    return m;
}

double softplus(double a) noexcept { return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a)); }

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

// Bitwise equality, so +0/-0 and NaN payloads are not conflated.
template <typename Dense>
bool same_bits(const Dense& a, const Dense& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    return std::equal(a.data(), a.data() + a.size(), b.data(), [](double x, double y) {
        return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
    });
}

template <typename Dense>
void append(std::vector<double>& out, const Dense& m) {
    out.insert(out.end(), m.data(), m.data() + m.size());
}

template <typename Dense>
std::size_t take(std::span<const double> flat, std::size_t offset, Dense& m) {
    const auto n = static_cast<std::size_t>(m.size());
    if (offset + n > flat.size()) throw DimensionError("flat parameter vector too short");
    std::copy_n(flat.begin() + static_cast<long>(offset), n, m.data());
    return offset + n;
}

}  // namespace

LayerParams LayerParams::glorot(std::size_t inputs, std::size_t hidden, Rng& rng) {
    if (inputs == 0 || hidden == 0) throw InvalidArgument("layer sizes must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(inputs + hidden));
    LayerParams p;
    p.W = uniform_matrix(hidden, inputs, limit, rng);
    p.b = Vector::Zero(static_cast<Eigen::Index>(hidden));
    p.c = Vector::Zero(static_cast<Eigen::Index>(inputs));
    return p;
}

void LayerParams::validate() const {
    if (W.rows() == 0 || W.cols() == 0) throw DimensionError("layer weight matrix is empty");
    if (b.size() != W.rows())
        throw DimensionError("hidden bias length " + std::to_string(b.size()) + " does not match W " + shape(W));
    if (c.size() != W.cols())
        throw DimensionError("reconstruction bias length " + std::to_string(c.size()) +
                             " does not match W " + shape(W));
    if (!all_finite()) throw InvalidArgument("layer parameters contain non-finite values");
}

bool LayerParams::all_finite() const { return W.allFinite() && b.allFinite() && c.allFinite(); }

bool LayerParams::operator==(const LayerParams& o) const {
    return same_bits(W, o.W) && same_bits(b, o.b) && same_bits(c, o.c);
}

LogisticLayer LogisticLayer::glorot(std::size_t inputs, std::size_t classes, Rng& rng) {
    if (inputs == 0 || classes == 0) throw InvalidArgument("layer sizes must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(inputs + classes));
    LogisticLayer l;
    l.V = uniform_matrix(classes, inputs, limit, rng);
    l.d = Vector::Zero(static_cast<Eigen::Index>(classes));
    return l;
}

LogisticLayer LogisticLayer::zeros(std::size_t inputs, std::size_t classes) {
    LogisticLayer l;
    l.V = Matrix::Zero(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(inputs));
    l.d = Vector::Zero(static_cast<Eigen::Index>(classes));
    return l;
}

void LogisticLayer::validate() const {
    if (V.rows() == 0 || V.cols() == 0) throw DimensionError("logistic weight matrix is empty");
    if (d.size() != V.rows()) throw DimensionError("logistic bias does not match V " + shape(V));
    if (!all_finite()) throw InvalidArgument("logistic parameters contain non-finite values");
}

bool LogisticLayer::all_finite() const { return V.allFinite() && d.allFinite(); }

bool LogisticLayer::operator==(const LogisticLayer& o) const { return same_bits(V, o.V) && same_bits(d, o.d); }

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw InvalidArgument("learning_rate must be positive");
    if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
}

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Vector sigmoid(const Vector& z) {
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

Matrix sigmoid(const Matrix& z) {
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

Vector softmax(const Vector& logits) {
    const double m = logits.maxCoeff();
    Vector e = (logits.array() - m).exp().matrix();
    return e / e.sum();
}

Vector encode(const LayerParams& layer, const Vector& x) {
    if (x.size() != layer.W.cols())
        throw DimensionError("encode: input length " + std::to_string(x.size()) + " does not match W " +
                             shape(layer.W));
    return sigmoid(Vector(layer.b + layer.W * x));
}

Vector decode(const LayerParams& layer, const Vector& h) {
    if (h.size() != layer.W.rows())
        throw DimensionError("decode: hidden length " + std::to_string(h.size()) + " does not match W " +
                             shape(layer.W));
    return sigmoid(Vector(layer.c + layer.W.transpose() * h));
}

Matrix encode_batch(const LayerParams& layer, const Matrix& x) {
    if (x.rows() != layer.W.cols()) throw DimensionError("encode: batch rows do not match W " + shape(layer.W));
    Matrix a = layer.W * x;
    a.colwise() += layer.b;
    return sigmoid(a);
}

Matrix decode_batch(const LayerParams& layer, const Matrix& h) {
    if (h.rows() != layer.W.rows()) throw DimensionError("decode: batch rows do not match W " + shape(layer.W));
    Matrix a = layer.W.transpose() * h;
    a.colwise() += layer.c;
    return sigmoid(a);
}

double cross_entropy(const Vector& x, const Vector& x_hat) {
    if (x.size() != x_hat.size() || x.size() == 0)
        throw DimensionError("cross_entropy: length mismatch (" + std::to_string(x.size()) + " vs " +
                             std::to_string(x_hat.size()) + ")");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double p = std::clamp(x_hat[i], kProbClamp, 1.0 - kProbClamp);
        sum -= x[i] * std::log(p) + (1.0 - x[i]) * std::log(1.0 - p);
    }
    return sum / static_cast<double>(x.size());
}

double reconstruction_loss(const Vector& x, const Vector& x_hat) {
    if (x.size() != x_hat.size() || x.size() == 0)
        throw DimensionError("reconstruction_loss: length mismatch (" + std::to_string(x.size()) + " vs " +
                             std::to_string(x_hat.size()) + ")");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double t = x[i];
        const double p = std::clamp(x_hat[i], kProbClamp, 1.0 - kProbClamp);
        // t ln(t/p) + (1-t) ln((1-t)/(1-p)), with 0 ln 0 = 0.
        if (t > 0.0) sum += t * std::log(t / p);
        if (t < 1.0) sum += (1.0 - t) * std::log((1.0 - t) / (1.0 - p));
    }
    return std::max(0.0, sum / static_cast<double>(x.size()));
}

double dae_objective(const LayerParams& layer, const Matrix& clean, const Matrix& corrupted, DaeGradients* grads) {
    if (clean.rows() != layer.W.cols() || corrupted.rows() != clean.rows() || corrupted.cols() != clean.cols())
        throw DimensionError("dae_objective: batch shape does not match layer " + shape(layer.W));
    const auto batch = static_cast<double>(clean.cols());
    if (clean.cols() == 0) throw DimensionError("dae_objective: empty batch");

    Matrix a1 = layer.W * corrupted;
    a1.colwise() += layer.b;
    const Matrix h = sigmoid(a1);
    Matrix a2 = layer.W.transpose() * h;
    a2.colwise() += layer.c;

    // Cross-entropy through the logits: x softplus(-a) + (1 - x) softplus(a).
    double total = 0.0;
    for (Eigen::Index j = 0; j < a2.cols(); ++j)
        for (Eigen::Index i = 0; i < a2.rows(); ++i) {
            const double a = a2(i, j);
            const double x = clean(i, j);
            total += x * softplus(-a) + (1.0 - x) * softplus(a);
        }

    if (grads) {
        const Matrix delta_out = (sigmoid(a2) - clean) / batch;
        const Matrix delta_hidden =
            ((layer.W * delta_out).array() * h.array() * (1.0 - h.array())).matrix();
        grads->W = h * delta_out.transpose() + delta_hidden * corrupted.transpose();
        grads->b = delta_hidden.rowwise().sum();
        grads->c = delta_out.rowwise().sum();
    }
    return total / batch;
}

double classification_objective(std::span<const LayerParams> layers, const LogisticLayer& output, const Matrix& x,
                                std::span<const int> labels, NetworkGradients* grads) {
    if (static_cast<std::size_t>(x.cols()) != labels.size())
        throw DimensionError("classification_objective: label count does not match batch");
    if (x.cols() == 0) throw DimensionError("classification_objective: empty batch");
    const auto batch = static_cast<double>(x.cols());

    std::vector<Matrix> acts;
    acts.reserve(layers.size() + 1);
    acts.push_back(x);
    for (const auto& layer : layers) acts.push_back(encode_batch(layer, acts.back()));
    if (acts.back().rows() != output.V.cols())
        throw DimensionError("classification_objective: output layer does not match last hidden layer");

    Matrix logits = output.V * acts.back();
    logits.colwise() += output.d;

    Matrix probs(logits.rows(), logits.cols());
    double nll = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        const int label = labels[static_cast<std::size_t>(j)];
        if (label < 0 || label >= logits.rows()) throw InvalidArgument("class label out of range");
        const double m = logits.col(j).maxCoeff();
        const double lse = m + std::log((logits.col(j).array() - m).exp().sum());
        nll -= logits(label, j) - lse;
        probs.col(j) = (logits.col(j).array() - lse).exp().matrix();
    }

    if (grads) {
        Matrix delta = probs;
        for (Eigen::Index j = 0; j < delta.cols(); ++j) delta(labels[static_cast<std::size_t>(j)], j) -= 1.0;
        delta /= batch;
        grads->V = delta * acts.back().transpose();
        grads->d = delta.rowwise().sum();
        grads->W.assign(layers.size(), Matrix());
        grads->b.assign(layers.size(), Vector());

        Matrix back = output.V.transpose() * delta;
        for (std::size_t l = layers.size(); l-- > 0;) {
            const Matrix& a = acts[l + 1];
            const Matrix dz = (back.array() * a.array() * (1.0 - a.array())).matrix();
            grads->W[l] = dz * acts[l].transpose();
            grads->b[l] = dz.rowwise().sum();
            if (l > 0) back = layers[l].W.transpose() * dz;
        }
    }
    return nll / batch;
}

namespace {

using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

long double softplus_l(long double a) noexcept {
    return a > 0.0L ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

MatrixL sigmoid_l(const MatrixL& z) {
    return z.unaryExpr([](long double v) {
        if (v >= 0.0L) return 1.0L / (1.0L + std::exp(-v));
        const long double e = std::exp(v);
        return e / (1.0L + e);
    });
}

MatrixL encode_l(const LayerParams& layer, const MatrixL& x) {
    MatrixL a = layer.W.cast<long double>() * x;
    a.colwise() += layer.b.cast<long double>();
    return sigmoid_l(a);
}

}  // namespace

long double dae_objective_extended(const LayerParams& layer, const Matrix& clean, const Matrix& corrupted) {
    if (clean.rows() != layer.W.cols() || corrupted.rows() != clean.rows() || corrupted.cols() != clean.cols())
        throw DimensionError("dae_objective: batch shape does not match layer " + shape(layer.W));
    if (clean.cols() == 0) throw DimensionError("dae_objective: empty batch");
    const MatrixL h = encode_l(layer, corrupted.cast<long double>());
    MatrixL a2 = layer.W.cast<long double>().transpose() * h;
    a2.colwise() += layer.c.cast<long double>();
    long double total = 0.0L;
    for (Eigen::Index j = 0; j < a2.cols(); ++j)
        for (Eigen::Index i = 0; i < a2.rows(); ++i) {
            const long double x = clean(i, j);
            total += x * softplus_l(-a2(i, j)) + (1.0L - x) * softplus_l(a2(i, j));
        }
    return total / static_cast<long double>(clean.cols());
}

long double classification_objective_extended(std::span<const LayerParams> layers, const LogisticLayer& output,
                                              const Matrix& x, std::span<const int> labels) {
    if (static_cast<std::size_t>(x.cols()) != labels.size())
        throw DimensionError("classification_objective: label count does not match batch");
    if (x.cols() == 0) throw DimensionError("classification_objective: empty batch");
    MatrixL a = x.cast<long double>();
    for (const auto& layer : layers) {
        if (layer.inputs() != static_cast<std::size_t>(a.rows()))
            throw DimensionError("classification_objective: layers do not chain");
        a = encode_l(layer, a);
    }
    if (output.inputs() != static_cast<std::size_t>(a.rows()))
        throw DimensionError("classification_objective: output layer does not match last hidden layer");
    MatrixL logits = output.V.cast<long double>() * a;
    logits.colwise() += output.d.cast<long double>();
    long double nll = 0.0L;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        const int label = labels[static_cast<std::size_t>(j)];
        if (label < 0 || label >= logits.rows()) throw InvalidArgument("class label out of range");
        const long double m = logits.col(j).maxCoeff();
        long double sum = 0.0L;
        for (Eigen::Index i = 0; i < logits.rows(); ++i) sum += std::exp(logits(i, j) - m);
        nll -= logits(label, j) - (m + std::log(sum));
    }
    return nll / static_cast<long double>(x.cols());
}

void sgd_step(Matrix& param, const Matrix& grad, double learning_rate) {
    if (param.rows() != grad.rows() || param.cols() != grad.cols())
        throw DimensionError("sgd_step: parameter " + shape(param) + " vs gradient " + shape(grad));
    param.noalias() -= learning_rate * grad;
}

void sgd_step(Vector& param, const Vector& grad, double learning_rate) {
    if (param.size() != grad.size())
        throw DimensionError("sgd_step: parameter length " + std::to_string(param.size()) + " vs gradient " +
                             std::to_string(grad.size()));
    param.noalias() -= learning_rate * grad;
}

std::vector<double> flatten(const LayerParams& layer) {
    std::vector<double> out;
    append(out, layer.W);
    append(out, layer.b);
    append(out, layer.c);
    return out;
}

void unflatten(std::span<const double> flat, LayerParams& layer) {
    std::size_t off = take(flat, 0, layer.W);
    off = take(flat, off, layer.b);
    off = take(flat, off, layer.c);
    if (off != flat.size()) throw DimensionError("flat parameter vector too long");
}

std::vector<double> flatten(const DaeGradients& g) {
    std::vector<double> out;
    append(out, g.W);
    append(out, g.b);
    append(out, g.c);
    return out;
}

std::vector<double> flatten(std::span<const LayerParams> layers, const LogisticLayer& output) {
    std::vector<double> out;
    for (const auto& l : layers) {
        append(out, l.W);
        append(out, l.b);
    }
    append(out, output.V);
    append(out, output.d);
    return out;
}

void unflatten(std::span<const double> flat, std::vector<LayerParams>& layers, LogisticLayer& output) {
    std::size_t off = 0;
    for (auto& l : layers) {
        off = take(flat, off, l.W);
        off = take(flat, off, l.b);
    }
    off = take(flat, off, output.V);
    off = take(flat, off, output.d);
    if (off != flat.size()) throw DimensionError("flat parameter vector too long");
}

std::vector<double> flatten(const NetworkGradients& g) {
    std::vector<double> out;
    for (std::size_t l = 0; l < g.W.size(); ++l) {
        append(out, g.W[l]);
        append(out, g.b[l]);
    }
    append(out, g.V);
    append(out, g.d);
    return out;
}

GradCheckResult grad_check(const std::function<long double(std::span<const double>)>& loss,
                           std::span<const double> theta, std::span<const double> analytic, std::size_t sample,
                           std::uint64_t seed, double step) {
    if (theta.size() != analytic.size())
        throw DimensionError("grad_check: gradient length does not match parameter length");
    if (!(step > 0.0)) throw InvalidArgument("grad_check: step must be positive");

    std::vector<std::size_t> index(theta.size());
    std::iota(index.begin(), index.end(), std::size_t{0});
    const std::size_t n = std::min(sample, theta.size());
    Rng rng(derive_seed(seed, "gradcheck"));
    for (std::size_t i = 0; i < n; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(theta.size() - i));
        std::swap(index[i], index[j]);
    }

    std::vector<double> probe(theta.begin(), theta.end());
    GradCheckResult result;
    result.coordinates = n;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = index[i];
        const double orig = probe[k];
        const double hi = orig + step;
        const double lo = orig - step;
        probe[k] = hi;
        const long double up = loss(probe);
        probe[k] = lo;
        const long double down = loss(probe);
        probe[k] = orig;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw InvalidArgument("grad_check: loss is not finite at coordinate " + std::to_string(k));
        // Divide by the step actually taken after rounding theta +- step.
        const auto numeric = static_cast<double>((up - down) / (static_cast<long double>(hi) - lo));
        const double err = std::abs(analytic[k] - numeric) / std::max(1e-8, std::abs(analytic[k]) + std::abs(numeric));
        if (err > result.max_rel_error) {
            result.max_rel_error = err;
            result.worst_index = k;
        }
    }
    return result;
}

}  // namespace goldspot
