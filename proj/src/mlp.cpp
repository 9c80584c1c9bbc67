#include "ionreadout/mlp.hpp"

#include "ionreadout/labels.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace ionreadout::nn {

namespace {

constexpr double kProbabilityFloor = 1e-12;
constexpr int kLayers = 3;

Eigen::MatrixXd scaled_input(const MlpModel& model, const Eigen::MatrixXd& x)
{
    if (x.cols() != model.input_width()) {
        throw std::invalid_argument("mlp: feature width " + std::to_string(x.cols()) + " does not match input width " +
                                    std::to_string(model.input_width()));
    }
    if (!x.allFinite()) {
        throw std::invalid_argument("mlp: non-finite input");
    }
    return x.array().rowwise() / model.input_scale.transpose().array();
}

void softmax_rows(Eigen::MatrixXd& z)
{
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double m = z.row(r).maxCoeff();
        z.row(r) = (z.row(r).array() - m).exp();
        z.row(r) /= z.row(r).sum();
    }
}

struct ForwardPass {
    std::vector<Eigen::MatrixXd> inputs;  // input to layer l (post-activation of l-1)
    std::vector<Eigen::MatrixXd> pre;     // pre-activations of hidden layers
    Eigen::MatrixXd probabilities;
};

ForwardPass run_forward(const MlpModel& model, const Eigen::MatrixXd& x)
{
    ForwardPass pass;
    Eigen::MatrixXd h = scaled_input(model, x);
    for (int l = 0; l < kLayers; ++l) {
        const auto li = static_cast<std::size_t>(l);
        Eigen::MatrixXd z = h * model.weights[li].transpose();
        z.rowwise() += model.biases[li].transpose();
        pass.inputs.push_back(std::move(h));
        if (l + 1 < kLayers) {
            h = z.cwiseMax(0.0);
            pass.pre.push_back(std::move(z));
        } else {
            softmax_rows(z);
            pass.probabilities = std::move(z);
        }
    }
    return pass;
}

struct MlpOps {
    double batch_gradients(const MlpModel& model, const Eigen::MatrixXd& x, std::span<const std::size_t> y,
                           MlpGradients& grads)
    {
        return nn::batch_gradients(model, x, y, grads);
    }

    std::vector<std::span<double>> parameters(MlpModel& model)
    {
        std::vector<std::span<double>> out;
        for (int l = 0; l < kLayers; ++l) {
            auto& w = model.weights[static_cast<std::size_t>(l)];
            auto& b = model.biases[static_cast<std::size_t>(l)];
            out.emplace_back(w.data(), static_cast<std::size_t>(w.size()));
            out.emplace_back(b.data(), static_cast<std::size_t>(b.size()));
        }
        return out;
    }

    std::vector<std::span<const double>> gradients(const MlpGradients& grads)
    {
        std::vector<std::span<const double>> out;
        for (int l = 0; l < kLayers; ++l) {
            const auto& w = grads.weights[static_cast<std::size_t>(l)];
            const auto& b = grads.biases[static_cast<std::size_t>(l)];
            out.emplace_back(w.data(), static_cast<std::size_t>(w.size()));
            out.emplace_back(b.data(), static_cast<std::size_t>(b.size()));
        }
        return out;
    }

    std::vector<std::size_t> predict(const MlpModel& model, const Eigen::MatrixXd& x)
    {
        return predict_batch(model, x);
    }
};

}  // namespace

MlpModel MlpModel::zeros(std::vector<int> layer_sizes)
{
    MlpModel model;
    model.layer_sizes = std::move(layer_sizes);
    if (model.layer_sizes.size() != kLayers + 1) {
        throw std::invalid_argument("mlp: expected {input, hidden1, hidden2, classes}");
    }
    for (std::size_t l = 0; l < kLayers; ++l) {
        model.weights.push_back(Eigen::MatrixXd::Zero(model.layer_sizes[l + 1], model.layer_sizes[l]));
        model.biases.push_back(Eigen::VectorXd::Zero(model.layer_sizes[l + 1]));
    }
    model.input_scale = Eigen::VectorXd::Ones(model.layer_sizes.front());
    model.validate();
    return model;
}

MlpModel MlpModel::glorot(std::vector<int> layer_sizes, std::uint64_t seed)
{
    MlpModel model = zeros(std::move(layer_sizes));
    std::mt19937_64 rng(seed);
    for (auto& w : model.weights) {
        const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                w(r, c) = dist(rng);
            }
        }
    }
    return model;
}

int MlpModel::n_ions() const
{
    int n = 0;
    while ((1 << n) < num_classes()) {
        ++n;
    }
    return n;
}

void MlpModel::validate() const
{
    if (layer_sizes.size() != kLayers + 1) {
        throw std::invalid_argument("mlp: exactly two hidden layers are supported");
    }
    if (layer_sizes[0] < 1) {
        throw std::invalid_argument("mlp: input width must be >= 1");
    }
    for (int k = 1; k <= 2; ++k) {
        if (layer_sizes[static_cast<std::size_t>(k)] < kMinHidden || layer_sizes[static_cast<std::size_t>(k)] > kMaxHidden) {
            throw std::invalid_argument("mlp: hidden widths must lie in [8, 40]");
        }
    }
    const int classes = layer_sizes.back();
    if (classes < 2 || (classes & (classes - 1)) != 0) {
        throw std::invalid_argument("mlp: class count must be 2^N");
    }
    if (weights.size() != kLayers || biases.size() != kLayers) {
        throw std::invalid_argument("mlp: parameter tensors missing");
    }
    for (std::size_t l = 0; l < kLayers; ++l) {
        if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l] ||
            biases[l].size() != layer_sizes[l + 1]) {
            throw std::invalid_argument("mlp: parameter shapes do not match layer sizes");
        }
    }
    if (input_scale.size() != layer_sizes[0] || !(input_scale.array() > 0.0).all()) {
        throw std::invalid_argument("mlp: input scale must be positive, one entry per input");
    }
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits)
{
    const double m = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - m).exp();
    return e / e.sum();
}

double cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& probabilities, std::size_t label)
{
    return -std::log(std::max(probabilities(static_cast<Eigen::Index>(label)), kProbabilityFloor));
}

Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& x)
{
    return run_forward(model, x).probabilities;
}

Eigen::VectorXd forward(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    const Eigen::MatrixXd row = x.transpose();
    return forward_batch(model, row).row(0).transpose();
}

MlpGradients MlpGradients::zeros_like(const MlpModel& model)
{
    MlpGradients g;
    for (std::size_t l = 0; l < kLayers; ++l) {
        g.weights.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
        g.biases.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
    }
    return g;
}

double batch_gradients(const MlpModel& model, const Eigen::MatrixXd& x, std::span<const std::size_t> labels,
                       MlpGradients& grads)
{
    if (static_cast<std::size_t>(x.rows()) != labels.size() || labels.empty()) {
        throw std::invalid_argument("mlp: batch rows and labels differ");
    }
    if (grads.weights.size() != kLayers) {
        grads = MlpGradients::zeros_like(model);
    }
    ForwardPass pass = run_forward(model, x);
    const auto batch = static_cast<double>(labels.size());

    // d(mean loss)/d(logits) = (softmax - one_hot) / B, zero where the
    // probability floor is active.
    Eigen::MatrixXd delta = pass.probabilities;
    double loss = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        const auto yi = static_cast<Eigen::Index>(labels[r]);
        if (yi >= delta.cols()) {
            throw std::invalid_argument("mlp: label index out of range");
        }
        const double p = pass.probabilities(ri, yi);
        loss += -std::log(std::max(p, kProbabilityFloor));
        if (p < kProbabilityFloor) {
            delta.row(ri).setZero();
        } else {
            delta(ri, yi) -= 1.0;
        }
    }
    delta /= batch;

    for (int l = kLayers - 1; l >= 0; --l) {
        const auto li = static_cast<std::size_t>(l);
        grads.weights[li].noalias() = delta.transpose() * pass.inputs[li];
        grads.biases[li] = delta.colwise().sum().transpose();
        if (l > 0) {
            Eigen::MatrixXd upstream = delta * model.weights[li];
            delta = upstream.cwiseProduct((pass.pre[li - 1].array() > 0.0).cast<double>().matrix());
        }
    }
    return loss / batch;
}

MlpGradients backward(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t label)
{
    MlpGradients grads = MlpGradients::zeros_like(model);
    const Eigen::MatrixXd row = x.transpose();
    const std::size_t labels[] = {label};
    batch_gradients(model, row, labels, grads);
    return grads;
}

std::size_t predict_index(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    return argmax(forward(model, x));
}

std::string predict(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    return label_from_index(predict_index(model, x), model.n_ions());
}

std::vector<std::size_t> predict_batch(const MlpModel& model, const Eigen::MatrixXd& x)
{
    const Eigen::MatrixXd p = forward_batch(model, x);
    std::vector<std::size_t> out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        out[static_cast<std::size_t>(r)] = argmax(p.row(r).transpose());
    }
    return out;
}

MlpTrainResult train(const Eigen::MatrixXd& x, std::span<const std::size_t> labels, std::array<int, 2> hidden,
                     int n_ions, const TrainConfig& config, features::Normalization normalization)
{
    const auto classes = static_cast<int>(num_classes(n_ions));
    MlpTrainResult result{
        MlpModel::glorot({static_cast<int>(x.cols()), hidden[0], hidden[1], classes}, config.seed), {}};
    result.model.input_scale = features::fit_scale(x, normalization);
    MlpGradients grads = MlpGradients::zeros_like(result.model);
    MlpOps ops;
    result.history = run_adadelta(result.model, grads, x, labels, n_ions, config, ops);
    return result;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m)
{
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            values.push_back(m(r, c));
        }
    }
    return values;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols)
{
    const auto values = j.get<std::vector<double>>();
    if (values.size() != static_cast<std::size_t>(rows * cols)) {
        throw std::invalid_argument("model file: weight array has the wrong size");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
        }
    }
    return m;
}

std::vector<double> to_std(const Eigen::VectorXd& v)
{
    return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j, Eigen::Index size)
{
    const auto values = j.get<std::vector<double>>();
    if (values.size() != static_cast<std::size_t>(size)) {
        throw std::invalid_argument("model file: vector has the wrong size");
    }
    return Eigen::Map<const Eigen::VectorXd>(values.data(), size);
}

}  // namespace

nlohmann::json to_json(const MlpModel& model)
{
    nlohmann::json weights = nlohmann::json::array();
    nlohmann::json biases = nlohmann::json::array();
    for (std::size_t l = 0; l < kLayers; ++l) {
        weights.push_back(matrix_to_json(model.weights[l]));
        biases.push_back(to_std(model.biases[l]));
    }
    return {{"format", "ionreadout-mlp"},
            {"version", 1},
            {"layer_sizes", model.layer_sizes},
            {"hidden_activation", "relu"},
            {"output_activation", "softmax"},
            {"weights", std::move(weights)},
            {"biases", std::move(biases)},
            {"input_scale", to_std(model.input_scale)}};
}

MlpModel mlp_from_json(const nlohmann::json& j)
{
    if (j.value("format", "") != "ionreadout-mlp" || j.value("version", 0) != 1) {
        throw std::invalid_argument("model file: not a version-1 MLP model");
    }
    MlpModel model = MlpModel::zeros(j.at("layer_sizes").get<std::vector<int>>());
    for (std::size_t l = 0; l < kLayers; ++l) {
        model.weights[l] = matrix_from_json(j.at("weights").at(l), model.weights[l].rows(), model.weights[l].cols());
        model.biases[l] = vector_from_json(j.at("biases").at(l), model.biases[l].size());
    }
    model.input_scale = vector_from_json(j.at("input_scale"), model.input_width());
    model.validate();
    return model;
}

}  // namespace ionreadout::nn
