#include "ionreadout/lstm.hpp"

#include "ionreadout/labels.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace ionreadout::rnn {

namespace {

constexpr double kProbabilityFloor = 1e-12;

Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& z)
{
    return 1.0 / (1.0 + (-z).exp());
}

struct StepCache {
    Eigen::MatrixXd x;       // scaled input
    Eigen::MatrixXd h_prev;
    Eigen::MatrixXd c_prev;
    Eigen::ArrayXXd in_gate;
    Eigen::ArrayXXd forget_gate;
    Eigen::ArrayXXd out_gate;
    Eigen::ArrayXXd candidate;
    Eigen::ArrayXXd cell_tanh;
};

struct BatchPass {
    std::vector<StepCache> steps;
    Eigen::MatrixXd h;
    Eigen::MatrixXd c;
    Eigen::MatrixXd probabilities;
};

int step_count(const LstmModel& model, const Eigen::MatrixXd& sequences)
{
    if (model.input_width < 1 || sequences.cols() % model.input_width != 0) {
        throw std::invalid_argument("lstm: sequence width does not match the input width " +
                                    std::to_string(model.input_width));
    }
    if (!sequences.allFinite()) {
        throw std::invalid_argument("lstm: non-finite input");
    }
    return static_cast<int>(sequences.cols() / model.input_width);
}

BatchPass run_batch(const LstmModel& model, const Eigen::MatrixXd& sequences, bool keep_cache)
{
    const int steps = step_count(model, sequences);
    const Eigen::Index batch = sequences.rows();
    const int hd = model.hidden;
    BatchPass pass;
    pass.h = Eigen::MatrixXd::Zero(batch, hd);
    pass.c = Eigen::MatrixXd::Zero(batch, hd);
    for (int t = 0; t < steps; ++t) {
        Eigen::MatrixXd x = sequences.middleCols(static_cast<Eigen::Index>(t) * model.input_width, model.input_width)
                                .array()
                                .rowwise() /
                            model.input_scale.transpose().array();
        Eigen::MatrixXd z = x * model.input_weights.transpose();
        z.noalias() += pass.h * model.recurrent_weights.transpose();
        z.rowwise() += model.gate_bias.transpose();

        StepCache cache;
        cache.in_gate = sigmoid(z.middleCols(0, hd).array());
        cache.forget_gate = sigmoid(z.middleCols(hd, hd).array());
        cache.out_gate = sigmoid(z.middleCols(2 * hd, hd).array());
        cache.candidate = z.middleCols(3 * hd, hd).array().tanh();
        Eigen::MatrixXd c_next = (cache.forget_gate * pass.c.array() + cache.in_gate * cache.candidate).matrix();
        cache.cell_tanh = c_next.array().tanh();
        Eigen::MatrixXd h_next = (cache.out_gate * cache.cell_tanh).matrix();
        if (keep_cache) {
            cache.x = std::move(x);
            cache.h_prev = std::move(pass.h);
            cache.c_prev = std::move(pass.c);
            pass.steps.push_back(std::move(cache));
        }
        pass.h = std::move(h_next);
        pass.c = std::move(c_next);
    }
    Eigen::MatrixXd logits = pass.h * model.readout_weights.transpose();
    logits.rowwise() += model.readout_bias.transpose();
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        logits.row(r) = (logits.row(r).array() - m).exp();
        logits.row(r) /= logits.row(r).sum();
    }
    pass.probabilities = std::move(logits);
    return pass;
}

void init_uniform(Eigen::MatrixXd& m, double limit, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = dist(rng);
        }
    }
}

struct LstmOps {
    double batch_gradients(const LstmModel& model, const Eigen::MatrixXd& x, std::span<const std::size_t> y,
                           LstmGradients& grads)
    {
        return rnn::batch_gradients(model, x, y, grads);
    }

    static std::span<double> view(Eigen::MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
    static std::span<double> view(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
    static std::span<const double> view(const Eigen::MatrixXd& m)
    {
        return {m.data(), static_cast<std::size_t>(m.size())};
    }
    static std::span<const double> view(const Eigen::VectorXd& v)
    {
        return {v.data(), static_cast<std::size_t>(v.size())};
    }

    std::vector<std::span<double>> parameters(LstmModel& m)
    {
        return {view(m.input_weights), view(m.recurrent_weights), view(m.gate_bias), view(m.readout_weights),
                view(m.readout_bias)};
    }

    std::vector<std::span<const double>> gradients(const LstmGradients& g)
    {
        return {view(g.input_weights), view(g.recurrent_weights), view(g.gate_bias), view(g.readout_weights),
                view(g.readout_bias)};
    }

    std::vector<std::size_t> predict(const LstmModel& model, const Eigen::MatrixXd& x)
    {
        return predict_batch(model, x);
    }
};

}  // namespace

LstmModel LstmModel::zeros(int input_width, int hidden, int classes)
{
    LstmModel m;
    m.input_width = input_width;
    m.hidden = hidden;
    m.classes = classes;
    m.input_weights = Eigen::MatrixXd::Zero(4 * hidden, input_width);
    m.recurrent_weights = Eigen::MatrixXd::Zero(4 * hidden, hidden);
    m.gate_bias = Eigen::VectorXd::Zero(4 * hidden);
    m.readout_weights = Eigen::MatrixXd::Zero(classes, hidden);
    m.readout_bias = Eigen::VectorXd::Zero(classes);
    m.input_scale = Eigen::VectorXd::Ones(input_width);
    m.validate();
    return m;
}

LstmModel LstmModel::glorot(int input_width, int hidden, int classes, std::uint64_t seed)
{
    LstmModel m = zeros(input_width, hidden, classes);
    std::mt19937_64 rng(seed);
    init_uniform(m.input_weights, std::sqrt(6.0 / (input_width + 4.0 * hidden)), rng);
    init_uniform(m.recurrent_weights, std::sqrt(6.0 / (5.0 * hidden)), rng);
    init_uniform(m.readout_weights, std::sqrt(6.0 / static_cast<double>(hidden + classes)), rng);
    m.gate_bias.segment(hidden, hidden).setOnes();
    return m;
}

int LstmModel::n_ions() const
{
    int n = 0;
    while ((1 << n) < classes) {
        ++n;
    }
    return n;
}

void LstmModel::validate() const
{
    if (input_width < 1 || hidden < 1) {
        throw std::invalid_argument("lstm: input and hidden widths must be >= 1");
    }
    if (classes < 2 || (classes & (classes - 1)) != 0) {
        throw std::invalid_argument("lstm: class count must be 2^N");
    }
    if (input_weights.rows() != 4 * hidden || input_weights.cols() != input_width ||
        recurrent_weights.rows() != 4 * hidden || recurrent_weights.cols() != hidden ||
        gate_bias.size() != 4 * hidden || readout_weights.rows() != classes || readout_weights.cols() != hidden ||
        readout_bias.size() != classes) {
        throw std::invalid_argument("lstm: parameter shapes do not match the declared widths");
    }
    if (input_scale.size() != input_width || !(input_scale.array() > 0.0).all()) {
        throw std::invalid_argument("lstm: input scale must be positive, one entry per input");
    }
}

LstmState initial_state(const LstmModel& model)
{
    return {Eigen::VectorXd::Zero(model.hidden), Eigen::VectorXd::Zero(model.hidden)};
}

LstmState lstm_run(const LstmModel& model, const features::Sequence& sequence, LstmState start)
{
    const int hd = model.hidden;
    for (const auto& step : sequence) {
        if (step.size() != static_cast<std::size_t>(model.input_width)) {
            throw std::invalid_argument("lstm: step width " + std::to_string(step.size()) +
                                        " does not match input width " + std::to_string(model.input_width));
        }
        const Eigen::Map<const Eigen::VectorXd> raw(step.data(), model.input_width);
        if (!raw.allFinite()) {
            throw std::invalid_argument("lstm: non-finite input");
        }
        const Eigen::VectorXd x = raw.cwiseQuotient(model.input_scale);
        const Eigen::VectorXd z = model.input_weights * x + model.recurrent_weights * start.hidden + model.gate_bias;
        const Eigen::ArrayXd i = 1.0 / (1.0 + (-z.segment(0, hd).array()).exp());
        const Eigen::ArrayXd f = 1.0 / (1.0 + (-z.segment(hd, hd).array()).exp());
        const Eigen::ArrayXd o = 1.0 / (1.0 + (-z.segment(2 * hd, hd).array()).exp());
        const Eigen::ArrayXd g = z.segment(3 * hd, hd).array().tanh();
        start.cell = (f * start.cell.array() + i * g).matrix();
        start.hidden = (o * start.cell.array().tanh()).matrix();
    }
    return start;
}

Eigen::VectorXd lstm_readout(const LstmModel& model, const LstmState& state)
{
    Eigen::VectorXd z = model.readout_weights * state.hidden + model.readout_bias;
    const double m = z.maxCoeff();
    z = (z.array() - m).exp();
    return z / z.sum();
}

Eigen::VectorXd lstm_forward(const LstmModel& model, const features::Sequence& sequence)
{
    return lstm_readout(model, lstm_run(model, sequence, initial_state(model)));
}

LstmGradients LstmGradients::zeros_like(const LstmModel& model)
{
    return {Eigen::MatrixXd::Zero(model.input_weights.rows(), model.input_weights.cols()),
            Eigen::MatrixXd::Zero(model.recurrent_weights.rows(), model.recurrent_weights.cols()),
            Eigen::VectorXd::Zero(model.gate_bias.size()),
            Eigen::MatrixXd::Zero(model.readout_weights.rows(), model.readout_weights.cols()),
            Eigen::VectorXd::Zero(model.readout_bias.size())};
}

Eigen::MatrixXd forward_batch(const LstmModel& model, const Eigen::MatrixXd& sequences)
{
    return run_batch(model, sequences, false).probabilities;
}

std::vector<std::size_t> predict_batch(const LstmModel& model, const Eigen::MatrixXd& sequences)
{
    const Eigen::MatrixXd p = forward_batch(model, sequences);
    std::vector<std::size_t> out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        out[static_cast<std::size_t>(r)] = nn::argmax(p.row(r).transpose());
    }
    return out;
}

double batch_gradients(const LstmModel& model, const Eigen::MatrixXd& sequences,
                       std::span<const std::size_t> labels, LstmGradients& grads)
{
    if (static_cast<std::size_t>(sequences.rows()) != labels.size() || labels.empty()) {
        throw std::invalid_argument("lstm: batch rows and labels differ");
    }
    BatchPass pass = run_batch(model, sequences, true);
    const auto batch = static_cast<double>(labels.size());
    const int hd = model.hidden;

    Eigen::MatrixXd delta = pass.probabilities;
    double loss = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        const auto yi = static_cast<Eigen::Index>(labels[r]);
        if (yi >= delta.cols()) {
            throw std::invalid_argument("lstm: label index out of range");
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

    grads.readout_weights.noalias() = delta.transpose() * pass.h;
    grads.readout_bias = delta.colwise().sum().transpose();
    grads.input_weights.setZero(model.input_weights.rows(), model.input_weights.cols());
    grads.recurrent_weights.setZero(model.recurrent_weights.rows(), model.recurrent_weights.cols());
    grads.gate_bias.setZero(model.gate_bias.size());

    Eigen::ArrayXXd dh = (delta * model.readout_weights).array();
    Eigen::ArrayXXd dc = Eigen::ArrayXXd::Zero(pass.h.rows(), hd);
    Eigen::MatrixXd dz(pass.h.rows(), 4 * hd);
    for (auto it = pass.steps.rbegin(); it != pass.steps.rend(); ++it) {
        const StepCache& s = *it;
        dc += dh * s.out_gate * (1.0 - s.cell_tanh.square());
        dz.middleCols(0, hd) = (dc * s.candidate * s.in_gate * (1.0 - s.in_gate)).matrix();
        dz.middleCols(hd, hd) = (dc * s.c_prev.array() * s.forget_gate * (1.0 - s.forget_gate)).matrix();
        dz.middleCols(2 * hd, hd) = (dh * s.cell_tanh * s.out_gate * (1.0 - s.out_gate)).matrix();
        dz.middleCols(3 * hd, hd) = (dc * s.in_gate * (1.0 - s.candidate.square())).matrix();
        grads.input_weights.noalias() += dz.transpose() * s.x;
        grads.recurrent_weights.noalias() += dz.transpose() * s.h_prev;
        grads.gate_bias += dz.colwise().sum().transpose();
        dh = (dz * model.recurrent_weights).array();
        dc *= s.forget_gate;
    }
    return loss / batch;
}

Eigen::MatrixXd stack_sequences(std::span<const features::Sequence> sequences, int width)
{
    const std::size_t steps = sequences.empty() ? 0 : sequences.front().size();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(sequences.size()),
                        static_cast<Eigen::Index>(steps) * width);
    for (std::size_t r = 0; r < sequences.size(); ++r) {
        if (sequences[r].size() != steps) {
            throw std::invalid_argument("lstm: sequences in a batch must have equal length");
        }
        for (std::size_t t = 0; t < steps; ++t) {
            if (sequences[r][t].size() != static_cast<std::size_t>(width)) {
                throw std::invalid_argument("lstm: step width mismatch");
            }
            for (int m = 0; m < width; ++m) {
                out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t) * width + m) =
                    sequences[r][t][static_cast<std::size_t>(m)];
            }
        }
    }
    return out;
}

LstmGradients lstm_backward(const LstmModel& model, const features::Sequence& sequence, std::size_t label)
{
    const features::Sequence one[] = {sequence};
    const Eigen::MatrixXd row = stack_sequences(one, model.input_width);
    const std::size_t labels[] = {label};
    LstmGradients grads = LstmGradients::zeros_like(model);
    batch_gradients(model, row, labels, grads);
    return grads;
}

LstmTrainResult lstm_train(const Eigen::MatrixXd& sequences, int input_width, std::span<const std::size_t> labels,
                           int hidden, int n_ions, const nn::TrainConfig& config,
                           features::Normalization normalization)
{
    const auto classes = static_cast<int>(num_classes(n_ions));
    LstmTrainResult result{LstmModel::glorot(input_width, hidden, classes, config.seed), {}};
    result.model.input_scale = features::fit_sequence_scale(sequences, input_width, normalization);
    LstmGradients grads = LstmGradients::zeros_like(result.model);
    LstmOps ops;
    result.history = nn::run_adadelta(result.model, grads, sequences, labels, n_ions, config, ops);
    return result;
}

double probe_arrival_time(const LstmModel& model, int num_bins, int bin, int channel_row, int ion)
{
    const int n_ions = model.n_ions();
    if (bin < 0 || bin >= num_bins || channel_row < 0 || channel_row >= model.input_width || ion < 0 ||
        ion >= n_ions) {
        throw std::invalid_argument("probe: bin, channel or ion out of range");
    }
    features::Sequence sequence(static_cast<std::size_t>(num_bins),
                                std::vector<double>(static_cast<std::size_t>(model.input_width), 0.0));
    sequence[static_cast<std::size_t>(bin)][static_cast<std::size_t>(channel_row)] = 1.0;
    const Eigen::VectorXd p = lstm_forward(model, sequence);
    double bright = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        if (ion_bit(static_cast<std::size_t>(k), ion, n_ions)) {
            bright += p(k);
        }
    }
    return bright;
}

std::vector<double> probe_curve(const LstmModel& model, int num_bins, int channel_row, int ion)
{
    std::vector<double> out;
    for (int t = 0; t < num_bins; ++t) {
        out.push_back(probe_arrival_time(model, num_bins, t, channel_row, ion));
    }
    return out;
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m)
{
    std::vector<double> v;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            v.push_back(m(r, c));
        }
    }
    return v;
}

void matrix_from(const nlohmann::json& j, Eigen::MatrixXd& m)
{
    const auto v = j.get<std::vector<double>>();
    if (v.size() != static_cast<std::size_t>(m.size())) {
        throw std::invalid_argument("lstm model file: matrix has the wrong size");
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = v[static_cast<std::size_t>(r * m.cols() + c)];
        }
    }
}

nlohmann::json vector_json(const Eigen::VectorXd& v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

void vector_from(const nlohmann::json& j, Eigen::VectorXd& v)
{
    const auto values = j.get<std::vector<double>>();
    if (values.size() != static_cast<std::size_t>(v.size())) {
        throw std::invalid_argument("lstm model file: vector has the wrong size");
    }
    v = Eigen::Map<const Eigen::VectorXd>(values.data(), v.size());
}

}  // namespace

nlohmann::json to_json(const LstmModel& model)
{
    return {{"format", "ionreadout-lstm"},
            {"version", 1},
            {"input_width", model.input_width},
            {"hidden", model.hidden},
            {"classes", model.classes},
            {"gate_order", {"input", "forget", "output", "candidate"}},
            {"input_weights", matrix_json(model.input_weights)},
            {"recurrent_weights", matrix_json(model.recurrent_weights)},
            {"gate_bias", vector_json(model.gate_bias)},
            {"readout_weights", matrix_json(model.readout_weights)},
            {"readout_bias", vector_json(model.readout_bias)},
            {"input_scale", vector_json(model.input_scale)}};
}

LstmModel lstm_from_json(const nlohmann::json& j)
{
    if (j.value("format", "") != "ionreadout-lstm" || j.value("version", 0) != 1) {
        throw std::invalid_argument("model file: not a version-1 LSTM model");
    }
    LstmModel m = LstmModel::zeros(j.at("input_width").get<int>(), j.at("hidden").get<int>(),
                                   j.at("classes").get<int>());
    matrix_from(j.at("input_weights"), m.input_weights);
    matrix_from(j.at("recurrent_weights"), m.recurrent_weights);
    vector_from(j.at("gate_bias"), m.gate_bias);
    matrix_from(j.at("readout_weights"), m.readout_weights);
    vector_from(j.at("readout_bias"), m.readout_bias);
    vector_from(j.at("input_scale"), m.input_scale);
    m.validate();
    return m;
}

}  // namespace ionreadout::rnn
