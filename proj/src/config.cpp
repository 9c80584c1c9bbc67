#include "ionreadout/config.hpp"

#include "ionreadout/labels.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace ionreadout::cli {

namespace {

constexpr std::array<std::pair<Strategy, std::string_view>, 7> kStrategyNames{{
    {Strategy::FT, "FT"},
    {Strategy::AT, "AT"},
    {Strategy::NN, "NN"},
    {Strategy::NNPlus, "NN+"},
    {Strategy::TNN, "TNN"},
    {Strategy::TNNPlus, "TNN+"},
    {Strategy::RNN, "RNN"},
}};

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s)
{
    std::vector<std::string> out;
    if (trim(s).empty()) {
        return out;
    }
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

template <typename T>
T parse_number(const std::string& key, std::string_view text)
{
    T value{};
    const auto s = trim(text);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw ConfigError("config key '" + key + "': cannot parse '" + s + "' as a number");
    }
    return value;
}

template <typename T>
std::string format_number(T value)
{
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), ptr);
}

bool parse_bool(const std::string& key, std::string_view text)
{
    const auto s = trim(text);
    if (s == "true" || s == "1") {
        return true;
    }
    if (s == "false" || s == "0") {
        return false;
    }
    throw ConfigError("config key '" + key + "': expected true/false, got '" + s + "'");
}

template <typename T>
std::vector<T> parse_number_list(const std::string& key, std::string_view text)
{
    std::vector<T> out;
    for (const auto& item : split_list(text)) {
        out.push_back(parse_number<T>(key, item));
    }
    return out;
}

template <typename T>
std::string format_list(const std::vector<T>& values)
{
    std::string out;
    for (std::size_t k = 0; k < values.size(); ++k) {
        out += (k ? "," : "") + format_number(values[k]);
    }
    return out;
}

std::array<int, 2> parse_pair(const std::string& key, std::string_view text)
{
    const auto v = parse_number_list<int>(key, text);
    if (v.size() != 2) {
        throw ConfigError("config key '" + key + "': expected two comma-separated widths");
    }
    return {v[0], v[1]};
}

struct KeyHandler {
    std::string key;
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T, typename Access>
KeyHandler number_key(std::string key, Access access)
{
    return {key,
            [key, access](ExperimentConfig& c, std::string_view v) { access(c) = parse_number<T>(key, v); },
            [access](const ExperimentConfig& c) {
                return format_number<T>(access(const_cast<ExperimentConfig&>(c)));
            }};
}

template <typename Access>
KeyHandler bool_key(std::string key, Access access)
{
    return {key, [key, access](ExperimentConfig& c, std::string_view v) { access(c) = parse_bool(key, v); },
            [access](const ExperimentConfig& c) {
                return std::string(access(const_cast<ExperimentConfig&>(c)) ? "true" : "false");
            }};
}

template <typename Access>
KeyHandler pair_key(std::string key, Access access)
{
    return {key, [key, access](ExperimentConfig& c, std::string_view v) { access(c) = parse_pair(key, v); },
            [access](const ExperimentConfig& c) {
                const auto& p = access(const_cast<ExperimentConfig&>(c));
                return format_number(p[0]) + "," + format_number(p[1]);
            }};
}

const std::vector<KeyHandler>& handlers()
{
    using C = ExperimentConfig;
    static const std::vector<KeyHandler> table = {
        number_key<int>("n_ions", [](C& c) -> int& { return c.n_ions; }),
        number_key<int>("n_channels", [](C& c) -> int& { return c.n_channels; }),
        {"ion_channels",
         [](C& c, std::string_view v) { c.ion_channels = parse_number_list<int>("ion_channels", v); },
         [](const C& c) { return format_list(c.ion_channels); }},
        {"crosstalk_row",
         [](C& c, std::string_view v) { c.crosstalk_row = parse_number_list<double>("crosstalk_row", v); },
         [](const C& c) { return format_list(c.crosstalk_row); }},
        bool_key("intermediate_channels", [](C& c) -> bool& { return c.intermediate_channels; }),
        number_key<double>("bright_rate", [](C& c) -> double& { return c.physics.bright_rate; }),
        number_key<double>("pump_bright_to_dark_rate",
                           [](C& c) -> double& { return c.physics.pump_bright_to_dark_rate; }),
        number_key<double>("pump_dark_to_bright_rate",
                           [](C& c) -> double& { return c.physics.pump_dark_to_bright_rate; }),
        number_key<double>("background_scatter_rate",
                           [](C& c) -> double& { return c.physics.background_scatter_rate; }),
        number_key<double>("detector_dark_rate", [](C& c) -> double& { return c.physics.detector_dark_rate; }),
        number_key<double>("window_us", [](C& c) -> double& { return c.physics.window_us; }),
        number_key<std::size_t>("samples_per_label", [](C& c) -> std::size_t& { return c.samples_per_label; }),
        number_key<std::uint64_t>("seed", [](C& c) -> std::uint64_t& { return c.data_seed; }),
        bool_key("pool_resampling", [](C& c) -> bool& { return c.pool_resampling; }),
        number_key<unsigned>("generate_threads", [](C& c) -> unsigned& { return c.generate_threads; }),
        {"dataset_file", [](C& c, std::string_view v) { c.dataset_file = trim(v); },
         [](const C& c) { return c.dataset_file; }},
        {"strategies", [](C& c, std::string_view v) { c.strategies = parse_strategy_list(v); },
         [](const C& c) {
             std::string out;
             for (std::size_t k = 0; k < c.strategies.size(); ++k) {
                 out += (k ? "," : "") + std::string(strategy_name(c.strategies[k]));
             }
             return out;
         }},
        number_key<int>("tnn_bins", [](C& c) -> int& { return c.tnn_bins; }),
        number_key<int>("rnn_bins", [](C& c) -> int& { return c.rnn_bins; }),
        {"normalization",
         [](C& c, std::string_view v) {
             const auto s = trim(v);
             if (s == "max") {
                 c.normalization = features::Normalization::training_max;
             } else if (s == "none") {
                 c.normalization = features::Normalization::none;
             } else {
                 throw ConfigError("config key 'normalization': expected max or none, got '" + s + "'");
             }
         },
         [](const C& c) {
             return std::string(c.normalization == features::Normalization::none ? "none" : "max");
         }},
        bool_key("shared_threshold", [](C& c) -> bool& { return c.shared_threshold; }),
        number_key<std::size_t>("adaptive_min_context_samples",
                                [](C& c) -> std::size_t& { return c.adaptive_min_context_samples; }),
        number_key<int>("adaptive_max_iterations", [](C& c) -> int& { return c.adaptive_max_iterations; }),
        number_key<std::uint64_t>("train_seed", [](C& c) -> std::uint64_t& { return c.training.seed; }),
        number_key<double>("train_fraction", [](C& c) -> double& { return c.training.train_fraction; }),
        number_key<double>("validation_fraction", [](C& c) -> double& { return c.training.validation_fraction; }),
        number_key<std::size_t>("batch_size", [](C& c) -> std::size_t& { return c.training.batch_size; }),
        number_key<int>("epochs", [](C& c) -> int& { return c.training.epochs; }),
        number_key<int>("patience", [](C& c) -> int& { return c.training.patience; }),
        number_key<double>("adadelta_rho", [](C& c) -> double& { return c.training.adadelta.rho; }),
        number_key<double>("adadelta_epsilon", [](C& c) -> double& { return c.training.adadelta.epsilon; }),
        pair_key("hidden_nn", [](C& c) -> std::array<int, 2>& { return c.hidden_nn; }),
        pair_key("hidden_nn_plus", [](C& c) -> std::array<int, 2>& { return c.hidden_nn_plus; }),
        pair_key("hidden_tnn", [](C& c) -> std::array<int, 2>& { return c.hidden_tnn; }),
        pair_key("hidden_tnn_plus", [](C& c) -> std::array<int, 2>& { return c.hidden_tnn_plus; }),
        number_key<int>("rnn_hidden", [](C& c) -> int& { return c.rnn_hidden; }),
        number_key<int>("rnn_epochs", [](C& c) -> int& { return c.rnn_epochs; }),
        number_key<int>("probe_ion", [](C& c) -> int& { return c.probe_ion; }),
    };
    return table;
}

bool needs_intermediate(Strategy s)
{
    return s == Strategy::NNPlus || s == Strategy::TNNPlus;
}

}  // namespace

std::string_view strategy_name(Strategy s)
{
    for (const auto& [strategy, name] : kStrategyNames) {
        if (strategy == s) {
            return name;
        }
    }
    return "?";
}

std::string strategy_file_tag(Strategy s)
{
    std::string name(strategy_name(s));
    if (name.ends_with('+')) {
        name.pop_back();
        name += "plus";
    }
    return name;
}

Strategy parse_strategy(std::string_view name)
{
    for (const auto& [strategy, n] : kStrategyNames) {
        if (n == name) {
            return strategy;
        }
    }
    throw ConfigError("unknown strategy '" + std::string(name) + "' (expected FT, AT, NN, NN+, TNN, TNN+ or RNN)");
}

std::vector<Strategy> parse_strategy_list(std::string_view list)
{
    std::vector<Strategy> out;
    for (const auto& item : split_list(list)) {
        const Strategy s = parse_strategy(item);
        if (std::find(out.begin(), out.end(), s) != out.end()) {
            throw ConfigError("strategy '" + item + "' listed twice");
        }
        out.push_back(s);
    }
    return out;
}

std::vector<int> ExperimentConfig::resolved_ion_channels() const
{
    if (!ion_channels.empty()) {
        return ion_channels;
    }
    std::vector<int> out;
    const int spacing = n_channels == n_ions ? 1 : 2;
    for (int i = 0; i < n_ions; ++i) {
        out.push_back(i * spacing);
    }
    return out;
}

sim::DetectorGeometry ExperimentConfig::geometry() const
{
    try {
        return sim::DetectorGeometry::from_point_spread(n_channels, resolved_ion_channels(), crosstalk_row,
                                                        intermediate_channels);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

void ExperimentConfig::validate() const
{
    auto wrap = [](auto&& fn) {
        try {
            fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    };
    wrap([&] { physics.validate(); });
    wrap([&] { training.validate(); });
    if (n_ions < 1 || n_ions > kMaxIons) {
        throw ConfigError("n_ions must be in [1, 12]");
    }
    const auto geo = geometry();
    if (strategies.empty()) {
        throw ConfigError("at least one strategy is required");
    }
    for (Strategy s : strategies) {
        if (needs_intermediate(s) && (!geo.intermediate_channels_present() || geo.num_channels() == n_ions)) {
            throw ConfigError(std::string(strategy_name(s)) + " needs recorded intermediate channels");
        }
    }
    if (samples_per_label < 1) {
        throw ConfigError("samples_per_label must be >= 1");
    }
    if (tnn_bins < 1 || rnn_bins < 1) {
        throw ConfigError("tnn_bins and rnn_bins must be >= 1");
    }
    for (const auto& h : {hidden_nn, hidden_nn_plus, hidden_tnn, hidden_tnn_plus}) {
        for (int w : h) {
            if (w < 8 || w > 40) {
                throw ConfigError("hidden widths must lie in [8, 40]");
            }
        }
    }
    if (rnn_hidden < 1 || rnn_epochs < 1) {
        throw ConfigError("rnn_hidden and rnn_epochs must be >= 1");
    }
    if (adaptive_max_iterations < 1) {
        throw ConfigError("adaptive_max_iterations must be >= 1");
    }
    if (probe_ion < 0 || probe_ion >= n_ions) {
        throw ConfigError("probe_ion out of range");
    }
}

ExperimentConfig parse_config(std::istream& in)
{
    ExperimentConfig config;
    std::map<std::string, const KeyHandler*> by_key;
    for (const auto& h : handlers()) {
        by_key[h.key] = &h;
    }
    std::set<std::string> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        const std::string body = trim(std::string_view(line).substr(0, hash));
        if (body.empty()) {
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const auto it = by_key.find(key);
        if (it == by_key.end()) {
            throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        if (!seen.insert(key).second) {
            throw ConfigError("config line " + std::to_string(line_no) + ": key '" + key + "' repeated");
        }
        it->second->set(config, std::string_view(body).substr(eq + 1));
    }
    config.validate();
    return config;
}

ExperimentConfig parse_config_string(std::string_view text)
{
    std::istringstream in{std::string(text)};
    return parse_config(in);
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    return parse_config(in);
}

std::string serialize_config(const ExperimentConfig& config)
{
    std::string out;
    for (const auto& h : handlers()) {
        out += h.key + " = " + h.get(config) + "\n";
    }
    return out;
}

const std::vector<std::string>& config_keys()
{
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& h : handlers()) {
            k.push_back(h.key);
        }
        return k;
    }();
    return keys;
}

}  // namespace ionreadout::cli
