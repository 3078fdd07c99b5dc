#pragma once

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "sfa/tensor.hpp"

namespace sfa {

/// Flat model + training configuration. One key=value entry per field;
/// the same names are accepted in config files, SFA_* environment
/// overrides, and checkpoints.
struct Config {
    // Feature widths. A width of 0 disables the feature entirely.
    int word_dim = 100;
    int pos_dim = 100;
    int lemma_dim = 100;
    int char_dim = 50;
    int char_hidden = 25; // per direction
    int ext_dim = 0;      // frozen external vectors, 0 = absent

    // Sequence encoder.
    int lstm_hidden = 400; // per direction
    int lstm_layers = 3;
    int proj_dim = 600;

    // First-order scorer.
    bool use_sfa = true;
    int sfa_heads = 4;
    int sfa_window = 3;
    bool sfa_mask_first = true;
    bool biaffine_bias = true;

    // Second-order scorer.
    bool use_second_order = true;
    bool sfa_mask_second = true;
    int second_order_rank = 150;
    int mfvi_iterations = 3;

    // Graph codec and decoding.
    bool head_final = true;
    double edge_threshold = 0.5;

    // Optimization.
    double learning_rate = 1e-3;
    double decay_factor = 0.75;
    int decay_steps = 5000;
    double dropout = 0.33;
    int batch_size = 16;
    int max_epochs = 100;
    int patience = 20;
    int seed = 42;
    std::string external_vectors; // path, empty = none

    int char_feature_dim() const { return char_dim > 0 ? 2 * char_hidden : 0; }
    int embed_dim() const {
        return word_dim + pos_dim + lemma_dim + char_feature_dim() + ext_dim;
    }
    int lstm_out_dim() const { return 2 * lstm_hidden; }
};

namespace detail {

// Single registry of field names; parsing, environment overrides, and
// serialization all walk this list.
template <class C, class F>
void visit_config(C& c, F&& f) {
    f("word_dim", c.word_dim);
    f("pos_dim", c.pos_dim);
    f("lemma_dim", c.lemma_dim);
    f("char_dim", c.char_dim);
    f("char_hidden", c.char_hidden);
    f("ext_dim", c.ext_dim);
    f("lstm_hidden", c.lstm_hidden);
    f("lstm_layers", c.lstm_layers);
    f("proj_dim", c.proj_dim);
    f("use_sfa", c.use_sfa);
    f("sfa_heads", c.sfa_heads);
    f("sfa_window", c.sfa_window);
    f("sfa_mask_first", c.sfa_mask_first);
    f("biaffine_bias", c.biaffine_bias);
    f("use_second_order", c.use_second_order);
    f("sfa_mask_second", c.sfa_mask_second);
    f("second_order_rank", c.second_order_rank);
    f("mfvi_iterations", c.mfvi_iterations);
    f("head_final", c.head_final);
    f("edge_threshold", c.edge_threshold);
    f("learning_rate", c.learning_rate);
    f("decay_factor", c.decay_factor);
    f("decay_steps", c.decay_steps);
    f("dropout", c.dropout);
    f("batch_size", c.batch_size);
    f("max_epochs", c.max_epochs);
    f("patience", c.patience);
    f("seed", c.seed);
    f("external_vectors", c.external_vectors);
}

inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline void parse_into(const std::string& key, const std::string& raw, int& out) {
    std::size_t used = 0;
    out = std::stoi(raw, &used);
    if (used != raw.size()) fail("config key ", key, ": \"", raw, "\" is not an integer");
}

inline void parse_into(const std::string& key, const std::string& raw, double& out) {
    std::size_t used = 0;
    out = std::stod(raw, &used);
    if (used != raw.size()) fail("config key ", key, ": \"", raw, "\" is not a number");
}

inline void parse_into(const std::string& key, const std::string& raw, bool& out) {
    if (raw == "true") out = true;
    else if (raw == "false") out = false;
    else fail("config key ", key, ": \"", raw, "\" is not true/false");
}

inline void parse_into(const std::string&, const std::string& raw, std::string& out) {
    // Strings may be double-quoted (TOML style).
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"')
        out = raw.substr(1, raw.size() - 2);
    else
        out = raw;
}

} // namespace detail

inline void set_config_key(Config& config, const std::string& key, const std::string& value) {
    bool found = false;
    try {
        detail::visit_config(config, [&](const char* name, auto& field) {
            if (key != name) return;
            found = true;
            detail::parse_into(key, value, field);
        });
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        fail("config key ", key, ": cannot parse value \"", value, "\"");
    }
    if (!found) fail("unknown config key \"", key, "\"");
}

inline void validate_config(const Config& c) {
    auto positive = [](const char* name, int v) {
        if (v < 1) fail("config key ", name, " must be >= 1, got ", v);
    };
    positive("lstm_hidden", c.lstm_hidden);
    positive("lstm_layers", c.lstm_layers);
    positive("proj_dim", c.proj_dim);
    positive("sfa_heads", c.sfa_heads);
    positive("sfa_window", c.sfa_window);
    positive("second_order_rank", c.second_order_rank);
    positive("decay_steps", c.decay_steps);
    positive("batch_size", c.batch_size);
    positive("patience", c.patience);
    if (c.mfvi_iterations < 0) fail("config key mfvi_iterations must be >= 0");
    if (c.max_epochs < 0) fail("config key max_epochs must be >= 0");
    const std::initializer_list<std::pair<const char*, int>> widths{
        {"word_dim", c.word_dim}, {"pos_dim", c.pos_dim},   {"lemma_dim", c.lemma_dim},
        {"char_dim", c.char_dim}, {"ext_dim", c.ext_dim}};
    for (auto [name, v] : widths)
        if (v < 0) fail("config key ", name, " must be >= 0, got ", v);
    if (c.char_dim > 0 && c.char_hidden < 1) fail("config key char_hidden must be >= 1");
    if (c.embed_dim() < 1) fail("config disables every input feature");
    if (!(c.learning_rate > 0.0 && c.learning_rate <= 1.0))
        fail("config key learning_rate must lie in (0, 1], got ", c.learning_rate);
    if (!(c.decay_factor > 0.0 && c.decay_factor <= 1.0))
        fail("config key decay_factor must lie in (0, 1], got ", c.decay_factor);
    if (!(c.dropout >= 0.0 && c.dropout < 1.0))
        fail("config key dropout must lie in [0, 1), got ", c.dropout);
    if (!(c.edge_threshold > 0.0 && c.edge_threshold < 1.0))
        fail("config key edge_threshold must lie in (0, 1), got ", c.edge_threshold);
}

/// Parse flat key = value text (TOML-compatible subset: comments with
/// '#', blank lines, optional quotes around strings).
inline Config parse_config_text(const std::string& text, Config base = Config{}) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail("config line ", line_no, ": expected key = value, got \"", line, "\"");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        set_config_key(base, key, value);
    }
    return base;
}

inline Config load_config_file(const std::string& path, Config base = Config{}) {
    std::ifstream in(path);
    if (!in) fail("cannot open config file ", path);
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_config_text(buf.str(), base);
    } catch (const Error& e) {
        fail(path, ": ", e.what());
    }
}

/// Apply SFA_<UPPERCASED KEY> environment variables on top of `config`.
inline Config apply_env_overrides(Config config, const std::string& prefix = "SFA_") {
    detail::visit_config(config, [&](const char* name, auto& field) {
        std::string var = prefix;
        for (const char* p = name; *p; ++p)
            var += static_cast<char>(std::toupper(static_cast<unsigned char>(*p)));
        if (const char* value = std::getenv(var.c_str()))
            detail::parse_into(name, value, field);
    });
    return config;
}

inline void to_json(nlohmann::json& j, const Config& c) {
    j = nlohmann::json::object();
    detail::visit_config(const_cast<Config&>(c),
                         [&](const char* name, auto& field) { j[name] = field; });
}

inline void from_json(const nlohmann::json& j, Config& c) {
    detail::visit_config(c, [&](const char* name, auto& field) {
        if (j.contains(name)) j.at(name).get_to(field);
    });
}

} // namespace sfa
