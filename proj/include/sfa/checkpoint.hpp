#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfa/config.hpp"
#include "sfa/model.hpp"

namespace sfa {

namespace detail {

inline nlohmann::json vocab_map_json(const std::unordered_map<std::string, int>& m) {
    std::vector<std::string> items(m.size());
    for (const auto& [key, id] : m) items[static_cast<std::size_t>(id - Vocab::kReserved)] = key;
    return nlohmann::json(items);
}

inline void vocab_map_load(const nlohmann::json& j, std::unordered_map<std::string, int>& m) {
    m.clear();
    int id = Vocab::kReserved;
    for (const auto& item : j) m[item.get<std::string>()] = id++;
}

} // namespace detail

inline nlohmann::json checkpoint_json(const Model& m) {
    nlohmann::json params = nlohmann::json::object();
    visit_params(m, [&](const std::string& name, const Tensor& t) {
        params[name] = {{"shape", t.shape()}, {"data", t.value()}};
    });
    nlohmann::json vocab = {{"word", detail::vocab_map_json(m.vocab.word)},
                            {"char", detail::vocab_map_json(m.vocab.chr)},
                            {"pos", detail::vocab_map_json(m.vocab.pos)},
                            {"lemma", detail::vocab_map_json(m.vocab.lemma)}};
    return {{"format", 1},
            {"config", m.config},
            {"vocab", vocab},
            {"labels", m.labels.labels},
            {"params", params}};
}

inline void save_checkpoint(const Model& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write checkpoint ", path);
    out << checkpoint_json(m).dump() << "\n";
    if (!out) fail("short write on checkpoint ", path);
}

inline Model model_from_json(const nlohmann::json& j) {
    if (!j.contains("format") || j["format"].get<int>() != 1)
        fail("checkpoint: unsupported format");
    Config config = j["config"].get<Config>();
    Vocab vocab;
    detail::vocab_map_load(j["vocab"]["word"], vocab.word);
    detail::vocab_map_load(j["vocab"]["char"], vocab.chr);
    detail::vocab_map_load(j["vocab"]["pos"], vocab.pos);
    detail::vocab_map_load(j["vocab"]["lemma"], vocab.lemma);
    LabelSet labels;
    labels.labels = j["labels"].get<std::vector<std::string>>();
    std::mt19937 rng(config.seed);
    Model m = Model::init(config, vocab, labels, rng);
    const nlohmann::json& params = j["params"];
    std::size_t seen = 0;
    visit_params(m, [&](const std::string& name, const Tensor& t) {
        auto it = params.find(name);
        if (it == params.end()) fail("checkpoint: tensor \"", name, "\" missing");
        const std::vector<int> shape = (*it)["shape"].get<std::vector<int>>();
        if (shape != t.shape())
            fail("checkpoint: tensor \"", name, "\" has shape ", shape_string(shape),
                 ", expected ", shape_string(t.shape()));
        const auto& data = (*it)["data"];
        if (data.size() != t.size())
            fail("checkpoint: tensor \"", name, "\" has ", data.size(), " values, expected ",
                 t.size());
        Tensor handle = t; // shared storage, so writing through a copy sticks
        for (std::size_t i = 0; i < t.size(); ++i) handle.value()[i] = data[i].get<double>();
        ++seen;
    });
    if (seen != params.size())
        fail("checkpoint: ", params.size(), " tensors stored, model expects ", seen);
    return m;
}

inline Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot read checkpoint ", path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail("checkpoint ", path, ": ", e.what());
    }
    return model_from_json(j);
}

} // namespace sfa
