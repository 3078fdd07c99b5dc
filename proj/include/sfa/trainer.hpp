#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "sfa/checkpoint.hpp"
#include "sfa/metrics.hpp"
#include "sfa/model.hpp"

namespace sfa {

struct Adam {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<Tensor> params;
    std::vector<std::vector<double>> m, v;
    long steps = 0; // completed updates

    explicit Adam(std::vector<Tensor> p) : params(std::move(p)) {
        for (const Tensor& t : params) {
            m.emplace_back(t.size(), 0.0);
            v.emplace_back(t.size(), 0.0);
        }
    }

    void zero_grad() {
        for (Tensor& t : params) t.zero_grad();
    }

    void step(double lr) {
        ++steps;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
        for (std::size_t i = 0; i < params.size(); ++i) {
            std::vector<double>& value = params[i].value();
            const std::vector<double>& grad = params[i].grad();
            for (std::size_t j = 0; j < value.size(); ++j) {
                const double g = grad[j];
                m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * g;
                v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * g * g;
                value[j] -= lr * (m[i][j] / bc1) / (std::sqrt(v[i][j] / bc2) + eps);
            }
        }
    }
};

/// Decayed rate before update number `steps_taken` + 1: the base rate times
/// decay_factor once per completed decay interval. Repeated multiplication
/// keeps the value exact for small interval counts.
inline double learning_rate_at(const Config& config, long steps_taken) {
    const long k = steps_taken / config.decay_steps;
    double lr = config.learning_rate;
    for (long i = 0; i < k; ++i) lr *= config.decay_factor;
    return lr;
}

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double dev_sentiment_f1 = 0.0;
    double dev_labeled_edge_f1 = 0.0;
    bool improved = false;
};

struct TrainResult {
    nlohmann::json best_checkpoint; // initialization when no epoch improved
    std::vector<EpochLog> log;
    int best_epoch = 0; // 0 = initialization
    double best_dev_f1 = -1.0;
    long steps = 0;

    Model best_model() const { return model_from_json(best_checkpoint); }
};

inline nlohmann::json epoch_json(const EpochLog& e) {
    return {{"epoch", e.epoch},
            {"lr", e.lr},
            {"train_loss", e.train_loss},
            {"dev_sentiment_f1", e.dev_sentiment_f1},
            {"dev_labeled_edge_f1", e.dev_labeled_edge_f1},
            {"best", e.improved}};
}

/// Adam with the step decay schedule, per-epoch dev evaluation on
/// sentiment-graph F1, best-dev checkpointing, early stopping. Deterministic
/// for a fixed seed: one generator drives shuffling and dropout in order.
inline TrainResult train_loop(Model& model, const Corpus& train, const Corpus& dev,
                              std::ostream* metrics_out = nullptr) {
    const Config& config = model.config;
    std::mt19937 rng(static_cast<unsigned>(config.seed));
    std::vector<DepGraph> gold_train, gold_dev;
    for (const CorpusEntry& e : train.entries)
        gold_train.push_back(tuples_to_graph(e.sentence, e.tuples, config.head_final));
    for (const CorpusEntry& e : dev.entries)
        gold_dev.push_back(tuples_to_graph(e.sentence, e.tuples, config.head_final));

    Adam adam(model.parameters());
    TrainResult result;
    result.best_checkpoint = checkpoint_json(model);

    std::vector<std::size_t> order(train.entries.size());
    std::iota(order.begin(), order.end(), 0);
    int stale = 0;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        for (std::size_t batch_start = 0; batch_start < order.size();
             batch_start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t batch_end =
                std::min(order.size(), batch_start + static_cast<std::size_t>(config.batch_size));
            adam.zero_grad();
            for (std::size_t b = batch_start; b < batch_end; ++b) {
                const CorpusEntry& entry = train.entries[order[b]];
                Tape tape;
                ScoreSet scores = model.forward(tape, entry.sentence, Mode::Train, rng);
                Tensor loss = model.compute_loss(tape, scores, gold_train[order[b]]);
                if (!std::isfinite(loss.at(0))) {
                    std::string ids;
                    for (std::size_t k = batch_start; k < batch_end; ++k) {
                        if (!ids.empty()) ids += ", ";
                        ids += train.entries[order[k]].sentence.id;
                    }
                    fail("training aborted: loss ", loss.at(0), " in epoch ", epoch,
                         " on the batch [", ids, "] (offending sentence ", entry.sentence.id, ")");
                }
                loss_sum += loss.at(0);
                ++loss_count;
                Tensor scaled =
                    scale(tape, loss, 1.0 / static_cast<double>(batch_end - batch_start));
                tape.backward(scaled);
            }
            adam.step(learning_rate_at(config, adam.steps));
        }

        TupleLists pred;
        std::vector<DepGraph> pred_graphs;
        for (const CorpusEntry& e : dev.entries) {
            pred_graphs.push_back(model.predict_graph(e.sentence));
            pred.push_back(decode_tuples(pred_graphs.back()));
        }
        MetricsReport report = evaluate_graphs(dev.entries, pred, gold_dev, pred_graphs);

        EpochLog log;
        log.epoch = epoch;
        log.lr = learning_rate_at(config, adam.steps);
        log.train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
        log.dev_sentiment_f1 = report.sentiment_graph.f1;
        log.dev_labeled_edge_f1 = report.labeled_edge.f1;
        log.improved = report.sentiment_graph.f1 > result.best_dev_f1;
        if (log.improved) {
            result.best_dev_f1 = report.sentiment_graph.f1;
            result.best_epoch = epoch;
            result.best_checkpoint = checkpoint_json(model);
            stale = 0;
        } else {
            ++stale;
        }
        result.log.push_back(log);
        if (metrics_out) (*metrics_out) << epoch_json(log).dump() << "\n";
        if (stale >= config.patience) break;
    }
    result.steps = adam.steps;
    return result;
}

/// Fresh model from the training corpus vocabulary, then train_loop.
inline TrainResult train_model(const Config& config, const Corpus& train, const Corpus& dev,
                               std::ostream* metrics_out = nullptr) {
    validate_config(config);
    Vocab vocab = build_vocab(train);
    std::mt19937 rng(static_cast<unsigned>(config.seed));
    Model model = Model::init(config, vocab, LabelSet::sentiment(), rng);
    if (!config.external_vectors.empty())
        model.encoder.ext_table =
            load_external_vectors(config.external_vectors, vocab, config.ext_dim);
    return train_loop(model, train, dev, metrics_out);
}

} // namespace sfa
