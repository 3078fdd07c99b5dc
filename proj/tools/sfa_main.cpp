#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "sfa/checkpoint.hpp"
#include "sfa/trainer.hpp"

namespace {

using namespace sfa;

Corpus load_reported(const std::string& path) {
    Corpus corpus = load_corpus(path);
    for (const std::string& w : corpus.report.warnings) std::cerr << "warning: " << w << "\n";
    return corpus;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write ", path);
    return out;
}

// ---------------------------------------------------------------- train ----

int run_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir) {
    Config config = apply_env_overrides(load_config_file(config_path));
    validate_config(config);
    Corpus train = load_reported(data_dir + "/train.json");
    Corpus dev = load_reported(data_dir + "/dev.json");
    std::filesystem::create_directories(out_dir);

    const std::string metrics_path = out_dir + "/metrics.jsonl";
    std::ofstream metrics = open_out(metrics_path);
    TrainResult result = train_model(config, train, dev, &metrics);
    metrics.close();

    const std::string model_path = out_dir + "/model.json";
    std::ofstream ckpt = open_out(model_path);
    ckpt << result.best_checkpoint.dump() << "\n";
    ckpt.close();

    std::cout << "train_sentences=" << train.entries.size() << "\n";
    std::cout << "dev_sentences=" << dev.entries.size() << "\n";
    std::cout << "epochs_run=" << result.log.size() << "\n";
    std::cout << "steps=" << result.steps << "\n";
    std::cout << "best_epoch=" << result.best_epoch << "\n";
    std::cout << "best_dev_sentiment_f1=" << detail::str(std::max(result.best_dev_f1, 0.0)) << "\n";
    std::cout << "checkpoint=" << model_path << "\n";
    std::cout << "metrics=" << metrics_path << "\n";
    return 0;
}

// ----------------------------------------------------------------- eval ----

MetricsReport eval_model(const Model& model, const Corpus& gold) {
    TupleLists pred;
    std::vector<DepGraph> gold_graphs, pred_graphs;
    for (const CorpusEntry& e : gold.entries) {
        gold_graphs.push_back(tuples_to_graph(e.sentence, e.tuples, model.config.head_final));
        pred_graphs.push_back(model.predict_graph(e.sentence));
        pred.push_back(decode_tuples(pred_graphs.back()));
    }
    return evaluate_graphs(gold.entries, pred, gold_graphs, pred_graphs);
}

int run_eval(const std::string& model_path, const std::string& pred_path,
             const std::string& data_path, bool head_final) {
    if (model_path.empty() == pred_path.empty())
        fail("eval needs exactly one of --model or --pred");
    Corpus gold = load_reported(data_path);
    MetricsReport report;
    if (!model_path.empty()) {
        report = eval_model(load_checkpoint(model_path), gold);
    } else {
        Corpus pred = load_reported(pred_path);
        if (pred.entries.size() != gold.entries.size())
            fail("prediction file has ", pred.entries.size(), " sentences, gold has ",
                 gold.entries.size());
        TupleLists lists;
        for (std::size_t i = 0; i < gold.entries.size(); ++i) {
            if (pred.entries[i].sentence.id != gold.entries[i].sentence.id)
                fail("sentence ", i, ": prediction id \"", pred.entries[i].sentence.id,
                     "\" does not match gold id \"", gold.entries[i].sentence.id, "\"");
            lists.push_back(pred.entries[i].tuples);
        }
        report = evaluate_tuples(gold.entries, lists, head_final);
    }
    std::cout << format_metrics_report(report);
    return 0;
}

// -------------------------------------------------------------- predict ----

nlohmann::json role_json(const Sentence& s, const Span& span) {
    auto texts = nlohmann::json::array();
    auto offsets = nlohmann::json::array();
    if (!span.empty()) {
        const int cb = s.char_begin[static_cast<std::size_t>(span.begin)];
        const int ce = s.char_end[static_cast<std::size_t>(span.end - 1)];
        texts.push_back(utf8_substr(s.text, cb, ce));
        offsets.push_back(detail::str(cb, ":", ce));
    }
    return nlohmann::json::array({texts, offsets});
}

int run_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out_path, const std::string& graphs_path) {
    Model model = load_checkpoint(model_path);
    Corpus corpus = load_reported(data_path);

    std::ofstream graphs;
    if (!graphs_path.empty()) graphs = open_out(graphs_path);

    nlohmann::json doc = nlohmann::json::array();
    std::size_t tuple_count = 0;
    int dropped = 0;
    for (const CorpusEntry& e : corpus.entries) {
        DepGraph g = model.predict_graph(e.sentence);
        DecodeReport decode_report;
        std::vector<SentimentTuple> tuples = decode_tuples(g, &decode_report);
        dropped += decode_report.dropped_edges;
        tuple_count += tuples.size();
        if (graphs.is_open()) write_graph_tsv(graphs, e.sentence, g);

        auto opinions = nlohmann::json::array();
        for (const SentimentTuple& t : tuples)
            opinions.push_back({{"Source", role_json(e.sentence, t.holder)},
                                {"Target", role_json(e.sentence, t.target)},
                                {"Polar_expression", role_json(e.sentence, t.expression)},
                                {"Polarity", to_string(t.polarity)}});
        doc.push_back(
            {{"sent_id", e.sentence.id}, {"text", e.sentence.text}, {"opinions", opinions}});
    }

    std::ofstream out = open_out(out_path);
    out << doc.dump(2) << "\n";
    std::cout << "sentences=" << corpus.entries.size() << "\n";
    std::cout << "tuples=" << tuple_count << "\n";
    std::cout << "dropped_edges=" << dropped << "\n";
    std::cout << "predictions=" << out_path << "\n";
    return 0;
}

// -------------------------------------------------------------- convert ----

int run_convert(const std::string& data_path, const std::string& out_path, bool head_final) {
    Corpus corpus = load_reported(data_path);
    std::ofstream out = open_out(out_path);
    int mismatches = 0;
    for (const CorpusEntry& e : corpus.entries) {
        DepGraph g = tuples_to_graph(e.sentence, e.tuples, head_final);
        write_graph_tsv(out, e.sentence, g);
        std::vector<SentimentTuple> back = decode_tuples(g);
        std::vector<SentimentTuple> want = e.tuples;
        std::sort(back.begin(), back.end());
        std::sort(want.begin(), want.end());
        if (back != want) {
            ++mismatches;
            std::cerr << "round-trip mismatch: sentence " << e.sentence.id << "\n";
        }
    }
    std::cout << "sentences=" << corpus.entries.size() << "\n";
    std::cout << "round_trip_mismatches=" << mismatches << "\n";
    std::cout << "graphs=" << out_path << "\n";
    return mismatches == 0 ? 0 : 1;
}

// ------------------------------------------------------------- gradcheck ---

// Finite-difference audit on a fixed 4-token sentence with one gold tuple.
// Components nest: each adds one stage on top of the previous ones.
int run_gradcheck() {
    Sentence s;
    s.id = "gc-0";
    s.text = "ab cd ef gh";
    s.tokens = {"ab", "cd", "ef", "gh"};
    s.char_begin = {0, 3, 6, 9};
    s.char_end = {2, 5, 8, 11};
    CorpusEntry entry;
    entry.sentence = s;
    entry.tuples = {SentimentTuple{{0, 1}, {2, 3}, {1, 2}, Polarity::Positive}};
    Corpus corpus;
    corpus.entries = {entry};

    Config config;
    config.word_dim = 3;
    config.pos_dim = 0;
    config.lemma_dim = 0;
    config.char_dim = 2;
    config.char_hidden = 2;
    config.lstm_hidden = 3;
    config.lstm_layers = 1;
    config.proj_dim = 3;
    config.sfa_heads = 2;
    config.sfa_window = 2;
    config.second_order_rank = 2;
    config.mfvi_iterations = 2;
    config.dropout = 0.0;

    Vocab vocab = build_vocab(corpus);
    std::mt19937 init_rng(3);
    Model model = Model::init(config, vocab, LabelSet::sentiment(), init_rng);
    DepGraph gold = tuples_to_graph(s, entry.tuples, config.head_final);
    std::mt19937 rng(0);

    auto first_params = model.encoder.parameters();
    for (const Tensor& t : model.first.parameters()) first_params.push_back(t);

    std::vector<std::pair<std::string, double>> results;
    results.emplace_back("encoder", grad_check(
                                        [&](Tape& tape) {
                                            Tensor e = model.encoder.embed(tape, s, vocab,
                                                                           Mode::Eval, rng);
                                            Tensor h = model.encoder.contextualize(tape, e,
                                                                                   Mode::Eval, rng);
                                            return mean(tape, h);
                                        },
                                        model.encoder.parameters()));
    results.emplace_back("first_order", grad_check(
                                            [&](Tape& tape) {
                                                Tensor e = model.encoder.embed(tape, s, vocab,
                                                                               Mode::Eval, rng);
                                                Tensor h = model.encoder.contextualize(
                                                    tape, e, Mode::Eval, rng);
                                                Tensor hh = model.encoder.project_head(tape, h);
                                                Tensor hd = model.encoder.project_dep(tape, h);
                                                ScoreSet scores =
                                                    model.first.score(tape, hh, hd, config);
                                                return add(tape, mean(tape, scores.edge),
                                                           mean(tape, scores.label));
                                            },
                                            first_params));
    results.emplace_back("second_order", grad_check(
                                             [&](Tape& tape) {
                                                 ScoreSet scores =
                                                     model.forward(tape, s, Mode::Eval, rng);
                                                 return mean(tape, scores.edge);
                                             },
                                             model.parameters()));
    results.emplace_back("loss", grad_check(
                                     [&](Tape& tape) {
                                         ScoreSet scores = model.forward(tape, s, Mode::Eval, rng);
                                         return model.compute_loss(tape, scores, gold);
                                     },
                                     model.parameters()));

    bool ok = true;
    for (const auto& [name, err] : results) {
        const bool pass = err < 1e-4;
        ok = ok && pass;
        std::cout << std::left << std::setw(14) << name << " max_rel_err=" << std::scientific
                  << std::setprecision(3) << err << (pass ? " PASS" : " FAIL") << "\n";
    }
    return ok ? 0 : 1;
}

// --------------------------------------------------------------- ablate ----

int run_ablate(const std::string& config_path, const std::string& data_dir) {
    Config base = apply_env_overrides(load_config_file(config_path));
    validate_config(base);
    Corpus train = load_reported(data_dir + "/train.json");
    Corpus dev = load_reported(data_dir + "/dev.json");

    // Scorer toggles per row; masks come off before scorers do.
    struct Row {
        const char* name;
        bool use_sfa, mask_first, use_second, mask_second;
    };
    const Row rows[] = {
        {"SFA2o", true, true, true, true},      {"-2o-mask", true, true, true, false},
        {"-1o-mask", true, false, true, false}, {"SFA", true, true, false, false},
        {"BiAF", false, false, false, false},
    };

    std::cout << "seed=" << base.seed << " train_sentences=" << train.entries.size()
              << " dev_sentences=" << dev.entries.size() << " (identical for every row)\n";
    std::cout << std::left << std::setw(10) << "config" << std::right << std::setw(14)
              << "sentiment_f1" << std::setw(14) << "edge_f1" << std::setw(14) << "avg_span_f1"
              << std::setw(12) << "best_epoch" << "\n";
    for (const Row& row : rows) {
        Config config = base;
        config.use_sfa = row.use_sfa;
        config.sfa_mask_first = row.mask_first;
        config.use_second_order = row.use_second;
        config.sfa_mask_second = row.mask_second;
        std::cerr << "ablate: training " << row.name << "\n";
        TrainResult result = train_model(config, train, dev);
        MetricsReport report = eval_model(result.best_model(), dev);
        std::cout << std::left << std::setw(10) << row.name << std::right << std::fixed
                  << std::setprecision(4) << std::setw(14) << report.sentiment_graph.f1
                  << std::setw(14) << report.labeled_edge.f1 << std::setw(14)
                  << report.avg_span_f1 << std::setw(12) << result.best_epoch << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"structured sentiment analysis as dependency graph parsing"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    std::string config_path, data_path, out_path, model_path, pred_path, graphs_path;
    bool head_first = false;

    CLI::App* train = app.add_subcommand("train", "train a parser; writes checkpoint + metrics log");
    train->add_option("--config", config_path, "key=value config file")->required();
    train->add_option("--data", data_path, "directory holding train.json and dev.json")->required();
    train->add_option("--out", out_path, "output directory")->required();

    CLI::App* eval = app.add_subcommand("eval", "score a model or a predictions file against gold");
    eval->add_option("--model", model_path, "checkpoint to evaluate");
    eval->add_option("--pred", pred_path, "predictions corpus to score instead of a model");
    eval->add_option("--data", data_path, "gold corpus file")->required();
    eval->add_flag("--head-first", head_first, "encode graphs head-first (used with --pred)");

    CLI::App* predict = app.add_subcommand("predict", "write model predictions as a corpus file");
    predict->add_option("--model", model_path, "checkpoint to load")->required();
    predict->add_option("--data", data_path, "input corpus file")->required();
    predict->add_option("--out", out_path, "predictions file to write")->required();
    predict->add_option("--graphs", graphs_path, "optional TSV dump of predicted graphs");

    CLI::App* convert = app.add_subcommand("convert", "encode a corpus as graphs with round-trip check");
    convert->add_option("--data", data_path, "input corpus file")->required();
    convert->add_option("--out", out_path, "graph TSV file to write")->required();
    convert->add_flag("--head-first", head_first, "use head-first span encoding");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");

    CLI::App* ablate = app.add_subcommand("ablate", "train the five scorer-toggle configurations");
    ablate->add_option("--config", config_path, "key=value config file")->required();
    ablate->add_option("--data", data_path, "directory holding train.json and dev.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(train)) return run_train(config_path, data_path, out_path);
        if (app.got_subcommand(eval)) return run_eval(model_path, pred_path, data_path, !head_first);
        if (app.got_subcommand(predict))
            return run_predict(model_path, data_path, out_path, graphs_path);
        if (app.got_subcommand(convert)) return run_convert(data_path, out_path, !head_first);
        if (app.got_subcommand(gradcheck)) return run_gradcheck();
        if (app.got_subcommand(ablate)) return run_ablate(config_path, data_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
