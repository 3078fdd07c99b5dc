#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sfa/trainer.hpp"

using namespace sfa;

namespace {

std::string data_path(const std::string& rel) { return std::string(SFA_DATA_DIR) + "/" + rel; }

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

// Small enough to train in milliseconds, every component still on.
Config tiny_config() {
    Config c;
    c.word_dim = 8;
    c.pos_dim = 4;
    c.lemma_dim = 0;
    c.char_dim = 0;
    c.lstm_hidden = 8;
    c.lstm_layers = 1;
    c.proj_dim = 8;
    c.sfa_heads = 2;
    c.sfa_window = 2;
    c.second_order_rank = 2;
    c.mfvi_iterations = 2;
    c.dropout = 0.1;
    c.batch_size = 4;
    c.patience = 50;
    c.seed = 7;
    return c;
}

Model tiny_model(const Corpus& corpus, const Config& config) {
    Vocab vocab = build_vocab(corpus);
    std::mt19937 rng(static_cast<unsigned>(config.seed));
    return Model::init(config, vocab, LabelSet::sentiment(), rng);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

TEST_CASE("config text parses with comments, quotes, and overrides", "[trainer]") {
    Config c = parse_config_text("# comment\nword_dim = 12\nuse_sfa = false\n"
                                 "external_vectors = \"vecs.txt\"\ndropout = 0.5 # tail\n");
    CHECK(c.word_dim == 12);
    CHECK(c.use_sfa == false);
    CHECK(c.external_vectors == "vecs.txt");
    CHECK(c.dropout == 0.5);
    CHECK(c.batch_size == 16); // untouched default

    CHECK_THROWS_AS(parse_config_text("word_dim = twelve\n"), Error);
    CHECK_THROWS_AS(parse_config_text("no_such_key = 1\n"), Error);
    CHECK_THROWS_AS(parse_config_text("word_dim 12\n"), Error);
    try {
        parse_config_text("word_dim = 4\nbogus = 1\n");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("bogus") != std::string::npos);
    }

    setenv("SFA_BATCH_SIZE", "4", 1);
    setenv("SFA_USE_SFA", "false", 1);
    Config env = apply_env_overrides(Config{});
    unsetenv("SFA_BATCH_SIZE");
    unsetenv("SFA_USE_SFA");
    CHECK(env.batch_size == 4);
    CHECK(env.use_sfa == false);
}

TEST_CASE("config validation rejects bad rates and empty feature sets", "[trainer]") {
    CHECK_NOTHROW(validate_config(Config{}));
    Config c = Config{};
    c.dropout = 1.0;
    CHECK_THROWS_AS(validate_config(c), Error);
    c = Config{};
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(validate_config(c), Error);
    c = Config{};
    c.batch_size = 0;
    CHECK_THROWS_AS(validate_config(c), Error);
    c = Config{};
    c.mfvi_iterations = -1;
    CHECK_THROWS_AS(validate_config(c), Error);
    c = Config{};
    c.word_dim = c.pos_dim = c.lemma_dim = c.char_dim = c.ext_dim = 0;
    CHECK_THROWS_AS(validate_config(c), Error);
}

TEST_CASE("learning rate decays by exact multiplication at interval bounds", "[trainer]") {
    Config c;
    double previous = c.learning_rate;
    for (long k = 0; k <= 6; ++k) {
        double expect = c.learning_rate;
        for (long i = 0; i < k; ++i) expect *= c.decay_factor;
        CHECK(learning_rate_at(c, k * c.decay_steps) == expect);
        if (k > 0) CHECK(learning_rate_at(c, k * c.decay_steps - 1) == previous);
        previous = expect;
    }
    CHECK(learning_rate_at(c, 0) == 1e-3);
    CHECK(learning_rate_at(c, 4999) == 1e-3);
    CHECK(learning_rate_at(c, 5000) == 1e-3 * 0.75);
}

TEST_CASE("adam ignores zero gradients and minimizes a quadratic", "[trainer]") {
    std::mt19937 rng(3);
    Tensor w = Tensor::uniform({4}, 1.0, rng);
    std::vector<double> before = w.value();
    Adam adam({w});
    adam.zero_grad();
    adam.step(0.1);
    adam.step(0.1);
    CHECK(w.value() == before);

    // minimize |w - t|^2
    Tensor target = Tensor::from({4}, {1.0, -2.0, 0.5, 3.0});
    Adam opt({w});
    for (int it = 0; it < 400; ++it) {
        opt.zero_grad();
        Tape tape;
        Tensor diff = add(tape, w, scale(tape, target, -1.0));
        Tensor loss = sum(tape, ewmul(tape, diff, diff));
        tape.backward(loss);
        opt.step(0.05);
    }
    for (int i = 0; i < 4; ++i) CHECK(std::abs(w.at(i) - target.at(i)) < 1e-3);
}

TEST_CASE("uniform zero scores cost ln2 per edge cell plus lnC per gold edge", "[trainer]") {
    Corpus corpus = load_corpus(data_path("fixture/train.json"));
    Model model = tiny_model(corpus, tiny_config());
    const int n = 5;

    DepGraph no_edges;
    no_edges.n = n;
    ScoreSet zero{Tensor::zeros({n, n}), Tensor::zeros({n, n, model.labels.size()})};
    Tape tape;
    Tensor edge_only = model.compute_loss(tape, zero, no_edges);
    CHECK(std::abs(edge_only.at(0) - std::log(2.0)) < 1e-14);

    DepGraph one_edge;
    one_edge.n = n;
    one_edge.add_edge(0, 2, "exp:Positive");
    Tensor both = model.compute_loss(tape, zero, one_edge);
    CHECK(std::abs(both.at(0) - (std::log(2.0) + std::log(6.0))) < 1e-12);
}

TEST_CASE("saturated correct scores cost nearly nothing", "[trainer]") {
    Corpus corpus = load_corpus(data_path("fixture/train.json"));
    Model model = tiny_model(corpus, tiny_config());
    const CorpusEntry& entry = corpus.entries[0];
    DepGraph gold = tuples_to_graph(entry.sentence, entry.tuples);
    ScoreSet scores{Tensor::zeros({gold.n, gold.n}),
                    Tensor::zeros({gold.n, gold.n, model.labels.size()})};
    for (int i = 0; i < gold.n; ++i)
        for (int j = 0; j < gold.n; ++j) scores.edge.at(i, j) = -40.0;
    for (const auto& [key, label] : gold.edges) {
        scores.edge.at(key.first, key.second) = 40.0;
        scores.label.at(key.first, key.second, model.labels.index(label)) = 40.0;
    }
    Tape tape;
    Tensor loss = model.compute_loss(tape, scores, gold);
    CHECK(loss.at(0) >= 0.0);
    CHECK(loss.at(0) < 1e-10);
}

TEST_CASE("end-to-end loss gradients match finite differences", "[trainer]") {
    Sentence s;
    s.id = "g-0";
    s.text = "ab cd ef gh";
    s.tokens = {"ab", "cd", "ef", "gh"};
    s.char_begin = {0, 3, 6, 9};
    s.char_end = {2, 5, 8, 11};
    CorpusEntry entry;
    entry.sentence = s;
    entry.tuples = {SentimentTuple{{0, 1}, {2, 3}, {1, 2}, Polarity::Positive}};
    Corpus corpus;
    corpus.entries = {entry};

    Config config = tiny_config();
    config.word_dim = 3;
    config.pos_dim = 0;
    config.char_dim = 2;
    config.char_hidden = 2;
    config.lstm_hidden = 3;
    config.proj_dim = 3;
    config.dropout = 0.0;
    Model model = tiny_model(corpus, config);
    DepGraph gold = tuples_to_graph(s, entry.tuples, config.head_final);

    std::mt19937 rng(0);
    auto f = [&](Tape& tape) {
        ScoreSet scores = model.forward(tape, s, Mode::Eval, rng);
        return model.compute_loss(tape, scores, gold);
    };
    CHECK(grad_check(f, model.parameters()) < 1e-4);
}

TEST_CASE("checkpoint save-load-save is byte stable and score exact", "[trainer]") {
    Corpus corpus = load_corpus(data_path("fixture/train.json"));
    Model model = tiny_model(corpus, tiny_config());
    const std::string path1 = temp_path("sfa_ckpt_a.json");
    const std::string path2 = temp_path("sfa_ckpt_b.json");
    save_checkpoint(model, path1);
    Model loaded = load_checkpoint(path1);
    save_checkpoint(loaded, path2);
    CHECK(slurp(path1) == slurp(path2));

    const Sentence& s = corpus.entries[0].sentence;
    std::mt19937 rng(0);
    Tape tape;
    Tensor a = model.forward(tape, s, Mode::Eval, rng).edge;
    Tensor b = loaded.forward(tape, s, Mode::Eval, rng).edge;
    REQUIRE(a.shape() == b.shape());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.value()[i] == b.value()[i]);

    nlohmann::json j = nlohmann::json::parse(slurp(path1));
    nlohmann::json missing = j;
    missing["params"].erase("encoder.root");
    CHECK_THROWS_AS(model_from_json(missing), Error);
    nlohmann::json bad_shape = j;
    bad_shape["params"]["encoder.root"]["shape"] = {1, 1};
    CHECK_THROWS_AS(model_from_json(bad_shape), Error);
    nlohmann::json extra = j;
    extra["params"]["nobody.owns.me"] = {{"shape", {1}}, {"data", {0.0}}};
    CHECK_THROWS_AS(model_from_json(extra), Error);
    std::filesystem::remove(path1);
    std::filesystem::remove(path2);

    CHECK_THROWS_AS(load_checkpoint(temp_path("sfa_no_such_ckpt.json")), Error);
}

TEST_CASE("zero epochs returns the initialization checkpoint", "[trainer]") {
    Corpus corpus = load_corpus(data_path("fixture/train.json"));
    Config config = tiny_config();
    config.max_epochs = 0;
    TrainResult result = train_model(config, corpus, corpus);
    CHECK(result.log.empty());
    CHECK(result.best_epoch == 0);
    CHECK(result.steps == 0);

    Model expect = tiny_model(corpus, config);
    CHECK(result.best_checkpoint.dump() == checkpoint_json(expect).dump());
}

TEST_CASE("training is deterministic for a fixed seed", "[trainer]") {
    Corpus corpus = load_corpus(data_path("fixture/train.json"));
    Corpus dev = load_corpus(data_path("fixture/dev.json"));
    Config config = tiny_config();
    config.max_epochs = 3;
    TrainResult a = train_model(config, corpus, dev);
    TrainResult b = train_model(config, corpus, dev);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].train_loss == b.log[i].train_loss);
        CHECK(a.log[i].dev_sentiment_f1 == b.log[i].dev_sentiment_f1);
        CHECK(a.log[i].lr == b.log[i].lr);
    }
    CHECK(a.steps == b.steps);
    CHECK(a.best_checkpoint.dump() == b.best_checkpoint.dump());
}

TEST_CASE("non-finite loss aborts naming the batch", "[trainer]") {
    Corpus corpus = load_corpus(data_path("fixture/train.json"));
    Config config = tiny_config();
    config.max_epochs = 1;
    Model model = tiny_model(corpus, config);
    model.encoder.head_w.value()[0] = std::nan("");
    try {
        train_loop(model, corpus, corpus);
        FAIL("expected an abort");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("epoch 1") != std::string::npos);
        CHECK(msg.find("tr-") != std::string::npos);
    }
}

TEST_CASE("early stopping respects patience", "[trainer]") {
    Corpus corpus = load_corpus(data_path("fixture/train.json"));
    Config config = tiny_config();
    config.max_epochs = 50;
    config.patience = 1;
    config.learning_rate = 1e-12; // effectively frozen: dev score cannot move
    TrainResult result = train_model(config, corpus, corpus);
    REQUIRE(result.log.size() == 2);
    CHECK(result.log[0].improved);
    CHECK_FALSE(result.log[1].improved);
}

TEST_CASE("metrics stream emits one json object per epoch", "[trainer]") {
    Corpus corpus = load_corpus(data_path("fixture/train.json"));
    Config config = tiny_config();
    config.max_epochs = 2;
    std::ostringstream log;
    train_model(config, corpus, corpus, &log);
    std::istringstream in(log.str());
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        nlohmann::json j = nlohmann::json::parse(line);
        CHECK(j["epoch"].get<int>() == lines);
        CHECK(j.contains("train_loss"));
        CHECK(j.contains("dev_sentiment_f1"));
        CHECK(j.contains("lr"));
    }
    CHECK(lines == 2);
}

TEST_CASE("a few epochs of training lower the loss", "[trainer]") {
    Corpus corpus = load_corpus(data_path("fixture/train.json"));
    Config config = tiny_config();
    config.max_epochs = 8;
    config.dropout = 0.0;
    TrainResult result = train_model(config, corpus, corpus);
    REQUIRE(result.log.size() == 8);
    CHECK(result.log.back().train_loss < result.log.front().train_loss);
}
