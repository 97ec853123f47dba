#include <imtriage/imtriage.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <pthread.h>
#include <thread>

namespace {

using json = nlohmann::json;

int fail(const char* what) {
    std::fprintf(stderr, "imtriage: %s: %s\n", what, imt_last_error());
    return 1;
}

struct ModelDeleter {
    void operator()(imt_model* m) const { imt_model_free(m); }
};
using ModelPtr = std::unique_ptr<imt_model, ModelDeleter>;

struct ServeArgs {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string data_dir;
    std::string model;
    double threshold = 0.6;
    std::uint64_t seed = 42;
    std::string extractor = "gray16";
    int hidden = 64;
};

int run_serve(const ServeArgs& a) {
    const json opts = {{"host", a.host},           {"port", a.port}, {"data_dir", a.data_dir},
                       {"model", a.model},         {"threshold", a.threshold}, {"seed", a.seed},
                       {"extractor", a.extractor}, {"hidden", a.hidden}};
    imt_server* server = nullptr;
    if (imt_server_create(opts.dump().c_str(), &server) != IMT_OK)
        return fail("cannot start server");
    int port = 0;
    if (imt_server_bind(server, &port) != IMT_OK) {
        imt_server_free(server);
        return fail("cannot bind");
    }

    // SIGINT/SIGTERM are blocked here and collected by a watcher thread, which
    // stops the server outside signal context.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    std::thread watcher([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        std::fprintf(stderr, "imtriage: shutting down\n");
        imt_server_stop(server);
    });

    std::fprintf(stderr, "imtriage: listening on http://%s:%d\n", a.host.c_str(), port);
    const imt_status st = imt_server_run(server);
    if (watcher.joinable()) {
        pthread_kill(watcher.native_handle(), SIGTERM);
        watcher.join();
    }
    imt_server_free(server);
    return st == IMT_OK ? 0 : fail("server stopped");
}

struct TrainArgs {
    std::string dataset;
    std::string out = "model.bin";
    imt_train_options options{};
    std::string extractor = "gray16";
};

int run_train(TrainArgs& a) {
    a.options.extractor = a.extractor.c_str();
    imt_model* raw = nullptr;
    double loss = 0.0;
    if (imt_train_dataset(a.dataset.c_str(), &a.options, &raw, &loss) != IMT_OK)
        return fail("training failed");
    ModelPtr model(raw);
    if (imt_model_save(model.get(), a.out.c_str()) != IMT_OK)
        return fail("cannot save model");
    std::printf("trained %d steps, final batch loss %.6f, saved %s\n", a.options.steps, loss, a.out.c_str());
    return 0;
}

struct EmbedArgs {
    std::string features;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<double> perplexity;
    std::optional<int> iterations;
};

int run_embed(const EmbedArgs& a) {
    json config = json::object();
    if (a.seed)
        config["seed"] = *a.seed;
    if (a.perplexity)
        config["tsne"]["perplexity"] = *a.perplexity;
    if (a.iterations)
        config["tsne"]["iterations"] = *a.iterations;
    char* csv = nullptr;
    if (imt_embed_features_file(a.features.c_str(), config.dump().c_str(), &csv) != IMT_OK)
        return fail("embedding failed");
    std::unique_ptr<char, decltype(&imt_string_free)> guard(csv, imt_string_free);
    if (a.out.empty() || a.out == "-") {
        std::fputs(csv, stdout);
        return 0;
    }
    std::ofstream f(a.out, std::ios::binary);
    f << csv;
    if (!f) {
        std::fprintf(stderr, "imtriage: cannot write %s\n", a.out.c_str());
        return 1;
    }
    return 0;
}

struct BenchArgs {
    std::string model;
    std::string dataset;
    int ways = 5;
    int shots = 1;
    int episodes = 500;
    std::uint64_t seed = 11;
};

int run_bench(const BenchArgs& a) {
    imt_model* raw = nullptr;
    if (imt_model_load(a.model.c_str(), &raw) != IMT_OK)
        return fail("cannot load model");
    ModelPtr model(raw);
    double acc = 0.0;
    if (imt_benchmark(model.get(), a.dataset.c_str(), a.ways, a.shots, a.episodes, a.seed, &acc) != IMT_OK)
        return fail("benchmark failed");
    std::printf("%d-way %d-shot accuracy over %d episodes: %.4f\n", a.ways, a.shots, a.episodes, acc);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interactive image triage: canvas embedding, few-shot grouping and layout service"};
    app.set_version_flag("--version", std::string(imt_version()));
    app.set_config("--config", "", "TOML/INI file with option defaults");
    app.require_subcommand(1);

    ServeArgs serve;
    auto* s = app.add_subcommand("serve", "Run the HTTP+JSON service");
    s->add_option("--host", serve.host, "Bind address")->envname("IMTRIAGE_HOST")->capture_default_str();
    s->add_option("--port", serve.port, "Port (0 picks a free one)")->envname("IMTRIAGE_PORT")->capture_default_str();
    s->add_option("--data-dir", serve.data_dir, "Session persistence directory (empty: in memory)")
        ->envname("IMTRIAGE_DATA_DIR");
    s->add_option("--model", serve.model, "Relation model file")->envname("IMTRIAGE_MODEL");
    s->add_option("--threshold", serve.threshold, "Auto-group confidence threshold")
        ->envname("IMTRIAGE_THRESHOLD")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    s->add_option("--seed", serve.seed, "Seed for embeddings")->envname("IMTRIAGE_SEED")->capture_default_str();
    s->add_option("--extractor", serve.extractor, "gray16 or rgbhist32+gray16")
        ->envname("IMTRIAGE_EXTRACTOR")
        ->capture_default_str();
    s->add_option("--hidden", serve.hidden, "Hidden width of a fresh model")->capture_default_str();

    TrainArgs train;
    imt_train_options_default(&train.options);
    auto* t = app.add_subcommand("train", "Pretrain a relation model on a class-per-folder image dataset");
    t->add_option("--dataset", train.dataset, "Dataset root")->required()->check(CLI::ExistingDirectory);
    t->add_option("--out", train.out, "Output model file")->capture_default_str();
    t->add_option("--steps", train.options.steps, "Optimizer steps")->capture_default_str();
    t->add_option("--batch-size", train.options.batch_size, "Pairs per step")->capture_default_str();
    t->add_option("--lr", train.options.learning_rate, "Adam learning rate")->capture_default_str();
    t->add_option("--seed", train.options.seed, "Seed")->capture_default_str();
    t->add_option("--hidden", train.options.hidden, "Hidden width")->capture_default_str();
    t->add_option("--extractor", train.extractor, "gray16 or rgbhist32+gray16")->capture_default_str();

    EmbedArgs embed;
    auto* e = app.add_subcommand("embed", "Embed a feature file and print <id>,<x>,<y> lines");
    e->add_option("--features", embed.features, "Feature file")->required()->check(CLI::ExistingFile);
    e->add_option("--out", embed.out, "Output file (default stdout)");
    e->add_option("--seed", embed.seed, "Seed");
    e->add_option("--perplexity", embed.perplexity, "t-SNE perplexity");
    e->add_option("--iterations", embed.iterations, "t-SNE iterations");

    BenchArgs bench;
    auto* b = app.add_subcommand("bench", "Few-shot episodic accuracy of a model on a dataset");
    b->add_option("--model", bench.model, "Model file")->required()->check(CLI::ExistingFile);
    b->add_option("--dataset", bench.dataset, "Dataset root")->required()->check(CLI::ExistingDirectory);
    b->add_option("--ways", bench.ways, "Classes per episode")->capture_default_str();
    b->add_option("--shots", bench.shots, "Support examples per class")->capture_default_str();
    b->add_option("--episodes", bench.episodes, "Episodes")->capture_default_str();
    b->add_option("--seed", bench.seed, "Seed")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    if (*s)
        return run_serve(serve);
    if (*t)
        return run_train(train);
    if (*e)
        return run_embed(embed);
    return run_bench(bench);
}
