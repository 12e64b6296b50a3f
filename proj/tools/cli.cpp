#include "cli.hpp"

#include "sepsearch/config.hpp"
#include "sepsearch/embedding_store.hpp"
#include "sepsearch/error.hpp"
#include "sepsearch/eval_metrics.hpp"
#include "sepsearch/io.hpp"
#include "sepsearch/ivf_index.hpp"
#include "sepsearch/retrieval.hpp"
#include "sepsearch/scenario_lab.hpp"
#include "sepsearch/search_head.hpp"
#include "sepsearch/trainer.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <optional>
#include <ostream>

namespace sepsearch::cli {

namespace fs = std::filesystem;

namespace {

std::string version_text() {
    return "sepsearch 1.0.0\n"
           "embeddings SEPE v" + std::to_string(kEmbeddingFormatVersion) + "\n"
           "head SEPH v" + std::to_string(kHeadFormatVersion) + "\n"
           "index SEPI v" + std::to_string(kIndexFormatVersion);
}

void require_file(const std::string& path) {
    if (!fs::is_regular_file(path)) throw Error(ErrorCode::IoFailure, "input file not found: " + path);
}

void require_dir(const std::string& path) {
    if (!fs::is_directory(path)) throw Error(ErrorCode::IoFailure, "input directory not found: " + path);
}

void require_output(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) {
        throw Error(ErrorCode::IoFailure, "output directory does not exist: " + parent.string());
    }
}

SearchHead head_from_config(const KeyValueConfig& kv, std::size_t query_dim, std::size_t item_dim) {
    kv.require_known({"kind", "hidden", "activation", "bias", "seed"});
    const auto kind = parse_head_kind(kv.get_string("kind", "linear"));
    HeadOptions options;
    options.hidden_activation = parse_activation(kv.get_string("activation", "tanh"));
    options.linear_bias = kv.get_bool("bias", false);
    return init_head(kind, query_dim, item_dim, kv.get_size_list("hidden"), kv.get_u64("seed", 0), options);
}

struct Options {
    std::size_t threads = 1;

    std::string spec_path, out_path, data_dir, head_config, train_config, head_path, queries_path, items_path,
        index_path, run_path, qrels_path, grid_path, log_path;
    std::string tag = "sepsearch";
    std::size_t k = 10;
    std::size_t nprobe = 1;
    std::size_t clusters = 16;
    std::size_t iters = 10;
    std::uint64_t seed = 0;
    std::vector<std::size_t> ks{1, 10};
    bool per_query = false;
};

void cmd_gen_data(const Options& o, std::ostream& out) {
    require_file(o.spec_path);
    const auto spec = load_scenario_spec(o.spec_path);
    auto [a, b] = gen_synthetic(spec);
    save_dataset(a, fs::path(o.out_path) / "A");
    save_dataset(b, fs::path(o.out_path) / "B");
    out << "wrote " << o.out_path << "/A and " << o.out_path << "/B\n";
}

void cmd_train(const Options& o, std::ostream& out) {
    require_dir(o.data_dir);
    require_file(o.head_config);
    require_file(o.train_config);
    require_output(o.out_path);
    if (!o.log_path.empty()) require_output(o.log_path);

    const auto ds = load_dataset(o.data_dir);
    const auto head = head_from_config(KeyValueConfig::load(o.head_config), ds.queries.dim(), ds.items.dim());
    const auto cfg = load_train_config(o.train_config);
    const auto report = train_head(ds, head, cfg);
    save_head(report.head, o.out_path);
    if (!o.log_path.empty()) write_file_atomic(o.log_path, format_loss_log(report));
    out << "steps=" << report.steps << " final_loss=" << report.epoch_losses.back() << "\n";
}

void cmd_fold(const Options& o, std::ostream& out) {
    require_file(o.head_path);
    require_file(o.queries_path);
    require_output(o.out_path);
    const auto folded = fold_head(load_head(o.head_path), load_embeddings(o.queries_path));
    save_embeddings(folded, o.out_path);
    out << "folded " << folded.count() << " queries to dim " << folded.dim() << "\n";
}

void cmd_index(const Options& o, std::ostream& out) {
    require_file(o.items_path);
    require_output(o.out_path);
    const auto index = build_ivf(load_embeddings(o.items_path), o.clusters, o.iters, o.seed);
    save_index(index, o.out_path);
    out << "indexed into " << index.clusters() << " buckets\n";
}

void cmd_search(const Options& o, std::ostream& out) {
    if (!o.head_path.empty()) require_file(o.head_path);
    require_file(o.queries_path);
    require_file(o.items_path);
    if (!o.index_path.empty()) require_file(o.index_path);
    require_output(o.out_path);

    auto queries = load_embeddings(o.queries_path);
    const auto items = load_embeddings(o.items_path);
    if (!o.head_path.empty()) {
        // Transformed queries are materialized at storage precision, exactly
        // what `fold` would write, so both routes produce the same run.
        queries = round_to_storage_precision(fold_head(load_head(o.head_path), queries));
    }
    const auto identity = SearchHead::identity();
    identity.check_bridges(queries.dim(), items.dim());

    std::vector<RankedList> runs;
    if (o.index_path.empty()) {
        runs = search_exact(identity, queries, items, o.k, o.threads);
    } else {
        const auto index = load_index(o.index_path);
        check_index_matches(index, items);
        runs.reserve(queries.count());
        for (std::size_t q = 0; q < queries.count(); ++q) {
            runs.push_back(search_ivf(index, items, queries.row(q), o.k, o.nprobe, queries.ids()[q]));
        }
    }
    save_run(runs, o.tag, o.out_path);
    out << "searched " << runs.size() << " queries\n";
}

void cmd_eval(const Options& o, std::ostream& out) {
    require_file(o.run_path);
    require_file(o.qrels_path);
    if (!o.out_path.empty()) require_output(o.out_path);
    const auto report = evaluate_run(load_run(o.run_path), load_qrels(o.qrels_path), o.ks);
    const auto tsv = format_metrics_tsv(report, o.per_query);
    if (o.out_path.empty()) {
        out << tsv;
    } else {
        write_file_atomic(o.out_path, tsv);
    }
    out << format_metrics_summary(report) << "\n";
}

TrainConfig scenario_config(const Options& o) {
    if (o.train_config.empty()) return default_scenario_train_config();
    require_file(o.train_config);
    return load_train_config(o.train_config);
}

void cmd_scenario(const Options& o, std::ostream& out) {
    require_file(o.spec_path);
    if (!o.train_config.empty()) require_file(o.train_config);
    if (!o.out_path.empty()) require_output(o.out_path);
    const auto spec = load_scenario_spec(o.spec_path);
    const auto report = run_scenario(spec, scenario_config(o));
    const auto text = format_scenario_report(report);
    if (!o.out_path.empty()) write_file_atomic(o.out_path, text);
    out << text;
}

void cmd_sweep(const Options& o, std::ostream& out) {
    require_file(o.spec_path);
    require_file(o.grid_path);
    if (!o.train_config.empty()) require_file(o.train_config);
    require_output(o.out_path);
    const auto spec = load_scenario_spec(o.spec_path);
    const auto grid = KeyValueConfig::load(o.grid_path);
    grid.require_known({"head_sizes", "specificities"});
    const auto rows = bottleneck_sweep(spec, grid.get_size_list("head_sizes"), grid.get_double_list("specificities"),
                                       scenario_config(o));
    const auto tsv = format_sweep_tsv(rows);
    write_file_atomic(o.out_path, tsv);
    out << tsv;
}

} // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dense retrieval with a trainable search head over frozen embeddings", "sepsearch"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.set_version_flag("--version", version_text());

    Options o;
    app.add_option("--threads", o.threads, "Worker threads for search (1 = deterministic default)")
        ->check(CLI::PositiveNumber);

    auto* gen = app.add_subcommand("gen-data", "Generate scenario datasets A and B");
    gen->add_option("--spec", o.spec_path, "Scenario spec (key=value)")->required();
    gen->add_option("--out", o.out_path, "Output directory")->required();

    auto* train = app.add_subcommand("train", "Train a search head on precomputed embeddings");
    train->add_option("--data", o.data_dir, "Dataset directory")->required();
    train->add_option("--head-config", o.head_config, "Head config (key=value)")->required();
    train->add_option("--train-config", o.train_config, "Training config (key=value)")->required();
    train->add_option("--out", o.out_path, "Output head checkpoint")->required();
    train->add_option("--log", o.log_path, "Loss log TSV");

    auto* fold = app.add_subcommand("fold", "Fold a head into query embeddings");
    fold->add_option("--head", o.head_path, "Head checkpoint")->required();
    fold->add_option("--queries", o.queries_path, "Query embeddings")->required();
    fold->add_option("--out", o.out_path, "Output embeddings")->required();

    auto* index = app.add_subcommand("index", "Build an IVF index over item embeddings");
    index->add_option("--items", o.items_path, "Item embeddings")->required();
    index->add_option("--clusters", o.clusters, "Number of buckets C")->check(CLI::PositiveNumber);
    index->add_option("--iters", o.iters, "k-means iterations");
    index->add_option("--seed", o.seed, "k-means seed");
    index->add_option("--out", o.out_path, "Output index")->required();

    auto* search = app.add_subcommand("search", "Rank items for every query");
    search->add_option("--head", o.head_path, "Head checkpoint applied to queries");
    search->add_option("--queries", o.queries_path, "Query embeddings")->required();
    search->add_option("--items", o.items_path, "Item embeddings")->required();
    search->add_option("--index", o.index_path, "IVF index (exact search when absent)");
    search->add_option("--nprobe", o.nprobe, "Buckets to scan with --index")->check(CLI::PositiveNumber);
    search->add_option("--k", o.k, "Results per query")->check(CLI::PositiveNumber);
    search->add_option("--tag", o.tag, "Run tag");
    search->add_option("--out", o.out_path, "Output run file")->required();

    auto* eval = app.add_subcommand("eval", "Evaluate a run against qrels");
    eval->add_option("--run", o.run_path, "Run file")->required();
    eval->add_option("--qrels", o.qrels_path, "Qrels TSV")->required();
    eval->add_option("--ks", o.ks, "Cutoffs, comma separated")->delimiter(',');
    eval->add_option("--out", o.out_path, "Metrics TSV (stdout when absent)");
    eval->add_flag("--per-query", o.per_query, "Append per-query metrics");

    auto* scenario = app.add_subcommand("scenario", "Run one thought-experiment scenario");
    scenario->add_option("--spec", o.spec_path, "Scenario spec (key=value)")->required();
    scenario->add_option("--train-config", o.train_config, "Training config (key=value)");
    scenario->add_option("--out", o.out_path, "Report TSV");

    auto* sweep = app.add_subcommand("sweep", "Sweep encoding specificity against head size");
    sweep->add_option("--spec", o.spec_path, "Base scenario spec (key=value)")->required();
    sweep->add_option("--grid", o.grid_path, "Grid config: head_sizes=..., specificities=...")->required();
    sweep->add_option("--train-config", o.train_config, "Training config (key=value)");
    sweep->add_option("--out", o.out_path, "Output TSV")->required();

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        err << "UsageError\n" << app.help();
        return 2;
    }

    try {
        if (gen->parsed()) cmd_gen_data(o, out);
        else if (train->parsed()) cmd_train(o, out);
        else if (fold->parsed()) cmd_fold(o, out);
        else if (index->parsed()) cmd_index(o, out);
        else if (search->parsed()) cmd_search(o, out);
        else if (eval->parsed()) cmd_eval(o, out);
        else if (scenario->parsed()) cmd_scenario(o, out);
        else if (sweep->parsed()) cmd_sweep(o, out);
    } catch (const Error& e) {
        err << e.name() << "\n" << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "IoFailure\n" << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace sepsearch::cli
