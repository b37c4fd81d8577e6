#include "taxoenrich/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "taxoenrich/checkpoint.hpp"
#include "taxoenrich/embeddings.hpp"
#include "taxoenrich/evaluator.hpp"
#include "taxoenrich/paths.hpp"
#include "taxoenrich/taxonomy.hpp"

namespace taxoenrich::cli {

namespace {

class UsageError : public Error {
public:
    using Error::Error;
};

void require(const std::string& value, const char* flag) {
    if (value.empty()) throw UsageError(std::string("missing required option ") + flag);
}

void require_file(const std::string& path, const char* flag) {
    require(path, flag);
    if (!std::filesystem::is_regular_file(path)) throw Error(std::string(flag) + " file not found: '" + path + "'");
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    return in;
}

Taxonomy load_tax(const RunConfig& rc) {
    require_file(rc.paths.terms, "--terms");
    require_file(rc.paths.edges, "--edges");
    auto tax = load_taxonomy_files(rc.paths.terms, rc.paths.edges);
    return rc.pseudo_root.empty() ? tax : add_pseudo_root(tax, rc.pseudo_root);
}

std::vector<std::pair<NodeId, std::string>> load_query_terms(const std::string& path) {
    if (path.empty()) return {};
    require_file(path, "--query-terms");
    auto terms = open_in(path);
    std::istringstream no_edges;
    return load_taxonomy(terms, no_edges).terms();
}

EmbeddingTable load_embeddings(const RunConfig& rc) {
    require_file(rc.paths.embeddings, "--embeddings");
    return load_table_file(rc.paths.embeddings);
}

QuerySet load_queries(const std::string& path, const char* flag) {
    require_file(path, flag);
    auto in = open_in(path);
    return read_query_set(in);
}

std::string one_line(std::string text) {
    for (auto& c : text)
        if (c == '\n' || c == '\r') c = ' ';
    return text;
}

std::string mode_name(CandidateMode mode) { return mode == CandidateMode::Completion ? "completion" : "expansion"; }

CorpusOptions corpus_options(const RunConfig& rc) {
    CorpusOptions o;
    o.max_paths = rc.train.max_paths;
    o.seed = rc.train.seed;
    o.ancestral_template = parse_template(rc.ancestral_template);
    o.descendant_template = parse_template(rc.descendant_template);
    return o;
}

int cmd_build(const RunConfig& rc, std::ostream& out) {
    auto tax = load_tax(rc);
    std::ostringstream sink;
    auto sentences = emit_sentence_corpus(tax, corpus_options(rc), sink);
    out << "nodes: " << tax.num_nodes() << '\n'
        << "edges: " << tax.num_edges() << '\n'
        << "roots: " << tax.roots().size() << '\n'
        << "leaves: " << tax.leaves().size() << '\n'
        << "depth: " << tax.depth() << '\n'
        << "sentences: " << sentences << '\n';
    return 0;
}

int cmd_sentences(const RunConfig& rc, std::ostream& out) {
    auto tax = load_tax(rc);
    require(rc.paths.out, "--out");
    auto sink = open_out(rc.paths.out);
    auto n = emit_sentence_corpus(tax, corpus_options(rc), sink);
    out << "wrote " << n << " sentences to " << rc.paths.out << '\n';
    return 0;
}

int cmd_embed_fallback(const RunConfig& rc, std::ostream& out) {
    auto tax = load_tax(rc);
    require(rc.paths.out, "--out");
    std::vector<PseudoSentence> corpus;
    if (!rc.paths.sentences.empty()) {
        require_file(rc.paths.sentences, "--sentences");
        auto in = open_in(rc.paths.sentences);
        corpus = read_sentence_corpus(in);
    } else {
        std::stringstream buffer;
        emit_sentence_corpus(tax, corpus_options(rc), buffer);
        corpus = read_sentence_corpus(buffer);
    }
    auto names = tax.terms();
    for (auto& t : load_query_terms(rc.paths.query_terms)) names.push_back(std::move(t));
    auto table = build_fallback_table(corpus, names, rc.dim, rc.train.seed);
    write_table_file(table, rc.paths.out);
    out << "wrote " << table.size() << " rows of dim " << table.dim() << " to " << rc.paths.out << '\n';
    return 0;
}

int cmd_import(const RunConfig& rc, std::ostream& out) {
    auto tax = load_tax(rc);
    auto table = load_embeddings(rc);
    auto missing = missing_rows(table, tax);
    if (!missing.empty()) {
        throw Error("embedding table '" + rc.paths.embeddings + "' lacks " + std::to_string(missing.size()) +
                    " taxonomy node(s), first '" + missing.front() + "'");
    }
    out << "rows: " << table.size() << '\n' << "dim: " << table.dim() << '\n';
    return 0;
}

int cmd_split(const RunConfig& rc, std::ostream& out) {
    auto tax = load_tax(rc);
    require(rc.paths.out, "--out");
    auto split = split_dataset(tax, rc.n_val, rc.n_test, rc.train.seed);
    std::filesystem::create_directories(rc.paths.out);
    const std::filesystem::path dir(rc.paths.out);
    {
        auto terms = open_out((dir / "seed.terms").string());
        auto edges = open_out((dir / "seed.edges").string());
        write_taxonomy(split.seed, terms, edges);
    }
    {
        auto val = open_out((dir / "val.queries").string());
        write_query_set(split.validation, val);
        auto test = open_out((dir / "test.queries").string());
        write_query_set(split.test, test);
    }
    out << "seed: " << split.seed.num_nodes() << " nodes, " << split.seed.num_edges() << " edges\n"
        << "validation: " << split.validation.size() << " queries\n"
        << "test: " << split.test.size() << " queries\n";
    return 0;
}

template <typename Scalar>
int train_with(const RunConfig& rc, const Taxonomy& tax, const EmbeddingTable& table, const QuerySet& val,
               std::ostream& out) {
    std::ofstream log_file;
    if (!rc.paths.log.empty()) log_file = open_out(rc.paths.log);
    auto result = train<Scalar>(tax, table, val, rc.train, rc.paths.log.empty() ? nullptr : &log_file);
    write_checkpoint_file(result.params, config_json(rc.train), rc.paths.checkpoint);
    out << "epochs: " << result.log.size() << '\n' << "best epoch: " << result.best_epoch << '\n';
    if (!val.empty()) out << "best validation MR: " << result.best_val_mr << '\n';
    out << "checkpoint: " << rc.paths.checkpoint << '\n';
    return 0;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
    auto tax = load_tax(rc);
    auto table = load_embeddings(rc);
    require(rc.paths.checkpoint, "--checkpoint");
    QuerySet val;
    if (!rc.paths.queries.empty()) val = load_queries(rc.paths.queries, "--queries");
    if (rc.precision == 64) return train_with<double>(rc, tax, table, val, out);
    return train_with<float>(rc, tax, table, val, out);
}

EvalOptions eval_options(const RunConfig& rc) {
    EvalOptions o;
    o.mode = rc.train.mode;
    o.ks = rc.ks;
    o.t_eval = static_cast<std::size_t>(rc.train.t_eval);
    o.seed = rc.train.sibling_seed;
    o.threads = rc.train.threads;
    return o;
}

int loaded_precision(const RunConfig& rc) {
    require_file(rc.paths.checkpoint, "--checkpoint");
    if (rc.precision != 0) return rc.precision;
    return checkpoint_scalar_bytes(rc.paths.checkpoint) == 8 ? 64 : 32;
}

template <typename Scalar>
int eval_with(const RunConfig& rc, const Taxonomy& tax, const EmbeddingTable& table, const QuerySet& queries,
              std::ostream& out) {
    auto ck = load_checkpoint_file<Scalar>(rc.paths.checkpoint);
    auto options = eval_options(rc);
    auto evaluation = evaluate(ck.params, queries, tax, table, options);
    std::map<std::string, std::string> metadata = {
        {"mode", mode_name(options.mode)},
        {"variant", to_string(ck.params.variant)},
        {"t_eval", std::to_string(options.t_eval)},
        {"seed", std::to_string(options.seed)},
        {"precision", std::to_string(8 * sizeof(Scalar))},
    };
    if (rc.paths.report.empty()) {
        write_report(evaluation.report, metadata, out);
    } else {
        auto report = open_out(rc.paths.report);
        write_report(evaluation.report, metadata, report);
    }
    if (!rc.paths.dump.empty()) {
        auto dump = open_out(rc.paths.dump);
        write_prediction_dump(evaluation.rankings, rc.top_k, dump);
    }
    return 0;
}

int cmd_eval(const RunConfig& rc, std::ostream& out) {
    auto tax = load_tax(rc);
    auto table = load_embeddings(rc);
    auto queries = load_queries(rc.paths.queries, "--queries");
    if (loaded_precision(rc) == 64) return eval_with<double>(rc, tax, table, queries, out);
    return eval_with<float>(rc, tax, table, queries, out);
}

NodeId resolve_query(const RunConfig& rc, const EmbeddingTable& table) {
    if (table.contains(rc.query)) return rc.query;
    for (const auto& [id, name] : load_query_terms(rc.paths.query_terms)) {
        if (name == rc.query && table.contains(id)) return id;
    }
    throw Error("no embedding for query '" + rc.query + "' (give an id from the table or a name via --query-terms)");
}

template <typename Scalar>
int predict_with(const RunConfig& rc, const Taxonomy& tax, const EmbeddingTable& table, std::ostream& out) {
    auto ck = load_checkpoint_file<Scalar>(rc.paths.checkpoint);
    auto id = resolve_query(rc, table);
    auto ranked = predict(ck.params, id, table.lookup_as<Scalar>(id), tax, table, rc.top_k, eval_options(rc));
    write_predictions(tax, ranked, out);
    return 0;
}

int cmd_predict(const RunConfig& rc, std::ostream& out) {
    auto tax = load_tax(rc);
    auto table = load_embeddings(rc);
    if (loaded_precision(rc) == 64) return predict_with<double>(rc, tax, table, out);
    return predict_with<float>(rc, tax, table, out);
}

int resolve_threads(const CLI::Option* flag, int value) {
    if (flag->count() > 0) return value;
    if (const char* env = std::getenv("TAXOENRICH_THREADS"); env && *env) {
        try {
            auto n = std::stoi(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
        }
        throw UsageError(std::string("TAXOENRICH_THREADS must be a positive integer, got '") + env + "'");
    }
    return 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig rc;
    std::string mode = "completion";
    std::string variant = "full";
    std::vector<double> lambda(rc.train.lambda.begin(), rc.train.lambda.end());
    int threads = 1;

    CLI::App app{"Taxonomy completion: rank insertion positions for new concepts."};
    app.name("taxoenrich");
    app.fallthrough();
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a TOML/INI file; flags override it");
    app.add_option("--terms", rc.paths.terms, "Terms file, id<TAB>name per line");
    app.add_option("--edges", rc.paths.edges, "Edges file, parent<TAB>child per line");
    app.add_option("--embeddings", rc.paths.embeddings, "TXE1 embedding table");
    app.add_option("--checkpoint", rc.paths.checkpoint, "TXM1 checkpoint (written by train, read by eval/predict)");
    app.add_option("--queries", rc.paths.queries, "Query file: validation for train, evaluation for eval");
    app.add_option("--query-terms", rc.paths.query_terms, "id<TAB>name of concepts outside the taxonomy");
    app.add_option("--pseudo-root", rc.pseudo_root, "Add a root with this name above all roots");
    app.add_option("--seed", rc.train.seed, "Seed for every random draw");
    app.add_option("--sibling-seed", rc.train.sibling_seed, "Seed for sibling sampling");
    auto* threads_flag = app.add_option("--threads", threads, "Worker threads (env TAXOENRICH_THREADS)")
                             ->check(CLI::PositiveNumber);
    app.add_option("--precision", rc.precision, "Working precision in bits")->check(CLI::IsMember({32, 64}));
    app.add_option("--max-paths", rc.train.max_paths, "Paths kept per node")->check(CLI::PositiveNumber);
    app.add_option("--mode", mode, "Candidate positions")->check(CLI::IsMember({"completion", "expansion"}));
    app.add_option("--t-eval", rc.train.t_eval, "Siblings attended at evaluation")->check(CLI::PositiveNumber);

    auto* build = app.add_subcommand("build", "Validate a taxonomy and print statistics");
    auto* sentences = app.add_subcommand("sentences", "Write the pseudo-sentence corpus");
    sentences->add_option("--out", rc.paths.out, "Output corpus file");
    for (auto* sub : {build, sentences}) {
        sub->add_option("--ancestral-template", rc.ancestral_template, "superclass or ascendant");
        sub->add_option("--descendant-template", rc.descendant_template, "subclass or descendant");
    }

    auto* embed = app.add_subcommand("embed-fallback", "Build a deterministic hashed embedding table");
    embed->add_option("--sentences", rc.paths.sentences, "Corpus file (generated in memory if omitted)");
    embed->add_option("--dim", rc.dim, "Embedding size")->check(CLI::PositiveNumber);
    embed->add_option("--out", rc.paths.out, "Output TXE1 file");

    auto* import = app.add_subcommand("import-embeddings", "Check a TXE1 table against a taxonomy");

    auto* split = app.add_subcommand("split", "Hold out validation and test queries");
    split->add_option("--n-val", rc.n_val, "Validation queries");
    split->add_option("--n-test", rc.n_test, "Test queries");
    split->add_option("--out", rc.paths.out, "Output directory");

    auto* train_cmd = app.add_subcommand("train", "Train a model on the seed taxonomy");
    train_cmd->add_option("--log", rc.paths.log, "Per-epoch JSON lines");
    train_cmd->add_option("--epochs", rc.train.max_epochs, "Maximum epochs")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--lr", rc.train.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    train_cmd->add_option("--batch-size", rc.train.batch_size, "Examples per step")->check(CLI::PositiveNumber);
    train_cmd->add_option("--negatives", rc.train.negatives, "Negatives per query")->check(CLI::PositiveNumber);
    train_cmd->add_option("--hidden-dim", rc.train.hidden_dim, "LSTM state size")->check(CLI::PositiveNumber);
    train_cmd->add_option("--slices", rc.train.slices, "NTN slices per scorer")->check(CLI::PositiveNumber);
    train_cmd->add_option("--t-train", rc.train.t_train, "Siblings attended in training")->check(CLI::PositiveNumber);
    train_cmd->add_option("--lambda", lambda, "Auxiliary loss weights for S1..S4")->expected(4);
    train_cmd->add_option("--lr-patience", rc.train.lr_patience, "Epochs before halving")->check(CLI::PositiveNumber);
    train_cmd->add_option("--early-stop", rc.train.early_stop_patience, "Early-stop patience")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--variant", variant, "Model variant")->check(CLI::IsMember({"full", "no-sibling"}));

    auto* eval = app.add_subcommand("eval", "Rank candidates for held-out queries and report metrics");
    eval->add_option("--report", rc.paths.report, "Metrics JSON (stdout if omitted)");
    eval->add_option("--ks", rc.ks, "Cutoffs for Recall@k and Precision@k");
    eval->add_option("--dump", rc.paths.dump, "Top-k predictions per query, TSV");
    eval->add_option("--top-k", rc.top_k, "Rows per query in the dump")->check(CLI::PositiveNumber);

    auto* predict_cmd = app.add_subcommand("predict", "Top positions for one query");
    predict_cmd->add_option("query", rc.query, "Query id or name")->required();
    predict_cmd->add_option("--top-k", rc.top_k, "Positions to print")->check(CLI::PositiveNumber);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 2;
    }

    try {
        rc.train.mode = mode == "expansion" ? CandidateMode::Expansion : CandidateMode::Completion;
        rc.train.variant = parse_variant(variant);
        std::copy(lambda.begin(), lambda.end(), rc.train.lambda.begin());
        rc.train.threads = resolve_threads(threads_flag, threads);
        std::sort(rc.ks.begin(), rc.ks.end());
        for (int k : rc.ks)
            if (k < 1) throw UsageError("--ks values must be at least 1");

        if (*build) return cmd_build(rc, out);
        if (*sentences) return cmd_sentences(rc, out);
        if (*embed) return cmd_embed_fallback(rc, out);
        if (*import) return cmd_import(rc, out);
        if (*split) return cmd_split(rc, out);
        if (*train_cmd) return cmd_train(rc, out);
        if (*eval) return cmd_eval(rc, out);
        if (*predict_cmd) return cmd_predict(rc, out);
    } catch (const UsageError& e) {
        err << "error: " << one_line(e.what()) << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << one_line(e.what()) << '\n';
        return 1;
    }
    return 2;
}

}  // namespace taxoenrich::cli
