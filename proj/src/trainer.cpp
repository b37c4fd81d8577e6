#include "taxoenrich/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "taxoenrich/nn/loss.hpp"

namespace taxoenrich {

namespace {

// Seed-derivation tags.
enum : std::uint64_t { kInitTag = 1, kExampleTag, kShuffleTag, kStepTag, kValidationTag };

void require_positive(bool ok, const char* field) {
    if (!ok) throw Error(std::string("training config: ") + field + " must be positive");
}

}  // namespace

void TrainConfig::validate() const {
    require_positive(lr > 0, "lr");
    require_positive(lr_factor > 0 && lr_factor <= 1, "lr_factor (at most 1)");
    require_positive(lr_patience > 0, "lr_patience");
    require_positive(max_epochs >= 0, "max_epochs (or zero)");
    require_positive(early_stop_patience > 0, "early_stop_patience");
    require_positive(batch_size > 0, "batch_size");
    require_positive(negatives > 0, "negatives");
    for (double l : lambda) require_positive(l >= 0, "lambda (or zero)");
    require_positive(t_train > 0, "t_train");
    require_positive(t_eval > 0, "t_eval");
    require_positive(slices > 0, "slices");
    require_positive(hidden_dim > 0, "hidden_dim");
    require_positive(max_paths > 0, "max_paths");
    require_positive(threads > 0, "threads");
}

std::vector<Position> masked_candidates(const TaxonomyView& view, CandidateMode mode) {
    const auto& tax = view.taxonomy();
    std::vector<Position> out;
    for (std::size_t i = 0; i < tax.num_nodes(); ++i) {
        auto p = static_cast<NodeIndex>(i);
        if (view.is_masked(p)) continue;
        if (mode == CandidateMode::Completion) {
            for (auto c : view.children(p)) out.push_back({Endpoint::node(tax.id(p)), Endpoint::node(tax.id(c))});
        }
        out.push_back({Endpoint::node(tax.id(p)), Endpoint::pseudo_leaf()});
    }
    return out;
}

std::vector<TrainingExample> generate_examples(const Taxonomy& seed_tax, const NodeId& query, int negatives, Rng& rng,
                                               CandidateMode mode) {
    auto q = seed_tax.index_of(query);
    const auto& parents = seed_tax.parents(q);
    const auto& children = seed_tax.children(q);
    if (parents.empty()) throw Error("query '" + query + "' has no parent to generate examples from");

    std::set<Position> positives;
    for (auto p : parents) {
        if (children.empty()) {
            positives.insert({Endpoint::node(seed_tax.id(p)), Endpoint::pseudo_leaf()});
        } else {
            for (auto c : children) positives.insert({Endpoint::node(seed_tax.id(p)), Endpoint::node(seed_tax.id(c))});
        }
    }
    std::set<NodeId> parent_ids, child_ids;
    for (auto p : parents) parent_ids.insert(seed_tax.id(p));
    for (auto c : children) child_ids.insert(seed_tax.id(c));
    auto label = [&](const Position& pos) {
        Labels l;
        l.y1 = pos.parent.is_node() && parent_ids.count(pos.parent.id) ? 1 : 0;
        l.y2 = pos.child.is_pseudo_leaf() ? (children.empty() ? 1 : 0) : (child_ids.count(pos.child.id) ? 1 : 0);
        l.y3 = l.y1;
        l.yp = positives.count(pos) ? 1 : 0;
        l.y4 = l.yp;
        return l;
    };

    std::vector<TrainingExample> out;
    for (const auto& pos : positives) out.push_back({query, pos, label(pos)});

    std::vector<Position> pool;
    for (auto& pos : masked_candidates(TaxonomyView(seed_tax, q), mode))
        if (!positives.count(pos)) pool.push_back(std::move(pos));
    const auto n = std::min(static_cast<std::size_t>(std::max(negatives, 0)), pool.size());
    for (std::size_t i = 0; i < n; ++i) {
        auto j = i + uniform_index(rng, pool.size() - i);
        std::swap(pool[i], pool[j]);
        out.push_back({query, pool[i], label(pool[i])});
    }
    return out;
}

template <typename Scalar>
LossBreakdown<Scalar> example_loss(const ModelParams<Scalar>& params, const EmbeddingTable& table, const Taxonomy& tax,
                                   const TrainingExample& ex, const TrainConfig& cfg, std::uint64_t path_seed,
                                   std::uint64_t sibling_seed, ModelParams<Scalar>* grads) {
    auto masked = tax.find(ex.query);
    TaxonomyView view = masked ? TaxonomyView(tax, *masked) : TaxonomyView(tax);
    Vector<Scalar> query = table.lookup_as<Scalar>(ex.query);
    Rng path_rng(path_seed);
    Rng sibling_rng(sibling_seed);
    EncoderOptions options{PathPolicy::Sample, cfg.max_paths};
    auto trace = forward_position(params, query, view, table, resolve(tax, ex.position.parent),
                                  resolve(tax, ex.position.child), static_cast<std::size_t>(cfg.t_train), options,
                                  path_rng, sibling_rng);

    const auto& s = trace.scores;
    const std::array<int, 4> labels = {ex.labels.y1, ex.labels.y2, ex.labels.y3, ex.labels.y4};
    const std::array<Scalar, 4> logits = {s.s1, s.s2, s.s3, s.s4};
    LossBreakdown<Scalar> out;
    auto primal = nn::bce_with_logits(s.sp, ex.labels.yp);
    out.parts[0] = primal.loss;
    out.total = primal.loss;
    std::array<Scalar, 4> d_aux = {};
    for (std::size_t i = 0; i < 4; ++i) {
        if (i == 2 && params.variant == Variant::NoSibling) continue;
        auto aux = nn::bce_with_logits(logits[i], labels[i]);
        const auto weight = static_cast<Scalar>(cfg.lambda[i]);
        out.parts[i + 1] = aux.loss;
        out.total += weight * aux.loss;
        d_aux[i] = weight * aux.d_logit;
    }
    if (grads) backward_position(params, trace, primal.d_logit, d_aux, *grads);
    return out;
}

template <typename Scalar>
Trainer<Scalar>::Trainer(ModelParams<Scalar> params, const Taxonomy& tax, const EmbeddingTable& table,
                         TrainConfig cfg)
    : params_(std::move(params)), tax_(&tax), table_(&table), cfg_(std::move(cfg)) {
    auto blocks = nn::tensors(params_);
    adam_ = nn::AdamState<Scalar>(std::span<const nn::TensorRef<Scalar>>(blocks), nn::AdamOptions{cfg_.lr});
    buffers_.assign(static_cast<std::size_t>(std::max(cfg_.threads, 1)), nn::zeros_like(params_));
}

template <typename Scalar>
LossBreakdown<double> Trainer<Scalar>::step(std::span<const TrainingExample> batch, std::uint64_t step_seed) {
    if (batch.empty()) throw Error("cannot take a step on an empty batch");
    const auto workers = std::min(buffers_.size(), batch.size());
    std::vector<LossBreakdown<double>> sums(workers);
    std::vector<std::exception_ptr> errors(workers);
    const auto chunk = (batch.size() + workers - 1) / workers;
    auto work = [&](std::size_t w) {
        try {
            auto& grads = buffers_[w];
            nn::set_zero(grads);
            for (std::size_t i = w * chunk; i < std::min(batch.size(), (w + 1) * chunk); ++i) {
                auto loss = example_loss(params_, *table_, *tax_, batch[i], cfg_, derive_seed(step_seed, i, 0),
                                         derive_seed(cfg_.sibling_seed, step_seed, i), &grads);
                sums[w].total += static_cast<double>(loss.total);
                for (std::size_t j = 0; j < 5; ++j) sums[w].parts[j] += static_cast<double>(loss.parts[j]);
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    auto& grads = buffers_[0];
    for (std::size_t w = 1; w < workers; ++w) nn::axpy(grads, buffers_[w], Scalar(1));
    const auto scale = Scalar(1) / static_cast<Scalar>(batch.size());
    ModelParams<Scalar>::visit(grads, [scale](const std::string&, auto& block) { block *= scale; });
    auto p = nn::tensors(params_);
    auto g = nn::tensors(grads);
    nn::adam_step(adam_, std::span<const nn::TensorRef<Scalar>>(p), std::span<const nn::TensorRef<Scalar>>(g));

    LossBreakdown<double> mean;
    const auto n = static_cast<double>(batch.size());
    for (const auto& s : sums) {
        mean.total += s.total / n;
        for (std::size_t j = 0; j < 5; ++j) mean.parts[j] += s.parts[j] / n;
    }
    return mean;
}

template <typename Scalar>
ModelParams<Scalar> initial_params(const EmbeddingTable& table, const TrainConfig& cfg) {
    return ModelParams<Scalar>::init({table.dim(), cfg.hidden_dim, cfg.slices}, cfg.variant,
                                     derive_seed(cfg.seed, kInitTag));
}

template <typename Scalar>
TrainResult<Scalar> train(const Taxonomy& seed_tax, const EmbeddingTable& table, const QuerySet& validation,
                          const TrainConfig& cfg, std::ostream* log) {
    cfg.validate();
    if (auto missing = missing_rows(table, seed_tax); !missing.empty())
        throw Error("embedding table has no row for node '" + missing.front() + "'");
    std::vector<NodeId> queries;
    for (std::size_t i = 0; i < seed_tax.num_nodes(); ++i) {
        auto v = static_cast<NodeIndex>(i);
        if (!seed_tax.parents(v).empty()) queries.push_back(seed_tax.id(v));
    }
    if (queries.empty()) throw Error("empty training set: no seed node has a parent");

    TrainResult<Scalar> result{initial_params<Scalar>(table, cfg), {}, 0, 0};
    if (cfg.max_epochs == 0) return result;

    Trainer<Scalar> trainer(result.params, seed_tax, table, cfg);
    EvalOptions eval_options;
    eval_options.mode = cfg.mode;
    eval_options.ks = {};
    eval_options.t_eval = static_cast<std::size_t>(cfg.t_eval);
    eval_options.seed = derive_seed(cfg.sibling_seed, kValidationTag);
    eval_options.threads = cfg.threads;

    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    int since_halving = 0;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::vector<TrainingExample> examples;
        for (const auto& q : queries) {
            Rng rng(derive_seed(cfg.seed, kExampleTag, static_cast<std::uint64_t>(epoch), hash_string(q)));
            auto batch = generate_examples(seed_tax, q, cfg.negatives, rng, cfg.mode);
            examples.insert(examples.end(), batch.begin(), batch.end());
        }
        Rng shuffle_rng(derive_seed(cfg.seed, kShuffleTag, static_cast<std::uint64_t>(epoch)));
        std::shuffle(examples.begin(), examples.end(), shuffle_rng);

        EpochRecord record;
        record.epoch = epoch;
        record.lr = trainer.lr();
        const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
        try {
            for (std::size_t b = 0; b * batch_size < examples.size(); ++b) {
                auto begin = b * batch_size;
                auto size = std::min(batch_size, examples.size() - begin);
                auto loss = trainer.step(std::span<const TrainingExample>(examples).subspan(begin, size),
                                         derive_seed(cfg.seed, kStepTag, static_cast<std::uint64_t>(epoch), b));
                const auto weight = static_cast<double>(size) / static_cast<double>(examples.size());
                record.total_loss += weight * loss.total;
                for (std::size_t j = 0; j < 5; ++j) record.loss[j] += weight * loss.parts[j];
            }
        } catch (const NumericError& e) {
            throw NumericError("training diverged in epoch " + std::to_string(epoch) + ": " + e.what());
        }

        bool improved = true;
        if (!validation.empty()) {
            auto eval = evaluate(trainer.params(), validation, seed_tax, table, eval_options);
            record.val_mr = eval.report.mr;
            record.val_mrr = eval.report.mrr;
            improved = record.val_mr < best;
        }
        result.log.push_back(record);
        if (log) *log << epoch_json(record) << '\n' << std::flush;

        if (improved) {
            best = record.val_mr;
            result.params = trainer.params();
            result.best_epoch = epoch;
            result.best_val_mr = record.val_mr;
            since_best = 0;
            since_halving = 0;
            continue;
        }
        ++since_best;
        if (++since_halving == cfg.lr_patience) {
            trainer.set_lr(trainer.lr() * cfg.lr_factor);
            since_halving = 0;
        }
        if (since_best > cfg.early_stop_patience) break;
    }
    return result;
}

std::string epoch_json(const EpochRecord& r) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["loss"] = {{"sp", r.loss[0]}, {"s1", r.loss[1]}, {"s2", r.loss[2]}, {"s3", r.loss[3]}, {"s4", r.loss[4]}};
    j["total_loss"] = r.total_loss;
    j["val_mr"] = r.val_mr;
    j["val_mrr"] = r.val_mrr;
    j["lr"] = r.lr;
    return j.dump();
}

std::string config_json(const TrainConfig& cfg) {
    nlohmann::ordered_json j;
    j["lr"] = cfg.lr;
    j["lr_factor"] = cfg.lr_factor;
    j["lr_patience"] = cfg.lr_patience;
    j["max_epochs"] = cfg.max_epochs;
    j["early_stop_patience"] = cfg.early_stop_patience;
    j["batch_size"] = cfg.batch_size;
    j["negatives"] = cfg.negatives;
    j["lambda"] = cfg.lambda;
    j["t_train"] = cfg.t_train;
    j["t_eval"] = cfg.t_eval;
    j["slices"] = cfg.slices;
    j["hidden_dim"] = cfg.hidden_dim;
    j["max_paths"] = cfg.max_paths;
    j["seed"] = cfg.seed;
    j["sibling_seed"] = cfg.sibling_seed;
    j["variant"] = to_string(cfg.variant);
    j["mode"] = cfg.mode == CandidateMode::Completion ? "completion" : "expansion";
    return j.dump();
}

#define TAXOENRICH_INSTANTIATE_TRAINER(S)                                                                     \
    template LossBreakdown<S> example_loss<S>(const ModelParams<S>&, const EmbeddingTable&, const Taxonomy&, \
                                              const TrainingExample&, const TrainConfig&, std::uint64_t,     \
                                              std::uint64_t, ModelParams<S>*);

TAXOENRICH_INSTANTIATE_TRAINER(float)
TAXOENRICH_INSTANTIATE_TRAINER(double)
TAXOENRICH_INSTANTIATE_TRAINER(long double)

template class Trainer<float>;
template class Trainer<double>;
template ModelParams<float> initial_params<float>(const EmbeddingTable&, const TrainConfig&);
template ModelParams<double> initial_params<double>(const EmbeddingTable&, const TrainConfig&);
template TrainResult<float> train<float>(const Taxonomy&, const EmbeddingTable&, const QuerySet&, const TrainConfig&,
                                         std::ostream*);
template TrainResult<double> train<double>(const Taxonomy&, const EmbeddingTable&, const QuerySet&,
                                           const TrainConfig&, std::ostream*);

}  // namespace taxoenrich
