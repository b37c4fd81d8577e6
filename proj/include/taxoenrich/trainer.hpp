#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "taxoenrich/embeddings.hpp"
#include "taxoenrich/evaluator.hpp"
#include "taxoenrich/matcher.hpp"
#include "taxoenrich/nn/adam.hpp"
#include "taxoenrich/taxonomy.hpp"

namespace taxoenrich {

struct TrainConfig {
    double lr = 1e-3;
    double lr_factor = 0.5;
    int lr_patience = 10;          // halve on this many consecutive non-improving epochs
    int max_epochs = 200;
    int early_stop_patience = 10;  // stop once more epochs than this pass without improvement
    int batch_size = 16;
    int negatives = 31;
    std::array<double, 4> lambda = {1.0, 1.0, 1.0, 0.2};  // S1..S4
    int t_train = 5;
    int t_eval = 20;
    int slices = 10;
    int hidden_dim = 500;
    std::size_t max_paths = kDefaultMaxPaths;
    std::uint64_t seed = 0;
    std::uint64_t sibling_seed = 0;
    Variant variant = Variant::Full;
    CandidateMode mode = CandidateMode::Completion;
    int threads = 1;

    // Throws Error naming the first non-positive field.
    void validate() const;
};

struct Labels {
    int y1 = 0;  // parent side is a parent of the query
    int y2 = 0;  // child side is a child of the query (PseudoLeaf for a leaf query)
    int y3 = 0;  // = y1
    int y4 = 0;  // = yp
    int yp = 0;  // position is a true position

    bool operator==(const Labels&) const = default;
};

struct TrainingExample {
    NodeId query;
    Position position;
    Labels labels;
};

// Positions of the taxonomy with `masked` removed and its parents linked to its
// children; canonical order.
std::vector<Position> masked_candidates(const TaxonomyView& view, CandidateMode mode);

// All positives of `query` under leave-one-node-out masking, then up to
// `negatives` distinct negatives drawn uniformly from the other candidates.
// Throws Error when the query has no parent.
std::vector<TrainingExample> generate_examples(const Taxonomy& seed_tax, const NodeId& query, int negatives, Rng& rng,
                                               CandidateMode mode = CandidateMode::Completion);

template <typename Scalar>
struct LossBreakdown {
    Scalar total = 0;
    std::array<Scalar, 5> parts = {};  // BCE of sp, s1, s2, s3, s4 before weighting
};

// Weighted BCE over the five logits of one example; paths and siblings are
// drawn from the two seeds. The query's own edges are masked when it is a node
// of `tax`. Gradients are accumulated into `grads` when given.
template <typename Scalar>
LossBreakdown<Scalar> example_loss(const ModelParams<Scalar>& params, const EmbeddingTable& table, const Taxonomy& tax,
                                   const TrainingExample& ex, const TrainConfig& cfg, std::uint64_t path_seed,
                                   std::uint64_t sibling_seed, ModelParams<Scalar>* grads = nullptr);

// Adam on batch-mean losses. Examples of a batch may be split across threads;
// each worker owns a gradient buffer and buffers are summed in worker order.
template <typename Scalar>
class Trainer {
public:
    Trainer(ModelParams<Scalar> params, const Taxonomy& tax, const EmbeddingTable& table, TrainConfig cfg);

    // One update; returns the batch-mean losses seen before it.
    LossBreakdown<double> step(std::span<const TrainingExample> batch, std::uint64_t step_seed);

    const ModelParams<Scalar>& params() const { return params_; }
    double lr() const { return adam_.options.lr; }
    void set_lr(double lr) { adam_.options.lr = lr; }

private:
    ModelParams<Scalar> params_;
    const Taxonomy* tax_;
    const EmbeddingTable* table_;
    TrainConfig cfg_;
    nn::AdamState<Scalar> adam_;
    std::vector<ModelParams<Scalar>> buffers_;
};

struct EpochRecord {
    int epoch = 0;
    std::array<double, 5> loss = {};  // mean BCE of sp, s1, s2, s3, s4
    double total_loss = 0;
    double val_mr = 0;
    double val_mrr = 0;
    double lr = 0;
};

template <typename Scalar>
struct TrainResult {
    ModelParams<Scalar> params;  // best validation epoch, or the initialization
    std::vector<EpochRecord> log;
    int best_epoch = 0;
    double best_val_mr = 0;
};

template <typename Scalar>
ModelParams<Scalar> initial_params(const EmbeddingTable& table, const TrainConfig& cfg);

// Training queries are all seed nodes with a parent. Validation MR drives the
// scheduler and early stopping; without validation queries the last epoch wins.
// Writes one JSON line per epoch to `log` when given.
template <typename Scalar>
TrainResult<Scalar> train(const Taxonomy& seed_tax, const EmbeddingTable& table, const QuerySet& validation,
                          const TrainConfig& cfg, std::ostream* log = nullptr);

std::string epoch_json(const EpochRecord& record);
// Hyperparameters as a JSON object, stored in checkpoints.
std::string config_json(const TrainConfig& cfg);

}  // namespace taxoenrich
