#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "taxoenrich/embeddings.hpp"
#include "taxoenrich/matcher.hpp"
#include "taxoenrich/taxonomy.hpp"

namespace taxoenrich {

struct RankingResult {
    NodeId query;
    std::vector<std::pair<Position, double>> ranked;  // logit desc, then canonical order
    std::vector<std::size_t> true_ranks;              // 1-based, ascending
};

enum class MrrScaling {
    Bucketed,  // 1 / ceil(rank / 10)
    Plain,     // 1 / rank
};

struct MetricsReport {
    double mr = 0;
    double mrr = 0;
    std::map<int, double> recall_at;
    std::map<int, double> precision_at;
    std::size_t n_queries = 0;
    std::size_t n_true_positions = 0;
    std::size_t n_candidates = 0;
};

// Flat averages over every true rank of every query. Empty input, or a result
// without true ranks, throws Error.
double mean_rank(std::span<const RankingResult> results);
double scaled_mrr(std::span<const RankingResult> results, MrrScaling scaling = MrrScaling::Bucketed);
double recall_at_k(std::span<const RankingResult> results, int k);
double precision_at_k(std::span<const RankingResult> results, int k);

MetricsReport compose_report(std::span<const RankingResult> results, const std::vector<int>& ks,
                             MrrScaling scaling = MrrScaling::Bucketed);

// Sorts scored candidates and locates the true positions. Competition ranking:
// a true position's rank counts every candidate ahead of it, true or not.
RankingResult rank_scored(NodeId query, std::vector<std::pair<Position, double>> scored,
                          const std::vector<Position>& truths);

// Sibling draws for one (query, position) pair; independent of candidate order.
std::uint64_t position_seed(std::uint64_t seed, const NodeId& query, const Position& position);

// Scores every candidate with sp (longest paths, t_eval siblings) and ranks.
template <typename Scalar>
RankingResult rank_positions(const ModelParams<Scalar>& params, const NodeId& query, const Vector<Scalar>& query_vec,
                             const Taxonomy& tax, const EmbeddingTable& table, const std::vector<Position>& candidates,
                             const std::vector<Position>& truths, std::size_t t_eval, std::uint64_t seed);

struct EvalOptions {
    CandidateMode mode = CandidateMode::Completion;
    std::vector<int> ks = {1, 5, 10};
    std::size_t t_eval = 20;
    std::uint64_t seed = 0;
    MrrScaling scaling = MrrScaling::Bucketed;
    int threads = 1;
};

struct Evaluation {
    MetricsReport report;
    std::vector<RankingResult> rankings;  // query order
};

// Query vectors come from `table`. Throws Error on an empty query set and, in
// expansion mode, on a true position whose child is not PseudoLeaf.
template <typename Scalar>
Evaluation evaluate(const ModelParams<Scalar>& params, const QuerySet& queries, const Taxonomy& tax,
                    const EmbeddingTable& table, const EvalOptions& options);

// Top-k candidates for a free-standing query vector.
template <typename Scalar>
std::vector<std::pair<Position, double>> predict(const ModelParams<Scalar>& params, const NodeId& query,
                                                 const Vector<Scalar>& query_vec, const Taxonomy& tax,
                                                 const EmbeddingTable& table, std::size_t top_k,
                                                 const EvalOptions& options);

// `1. <parent name, child name>  logit`, one line per prediction.
void write_predictions(const Taxonomy& tax, const std::vector<std::pair<Position, double>>& ranked,
                       std::ostream& out);

// JSON object with the metrics and `metadata` copied verbatim.
void write_report(const MetricsReport& report, const std::map<std::string, std::string>& metadata,
                  std::ostream& out);

// Per query, top-k rows: query, rank, parent, child, logit, is_true.
void write_prediction_dump(const std::vector<RankingResult>& rankings, std::size_t top_k, std::ostream& out);

}  // namespace taxoenrich
