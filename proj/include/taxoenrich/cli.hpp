#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "taxoenrich/trainer.hpp"

namespace taxoenrich::cli {

struct Paths {
    std::string terms;
    std::string edges;
    std::string sentences;
    std::string embeddings;
    std::string checkpoint;
    std::string report;
    std::string queries;        // validation queries for train, evaluation queries for eval
    std::string query_terms;    // `id<TAB>name` of nodes outside the taxonomy
    std::string out;
    std::string log;
    std::string dump;
};

// Everything one invocation reads. Flags override values from --config.
struct RunConfig {
    Paths paths;
    TrainConfig train;
    std::vector<int> ks = {1, 5, 10};
    int precision = 0;  // 32 or 64; 0 picks the default (32 for training, stored for loading)
    int dim = 64;
    std::size_t n_val = 0;
    std::size_t n_test = 0;
    std::size_t top_k = 5;
    std::string pseudo_root;
    std::string query;
    std::string ancestral_template = "superclass";
    std::string descendant_template = "subclass";
};

// Exit codes: 0 success (including --help), 1 runtime failure with a
// one-line diagnostic on `err`, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace taxoenrich::cli
