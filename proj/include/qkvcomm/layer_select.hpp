#pragma once

#include <cstddef>
#include <vector>

#include "qkvcomm/tensor.hpp"

namespace qkvcomm {

// Hybrid layer scoring: attention importance blended with a Gaussian
// positional prior centered on the middle of the stack.
struct SelectionConfig {
    double alpha = 0.5;        // weight on attention vs prior, in [0,1]
    double gamma_mu = 0.5;     // prior mean as a fraction of depth, in (0,1)
    double gamma_sigma = 0.25; // prior width as a fraction of depth, in (0,1]
    double ratio = 0.7;        // proportion of layers kept, in (0,1]

    void validate() const;
};

struct LayerScores {
    std::vector<double> attention;
    std::vector<double> prior;
    std::vector<double> combined;
};

// Mean attention weight per layer across heads and positions.
std::vector<double> attention_importance(const AttentionMap& map);

// exp(-(l - mu)^2 / (2 sigma^2)) with mu = gamma_mu * L, sigma = gamma_sigma * L.
std::vector<double> gaussian_prior(size_t num_layers, const SelectionConfig& cfg);

// alpha * attention + (1 - alpha) * prior, element-wise.
std::vector<double> combined_scores(const std::vector<double>& attention,
                                    const std::vector<double>& prior, double alpha);

// Indices of the ceil(ratio * L) highest-scoring layers, ties broken
// toward the lower index; returned sorted ascending.
std::vector<size_t> select_layers(const std::vector<double>& scores, double ratio);

LayerScores score_layers(const AttentionMap& map, const SelectionConfig& cfg);

}  // namespace qkvcomm
