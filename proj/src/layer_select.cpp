#include "qkvcomm/layer_select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qkvcomm/errors.hpp"

namespace qkvcomm {

void SelectionConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw InvalidArgument("selection: alpha must be in [0,1]");
    if (!(gamma_mu > 0.0 && gamma_mu < 1.0))
        throw InvalidArgument("selection: gamma_mu must be in (0,1)");
    if (!(gamma_sigma > 0.0 && gamma_sigma <= 1.0))
        throw InvalidArgument("selection: gamma_sigma must be in (0,1]");
    if (!(ratio > 0.0 && ratio <= 1.0))
        throw InvalidArgument("selection: layer ratio must be in (0,1]");
}

std::vector<double> attention_importance(const AttentionMap& map) {
    if (map.num_layers == 0 || map.weights.empty())
        throw InvalidArgument("attention_importance: empty map");

    std::vector<double> scores(map.num_layers, 0.0);
    const uint64_t per_layer = uint64_t(map.num_heads) * map.num_positions;
    for (uint32_t l = 0; l < map.num_layers; ++l) {
        double sum = 0.0;
        for (uint64_t i = 0; i < per_layer; ++i) sum += map.weights[l * per_layer + i];
        scores[l] = sum / double(per_layer);
    }
    return scores;
}

std::vector<double> gaussian_prior(size_t num_layers, const SelectionConfig& cfg) {
    if (num_layers == 0) throw InvalidArgument("gaussian_prior: num_layers must be >= 1");
    cfg.validate();

    const double mu = cfg.gamma_mu * double(num_layers);
    const double sigma = cfg.gamma_sigma * double(num_layers);
    std::vector<double> prior(num_layers);
    for (size_t l = 0; l < num_layers; ++l) {
        const double d = double(l) - mu;
        prior[l] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    }
    return prior;
}

std::vector<double> combined_scores(const std::vector<double>& attention,
                                    const std::vector<double>& prior, double alpha) {
    if (attention.size() != prior.size())
        throw InvalidArgument("combined_scores: length mismatch");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw InvalidArgument("combined_scores: alpha must be in [0,1]");

    std::vector<double> combined(attention.size());
    for (size_t l = 0; l < attention.size(); ++l)
        combined[l] = alpha * attention[l] + (1.0 - alpha) * prior[l];
    return combined;
}

std::vector<size_t> select_layers(const std::vector<double>& scores, double ratio) {
    if (scores.empty()) throw InvalidArgument("select_layers: empty scores");
    if (!(ratio > 0.0 && ratio <= 1.0))
        throw InvalidArgument("select_layers: ratio must be in (0,1]");

    const size_t keep = std::min(scores.size(),
                                 size_t(std::ceil(ratio * double(scores.size()))));
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), size_t(0));
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    order.resize(keep);
    std::sort(order.begin(), order.end());
    return order;
}

LayerScores score_layers(const AttentionMap& map, const SelectionConfig& cfg) {
    LayerScores s;
    s.attention = attention_importance(map);
    s.prior = gaussian_prior(s.attention.size(), cfg);
    s.combined = combined_scores(s.attention, s.prior, cfg.alpha);
    return s;
}

}  // namespace qkvcomm
