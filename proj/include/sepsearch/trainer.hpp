#pragma once

#include "sepsearch/config.hpp"
#include "sepsearch/embedding_store.hpp"
#include "sepsearch/loss.hpp"
#include "sepsearch/search_head.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sepsearch {

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
    std::size_t batch_size = 64;
    std::size_t epochs = 20;
    double learning_rate = 1e-3;
    double temperature = 1.0;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    bool shuffle = true;
};

/// Reads batch_size, epochs, learning_rate, temperature, optimizer (sgd|adam),
/// weight_decay, seed and shuffle. Missing keys keep their defaults.
TrainConfig parse_train_config(const KeyValueConfig& kv);
TrainConfig load_train_config(const std::filesystem::path& path);

struct TrainReport {
    std::vector<double> epoch_losses; ///< mean loss per epoch, weighted by batch size
    SearchHead head;
    std::size_t steps = 0;
    double wall_time_seconds = 0.0;
};

struct TrainingPair {
    std::string query_id;
    std::string item_id;

    bool operator==(const TrainingPair&) const = default;
};

/// One pair per judgment with grade >= 1, sorted by (query, item), then
/// shuffled with `seed` when `shuffle` is set. Throws NoPositives.
std::vector<TrainingPair> make_training_pairs(const Dataset& ds, std::uint64_t seed, bool shuffle = true);

/// Trains `head` with in-batch InfoNCE on the frozen embeddings of `ds`.
/// Runs epochs * ceil(pairs / batch_size) steps; batches are consecutive
/// slices of the (re)shuffled pair list. Throws DimMismatch, NoPositives,
/// BadParams or DivergedLoss.
TrainReport train_head(const Dataset& ds, const SearchHead& head, const TrainConfig& cfg);

/// Materializes the head output for every query (the folded query encoder).
EmbeddingMatrix precompute_transformed_queries(const Dataset& ds, const SearchHead& head);

/// TSV lines `epoch<TAB>mean_loss` after an `epoch\tmean_loss` header.
std::string format_loss_log(const TrainReport& report);

} // namespace sepsearch
