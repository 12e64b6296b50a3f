#pragma once

#include "sepsearch/config.hpp"
#include "sepsearch/embedding_store.hpp"
#include "sepsearch/eval_metrics.hpp"
#include "sepsearch/search_head.hpp"
#include "sepsearch/trainer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sepsearch {

/// The four thought-experiment settings:
///   S1  the encoder emits the zero vector for every query;
///   S2  the encoder is faithful but the head maps everything to zero;
///   S3  the encoder carries exactly dataset A's topics and nothing for B;
///   S4  the encoder carries every topic, hidden in a seeded rotated subspace.
enum class Scenario { S1, S2, S3, S4 };

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view text);

struct ScenarioSpec {
    Scenario scenario = Scenario::S4;
    std::size_t dim_query = 16;
    std::size_t dim_item = 8;
    std::size_t n_queries = 256;
    std::size_t n_items = 512;
    std::size_t n_topics = 4;
    double noise_sigma = 0.05;
    std::uint64_t rotation_seed = 1;
    std::uint64_t data_seed = 2;
};

/// Throws BadSpec. Besides the basic bounds, datasets A and B need disjoint
/// orthonormal topic sets (2 * n_topics <= dim_item), the query space must
/// hold one coordinate per topic of both datasets (2 * n_topics <= dim_query)
/// and every topic needs items (n_items >= 2 * n_topics).
void validate(const ScenarioSpec& spec);

ScenarioSpec parse_scenario_spec(const KeyValueConfig& kv);
ScenarioSpec load_scenario_spec(const std::filesystem::path& path);

/// Builds datasets A (training) and B (transfer).
///
/// Both datasets draw items from the same 2 * n_topics orthonormal topic
/// directions: item i has topic i mod (2 * n_topics) and equals that
/// direction plus N(0, sigma^2) noise per coordinate. A's queries ask about
/// topics [0, n_topics), B's about [n_topics, 2 * n_topics); query j asks
/// about the (j mod n_topics)-th topic of its dataset and every item of that
/// topic is judged relevant with grade 1. Items and qrels depend only on
/// data_seed, so all scenarios share them; only query embeddings differ.
/// Values are rounded to float32 so datasets persist losslessly.
std::pair<Dataset, Dataset> gen_synthetic(const ScenarioSpec& spec);

/// Query construction interpolating the dataset-specific S3 encoding
/// (specificity 0) and the generic S4 encoding (specificity 1):
/// q = (1 - s) * q_specific + s * q_generic.
std::pair<Dataset, Dataset> gen_synthetic_with_specificity(const ScenarioSpec& spec, double specificity);

enum class Verdict { ConfirmsPaper, Contradicts };
std::string_view to_string(Verdict v);

struct ScenarioEvaluation {
    std::string label;
    MetricsReport metrics;
};

struct ScenarioReport {
    Scenario scenario = Scenario::S1;
    MetricsReport metrics_before;
    std::optional<MetricsReport> metrics_after_training;
    /// Closed-form recall@10 on dataset A under all-equal scores.
    double chance_level = 0.0;
    MetricsReport chance_a;
    MetricsReport chance_b;
    /// Every evaluation the scenario ran, in execution order.
    std::vector<ScenarioEvaluation> evaluations;
    Verdict verdict = Verdict::Contradicts;
    std::string notes;

    const MetricsReport& evaluation(std::string_view label) const;
};

/// Metric depths used by scenario runs.
inline const std::vector<std::size_t> kScenarioKs = {1, 10};

/// Training settings the scenario suite uses by default.
TrainConfig default_scenario_train_config();

/// Generates the datasets, trains and evaluates the heads the scenario calls
/// for, and derives the verdict from its predicate:
///   S1  every metric of the initial head, of a head trained on A, and of that
///       head on B equals the closed-form chance level within 1e-9, and all
///       scores within each query are identical;
///   S2  the zero-output head gives chance-level metrics on A and B;
///   S3  trained on A: recall@10(A) >= 5x chance; the frozen A head and a head
///       trained on B both stay within 2x chance on B;
///   S4  trained on A: recall@10(A) >= 5x chance; a head retrained on B
///       reaches >= 5x chance on B. The frozen A head on B is recorded only.
/// Heads are bias-free Linear maps unless `hidden_dims` is non-empty, in
/// which case an Mlp with those hidden widths is trained.
ScenarioReport run_scenario(const ScenarioSpec& spec, const TrainConfig& cfg,
                            const std::vector<std::size_t>& hidden_dims = {});

struct SweepRow {
    double specificity = 0.0;
    std::size_t head_size = 0; ///< 0 = bias-free Linear, h > 0 = Mlp with one tanh hidden layer of width h
    double recall_a = 0.0;     ///< recall@10 on A of the head trained on A
    double recall_b = 0.0;     ///< recall@10 on B of a head trained on B

    bool operator==(const SweepRow&) const = default;
};

/// Grid over encoding specificity and head size, in (specificity, head_size)
/// order. Throws BadSpec for empty lists or specificity outside [0, 1].
std::vector<SweepRow> bottleneck_sweep(const ScenarioSpec& base, const std::vector<std::size_t>& head_sizes,
                                       const std::vector<double>& specificities, const TrainConfig& cfg);

std::string format_scenario_report(const ScenarioReport& report);
std::string format_sweep_tsv(const std::vector<SweepRow>& rows);

} // namespace sepsearch
