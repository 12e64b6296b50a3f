#include "sepsearch/scenario_lab.hpp"

#include "sepsearch/error.hpp"
#include "sepsearch/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace sepsearch {

std::string_view to_string(Scenario s) {
    switch (s) {
    case Scenario::S1: return "S1";
    case Scenario::S2: return "S2";
    case Scenario::S3: return "S3";
    case Scenario::S4: return "S4";
    }
    return "?";
}

Scenario parse_scenario(std::string_view text) {
    if (text == "S1" || text == "s1" || text == "1") return Scenario::S1;
    if (text == "S2" || text == "s2" || text == "2") return Scenario::S2;
    if (text == "S3" || text == "s3" || text == "3") return Scenario::S3;
    if (text == "S4" || text == "s4" || text == "4") return Scenario::S4;
    throw Error(ErrorCode::BadSpec, "unknown scenario '" + std::string(text) + "'");
}

std::string_view to_string(Verdict v) { return v == Verdict::ConfirmsPaper ? "ConfirmsPaper" : "Contradicts"; }

void validate(const ScenarioSpec& spec) {
    auto fail = [](const std::string& why) { return Error(ErrorCode::BadSpec, why); };
    if (spec.dim_query == 0 || spec.dim_item == 0 || spec.n_queries == 0 || spec.n_items == 0 || spec.n_topics == 0) {
        throw fail("dims, counts and n_topics must be positive");
    }
    if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) throw fail("noise_sigma must be >= 0");
    if (spec.n_topics > std::min(spec.dim_query, spec.dim_item)) throw fail("n_topics exceeds an embedding dim");
    if (2 * spec.n_topics > spec.dim_item) {
        throw fail("datasets A and B need disjoint topics: 2 * n_topics must not exceed dim_item");
    }
    if (2 * spec.n_topics > spec.dim_query) throw fail("2 * n_topics must not exceed dim_query");
    if (spec.n_items < 2 * spec.n_topics) throw fail("n_items must cover every topic of A and B");
}

ScenarioSpec parse_scenario_spec(const KeyValueConfig& kv) {
    kv.require_known({"scenario", "dim_query", "dim_item", "n_queries", "n_items", "n_topics", "noise_sigma",
                      "rotation_seed", "data_seed"});
    ScenarioSpec spec;
    spec.scenario = parse_scenario(kv.get_string("scenario", "S4"));
    spec.dim_query = kv.get_u64("dim_query", spec.dim_query);
    spec.dim_item = kv.get_u64("dim_item", spec.dim_item);
    spec.n_queries = kv.get_u64("n_queries", spec.n_queries);
    spec.n_items = kv.get_u64("n_items", spec.n_items);
    spec.n_topics = kv.get_u64("n_topics", spec.n_topics);
    spec.noise_sigma = kv.get_double("noise_sigma", spec.noise_sigma);
    spec.rotation_seed = kv.get_u64("rotation_seed", spec.rotation_seed);
    spec.data_seed = kv.get_u64("data_seed", spec.data_seed);
    validate(spec);
    return spec;
}

ScenarioSpec load_scenario_spec(const std::filesystem::path& path) {
    return parse_scenario_spec(KeyValueConfig::load(path));
}

namespace {

// `count` mutually orthogonal unit rows of length `dim` (Gram-Schmidt on Gaussian draws).
Matrix random_orthonormal_rows(std::size_t count, std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix out(count, dim);
    for (std::size_t r = 0; r < count; ++r) {
        auto row = out.row(r);
        while (true) {
            for (double& v : row) v = gauss(rng);
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t p = 0; p < r; ++p) {
                    auto prev = out.row(p);
                    const double proj = dot(row, prev);
                    for (std::size_t j = 0; j < dim; ++j) row[j] -= proj * prev[j];
                }
            }
            const double norm = std::sqrt(dot(row, row));
            if (norm > 1e-6) {
                for (double& v : row) v /= norm;
                break;
            }
        }
    }
    return out;
}

std::string padded_id(char prefix, std::size_t i, std::size_t count) {
    int width = 4;
    for (std::size_t n = count > 0 ? count - 1 : 0; n >= 10000; n /= 10) ++width;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
    return buf;
}

std::seed_seq stream_seed(std::uint64_t seed, std::uint32_t stream) {
    return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
}

enum class QueryEncoding { Zero, Faithful, Blend };

// Items and qrels for one dataset; `first_topic` is the first world topic its queries ask about.
Dataset build_dataset(const ScenarioSpec& spec, const Matrix& topics, const Matrix& generic_frame,
                      std::size_t first_topic, std::uint32_t noise_stream, QueryEncoding encoding,
                      double specificity) {
    const std::size_t world = 2 * spec.n_topics;

    auto seq = stream_seed(spec.data_seed, noise_stream);
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);

    std::vector<std::string> item_ids;
    Matrix items(spec.n_items, spec.dim_item);
    for (std::size_t i = 0; i < spec.n_items; ++i) {
        item_ids.push_back(padded_id('d', i, spec.n_items));
        auto dir = topics.row(i % world);
        auto row = items.row(i);
        for (std::size_t j = 0; j < spec.dim_item; ++j) {
            const double eps = spec.noise_sigma > 0.0 ? noise(rng) : 0.0;
            row[j] = static_cast<float>(dir[j] + eps);
        }
    }

    std::vector<std::string> query_ids;
    std::vector<QrelEntry> qrels;
    Matrix queries(spec.n_queries, spec.dim_query);
    for (std::size_t q = 0; q < spec.n_queries; ++q) {
        query_ids.push_back(padded_id('q', q, spec.n_queries));
        const std::size_t topic = first_topic + q % spec.n_topics;
        auto row = queries.row(q);
        switch (encoding) {
        case QueryEncoding::Zero: break;
        case QueryEncoding::Faithful: row[topic] = 1.0; break;
        case QueryEncoding::Blend: {
            // Dataset-specific part: one coordinate per topic of A, nothing for B.
            const double specific_weight = 1.0 - specificity;
            auto generic = generic_frame.row(topic);
            for (std::size_t j = 0; j < spec.dim_query; ++j) {
                const double specific = (topic < spec.n_topics && j == topic) ? 1.0 : 0.0;
                row[j] = static_cast<float>(specific_weight * specific + specificity * generic[j]);
            }
            break;
        }
        }
        for (std::size_t i = topic; i < spec.n_items; i += world) qrels.push_back({query_ids.back(), item_ids[i], 1});
    }
    return make_dataset(EmbeddingMatrix(std::move(query_ids), std::move(queries)),
                        EmbeddingMatrix(std::move(item_ids), std::move(items)), Qrels(std::move(qrels)));
}

std::pair<Dataset, Dataset> generate(const ScenarioSpec& spec, QueryEncoding encoding, double specificity) {
    validate(spec);
    auto topic_seq = stream_seed(spec.data_seed, 0);
    std::mt19937_64 topic_rng(topic_seq);
    const Matrix topics = random_orthonormal_rows(2 * spec.n_topics, spec.dim_item, topic_rng);
    std::mt19937_64 rotation_rng(spec.rotation_seed);
    const Matrix frame = random_orthonormal_rows(2 * spec.n_topics, spec.dim_query, rotation_rng);
    return {build_dataset(spec, topics, frame, 0, 1, encoding, specificity),
            build_dataset(spec, topics, frame, spec.n_topics, 2, encoding, specificity)};
}

MetricsReport evaluate_head(const SearchHead& head, const Dataset& ds) {
    // Full rankings, so MRR is comparable with the tied-score chance level.
    return evaluate_run(search_exact(head, ds.queries, ds.items, ds.items.count()), ds.qrels, kScenarioKs);
}

SearchHead fresh_head(const ScenarioSpec& spec, const TrainConfig& cfg, const std::vector<std::size_t>& hidden) {
    const auto kind = hidden.empty() ? HeadKind::Linear : HeadKind::Mlp;
    return init_head(kind, spec.dim_query, spec.dim_item, hidden, cfg.seed);
}

bool matches(const MetricsReport& got, const MetricsReport& chance, double tol) {
    if (got.aggregate.size() != chance.aggregate.size()) return false;
    for (const auto& [key, value] : chance.aggregate) {
        auto it = got.aggregate.find(key);
        if (it == got.aggregate.end() || std::abs(it->second - value) > tol) return false;
    }
    return true;
}

// True when every item receives the same score for each query.
bool scores_all_tied(const SearchHead& head, const Dataset& ds) {
    for (std::size_t q = 0; q < ds.queries.count(); ++q) {
        const auto t = apply(head, ds.queries.row(q));
        const double first = dot(t, ds.items.row(0));
        for (std::size_t i = 1; i < ds.items.count(); ++i) {
            if (dot(t, ds.items.row(i)) != first) return false;
        }
    }
    return true;
}

std::string ratio_note(std::string_view label, double value, double chance) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.*s: recall@10=%.4f chance=%.4f ratio=%.2f\n", static_cast<int>(label.size()),
                  label.data(), value, chance, chance > 0.0 ? value / chance : 0.0);
    return buf;
}

constexpr double kChanceTolerance = 1e-9;
constexpr double kAboveChanceFactor = 5.0;
constexpr double kNearChanceFactor = 2.0;

} // namespace

std::pair<Dataset, Dataset> gen_synthetic(const ScenarioSpec& spec) {
    switch (spec.scenario) {
    case Scenario::S1: return generate(spec, QueryEncoding::Zero, 0.0);
    case Scenario::S2: return generate(spec, QueryEncoding::Faithful, 0.0);
    case Scenario::S3: return generate(spec, QueryEncoding::Blend, 0.0);
    case Scenario::S4: return generate(spec, QueryEncoding::Blend, 1.0);
    }
    throw Error(ErrorCode::BadSpec, "unknown scenario");
}

std::pair<Dataset, Dataset> gen_synthetic_with_specificity(const ScenarioSpec& spec, double specificity) {
    if (!(specificity >= 0.0 && specificity <= 1.0)) throw Error(ErrorCode::BadSpec, "specificity must be in [0, 1]");
    return generate(spec, QueryEncoding::Blend, specificity);
}

const MetricsReport& ScenarioReport::evaluation(std::string_view label) const {
    for (const auto& e : evaluations) {
        if (e.label == label) return e.metrics;
    }
    throw Error(ErrorCode::BadParams, "no evaluation labelled " + std::string(label));
}

TrainConfig default_scenario_train_config() {
    TrainConfig cfg;
    cfg.batch_size = 64;
    cfg.epochs = 20;
    return cfg;
}

ScenarioReport run_scenario(const ScenarioSpec& spec, const TrainConfig& cfg, const std::vector<std::size_t>& hidden_dims) {
    auto [ds_a, ds_b] = gen_synthetic(spec);
    ScenarioReport report;
    report.scenario = spec.scenario;
    report.chance_a = chance_level(ds_a, kScenarioKs);
    report.chance_b = chance_level(ds_b, kScenarioKs);
    report.chance_level = report.chance_a.at("recall@10");
    const double chance_b = report.chance_b.at("recall@10");
    const std::string key = "recall@10";

    auto record = [&](std::string label, MetricsReport m) -> const MetricsReport& {
        report.evaluations.push_back({std::move(label), std::move(m)});
        return report.evaluations.back().metrics;
    };

    const SearchHead initial = fresh_head(spec, cfg, hidden_dims);
    report.metrics_before = evaluate_head(initial, ds_a);
    record("A/initial", report.metrics_before);

    bool ok = false;
    std::string notes;
    switch (spec.scenario) {
    case Scenario::S1: {
        const auto trained = train_head(ds_a, initial, cfg).head;
        const auto after_a = record("A/trained", evaluate_head(trained, ds_a));
        const auto frozen_b = record("B/frozen", evaluate_head(trained, ds_b));
        report.metrics_after_training = after_a;
        const bool tied = scores_all_tied(initial, ds_a) && scores_all_tied(trained, ds_a) &&
                          scores_all_tied(trained, ds_b);
        ok = tied && matches(report.metrics_before, report.chance_a, kChanceTolerance) &&
             matches(after_a, report.chance_a, kChanceTolerance) && matches(frozen_b, report.chance_b, kChanceTolerance);
        notes += tied ? "all scores tied within every query\n" : "scores NOT tied\n";
        notes += ratio_note("A/trained", after_a.at(key), report.chance_level);
        notes += ratio_note("B/frozen", frozen_b.at(key), chance_b);
        break;
    }
    case Scenario::S2: {
        const SearchHead zero = make_zero_head(spec.dim_query, spec.dim_item);
        const auto zero_a = record("A/zero-head", evaluate_head(zero, ds_a));
        const auto zero_b = record("B/zero-head", evaluate_head(zero, ds_b));
        report.metrics_after_training = zero_a;
        const bool tied = scores_all_tied(zero, ds_a) && scores_all_tied(zero, ds_b);
        ok = tied && matches(zero_a, report.chance_a, kChanceTolerance) && matches(zero_b, report.chance_b, kChanceTolerance);
        notes += ratio_note("A/initial (faithful encoding)", report.metrics_before.at(key), report.chance_level);
        notes += ratio_note("A/zero-head", zero_a.at(key), report.chance_level);
        notes += ratio_note("B/zero-head", zero_b.at(key), chance_b);
        break;
    }
    case Scenario::S3:
    case Scenario::S4: {
        const auto trained_a = train_head(ds_a, initial, cfg).head;
        const auto after_a = record("A/trained", evaluate_head(trained_a, ds_a));
        const auto frozen_b = record("B/frozen", evaluate_head(trained_a, ds_b));
        const auto retrained_b_head = train_head(ds_b, fresh_head(spec, cfg, hidden_dims), cfg).head;
        const auto retrained_b = record("B/retrained", evaluate_head(retrained_b_head, ds_b));
        report.metrics_after_training = after_a;
        const bool a_works = after_a.at(key) >= kAboveChanceFactor * report.chance_level;
        if (spec.scenario == Scenario::S3) {
            ok = a_works && frozen_b.at(key) <= kNearChanceFactor * chance_b &&
                 retrained_b.at(key) <= kNearChanceFactor * chance_b;
        } else {
            ok = a_works && retrained_b.at(key) >= kAboveChanceFactor * chance_b;
        }
        notes += ratio_note("A/trained", after_a.at(key), report.chance_level);
        notes += ratio_note("B/frozen", frozen_b.at(key), chance_b);
        notes += ratio_note("B/retrained", retrained_b.at(key), chance_b);
        break;
    }
    }
    report.verdict = ok ? Verdict::ConfirmsPaper : Verdict::Contradicts;
    report.notes = std::move(notes);
    return report;
}

std::vector<SweepRow> bottleneck_sweep(const ScenarioSpec& base, const std::vector<std::size_t>& head_sizes,
                                       const std::vector<double>& specificities, const TrainConfig& cfg) {
    if (head_sizes.empty() || specificities.empty()) throw Error(ErrorCode::BadSpec, "sweep lists must be non-empty");
    for (double s : specificities) {
        if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::BadSpec, "specificity must be in [0, 1]");
    }
    validate(base);
    std::vector<SweepRow> rows;
    for (double s : specificities) {
        auto [ds_a, ds_b] = gen_synthetic_with_specificity(base, s);
        for (std::size_t h : head_sizes) {
            std::vector<std::size_t> hidden;
            if (h > 0) hidden.push_back(h);
            const auto head_a = train_head(ds_a, fresh_head(base, cfg, hidden), cfg).head;
            const auto head_b = train_head(ds_b, fresh_head(base, cfg, hidden), cfg).head;
            rows.push_back({s, h, evaluate_head(head_a, ds_a).at("recall@10"),
                            evaluate_head(head_b, ds_b).at("recall@10")});
        }
    }
    return rows;
}

std::string format_scenario_report(const ScenarioReport& report) {
    std::string out = "evaluation\tmetric\tvalue\n";
    char buf[96];
    auto emit = [&](std::string_view label, const MetricsReport& m) {
        for (const auto& [key, value] : m.aggregate) {
            std::snprintf(buf, sizeof buf, "\t%s\t%.6f\n", key.c_str(), value);
            out += label;
            out += buf;
        }
    };
    emit("A/chance", report.chance_a);
    emit("B/chance", report.chance_b);
    for (const auto& e : report.evaluations) emit(e.label, e.metrics);
    out += "\n# scenario: ";
    out += to_string(report.scenario);
    out += "\n# verdict: ";
    out += to_string(report.verdict);
    out += '\n';
    std::string_view notes = report.notes;
    while (!notes.empty()) {
        const auto nl = notes.find('\n');
        out += "# ";
        out += notes.substr(0, nl);
        out += '\n';
        notes = nl == std::string_view::npos ? std::string_view{} : notes.substr(nl + 1);
    }
    return out;
}

std::string format_sweep_tsv(const std::vector<SweepRow>& rows) {
    std::string out = "specificity\thead_size\trecall@10_A\trecall@10_B\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.4f\t%zu\t%.6f\t%.6f\n", r.specificity, r.head_size, r.recall_a, r.recall_b);
        out += buf;
    }
    return out;
}

} // namespace sepsearch
