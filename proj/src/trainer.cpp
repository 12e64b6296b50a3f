#include "sepsearch/trainer.hpp"

#include "sepsearch/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

namespace sepsearch {

TrainConfig parse_train_config(const KeyValueConfig& kv) {
    kv.require_known({"batch_size", "epochs", "learning_rate", "temperature", "optimizer", "weight_decay", "seed",
                      "shuffle"});
    TrainConfig cfg;
    cfg.batch_size = kv.get_u64("batch_size", cfg.batch_size);
    cfg.epochs = kv.get_u64("epochs", cfg.epochs);
    cfg.learning_rate = kv.get_double("learning_rate", cfg.learning_rate);
    cfg.temperature = kv.get_double("temperature", cfg.temperature);
    cfg.weight_decay = kv.get_double("weight_decay", cfg.weight_decay);
    cfg.seed = kv.get_u64("seed", cfg.seed);
    cfg.shuffle = kv.get_bool("shuffle", cfg.shuffle);
    const auto opt = kv.get_string("optimizer", "adam");
    if (opt == "adam") {
        cfg.optimizer = OptimizerKind::Adam;
    } else if (opt == "sgd") {
        cfg.optimizer = OptimizerKind::Sgd;
    } else {
        throw Error(ErrorCode::ParseError, "optimizer must be sgd or adam, got '" + opt + "'");
    }
    return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
    return parse_train_config(KeyValueConfig::load(path));
}

std::vector<TrainingPair> make_training_pairs(const Dataset& ds, std::uint64_t seed, bool shuffle) {
    std::vector<TrainingPair> pairs;
    for (const auto& e : ds.qrels.entries()) {
        if (e.grade >= 1) pairs.push_back({e.query_id, e.item_id});
    }
    if (pairs.empty()) throw Error(ErrorCode::NoPositives, "qrels contain no grade >= 1 entries");
    if (shuffle) {
        std::mt19937_64 rng(seed);
        std::shuffle(pairs.begin(), pairs.end(), rng);
    }
    return pairs;
}

namespace {

void validate(const TrainConfig& cfg) {
    if (cfg.batch_size == 0) throw Error(ErrorCode::BadParams, "batch_size must be positive");
    if (cfg.epochs == 0) throw Error(ErrorCode::BadParams, "epochs must be positive");
    if (!(cfg.learning_rate >= 0.0)) throw Error(ErrorCode::BadParams, "learning_rate must be non-negative");
    if (!(cfg.temperature > 0.0)) throw Error(ErrorCode::BadParams, "temperature must be positive");
    if (!(cfg.weight_decay >= 0.0)) throw Error(ErrorCode::BadParams, "weight_decay must be non-negative");
}

class Optimizer {
  public:
    Optimizer(const TrainConfig& cfg, std::size_t n) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::vector<double>& params, std::vector<double> grad) {
        ++t_;
        if (cfg_.weight_decay > 0.0) {
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += cfg_.weight_decay * params[i];
        }
        if (cfg_.optimizer == OptimizerKind::Sgd) {
            for (std::size_t i = 0; i < grad.size(); ++i) params[i] -= cfg_.learning_rate * grad[i];
            return;
        }
        const double b1 = cfg_.adam_beta1;
        const double b2 = cfg_.adam_beta2;
        const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        for (std::size_t i = 0; i < grad.size(); ++i) {
            m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
            v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
            const double m_hat = m_[i] / correction1;
            const double v_hat = v_[i] / correction2;
            params[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.adam_epsilon);
        }
    }

  private:
    const TrainConfig& cfg_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::uint64_t t_ = 0;
};

struct ResolvedPair {
    std::size_t query_row;
    std::size_t item_row;
};

} // namespace

TrainReport train_head(const Dataset& ds, const SearchHead& head, const TrainConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    validate(cfg);
    head.check_bridges(ds.queries.dim(), ds.items.dim());

    // make_training_pairs shuffles with a fresh generator seeded like this one,
    // so epoch 0 sees the same order it returns.
    std::vector<TrainingPair> pairs = make_training_pairs(ds, cfg.seed, false);
    if (cfg.batch_size > pairs.size()) {
        throw Error(ErrorCode::BadParams, "batch_size " + std::to_string(cfg.batch_size) + " exceeds " +
                                              std::to_string(pairs.size()) + " training pairs");
    }
    std::vector<ResolvedPair> resolved;
    resolved.reserve(pairs.size());
    for (const auto& p : pairs) {
        resolved.push_back({*ds.queries.index_of(p.query_id), *ds.items.index_of(p.item_id)});
    }

    TrainReport report{{}, head, 0, 0.0};
    std::vector<double> params = head.parameters();
    Optimizer optimizer(cfg, params.size());
    std::mt19937_64 rng(cfg.seed);

    const std::size_t in_dim = ds.queries.dim();
    const std::size_t out_dim = ds.items.dim();
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) std::shuffle(resolved.begin(), resolved.end(), rng);
        double weighted_loss = 0.0;
        for (std::size_t begin = 0; begin < resolved.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(resolved.size(), begin + cfg.batch_size);
            const std::size_t b = end - begin;
            Matrix queries(b, in_dim);
            Matrix positives(b, out_dim);
            for (std::size_t i = 0; i < b; ++i) {
                auto q = ds.queries.row(resolved[begin + i].query_row);
                auto d = ds.items.row(resolved[begin + i].item_row);
                std::copy(q.begin(), q.end(), queries.row(i).begin());
                std::copy(d.begin(), d.end(), positives.row(i).begin());
            }

            LossAndGradient lg;
            try {
                lg = gradients(report.head, queries, positives, cfg.temperature);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::NonFinite) {
                    throw Error(ErrorCode::DivergedLoss, "epoch " + std::to_string(epoch + 1) + " step " +
                                                             std::to_string(report.steps + 1) + ": " + e.what());
                }
                throw;
            }
            weighted_loss += lg.loss * static_cast<double>(b);
            ++report.steps;

            if (!params.empty()) {
                optimizer.step(params, lg.grad.flatten());
                for (double p : params) {
                    if (!std::isfinite(p)) throw Error(ErrorCode::DivergedLoss, "parameters became non-finite");
                }
                report.head.set_parameters(params);
            }
        }
        report.epoch_losses.push_back(weighted_loss / static_cast<double>(resolved.size()));
    }
    report.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

EmbeddingMatrix precompute_transformed_queries(const Dataset& ds, const SearchHead& head) {
    if (head.kind() != HeadKind::Identity && *head.in_dim() != ds.queries.dim()) {
        throw Error(ErrorCode::DimMismatch, "head input dim does not match queries");
    }
    return apply_batch(head, ds.queries);
}

std::string format_loss_log(const TrainReport& report) {
    std::string out = "epoch\tmean_loss\n";
    char buf[64];
    for (std::size_t e = 0; e < report.epoch_losses.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu\t%.9f\n", e + 1, report.epoch_losses[e]);
        out += buf;
    }
    return out;
}

} // namespace sepsearch
