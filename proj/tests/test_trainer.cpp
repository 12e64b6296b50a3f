#include "sepsearch/config.hpp"
#include "sepsearch/scenario_lab.hpp"
#include "sepsearch/trainer.hpp"
#include "support/errors.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace sepsearch;
using oracle::code_of;

namespace {

// Items are a fixed linear image of their query plus noise, one positive per query.
Dataset linear_world(std::size_t n, std::size_t dq, std::size_t di, std::uint64_t seed) {
    auto queries = oracle::random_embeddings(n, dq, 'q', seed);
    const auto map = oracle::random_matrix(di, dq, seed + 1);
    const auto noise = oracle::random_matrix(n, di, seed + 2, 0.01);
    Matrix items(n, di);
    std::vector<std::string> ids;
    std::vector<QrelEntry> qrels;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < di; ++o) {
            items(i, o) = static_cast<float>(oracle::plain_dot(map.row(o).data(), queries.row(i).data(), dq) +
                                             noise(i, o));
        }
        ids.push_back(oracle::padded_id('d', i));
        qrels.push_back({queries.ids()[i], ids.back(), 1});
    }
    return make_dataset(std::move(queries), EmbeddingMatrix(std::move(ids), std::move(items)), Qrels(qrels));
}

TrainConfig quick_config() {
    TrainConfig c;
    c.batch_size = 16;
    c.epochs = 10;
    c.learning_rate = 1e-2;
    c.seed = 5;
    return c;
}

} // namespace

TEST(TrainConfig, ParsesKeys) {
    const auto c = parse_train_config(KeyValueConfig::parse(
        "batch_size = 8\nepochs=3\nlearning_rate=0.5\ntemperature=0.1\noptimizer=sgd\n# x\nweight_decay=0.01\n"
        "seed=9\nshuffle=false\n"));
    EXPECT_EQ(c.batch_size, 8u);
    EXPECT_EQ(c.epochs, 3u);
    EXPECT_EQ(c.learning_rate, 0.5);
    EXPECT_EQ(c.temperature, 0.1);
    EXPECT_EQ(c.optimizer, OptimizerKind::Sgd);
    EXPECT_EQ(c.weight_decay, 0.01);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_FALSE(c.shuffle);

    EXPECT_EQ(code_of([] { parse_train_config(KeyValueConfig::parse("lr=1\n")); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([] { parse_train_config(KeyValueConfig::parse("optimizer=rmsprop\n")); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([] { parse_train_config(KeyValueConfig::parse("epochs=x\n")); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([] { KeyValueConfig::parse("a=1\na=2\n"); }), ErrorCode::ParseError);
}

TEST(Trainer, PairsAreSeededPermutationsOfPositives) {
    const auto ds = linear_world(20, 4, 3, 1);
    const auto sorted = make_training_pairs(ds, 0, false);
    ASSERT_EQ(sorted.size(), 20u);
    EXPECT_TRUE(std::is_sorted(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return a.query_id < b.query_id;
    }));
    const auto a = make_training_pairs(ds, 3);
    EXPECT_EQ(a, make_training_pairs(ds, 3));
    EXPECT_NE(a, make_training_pairs(ds, 4));
    EXPECT_TRUE(std::is_permutation(a.begin(), a.end(), sorted.begin()));

    const auto none = make_dataset(ds.queries, ds.items, parse_qrels("q00000\td00000\t0\n"));
    EXPECT_EQ(code_of([&] { make_training_pairs(none, 0); }), ErrorCode::NoPositives);
}

TEST(Trainer, LearnsALinearMap) {
    const auto ds = linear_world(128, 6, 4, 2);
    const auto head = init_head(HeadKind::Linear, 6, 4, {}, 0);
    auto cfg = quick_config();
    cfg.epochs = 40;
    const auto r = train_head(ds, head, cfg);
    ASSERT_EQ(r.epoch_losses.size(), 40u);
    EXPECT_LT(r.epoch_losses.back(), 0.5 * r.epoch_losses.front());
    EXPECT_EQ(r.steps, 40u * 8);
}

TEST(Trainer, IsDeterministic) {
    const auto ds = linear_world(50, 5, 3, 3);
    const auto head = init_head(HeadKind::Mlp, 5, 3, {4}, 1);
    const auto a = train_head(ds, head, quick_config());
    const auto b = train_head(ds, head, quick_config());
    EXPECT_EQ(a.head, b.head);
    EXPECT_EQ(a.epoch_losses, b.epoch_losses);
    auto other = quick_config();
    other.seed = 6;
    EXPECT_NE(train_head(ds, head, other).head, a.head);
}

TEST(Trainer, LeavesEncodingsUntouched) {
    const auto ds = linear_world(40, 5, 3, 4);
    const auto queries = encode_embeddings(ds.queries);
    const auto items = encode_embeddings(ds.items);
    const auto copy = ds;
    train_head(ds, init_head(HeadKind::Linear, 5, 3, {}, 0), quick_config());
    EXPECT_EQ(encode_embeddings(ds.queries), queries);
    EXPECT_EQ(encode_embeddings(ds.items), items);
    EXPECT_EQ(ds.queries, copy.queries);
    EXPECT_EQ(ds.items, copy.items);
}

TEST(Trainer, SingleSgdStepFollowsTheGradient) {
    const auto ds = linear_world(12, 4, 4, 5);
    const auto head = init_head(HeadKind::Linear, 4, 4, {}, 2);
    TrainConfig cfg;
    cfg.batch_size = 12;
    cfg.epochs = 1;
    cfg.optimizer = OptimizerKind::Sgd;
    cfg.learning_rate = 0.3;
    cfg.weight_decay = 0.1;
    cfg.shuffle = false;

    Matrix q(12, 4), p(12, 4);
    for (std::size_t i = 0; i < 12; ++i) {
        std::copy(ds.queries.row(i).begin(), ds.queries.row(i).end(), q.row(i).begin());
        std::copy(ds.items.row(i).begin(), ds.items.row(i).end(), p.row(i).begin());
    }
    const auto g = gradients(head, q, p, 1.0).grad.flatten();
    const auto before = head.parameters();
    const auto after = train_head(ds, head, cfg).head.parameters();
    for (std::size_t i = 0; i < before.size(); ++i) {
        EXPECT_NEAR(after[i], before[i] - 0.3 * (g[i] + 0.1 * before[i]), 1e-14);
    }
}

TEST(Trainer, FirstAdamStepHasLearningRateMagnitude) {
    const auto ds = linear_world(12, 4, 4, 6);
    const auto head = init_head(HeadKind::Linear, 4, 4, {}, 3);
    TrainConfig cfg;
    cfg.batch_size = 12;
    cfg.epochs = 1;
    cfg.learning_rate = 0.01;
    const auto before = head.parameters();
    const auto after = train_head(ds, head, cfg).head.parameters();
    for (std::size_t i = 0; i < before.size(); ++i) EXPECT_NEAR(std::abs(after[i] - before[i]), 0.01, 1e-6);
}

TEST(Trainer, IdentityHeadOnlyReportsLoss) {
    const auto ds = linear_world(16, 3, 3, 7);
    const auto r = train_head(ds, SearchHead::identity(), quick_config());
    EXPECT_EQ(r.head, SearchHead::identity());
    EXPECT_EQ(r.epoch_losses.size(), 10u);
}

TEST(Trainer, RejectsBadSetups) {
    const auto ds = linear_world(16, 3, 2, 8);
    const auto head = init_head(HeadKind::Linear, 3, 2, {}, 0);
    auto cfg = quick_config();
    cfg.batch_size = 17;
    EXPECT_EQ(code_of([&] { train_head(ds, head, cfg); }), ErrorCode::BadParams);
    cfg = quick_config();
    cfg.temperature = 0;
    EXPECT_EQ(code_of([&] { train_head(ds, head, cfg); }), ErrorCode::BadParams);
    cfg = quick_config();
    cfg.epochs = 0;
    EXPECT_EQ(code_of([&] { train_head(ds, head, cfg); }), ErrorCode::BadParams);
    EXPECT_EQ(code_of([&] { train_head(ds, init_head(HeadKind::Linear, 3, 3, {}, 0), quick_config()); }),
              ErrorCode::DimMismatch);
    EXPECT_EQ(code_of([&] { train_head(ds, SearchHead::identity(), quick_config()); }), ErrorCode::DimMismatch);

    cfg = quick_config();
    cfg.temperature = 1e-310;
    EXPECT_EQ(code_of([&] { train_head(ds, head, cfg); }), ErrorCode::DivergedLoss);
}

TEST(Trainer, LossLogAndPrecompute) {
    const TrainReport r{{1.5, 0.25}, SearchHead::identity(), 2, 0.0};
    EXPECT_EQ(format_loss_log(r), "epoch\tmean_loss\n1\t1.500000000\n2\t0.250000000\n");

    const auto ds = linear_world(10, 4, 2, 9);
    const auto head = init_head(HeadKind::Linear, 4, 2, {}, 1);
    const auto t = precompute_transformed_queries(ds, head);
    EXPECT_EQ(t.ids(), ds.queries.ids());
    EXPECT_EQ(t.data(), apply_rows(head, ds.queries.data()));
}
