#include "sepsearch/retrieval.hpp"
#include "support/errors.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace sepsearch;
using oracle::code_of;

namespace {

std::vector<std::string> ids_of(const RankedList& r) {
    std::vector<std::string> out;
    for (const auto& e : r.entries) out.push_back(e.item_id);
    return out;
}

} // namespace

TEST(Retrieval, TopKMatchesFullSort) {
    const auto items = oracle::random_embeddings(300, 7, 'd', 1);
    const auto queries = oracle::random_matrix(25, 7, 2);
    for (std::size_t i = 0; i < queries.rows(); ++i) {
        const std::vector<double> q(queries.row(i).begin(), queries.row(i).end());
        for (std::size_t k : {1u, 10u, 299u, 300u, 1000u}) {
            EXPECT_EQ(top_k_exact(q, items, k, "q"), oracle::full_sort_top_k(q, items, k, "q"));
        }
    }
}

TEST(Retrieval, TiesBreakByAscendingId) {
    Matrix m(4, 2);
    for (std::size_t i = 0; i < 4; ++i) m(i, 0) = 1.0;
    m(2, 0) = 2.0;
    const EmbeddingMatrix items({"zeta", "beta", "mid", "alpha"}, m);
    const auto r = top_k_exact(std::vector<double>{1.0, 0.0}, items, 4);
    EXPECT_EQ(ids_of(r), (std::vector<std::string>{"mid", "alpha", "beta", "zeta"}));
    const auto zero = top_k_exact(std::vector<double>{0.0, 0.0}, items, 2);
    EXPECT_EQ(ids_of(zero), (std::vector<std::string>{"alpha", "beta"}));
}

TEST(Retrieval, IdentityScoresAreRawInnerProducts) {
    const auto q = oracle::random_embeddings(20, 5, 'q', 3);
    const auto items = oracle::random_embeddings(40, 5, 'd', 4);
    const auto runs = search_exact(SearchHead::identity(), q, items, 40);
    for (std::size_t i = 0; i < q.count(); ++i) {
        for (const auto& e : runs[i].entries) {
            EXPECT_EQ(e.score, oracle::plain_dot(q.row(i).data(), items.lookup(e.item_id).data(), 5));
        }
    }
}

TEST(Retrieval, FoldedQueriesRankLikeTheHead) {
    const auto q = oracle::random_embeddings(30, 6, 'q', 5);
    const auto items = oracle::random_embeddings(200, 4, 'd', 6);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        for (auto head : {init_head(HeadKind::Linear, 6, 4, {}, seed), init_head(HeadKind::Mlp, 6, 4, {5}, seed)}) {
            const auto folded = fold_head(head, q);
            EXPECT_EQ(search_exact(SearchHead::identity(), folded, items, 10), search_exact(head, q, items, 10));
        }
    }
}

TEST(Retrieval, ThreadCountDoesNotChangeOutput) {
    const auto q = oracle::random_embeddings(37, 6, 'q', 7);
    const auto items = oracle::random_embeddings(150, 6, 'd', 8);
    const auto head = init_head(HeadKind::Linear, 6, 6, {}, 1);
    const auto one = search_exact(head, q, items, 10, 1);
    for (std::size_t t : {2u, 3u, 8u, 64u}) EXPECT_EQ(search_exact(head, q, items, 10, t), one);
    EXPECT_EQ(one.size(), 37u);
    EXPECT_EQ(one[5].query_id, q.ids()[5]);
}

TEST(Retrieval, PositiveScalingKeepsTheRanking) {
    const auto items = oracle::random_embeddings(500, 8, 'd', 9);
    const auto queries = oracle::random_matrix(20, 8, 10);
    for (std::size_t i = 0; i < queries.rows(); ++i) {
        const std::vector<double> q(queries.row(i).begin(), queries.row(i).end());
        const auto base = ids_of(top_k_exact(q, items, 20));
        for (double c : {0.5, 2.0, 3.7, 1e3}) {
            std::vector<double> scaled = q;
            for (double& v : scaled) v *= c;
            EXPECT_EQ(ids_of(top_k_exact(scaled, items, 20)), base) << "scale " << c;
        }
    }
}

TEST(Retrieval, SigmoidLinkIsRankNeutral) {
    const auto items = oracle::random_embeddings(200, 4, 'd', 11);
    const std::vector<double> q{0.3, -0.2, 0.1, 0.25};
    const auto r = top_k_exact(q, items, 200);
    for (std::size_t i = 1; i < r.entries.size(); ++i) {
        EXPECT_GE(relevance_prob(r.entries[i - 1].score), relevance_prob(r.entries[i].score));
        if (r.entries[i - 1].score > r.entries[i].score) {
            EXPECT_GT(relevance_prob(r.entries[i - 1].score), relevance_prob(r.entries[i].score));
        }
    }
    EXPECT_EQ(relevance_prob(0.0), 0.5);
    EXPECT_NEAR(relevance_prob(2.0), 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
}

TEST(Retrieval, RejectsBadArguments) {
    const auto items = oracle::random_embeddings(5, 3, 'd', 12);
    EXPECT_EQ(code_of([&] { top_k_exact(std::vector<double>{1, 2, 3}, items, 0); }), ErrorCode::BadParams);
    EXPECT_EQ(code_of([&] { top_k_exact(std::vector<double>{1, 2}, items, 3); }), ErrorCode::DimMismatch);
    EXPECT_EQ(code_of([] { score(std::vector<double>{1}, std::vector<double>{1, 2}); }), ErrorCode::DimMismatch);
    const auto q = oracle::random_embeddings(2, 4, 'q', 13);
    EXPECT_EQ(code_of([&] { search_exact(SearchHead::identity(), q, items, 3); }), ErrorCode::DimMismatch);
    EXPECT_EQ(code_of([&] { search_exact(init_head(HeadKind::Linear, 4, 2, {}, 0), q, items, 3); }),
              ErrorCode::DimMismatch);
}

TEST(RunFile, FormatAndParse) {
    std::vector<RankedList> runs = {{"q1", {{"d3", 2.5}, {"d1", -0.125}}}, {"q0", {{"d2", 1.0}}}};
    const auto text = format_run(runs, "tag");
    EXPECT_EQ(text, "q1 Q0 d3 1 2.500000 tag\nq1 Q0 d1 2 -0.125000 tag\nq0 Q0 d2 1 1.000000 tag\n");
    EXPECT_EQ(parse_run(text), runs);

    const auto shuffled = parse_run("q Q0 b 2 0.5 x\nq Q0 a 1 0.9 x\n");
    EXPECT_EQ(ids_of(shuffled[0]), (std::vector<std::string>{"a", "b"}));

    for (const char* bad : {"q Q0 d 1 0.5\n", "q X d 1 0.5 t\n", "q Q0 d 0 0.5 t\n", "q Q0 d 1 abc t\n"}) {
        EXPECT_EQ(code_of([&] { parse_run(bad); }), ErrorCode::ParseError) << bad;
    }

    oracle::TempDir dir("run");
    save_run(runs, "tag", dir / "r.run");
    EXPECT_EQ(load_run(dir / "r.run"), runs);
}
