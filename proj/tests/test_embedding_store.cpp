#include "sepsearch/embedding_store.hpp"
#include "sepsearch/error.hpp"
#include "sepsearch/io.hpp"
#include "support/errors.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <limits>

using namespace sepsearch;
using oracle::code_of;

namespace {

void patch_u32(std::string& bytes, std::size_t offset, std::uint32_t v) { std::memcpy(bytes.data() + offset, &v, 4); }

} // namespace

TEST(EmbeddingStore, RoundTripIsBitExact) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto m = oracle::random_embeddings(37 + seed, 5 + seed, 'd', seed);
        EXPECT_EQ(decode_embeddings(encode_embeddings(m)), m);
    }
}

TEST(EmbeddingStore, HeaderLayout) {
    const auto m = oracle::random_embeddings(3, 4, 'q', 1);
    const auto bytes = encode_embeddings(m);
    EXPECT_EQ(bytes.substr(0, 4), "SEPE");
    std::uint64_t count = 0;
    std::uint32_t dim = 0;
    std::memcpy(&count, bytes.data() + 8, 8);
    std::memcpy(&dim, bytes.data() + 16, 4);
    EXPECT_EQ(count, 3u);
    EXPECT_EQ(dim, 4u);
    EXPECT_EQ(bytes.size(), 24u + 3 * 4 * 4 + 3 * (2 + 6));
}

TEST(EmbeddingStore, SaveLoadFile) {
    oracle::TempDir dir("emb");
    const auto m = oracle::random_embeddings(10, 3, 'd', 4);
    save_embeddings(m, dir / "x.emb");
    EXPECT_EQ(load_embeddings(dir / "x.emb"), m);
    for (const auto& entry : std::filesystem::directory_iterator(dir.path)) {
        EXPECT_EQ(entry.path().filename(), "x.emb");
    }
}

TEST(EmbeddingStore, RejectsCorruptFiles) {
    const auto good = encode_embeddings(oracle::random_embeddings(4, 3, 'd', 2));

    auto bad = good;
    bad[0] = 'X';
    EXPECT_EQ(code_of([&] { decode_embeddings(bad); }), ErrorCode::BadMagic);

    bad = good;
    patch_u32(bad, 4, 2);
    EXPECT_EQ(code_of([&] { decode_embeddings(bad); }), ErrorCode::CorruptHeader);

    bad = good;
    patch_u32(bad, 20, 7);
    EXPECT_EQ(code_of([&] { decode_embeddings(bad); }), ErrorCode::CorruptHeader);

    bad = good;
    patch_u32(bad, 16, 0);
    EXPECT_EQ(code_of([&] { decode_embeddings(bad); }), ErrorCode::CorruptHeader);

    bad = good;
    patch_u32(bad, 16, 1000);
    EXPECT_EQ(code_of([&] { decode_embeddings(bad); }), ErrorCode::CorruptHeader);

    EXPECT_EQ(code_of([&] { decode_embeddings(good.substr(0, good.size() - 1)); }), ErrorCode::CorruptHeader);
    EXPECT_EQ(code_of([&] { decode_embeddings(good + "z"); }), ErrorCode::CorruptHeader);
    EXPECT_EQ(code_of([&] { decode_embeddings(good.substr(0, 10)); }), ErrorCode::CorruptHeader);

    bad = good;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bad.data() + 24 + 4 * 5, &nan, 4);
    EXPECT_EQ(code_of([&] { decode_embeddings(bad); }), ErrorCode::NonFiniteValue);
}

TEST(EmbeddingStore, ValidatesConstruction) {
    EXPECT_EQ(code_of([] { EmbeddingMatrix({"a", "a"}, Matrix(2, 2)); }), ErrorCode::DuplicateId);
    EXPECT_EQ(code_of([] { EmbeddingMatrix({"a"}, Matrix(2, 2)); }), ErrorCode::BadShape);
    Matrix m(1, 2);
    m(0, 1) = std::numeric_limits<double>::infinity();
    EXPECT_EQ(code_of([&] { EmbeddingMatrix({"a"}, m); }), ErrorCode::NonFiniteValue);
}

TEST(EmbeddingStore, LookupAndNormalize) {
    Matrix m(2, 2);
    m(0, 0) = 3;
    m(0, 1) = 4;
    const EmbeddingMatrix e({"a", "b"}, m);
    EXPECT_EQ(lookup(e, "a"), (std::vector<double>{3, 4}));
    EXPECT_EQ(code_of([&] { e.lookup("zz"); }), ErrorCode::UnknownId);
    const auto n = e.l2_normalized();
    EXPECT_DOUBLE_EQ(n.row(0)[0], 0.6);
    EXPECT_DOUBLE_EQ(n.row(0)[1], 0.8);
    EXPECT_EQ(n.row(1)[0], 0.0);
}

TEST(EmbeddingStore, StoragePrecisionRounding) {
    Matrix m(1, 1);
    m(0, 0) = 0.1;
    const auto r = round_to_storage_precision(EmbeddingMatrix({"a"}, m));
    EXPECT_EQ(r.row(0)[0], static_cast<double>(0.1f));
    EXPECT_EQ(decode_embeddings(encode_embeddings(r)), r);
}

TEST(Qrels, ParseAndQuery) {
    const auto q = parse_qrels("# comment\nq1\td2\t2\r\n\nq1\td1\t0\nq2\td1\t1\n");
    EXPECT_EQ(q.entries().size(), 3u);
    EXPECT_EQ(q.entries()[0].item_id, "d1");
    EXPECT_EQ(q.grade("q1", "d2"), 2u);
    EXPECT_EQ(q.grade("q1", "d9"), 0u);
    EXPECT_EQ(q.relevant_count("q1"), 1u);
    EXPECT_TRUE(q.has_query("q2"));
    EXPECT_FALSE(q.has_query("q3"));
    EXPECT_EQ(parse_qrels(format_qrels(q)).entries(), q.entries());
}

TEST(Qrels, RejectsMalformedLines) {
    for (const char* text : {"q1\td1\n", "q1\td1\t1\t1\n", "q1\td1\t-1\n", "q1\td1\tx\n", "\td1\t1\n", "q\td\t1.5\n"}) {
        EXPECT_EQ(code_of([&] { parse_qrels(text); }), ErrorCode::ParseError) << text;
    }
    EXPECT_EQ(code_of([] { parse_qrels("q\td\t1\nq\td\t2\n"); }), ErrorCode::DuplicatePair);
}

TEST(Dataset, ReferentialIntegrityAndRoundTrip) {
    auto queries = oracle::random_embeddings(3, 4, 'q', 1);
    auto items = oracle::random_embeddings(5, 2, 'd', 2);
    EXPECT_EQ(code_of([&] { make_dataset(queries, items, parse_qrels("q00000\tnope\t1\n")); }),
              ErrorCode::ReferentialMismatch);
    EXPECT_EQ(code_of([&] { make_dataset(queries, items, parse_qrels("qx\td00000\t1\n")); }),
              ErrorCode::ReferentialMismatch);

    const auto ds = make_dataset(queries, items, parse_qrels("q00000\td00001\t1\nq00002\td00004\t3\n"));
    oracle::TempDir dir("dataset");
    save_dataset(ds, dir / "A");
    const auto back = load_dataset(dir / "A");
    EXPECT_EQ(back.queries, ds.queries);
    EXPECT_EQ(back.items, ds.items);
    EXPECT_EQ(back.qrels.entries(), ds.qrels.entries());
}

TEST(Io, AtomicWriteReplacesAndReportsFailure) {
    oracle::TempDir dir("io");
    write_file_atomic(dir / "f", "one");
    write_file_atomic(dir / "f", "two");
    EXPECT_EQ(read_file(dir / "f"), "two");
    EXPECT_EQ(code_of([&] { write_file_atomic(dir / "missing/f", "x"); }), ErrorCode::IoFailure);
    EXPECT_EQ(code_of([&] { read_file(dir / "nope"); }), ErrorCode::IoFailure);
}
