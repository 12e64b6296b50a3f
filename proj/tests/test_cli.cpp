#include "cli.hpp"
#include "sepsearch/io.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sstream>

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "sepsearch");
    std::ostringstream out, err;
    const int code = sepsearch::cli::dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
  protected:
    oracle::TempDir dir{"cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name())};

    std::string path(const std::string& f) const { return (dir / f).string(); }

    void write(const std::string& f, const std::string& text) const { sepsearch::write_file_atomic(dir / f, text); }

    std::string read(const std::string& f) const { return sepsearch::read_file(dir / f); }

    void generate() const {
        write("spec.cfg", "scenario=S4\n");
        write("head.cfg", "kind=mlp\nhidden=8\nseed=3\n");
        write("train.cfg", "batch_size=64\nepochs=3\nlearning_rate=0.01\nseed=1\n");
        ASSERT_EQ(run({"gen-data", "--spec", path("spec.cfg"), "--out", path("data")}).code, 0);
    }
};

} // namespace

TEST_F(Cli, VersionAndUsage) {
    const auto v = run({"--version"});
    EXPECT_EQ(v.code, 0);
    EXPECT_NE(v.out.find("SEPE v1"), std::string::npos);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({"fold", "--head", "x"}).code, 2);
    EXPECT_EQ(run({"search", "--queries", "a", "--items", "b", "--out", "c", "--k", "0"}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(Cli, DomainErrorsNameTheirType) {
    const auto missing = run({"fold", "--head", path("none.seph"), "--queries", path("q.emb"), "--out", path("o.emb")});
    EXPECT_EQ(missing.code, 1);
    EXPECT_EQ(missing.err.rfind("IoFailure\n", 0), 0u);
    EXPECT_FALSE(std::filesystem::exists(dir / "o.emb"));

    write("junk.emb", "not an embedding file");
    write("h.seph", "SEPH");
    const auto magic = run({"index", "--items", path("junk.emb"), "--out", path("i.sepi")});
    EXPECT_EQ(magic.code, 1);
    EXPECT_EQ(magic.err.rfind("BadMagic\n", 0), 0u);

    write("bad.tsv", "q\td\n");
    write("r.run", "q Q0 d 1 0.5 t\n");
    const auto parse = run({"eval", "--run", path("r.run"), "--qrels", path("bad.tsv")});
    EXPECT_EQ(parse.code, 1);
    EXPECT_EQ(parse.err.rfind("ParseError\n", 0), 0u);

    write("spec.cfg", "n_topics=9\n");
    const auto spec = run({"gen-data", "--spec", path("spec.cfg"), "--out", path("d")});
    EXPECT_EQ(spec.code, 1);
    EXPECT_EQ(spec.err.rfind("BadSpec\n", 0), 0u);

    const auto outdir = run({"gen-data", "--spec", path("spec.cfg"), "--out", path("d")});
    EXPECT_EQ(outdir.code, 1);
}

TEST_F(Cli, OutputDirectoryMustExist) {
    generate();
    const auto r = run({"index", "--items", path("data/A/items.emb"), "--out", path("nowhere/i.sepi")});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("IoFailure\n", 0), 0u);
}

TEST_F(Cli, FoldThenSearchEqualsSearchWithHead) {
    generate();
    ASSERT_EQ(run({"train", "--data", path("data/A"), "--head-config", path("head.cfg"), "--train-config",
                   path("train.cfg"), "--out", path("h.seph"), "--log", path("loss.tsv")})
                  .code,
              0);
    EXPECT_EQ(read("loss.tsv").rfind("epoch\tmean_loss\n1\t", 0), 0u);
    ASSERT_EQ(run({"fold", "--head", path("h.seph"), "--queries", path("data/A/queries.emb"), "--out", path("f.emb")})
                  .code,
              0);
    ASSERT_EQ(run({"search", "--queries", path("f.emb"), "--items", path("data/A/items.emb"), "--out",
                   path("folded.run")})
                  .code,
              0);
    ASSERT_EQ(run({"--threads", "3", "search", "--head", path("h.seph"), "--queries", path("data/A/queries.emb"),
                   "--items", path("data/A/items.emb"), "--out", path("head.run")})
                  .code,
              0);
    EXPECT_EQ(read("folded.run"), read("head.run"));

    ASSERT_EQ(run({"index", "--items", path("data/A/items.emb"), "--clusters", "8", "--seed", "4", "--out",
                   path("i.sepi")})
                  .code,
              0);
    ASSERT_EQ(run({"search", "--queries", path("f.emb"), "--items", path("data/A/items.emb"), "--index",
                   path("i.sepi"), "--nprobe", "8", "--out", path("ivf.run")})
                  .code,
              0);
    EXPECT_EQ(read("ivf.run"), read("folded.run"));
    const auto overprobe = run({"search", "--queries", path("f.emb"), "--items", path("data/A/items.emb"),
                                "--index", path("i.sepi"), "--nprobe", "9", "--out", path("x.run")});
    EXPECT_EQ(overprobe.code, 1);
    EXPECT_EQ(overprobe.err.rfind("BadParams\n", 0), 0u);
}

TEST_F(Cli, PipelineIsReproducible) {
    generate();
    for (const std::string tag : {"1", "2"}) {
        ASSERT_EQ(run({"gen-data", "--spec", path("spec.cfg"), "--out", path("data" + tag)}).code, 0);
        ASSERT_EQ(run({"train", "--data", path("data" + tag + "/A"), "--head-config", path("head.cfg"),
                       "--train-config", path("train.cfg"), "--out", path("h" + tag)})
                      .code,
                  0);
        ASSERT_EQ(run({"search", "--head", path("h" + tag), "--queries", path("data" + tag + "/B/queries.emb"),
                       "--items", path("data" + tag + "/B/items.emb"), "--k", "20", "--out", path("r" + tag)})
                      .code,
                  0);
        const auto e = run({"eval", "--run", path("r" + tag), "--qrels", path("data" + tag + "/B/qrels.tsv"),
                            "--ks", "1,10,20", "--per-query", "--out", path("m" + tag)});
        ASSERT_EQ(e.code, 0);
        const auto j = nlohmann::json::parse(e.out);
        EXPECT_EQ(j["queries"], 256);
        EXPECT_TRUE(j["metrics"].contains("ndcg@20"));
    }
    EXPECT_EQ(read("data1/A/items.emb"), read("data2/A/items.emb"));
    EXPECT_EQ(read("h1"), read("h2"));
    EXPECT_EQ(read("r1"), read("r2"));
    EXPECT_EQ(read("m1"), read("m2"));
}

TEST_F(Cli, ScenarioAndSweep) {
    write("spec.cfg", "scenario=S2\n");
    const auto s = run({"scenario", "--spec", path("spec.cfg"), "--out", path("report.tsv")});
    EXPECT_EQ(s.code, 0);
    EXPECT_NE(s.out.find("# verdict: ConfirmsPaper"), std::string::npos);
    EXPECT_EQ(read("report.tsv"), s.out);

    write("spec.cfg", "scenario=S4\nn_queries=64\nn_items=128\n");
    write("grid.cfg", "head_sizes=0,4\nspecificities=0,1\n");
    write("train.cfg", "batch_size=32\nepochs=2\n");
    const auto w = run({"sweep", "--spec", path("spec.cfg"), "--grid", path("grid.cfg"), "--train-config",
                        path("train.cfg"), "--out", path("sweep.tsv")});
    ASSERT_EQ(w.code, 0) << w.err;
    const auto tsv = read("sweep.tsv");
    EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 5);
    EXPECT_EQ(tsv.rfind("specificity\thead_size\t", 0), 0u);

    write("grid.cfg", "head_sizes=0\nwidths=2\n");
    EXPECT_EQ(run({"sweep", "--spec", path("spec.cfg"), "--grid", path("grid.cfg"), "--out", path("s2.tsv")}).code, 1);
}
