#include "sepsearch/eval_metrics.hpp"

#include "sepsearch/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>

namespace sepsearch {

namespace {

std::size_t require_relevant(const RankedList& run, const Qrels& qrels) {
    const std::size_t n = qrels.relevant_count(run.query_id);
    if (n == 0) throw Error(ErrorCode::NoRelevant, "query " + run.query_id + " has no relevant items");
    return n;
}

} // namespace

double recall_at_k(const RankedList& run, const Qrels& qrels, std::size_t k) {
    const std::size_t relevant = require_relevant(run, qrels);
    if (k == 0) throw Error(ErrorCode::BadParams, "k must be positive");
    std::size_t hits = 0;
    const std::size_t depth = std::min(k, run.entries.size());
    for (std::size_t r = 0; r < depth; ++r) hits += qrels.grade(run.query_id, run.entries[r].item_id) >= 1 ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(std::min(relevant, k));
}

double mrr(const RankedList& run, const Qrels& qrels) {
    require_relevant(run, qrels);
    for (std::size_t r = 0; r < run.entries.size(); ++r) {
        if (qrels.grade(run.query_id, run.entries[r].item_id) >= 1) return 1.0 / static_cast<double>(r + 1);
    }
    return 0.0;
}

double ndcg_at_k(const RankedList& run, const Qrels& qrels, std::size_t k) {
    require_relevant(run, qrels);
    if (k == 0) throw Error(ErrorCode::BadParams, "k must be positive");
    double dcg = 0.0;
    const std::size_t depth = std::min(k, run.entries.size());
    for (std::size_t r = 0; r < depth; ++r) {
        const auto g = qrels.grade(run.query_id, run.entries[r].item_id);
        dcg += static_cast<double>(g) / std::log2(static_cast<double>(r + 2));
    }
    std::vector<std::uint32_t> grades;
    for (const auto& [item, g] : qrels.judgments(run.query_id)) grades.push_back(g);
    std::sort(grades.begin(), grades.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, grades.size()); ++r) {
        idcg += static_cast<double>(grades[r]) / std::log2(static_cast<double>(r + 2));
    }
    return dcg / idcg;
}

std::string metric_key(std::string_view metric, std::size_t k) {
    return std::string(metric) + "@" + std::to_string(k);
}

double MetricsReport::at(std::string_view key) const {
    auto it = aggregate.find(std::string(key));
    if (it == aggregate.end()) throw Error(ErrorCode::BadParams, "metric " + std::string(key) + " not in report");
    return it->second;
}

MetricsReport evaluate_run(const std::vector<RankedList>& runs, const Qrels& qrels, std::vector<std::size_t> ks) {
    if (runs.empty()) throw Error(ErrorCode::EmptyRun, "no rankings to evaluate");
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    if (ks.empty() || ks.front() == 0) throw Error(ErrorCode::BadParams, "ks must be non-empty and positive");

    MetricsReport report;
    report.ks = ks;
    for (const auto& run : runs) {
        if (report.per_query.contains(run.query_id)) {
            throw Error(ErrorCode::BadParams, "query " + run.query_id + " appears twice in run");
        }
        if (qrels.relevant_count(run.query_id) == 0) {
            report.skipped.push_back(run.query_id);
            continue;
        }
        auto& row = report.per_query[run.query_id];
        for (auto k : ks) {
            row[metric_key("recall", k)] = recall_at_k(run, qrels, k);
            row[metric_key("ndcg", k)] = ndcg_at_k(run, qrels, k);
        }
        row["mrr"] = mrr(run, qrels);
    }
    report.query_count = report.per_query.size();
    if (report.query_count == 0) return report;

    // Sum in run order so the means do not depend on map ordering.
    for (const auto& run : runs) {
        auto it = report.per_query.find(run.query_id);
        if (it == report.per_query.end()) continue;
        for (const auto& [key, value] : it->second) report.aggregate[key] += value;
    }
    for (auto& [key, value] : report.aggregate) value /= static_cast<double>(report.query_count);
    return report;
}

MetricsReport chance_level(const Dataset& ds, const std::vector<std::size_t>& ks) {
    std::vector<std::string> order = ds.items.ids();
    std::sort(order.begin(), order.end());
    RankedList tied{{}, {}};
    for (const auto& id : order) tied.entries.push_back({id, 0.0});

    std::vector<RankedList> runs;
    runs.reserve(ds.queries.count());
    for (const auto& qid : ds.queries.ids()) {
        runs.push_back(tied);
        runs.back().query_id = qid;
    }
    return evaluate_run(runs, ds.qrels, ks);
}

TransferReport transfer_report(const SearchHead& head, const Dataset& ds_train, const Dataset& ds_target,
                               const std::vector<std::size_t>& ks) {
    head.check_bridges(ds_train.queries.dim(), ds_train.items.dim());
    head.check_bridges(ds_target.queries.dim(), ds_target.items.dim());
    if (ks.empty()) throw Error(ErrorCode::BadParams, "ks must be non-empty");
    const std::size_t depth = *std::max_element(ks.begin(), ks.end());
    return {evaluate_run(search_exact(head, ds_train.queries, ds_train.items, depth), ds_train.qrels, ks),
            evaluate_run(search_exact(head, ds_target.queries, ds_target.items, depth), ds_target.qrels, ks)};
}

std::string format_metrics_tsv(const MetricsReport& report, bool per_query) {
    std::string out = "metric\tk\tvalue\n";
    char buf[64];
    auto emit = [&](std::string_view prefix, const std::map<std::string, double>& values) {
        for (std::string_view metric : {"recall", "ndcg"}) {
            for (auto k : report.ks) {
                auto it = values.find(metric_key(metric, k));
                if (it == values.end()) continue;
                std::snprintf(buf, sizeof buf, "\t%zu\t%.6f\n", k, it->second);
                out += prefix;
                out += metric;
                out += buf;
            }
        }
        if (auto it = values.find("mrr"); it != values.end()) {
            std::snprintf(buf, sizeof buf, "mrr\t-\t%.6f\n", it->second);
            out += prefix;
            out += buf;
        }
    };
    emit("", report.aggregate);
    if (per_query) {
        out += "\nquery\tmetric\tk\tvalue\n";
        for (const auto& [qid, values] : report.per_query) emit(qid + "\t", values);
    }
    return out;
}

std::string format_metrics_summary(const MetricsReport& report) {
    nlohmann::json j;
    j["queries"] = report.query_count;
    j["skipped"] = report.skipped.size();
    for (const auto& [key, value] : report.aggregate) j["metrics"][key] = value;
    return j.dump();
}

} // namespace sepsearch
