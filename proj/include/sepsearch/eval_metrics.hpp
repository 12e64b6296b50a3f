#pragma once

#include "sepsearch/embedding_store.hpp"
#include "sepsearch/retrieval.hpp"
#include "sepsearch/search_head.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace sepsearch {

/// Recall capped at k: |relevant in top k| / min(|relevant|, k).
double recall_at_k(const RankedList& run, const Qrels& qrels, std::size_t k);
/// Reciprocal rank of the first relevant entry; 0 when none is retrieved.
double mrr(const RankedList& run, const Qrels& qrels);
/// Linear-gain nDCG with 1/log2(rank+1) discount.
double ndcg_at_k(const RankedList& run, const Qrels& qrels, std::size_t k);

std::string metric_key(std::string_view metric, std::size_t k);

struct MetricsReport {
    /// Keys like "recall@10", "ndcg@10", "mrr".
    std::map<std::string, double> aggregate;
    std::map<std::string, std::map<std::string, double>> per_query;
    std::size_t query_count = 0;
    /// Run queries with no relevant judgment; excluded from the means.
    std::vector<std::string> skipped;
    std::vector<std::size_t> ks;

    double at(std::string_view key) const;
    bool operator==(const MetricsReport&) const = default;
};

/// Per-query recall@k and nDCG@k for every k plus MRR, and their means.
/// Throws EmptyRun for an empty run list.
MetricsReport evaluate_run(const std::vector<RankedList>& runs, const Qrels& qrels, std::vector<std::size_t> ks);

/// Metrics when every item scores the same: the ranking is the ascending item
/// id order for every query, so the values follow directly from the qrels.
MetricsReport chance_level(const Dataset& ds, const std::vector<std::size_t>& ks);

struct TransferReport {
    MetricsReport in_domain;
    MetricsReport zero_shot;
};

/// Evaluates one frozen head with exact search on the training dataset and on
/// a target dataset. No training happens here.
TransferReport transfer_report(const SearchHead& head, const Dataset& ds_train, const Dataset& ds_target,
                               const std::vector<std::size_t>& ks);

/// `metric<TAB>k<TAB>value` rows (k is `-` for MRR); with `per_query`, a
/// blank line and `query<TAB>metric<TAB>k<TAB>value` rows follow.
std::string format_metrics_tsv(const MetricsReport& report, bool per_query);
/// Single-line JSON object with query counts and aggregate values.
std::string format_metrics_summary(const MetricsReport& report);

} // namespace sepsearch
