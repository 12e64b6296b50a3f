#include "sepsearch/retrieval.hpp"

#include "ranking.hpp"
#include "sepsearch/error.hpp"
#include "sepsearch/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <numeric>
#include <thread>

namespace sepsearch {

double score(std::span<const double> query, std::span<const double> item) {
    if (query.size() != item.size()) {
        throw Error(ErrorCode::DimMismatch, "vector lengths " + std::to_string(query.size()) + " and " +
                                                std::to_string(item.size()));
    }
    return dot(query, item);
}

double relevance_prob(double s) { return 1.0 / (1.0 + std::exp(-s)); }

namespace detail {

RankedList rank_rows(std::span<const double> query, const EmbeddingMatrix& items, std::span<const std::size_t> rows,
                     std::size_t k, std::string query_id) {
    struct Scored {
        double score;
        std::size_t row;
    };
    std::vector<Scored> scored;
    scored.reserve(rows.size());
    for (std::size_t r : rows) scored.push_back({dot(query, items.row(r)), r});

    const auto& ids = items.ids();
    auto before = [&](const Scored& a, const Scored& b) {
        return ranks_before(a.score, ids[a.row], b.score, ids[b.row]);
    };
    const std::size_t keep = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), before);

    RankedList out{std::move(query_id), {}};
    out.entries.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) out.entries.push_back({ids[scored[i].row], scored[i].score});
    return out;
}

} // namespace detail

RankedList top_k_exact(std::span<const double> query, const EmbeddingMatrix& items, std::size_t k,
                       std::string query_id) {
    if (k == 0) throw Error(ErrorCode::BadParams, "k must be positive");
    if (query.size() != items.dim()) {
        throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(query.size()) + " != item dim " +
                                                std::to_string(items.dim()));
    }
    std::vector<std::size_t> rows(items.count());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return detail::rank_rows(query, items, rows, k, std::move(query_id));
}

EmbeddingMatrix fold_head(const SearchHead& head, const EmbeddingMatrix& queries) {
    return apply_batch(head, queries);
}

std::vector<RankedList> search_exact(const SearchHead& head, const EmbeddingMatrix& queries,
                                     const EmbeddingMatrix& items, std::size_t k, std::size_t threads) {
    head.check_bridges(queries.dim(), items.dim());
    if (k == 0) throw Error(ErrorCode::BadParams, "k must be positive");
    std::vector<RankedList> out(queries.count());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto transformed = apply(head, queries.row(i));
            out[i] = top_k_exact(transformed, items, k, queries.ids()[i]);
        }
    };
    threads = std::max<std::size_t>(1, std::min(threads, queries.count()));
    if (threads == 1) {
        work(0, queries.count());
        return out;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (queries.count() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(queries.count(), begin + chunk);
        if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
    return out;
}

std::string format_run(const std::vector<RankedList>& runs, std::string_view tag) {
    std::string out;
    char buf[64];
    for (const auto& list : runs) {
        for (std::size_t r = 0; r < list.entries.size(); ++r) {
            const auto& e = list.entries[r];
            std::snprintf(buf, sizeof buf, " %zu %.6f ", r + 1, e.score);
            out += list.query_id;
            out += " Q0 ";
            out += e.item_id;
            out += buf;
            out += tag;
            out += '\n';
        }
    }
    return out;
}

void save_run(const std::vector<RankedList>& runs, std::string_view tag, const std::filesystem::path& path) {
    write_file_atomic(path, format_run(runs, tag));
}

std::vector<RankedList> parse_run(std::string_view text) {
    struct Line {
        std::size_t rank;
        RankedEntry entry;
    };
    std::vector<std::string> order;
    std::map<std::string, std::vector<Line>, std::less<>> grouped;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;

        std::vector<std::string_view> fields;
        while (!line.empty()) {
            const auto sp = line.find(' ');
            if (sp != 0) fields.push_back(line.substr(0, sp));
            if (sp == std::string_view::npos) break;
            line = line.substr(sp + 1);
        }
        auto fail = [&] { return Error(ErrorCode::ParseError, "run line " + std::to_string(line_no)); };
        if (fields.size() != 6 || fields[1] != "Q0") throw fail();
        std::size_t rank = 0;
        auto [rend, rec] = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), rank);
        if (rec != std::errc{} || rend != fields[3].data() + fields[3].size() || rank == 0) throw fail();
        const std::string score_text(fields[4]);
        char* send = nullptr;
        const double s = std::strtod(score_text.c_str(), &send);
        if (send != score_text.c_str() + score_text.size()) throw fail();

        auto [it, inserted] = grouped.try_emplace(std::string(fields[0]));
        if (inserted) order.emplace_back(fields[0]);
        it->second.push_back({rank, {std::string(fields[2]), s}});
    }

    std::vector<RankedList> out;
    out.reserve(order.size());
    for (const auto& qid : order) {
        auto& lines = grouped.find(qid)->second;
        std::stable_sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.rank < b.rank; });
        RankedList list{qid, {}};
        for (auto& l : lines) list.entries.push_back(std::move(l.entry));
        out.push_back(std::move(list));
    }
    return out;
}

std::vector<RankedList> load_run(const std::filesystem::path& path) { return parse_run(read_file(path)); }

} // namespace sepsearch
