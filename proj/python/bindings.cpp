#include "sepsearch/embedding_store.hpp"
#include "sepsearch/error.hpp"
#include "sepsearch/eval_metrics.hpp"
#include "sepsearch/ivf_index.hpp"
#include "sepsearch/retrieval.hpp"
#include "sepsearch/scenario_lab.hpp"
#include "sepsearch/search_head.hpp"
#include "sepsearch/trainer.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace sepsearch;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
    if (a.ndim() != 2) throw Error(ErrorCode::BadShape, "expected a 2-d array");
    Matrix m(a.shape(0), a.shape(1));
    std::copy(a.data(), a.data() + a.size(), m.values().begin());
    return m;
}

Array to_array(const Matrix& m) {
    Array a({m.rows(), m.cols()});
    std::copy(m.values().begin(), m.values().end(), a.mutable_data());
    return a;
}

std::vector<double> to_vector(const Array& a) {
    if (a.ndim() != 1) throw Error(ErrorCode::BadShape, "expected a 1-d array");
    return {a.data(), a.data() + a.size()};
}

py::list runs_to_python(const std::vector<RankedList>& runs) {
    py::list out;
    for (const auto& r : runs) {
        py::list entries;
        for (const auto& e : r.entries) entries.append(py::make_tuple(e.item_id, e.score));
        out.append(py::make_tuple(r.query_id, entries));
    }
    return out;
}

std::vector<RankedList> runs_from_python(const py::iterable& runs) {
    std::vector<RankedList> out;
    for (auto item : runs) {
        auto pair = item.cast<std::pair<std::string, std::vector<std::pair<std::string, double>>>>();
        RankedList r{pair.first, {}};
        for (auto& [id, s] : pair.second) r.entries.push_back({id, s});
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_sepsearch, m) {
    m.doc() = "Trainable search heads over frozen embeddings";

    py::register_exception<Error>(m, "SepsearchError", PyExc_ValueError);

    py::class_<EmbeddingMatrix>(m, "EmbeddingMatrix")
        .def(py::init([](std::vector<std::string> ids, const Array& data) {
                 return EmbeddingMatrix(std::move(ids), to_matrix(data));
             }),
             py::arg("ids"), py::arg("data"))
        .def_property_readonly("ids", &EmbeddingMatrix::ids)
        .def_property_readonly("dim", &EmbeddingMatrix::dim)
        .def("__len__", &EmbeddingMatrix::count)
        .def("to_numpy", [](const EmbeddingMatrix& e) { return to_array(e.data()); })
        .def("lookup", [](const EmbeddingMatrix& e, const std::string& id) { return lookup(e, id); })
        .def("l2_normalized", &EmbeddingMatrix::l2_normalized)
        .def("__eq__", &EmbeddingMatrix::operator==);
    m.def("load_embeddings", &load_embeddings);
    m.def("save_embeddings", &save_embeddings);

    py::class_<Qrels>(m, "Qrels")
        .def(py::init([](const std::vector<std::tuple<std::string, std::string, std::uint32_t>>& rows) {
            std::vector<QrelEntry> entries;
            for (const auto& [q, d, g] : rows) entries.push_back({q, d, g});
            return Qrels(std::move(entries));
        }))
        .def("grade", &Qrels::grade)
        .def("relevant_count", &Qrels::relevant_count)
        .def("query_ids", &Qrels::query_ids);
    m.def("load_qrels", &load_qrels);
    m.def("save_qrels", &save_qrels);

    py::class_<Dataset>(m, "Dataset")
        .def(py::init(&make_dataset), py::arg("queries"), py::arg("items"), py::arg("qrels"))
        .def_readonly("queries", &Dataset::queries)
        .def_readonly("items", &Dataset::items)
        .def_readonly("qrels", &Dataset::qrels);
    m.def("load_dataset", &load_dataset);
    m.def("save_dataset", &save_dataset);

    py::class_<SearchHead>(m, "SearchHead")
        .def_static("identity", &SearchHead::identity)
        .def_static(
            "linear",
            [](const Array& w, std::optional<Array> b) {
                std::optional<std::vector<double>> bias;
                if (b) bias = to_vector(*b);
                return SearchHead::linear(to_matrix(w), std::move(bias));
            },
            py::arg("weight"), py::arg("bias") = py::none())
        .def_static(
            "init",
            [](const std::string& kind, std::size_t in_dim, std::size_t out_dim, std::vector<std::size_t> hidden,
               std::uint64_t seed, const std::string& activation, bool bias) {
                HeadOptions o;
                o.hidden_activation = parse_activation(activation);
                o.linear_bias = bias;
                return init_head(parse_head_kind(kind), in_dim, out_dim, hidden, seed, o);
            },
            py::arg("kind"), py::arg("in_dim"), py::arg("out_dim"), py::arg("hidden") = std::vector<std::size_t>{},
            py::arg("seed") = 0, py::arg("activation") = "tanh", py::arg("bias") = false)
        .def_property_readonly("kind", [](const SearchHead& h) { return std::string(to_string(h.kind())); })
        .def_property_readonly("in_dim", &SearchHead::in_dim)
        .def_property_readonly("out_dim", &SearchHead::out_dim)
        .def("parameters", &SearchHead::parameters)
        .def("apply", [](const SearchHead& h, const Array& q) { return sepsearch::apply(h, to_vector(q)); })
        .def("apply_rows", [](const SearchHead& h, const Array& q) { return to_array(apply_rows(h, to_matrix(q))); })
        .def("__eq__", &SearchHead::operator==);
    m.def("load_head", &load_head);
    m.def("save_head", &save_head);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("temperature", &TrainConfig::temperature)
        .def_readwrite("weight_decay", &TrainConfig::weight_decay)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("shuffle", &TrainConfig::shuffle)
        .def_property(
            "optimizer", [](const TrainConfig& c) { return c.optimizer == OptimizerKind::Adam ? "adam" : "sgd"; },
            [](TrainConfig& c, const std::string& s) {
                if (s == "adam") c.optimizer = OptimizerKind::Adam;
                else if (s == "sgd") c.optimizer = OptimizerKind::Sgd;
                else throw Error(ErrorCode::BadParams, "optimizer must be adam or sgd");
            });

    py::class_<TrainReport>(m, "TrainReport")
        .def_readonly("epoch_losses", &TrainReport::epoch_losses)
        .def_readonly("head", &TrainReport::head)
        .def_readonly("steps", &TrainReport::steps)
        .def_readonly("wall_time_seconds", &TrainReport::wall_time_seconds);
    m.def("train_head", &train_head, py::arg("dataset"), py::arg("head"), py::arg("config"));

    m.def("fold_head", &fold_head, py::arg("head"), py::arg("queries"));
    m.def(
        "search",
        [](const SearchHead& h, const EmbeddingMatrix& q, const EmbeddingMatrix& items, std::size_t k,
           std::size_t threads) { return runs_to_python(search_exact(h, q, items, k, threads)); },
        py::arg("head"), py::arg("queries"), py::arg("items"), py::arg("k") = 10, py::arg("threads") = 1);

    py::class_<IvfIndex>(m, "IvfIndex").def_property_readonly("clusters", &IvfIndex::clusters);
    m.def("build_ivf", &build_ivf, py::arg("items"), py::arg("clusters"), py::arg("iters") = 10,
          py::arg("seed") = 0);
    m.def(
        "search_ivf",
        [](const IvfIndex& ix, const EmbeddingMatrix& items, const EmbeddingMatrix& q, std::size_t k,
           std::size_t nprobe) {
            std::vector<RankedList> runs;
            for (std::size_t i = 0; i < q.count(); ++i) runs.push_back(search_ivf(ix, items, q.row(i), k, nprobe, q.ids()[i]));
            return runs_to_python(runs);
        },
        py::arg("index"), py::arg("items"), py::arg("queries"), py::arg("k") = 10, py::arg("nprobe") = 1);

    m.def(
        "evaluate",
        [](const py::iterable& runs, const Qrels& qrels, std::vector<std::size_t> ks) {
            return evaluate_run(runs_from_python(runs), qrels, std::move(ks)).aggregate;
        },
        py::arg("runs"), py::arg("qrels"), py::arg("ks") = std::vector<std::size_t>{1, 10});

    m.def(
        "gen_synthetic",
        [](const std::string& scenario, std::uint64_t data_seed) {
            ScenarioSpec spec;
            spec.scenario = parse_scenario(scenario);
            spec.data_seed = data_seed;
            return gen_synthetic(spec);
        },
        py::arg("scenario") = "S4", py::arg("data_seed") = 2);
    m.def(
        "run_scenario",
        [](const std::string& scenario) {
            ScenarioSpec spec;
            spec.scenario = parse_scenario(scenario);
            const auto r = run_scenario(spec, default_scenario_train_config());
            py::dict evals;
            for (const auto& e : r.evaluations) evals[py::str(e.label)] = e.metrics.aggregate;
            py::dict out;
            out["verdict"] = std::string(to_string(r.verdict));
            out["chance_level"] = r.chance_level;
            out["evaluations"] = evals;
            out["notes"] = r.notes;
            return out;
        },
        py::arg("scenario"));
}
