#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "evsel/config.hpp"
#include "evsel/corpus.hpp"
#include "evsel/ecse.hpp"
#include "evsel/embedding.hpp"
#include "evsel/errors.hpp"
#include "evsel/eval.hpp"
#include "evsel/pipeline.hpp"
#include "evsel/poisoning.hpp"

namespace py = pybind11;
using namespace evsel;

namespace {

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::dict chunk_dict(const EvidenceChunk& c) {
  py::dict d;
  d["doc_id"] = c.doc_id;
  d["chunk_index"] = c.chunk_index;
  d["text"] = c.text;
  d["token_count"] = c.token_count;
  return d;
}

EvidenceChunk chunk_from(const py::dict& d) {
  EvidenceChunk c;
  c.doc_id = d["doc_id"].cast<std::string>();
  c.chunk_index = d["chunk_index"].cast<std::size_t>();
  c.text = d["text"].cast<std::string>();
  c.token_count = d.contains("token_count") ? d["token_count"].cast<std::size_t>() : 0;
  return c;
}

ChunkKeySet keys_from(const std::vector<std::pair<std::string, std::size_t>>& keys) {
  ChunkKeySet out;
  for (const auto& [doc, idx] : keys) out.insert({doc, idx});
  return out;
}

RunConfig run_config(const std::string& path, const std::optional<std::string>& output_dir) {
  RunConfig c = load_config(path);
  if (output_dir) c.output_dir = *output_dir;
  validate_config(c);
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Evidence selection core";

  static py::exception<Error> error(m, "Error");
  static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
  static py::exception<MissingArtifactError> missing_error(m, "MissingArtifactError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const MissingArtifactError& e) {
      py::set_error(missing_error, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def(
      "detect_elbow",
      [](const std::vector<double>& scores, double tau) {
        const auto r = detect_elbow(scores, tau);
        py::dict d;
        d["k_star"] = r.k_star;
        d["method"] = to_string(r.method);
        d["deltas"] = r.deltas;
        d["z_scores"] = r.z_scores;
        d["curvatures"] = r.curvatures;
        return d;
      },
      py::arg("scores"), py::arg("tau") = 1.0);

  m.def(
      "chunk_text",
      [](const std::string& doc_id, const std::string& text, std::size_t chunk_size, bool merge_short_tail) {
        const WhitespaceTokenizer tok;
        py::list out;
        for (const auto& c : chunk_document({doc_id, text, {}}, tok, {chunk_size, merge_short_tail})) {
          out.append(chunk_dict(c));
        }
        return out;
      },
      py::arg("doc_id"), py::arg("text"), py::arg("chunk_size") = 512, py::arg("merge_short_tail") = false);

  py::class_<MockEmbeddingProvider>(m, "MockEmbedder")
      .def(py::init([](std::size_t dim, std::size_t ngram) {
             return MockEmbeddingProvider({dim, ngram});
           }),
           py::arg("dim") = 64, py::arg("ngram") = 3)
      .def_property_readonly("name", &MockEmbeddingProvider::name)
      .def_property_readonly("dim", &MockEmbeddingProvider::dim)
      .def("pin", &MockEmbeddingProvider::pin, py::arg("text"), py::arg("values"))
      .def("load_pins", [](MockEmbeddingProvider& p, const std::string& path) { p.load_pins(path); })
      .def("embed", [](const MockEmbeddingProvider& p, const std::string& text) {
        const Embedding e = p.embed(text);
        return std::vector<double>(e.values().begin(), e.values().end());
      });

  m.def(
      "cosine_similarity",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        return cosine_similarity(Embedding(a), Embedding(b));
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "select_evidence",
      [](const std::vector<std::pair<std::string, std::string>>& rationales, const std::vector<py::dict>& chunks,
         const MockEmbeddingProvider& embedder, double tau, bool expansion) {
        std::vector<Rationale> rs;
        for (std::size_t i = 0; i < rationales.size(); ++i) {
          rs.push_back({i + 1, rationales[i].first, rationales[i].second});
        }
        std::vector<EvidenceChunk> cs;
        for (const auto& d : chunks) cs.push_back(chunk_from(d));
        const auto result = select_evidence(rs, cs, embedder, {tau, expansion});
        auto report = selection_report_json("", "", rs, result);
        report.erase("query_id");
        report.erase("config_digest");
        return to_py(report);
      },
      py::arg("rationales"), py::arg("chunks"), py::arg("embedder"), py::arg("tau") = 1.0,
      py::arg("expansion") = true);

  m.def(
      "set_metrics",
      [](const std::vector<std::pair<std::string, std::size_t>>& selected,
         const std::vector<std::pair<std::string, std::size_t>>& gold) -> py::object {
        const auto r = cp_metrics(keys_from(selected), keys_from(gold));
        if (!r) return py::none();
        py::dict d;
        d["precision"] = r->precision;
        d["recall"] = r->recall;
        d["f1"] = r->f1;
        return d;
      },
      py::arg("selected"), py::arg("gold"));

  m.def("efficiency_ratio", &efficiency_ratio, py::arg("baseline_counts"), py::arg("reference_counts"));
  m.def("poison_sample_size", &poison_sample_size, py::arg("fraction"), py::arg("n"));

  m.def(
      "config_digest", [](const std::string& path) { return config_digest(load_config(path)); }, py::arg("config"));

  const auto command = [&m](const char* name, void (*fn)(const RunConfig&, const Providers&)) {
    m.def(
        name,
        [fn](const std::string& config, const std::optional<std::string>& output_dir) {
          const RunConfig c = run_config(config, output_dir);
          const auto providers = Providers::from_config(c);
          py::gil_scoped_release release;
          fn(c, providers);
        },
        py::arg("config"), py::arg("output_dir") = py::none());
  };
  m.def(
      "run_chunk",
      [](const std::string& config, const std::optional<std::string>& output_dir) {
        cmd_chunk(run_config(config, output_dir));
      },
      py::arg("config"), py::arg("output_dir") = py::none());
  command("run_poison", &cmd_poison);
  command("run_select", &cmd_select);
  command("run_eval", &cmd_eval);
  command("run_build_prefs", &cmd_build_prefs);
}
