// ensdist/bindings.cpp

// Copyright 2026 The ensdist Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ensdist/confidence.hpp"
#include "ensdist/data.hpp"
#include "ensdist/errors.hpp"
#include "ensdist/fusion.hpp"
#include "ensdist/metrics.hpp"
#include "ensdist/rnnt.hpp"
#include "ensdist/weighting.hpp"

namespace py = pybind11;
using namespace ensdist;

namespace {

confidence::NBestList list_from_scores(const std::vector<double>& scores) {
  confidence::NBestList nb;
  for (double s : scores) nb.entries.push_back({{}, s});
  return nb;
}

fusion::VotingScheme scheme_from(const std::string& name, double alpha) {
  if (name == "frequency") return fusion::VotingScheme::frequency();
  if (name == "confidence") return fusion::VotingScheme::confidence(alpha);
  throw ConfigError("scheme must be frequency or confidence");
}

nn::LogitLattice lattice_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3) {
    throw ShapeError("lattice must have shape (T, U+1, V+1)");
  }
  nn::LogitLattice lat(static_cast<int>(a.shape(0)),
                       static_cast<int>(a.shape(1)) - 1,
                       static_cast<int>(a.shape(2)) - 1);
  std::copy(a.data(), a.data() + a.size(), lat.logits.begin());
  return lat;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "ensdist: multi-expert transcript distillation toolkit";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<DataError>(m, "DataError");

  // metrics
  m.def("tokenize", [](const std::string& text) {
    return metrics::tokenize(text);
  });
  m.def("align", [](const metrics::TokenSequence& ref,
                    const metrics::TokenSequence& hyp) {
    auto a = metrics::align(ref, hyp);
    py::dict d;
    d["substitutions"] = a.substitutions;
    d["deletions"] = a.deletions;
    d["insertions"] = a.insertions;
    d["matches"] = a.matches;
    return d;
  });
  m.def("wer", [](const metrics::TokenSequence& ref,
                  const metrics::TokenSequence& hyp) {
    return metrics::wer(ref, hyp).to_double();
  });
  m.def("best_expert_labels", &metrics::best_expert_labels);
  m.def("weighter_accuracy", &metrics::weighter_accuracy);
  m.def("weighted_wer", &metrics::weighted_wer);

  // fusion
  m.def(
      "rover",
      [](const std::vector<metrics::TokenSequence>& hyps,
         const std::string& scheme, double alpha,
         const std::optional<std::vector<double>>& confidences) {
        return fusion::rover(hyps, scheme_from(scheme, alpha),
                             confidences ? &*confidences : nullptr);
      },
      py::arg("hyps"), py::arg("scheme") = "frequency", py::arg("alpha") = 1.0,
      py::arg("confidences") = std::nullopt);

  // confidence
  m.def("normalize_scores", [](const std::vector<double>& scores) {
    return confidence::normalize_scores(list_from_scores(scores));
  });
  m.def("entropy", [](const std::vector<double>& scores) {
    return confidence::entropy(list_from_scores(scores));
  });

  // weighting
  m.def("uniform_weights", &weighting::uniform_weights);
  m.def("best_expert_weights", &weighting::best_expert_weights);
  m.def("oracle_weights", &weighting::oracle_weights);
  m.def("temperature_renormalize", &weighting::temperature_renormalize,
        py::arg("weights"), py::arg("temperature") = 1.0);
  m.def("bce_loss", [](const weighting::WeightVector& w,
                       const metrics::SupervisionTarget& z) {
    auto r = weighting::bce_loss(w, z);
    return py::make_tuple(r.loss, r.grad);
  });

  // rnnt
  m.def("rnnt_loss",
        [](const py::array_t<double, py::array::c_style |
                                         py::array::forcecast>& logits,
           const std::vector<int>& targets) {
          return rnnt::rnnt_loss(lattice_from_array(logits), targets);
        });
  m.def("rnnt_grad",
        [](const py::array_t<double, py::array::c_style |
                                         py::array::forcecast>& logits,
           const std::vector<int>& targets) {
          auto lat = lattice_from_array(logits);
          auto grad = rnnt::rnnt_grad(lat, targets);
          py::array_t<double> out({lat.time_steps, lat.target_len + 1,
                                   lat.symbols()});
          std::copy(grad.begin(), grad.end(), out.mutable_data());
          return out;
        });

  // clustering
  m.def(
      "kmeans",
      [](const py::array_t<double, py::array::c_style |
                                       py::array::forcecast>& points,
         int k, uint64_t seed) {
        if (points.ndim() != 2) throw ShapeError("points must be 2-D");
        std::vector<std::vector<double>> rows(points.shape(0));
        for (py::ssize_t i = 0; i < points.shape(0); ++i) {
          rows[i].assign(points.data() + i * points.shape(1),
                         points.data() + (i + 1) * points.shape(1));
        }
        auto result = data::kmeans(rows, k, seed);
        return py::make_tuple(result.assignments, result.centroids);
      },
      py::arg("points"), py::arg("k"), py::arg("seed") = 0);
  m.def("random_partition",
        [](const std::vector<std::string>& speakers, int k, uint64_t seed) {
          return data::random_partition(speakers, k, seed).assignment;
        });

  m.attr("__version__") = "0.1.0";
}
