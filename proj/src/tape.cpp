// ensdist/tape.cpp

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

#include "ensdist/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ensdist/errors.hpp"

namespace ensdist {
namespace nn {

namespace {

[[noreturn]] void shape_fail(const std::string& op, const Tensor& a) {
  throw ShapeError("tape." + op + ": bad shape " + a.shape_str());
}

[[noreturn]] void shape_fail(const std::string& op, const Tensor& a,
                             const Tensor& b) {
  throw ShapeError("tape." + op + ": incompatible shapes " + a.shape_str() +
                   " and " + b.shape_str());
}

}  // namespace

int Tape::push(Tensor value, bool requires_grad,
               std::function<void(Tape&)> backward_fn) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = grad_enabled_ && requires_grad;
  if (node.requires_grad) node.backward = std::move(backward_fn);
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::grad_ref(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.rows, n.value.cols, 0.0);
  return n.grad;
}

void Tape::add_grad(int id, const Tensor& g) {
  if (!nodes_[id].requires_grad) return;
  Tensor& dst = grad_ref(id);
  for (int64_t i = 0; i < g.size(); ++i) dst.data[i] += g.data[i];
}

int Tape::leaf(Tensor value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

int Tape::add(int a, int b) {
  const Tensor& va = nodes_[a].value;
  const Tensor& vb = nodes_[b].value;
  Tensor out = va;
  if (va.same_shape(vb)) {
    for (int64_t i = 0; i < out.size(); ++i) out.data[i] += vb.data[i];
  } else if (vb.rows == 1 && vb.cols == va.cols) {
    for (int r = 0; r < va.rows; ++r) {
      for (int c = 0; c < va.cols; ++c) out.at(r, c) += vb.at(0, c);
    }
  } else if (vb.rows == 1 && vb.cols == 1) {
    for (int64_t i = 0; i < out.size(); ++i) out.data[i] += vb.data[0];
  } else {
    shape_fail("add", va, vb);
  }
  bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(out), rg, [a, b](Tape& t) {
    int self = t.current_node_;
    const Tensor& g = t.nodes_[self].grad;
    t.add_grad(a, g);
    Node& nb = t.nodes_[b];
    if (!nb.requires_grad) return;
    const Tensor& vb = nb.value;
    if (vb.same_shape(g)) {
      t.add_grad(b, g);
    } else {
      Tensor& gb = t.grad_ref(b);
      if (vb.cols == g.cols) {  // broadcast row
        for (int r = 0; r < g.rows; ++r) {
          for (int c = 0; c < g.cols; ++c) gb.at(0, c) += g.at(r, c);
        }
      } else {  // scalar
        for (int64_t i = 0; i < g.size(); ++i) gb.data[0] += g.data[i];
      }
    }
  });
}

int Tape::sub(int a, int b) {
  const Tensor& va = nodes_[a].value;
  const Tensor& vb = nodes_[b].value;
  if (!va.same_shape(vb)) shape_fail("sub", va, vb);
  Tensor out = va;
  for (int64_t i = 0; i < out.size(); ++i) out.data[i] -= vb.data[i];
  bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(out), rg, [a, b](Tape& t) {
    int self = t.current_node_;
    const Tensor& g = t.nodes_[self].grad;
    t.add_grad(a, g);
    if (t.nodes_[b].requires_grad) {
      Tensor& gb = t.grad_ref(b);
      for (int64_t i = 0; i < g.size(); ++i) gb.data[i] -= g.data[i];
    }
  });
}

int Tape::mul(int a, int b) {
  const Tensor& va = nodes_[a].value;
  const Tensor& vb = nodes_[b].value;
  Tensor out = va;
  if (va.same_shape(vb)) {
    for (int64_t i = 0; i < out.size(); ++i) out.data[i] *= vb.data[i];
  } else if (vb.rows == 1 && vb.cols == 1) {
    for (int64_t i = 0; i < out.size(); ++i) out.data[i] *= vb.data[0];
  } else {
    shape_fail("mul", va, vb);
  }
  bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(out), rg, [a, b](Tape& t) {
    int self = t.current_node_;
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& va = t.nodes_[a].value;
    const Tensor& vb = t.nodes_[b].value;
    bool scalar_b = !va.same_shape(vb);
    if (t.nodes_[a].requires_grad) {
      Tensor& ga = t.grad_ref(a);
      if (scalar_b) {
        for (int64_t i = 0; i < g.size(); ++i)
          ga.data[i] += g.data[i] * vb.data[0];
      } else {
        for (int64_t i = 0; i < g.size(); ++i)
          ga.data[i] += g.data[i] * vb.data[i];
      }
    }
    if (t.nodes_[b].requires_grad) {
      Tensor& gb = t.grad_ref(b);
      if (scalar_b) {
        for (int64_t i = 0; i < g.size(); ++i)
          gb.data[0] += g.data[i] * va.data[i];
      } else {
        for (int64_t i = 0; i < g.size(); ++i)
          gb.data[i] += g.data[i] * va.data[i];
      }
    }
  });
}

int Tape::matmul(int a, int b) {
  const Tensor& va = nodes_[a].value;
  const Tensor& vb = nodes_[b].value;
  if (va.cols != vb.rows) shape_fail("matmul", va, vb);
  Tensor out(va.rows, vb.cols, 0.0);
  for (int r = 0; r < va.rows; ++r) {
    for (int k = 0; k < va.cols; ++k) {
      double av = va.at(r, k);
      if (av == 0.0) continue;
      const double* brow = &vb.data[static_cast<size_t>(k) * vb.cols];
      double* orow = &out.data[static_cast<size_t>(r) * out.cols];
      for (int c = 0; c < vb.cols; ++c) orow[c] += av * brow[c];
    }
  }
  bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(out), rg, [a, b](Tape& t) {
    int self = t.current_node_;
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& va = t.nodes_[a].value;
    const Tensor& vb = t.nodes_[b].value;
    if (t.nodes_[a].requires_grad) {  // dA = G * B^T
      Tensor& ga = t.grad_ref(a);
      for (int r = 0; r < va.rows; ++r) {
        for (int k = 0; k < va.cols; ++k) {
          double acc = 0.0;
          const double* grow = &g.data[static_cast<size_t>(r) * g.cols];
          const double* brow = &vb.data[static_cast<size_t>(k) * vb.cols];
          for (int c = 0; c < vb.cols; ++c) acc += grow[c] * brow[c];
          ga.at(r, k) += acc;
        }
      }
    }
    if (t.nodes_[b].requires_grad) {  // dB = A^T * G
      Tensor& gb = t.grad_ref(b);
      for (int r = 0; r < va.rows; ++r) {
        const double* arow = &va.data[static_cast<size_t>(r) * va.cols];
        const double* grow = &g.data[static_cast<size_t>(r) * g.cols];
        for (int k = 0; k < va.cols; ++k) {
          double av = arow[k];
          if (av == 0.0) continue;
          double* gbrow = &gb.data[static_cast<size_t>(k) * gb.cols];
          for (int c = 0; c < g.cols; ++c) gbrow[c] += av * grow[c];
        }
      }
    }
  });
}

int Tape::transpose(int a) {
  const Tensor& va = nodes_[a].value;
  Tensor out(va.cols, va.rows);
  for (int r = 0; r < va.rows; ++r) {
    for (int c = 0; c < va.cols; ++c) out.at(c, r) = va.at(r, c);
  }
  return push(std::move(out), nodes_[a].requires_grad, [a](Tape& t) {
    int self = t.current_node_;
    const Tensor& g = t.nodes_[self].grad;
    if (!t.nodes_[a].requires_grad) return;
    Tensor& ga = t.grad_ref(a);
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) ga.at(c, r) += g.at(r, c);
    }
  });
}

int Tape::scale(int a, double factor) {
  Tensor out = nodes_[a].value;
  for (double& v : out.data) v *= factor;
  return push(std::move(out), nodes_[a].requires_grad, [a, factor](Tape& t) {
    int self = t.current_node_;
    const Tensor& g = t.nodes_[self].grad;
    if (!t.nodes_[a].requires_grad) return;
    Tensor& ga = t.grad_ref(a);
    for (int64_t i = 0; i < g.size(); ++i) ga.data[i] += factor * g.data[i];
  });
}

int Tape::tanh_op(int a) {
  Tensor out = nodes_[a].value;
  for (double& v : out.data) v = std::tanh(v);
  return push(std::move(out), nodes_[a].requires_grad, [a](Tape& t) {
    int self = t.current_node_;
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& y = t.nodes_[self].value;
    if (!t.nodes_[a].requires_grad) return;
    Tensor& ga = t.grad_ref(a);
    for (int64_t i = 0; i < g.size(); ++i)
      ga.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
  });
}

int Tape::sigmoid_op(int a) {
  Tensor out = nodes_[a].value;
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return push(std::move(out), nodes_[a].requires_grad, [a](Tape& t) {
    int self = t.current_node_;
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& y = t.nodes_[self].value;
    if (!t.nodes_[a].requires_grad) return;
    Tensor& ga = t.grad_ref(a);
    for (int64_t i = 0; i < g.size(); ++i)
      ga.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
  });
}

int Tape::relu_op(int a) {
  Tensor out = nodes_[a].value;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return push(std::move(out), nodes_[a].requires_grad, [a](Tape& t) {
    int self = t.current_node_;
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& x = t.nodes_[a].value;
    if (!t.nodes_[a].requires_grad) return;
    Tensor& ga = t.grad_ref(a);
    for (int64_t i = 0; i < g.size(); ++i) {
      if (x.data[i] > 0.0) ga.data[i] += g.data[i];
    }
  });
}

int Tape::softmax_rows(int a) {
  Tensor out = nodes_[a].value;
  for (int r = 0; r < out.rows; ++r) {
    double* row = &out.data[static_cast<size_t>(r) * out.cols];
    double mx = row[0];
    for (int c = 1; c < out.cols; ++c) mx = std::max(mx, row[c]);
    double denom = 0.0;
    for (int c = 0; c < out.cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      denom += row[c];
    }
    for (int c = 0; c < out.cols; ++c) row[c] /= denom;
  }
  return push(std::move(out), nodes_[a].requires_grad, [a](Tape& t) {
    int self = t.current_node_;
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& y = t.nodes_[self].value;
    if (!t.nodes_[a].requires_grad) return;
    Tensor& ga = t.grad_ref(a);
    for (int r = 0; r < g.rows; ++r) {
      double dot = 0.0;
      for (int c = 0; c < g.cols; ++c) dot += g.at(r, c) * y.at(r, c);
      for (int c = 0; c < g.cols; ++c)
        ga.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
    }
  });
}

int Tape::log_softmax_rows(int a) {
  Tensor out = nodes_[a].value;
  for (int r = 0; r < out.rows; ++r) {
    double* row = &out.data[static_cast<size_t>(r) * out.cols];
    double mx = row[0];
    for (int c = 1; c < out.cols; ++c) mx = std::max(mx, row[c]);
    double denom = 0.0;
    for (int c = 0; c < out.cols; ++c) denom += std::exp(row[c] - mx);
    double lse = mx + std::log(denom);
    for (int c = 0; c < out.cols; ++c) row[c] -= lse;
  }
  return push(std::move(out), nodes_[a].requires_grad, [a](Tape& t) {
    int self = t.current_node_;
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& y = t.nodes_[self].value;  // log-probs
    if (!t.nodes_[a].requires_grad) return;
    Tensor& ga = t.grad_ref(a);
    for (int r = 0; r < g.rows; ++r) {
      double gsum = 0.0;
      for (int c = 0; c < g.cols; ++c) gsum += g.at(r, c);
      for (int c = 0; c < g.cols; ++c)
        ga.at(r, c) += g.at(r, c) - std::exp(y.at(r, c)) * gsum;
    }
  });
}

int Tape::slice_cols(int a, int c0, int c1) {
  const Tensor& va = nodes_[a].value;
  if (c0 < 0 || c1 > va.cols || c0 >= c1) shape_fail("slice_cols", va);
  Tensor out(va.rows, c1 - c0);
  for (int r = 0; r < va.rows; ++r) {
    for (int c = c0; c < c1; ++c) out.at(r, c - c0) = va.at(r, c);
  }
  return push(std::move(out), nodes_[a].requires_grad, [a, c0](Tape& t) {
    int self = t.current_node_;
    const Tensor& g = t.nodes_[self].grad;
    if (!t.nodes_[a].requires_grad) return;
    Tensor& ga = t.grad_ref(a);
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) ga.at(r, c0 + c) += g.at(r, c);
    }
  });
}

int Tape::slice_rows(int a, int r0, int r1) {
  const Tensor& va = nodes_[a].value;
  if (r0 < 0 || r1 > va.rows || r0 >= r1) shape_fail("slice_rows", va);
  Tensor out(r1 - r0, va.cols);
  for (int r = r0; r < r1; ++r) {
    for (int c = 0; c < va.cols; ++c) out.at(r - r0, c) = va.at(r, c);
  }
  return push(std::move(out), nodes_[a].requires_grad, [a, r0](Tape& t) {
    int self = t.current_node_;
    const Tensor& g = t.nodes_[self].grad;
    if (!t.nodes_[a].requires_grad) return;
    Tensor& ga = t.grad_ref(a);
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) ga.at(r0 + r, c) += g.at(r, c);
    }
  });
}

int Tape::concat_rows(const std::vector<int>& parts) {
  if (parts.empty()) throw ShapeError("tape.concat_rows: no parts");
  int cols = nodes_[parts[0]].value.cols;
  int rows = 0;
  bool rg = false;
  for (int p : parts) {
    const Tensor& v = nodes_[p].value;
    if (v.cols != cols) shape_fail("concat_rows", nodes_[parts[0]].value, v);
    rows += v.rows;
    rg = rg || nodes_[p].requires_grad;
  }
  Tensor out(rows, cols);
  int r = 0;
  for (int p : parts) {
    const Tensor& v = nodes_[p].value;
    std::copy(v.data.begin(), v.data.end(),
              out.data.begin() + static_cast<size_t>(r) * cols);
    r += v.rows;
  }
  return push(std::move(out), rg, [parts](Tape& t) {
    int self = t.current_node_;
    const Tensor& g = t.nodes_[self].grad;
    int r = 0;
    for (int p : parts) {
      const Tensor& v = t.nodes_[p].value;
      if (t.nodes_[p].requires_grad) {
        Tensor& gp = t.grad_ref(p);
        for (int i = 0; i < v.rows; ++i) {
          for (int c = 0; c < v.cols; ++c) gp.at(i, c) += g.at(r + i, c);
        }
      }
      r += v.rows;
    }
  });
}

int Tape::concat_cols(const std::vector<int>& parts) {
  if (parts.empty()) throw ShapeError("tape.concat_cols: no parts");
  int rows = nodes_[parts[0]].value.rows;
  int cols = 0;
  bool rg = false;
  for (int p : parts) {
    const Tensor& v = nodes_[p].value;
    if (v.rows != rows) shape_fail("concat_cols", nodes_[parts[0]].value, v);
    cols += v.cols;
    rg = rg || nodes_[p].requires_grad;
  }
  Tensor out(rows, cols);
  int c0 = 0;
  for (int p : parts) {
    const Tensor& v = nodes_[p].value;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < v.cols; ++c) out.at(r, c0 + c) = v.at(r, c);
    }
    c0 += v.cols;
  }
  return push(std::move(out), rg, [parts](Tape& t) {
    int self = t.current_node_;
    const Tensor& g = t.nodes_[self].grad;
    int c0 = 0;
    for (int p : parts) {
      const Tensor& v = t.nodes_[p].value;
      if (t.nodes_[p].requires_grad) {
        Tensor& gp = t.grad_ref(p);
        for (int r = 0; r < v.rows; ++r) {
          for (int c = 0; c < v.cols; ++c) gp.at(r, c) += g.at(r, c0 + c);
        }
      }
      c0 += v.cols;
    }
  });
}

int Tape::mean_rows(int a) {
  const Tensor& va = nodes_[a].value;
  if (va.rows < 1) shape_fail("mean_rows", va);
  Tensor out(1, va.cols, 0.0);
  for (int r = 0; r < va.rows; ++r) {
    for (int c = 0; c < va.cols; ++c) out.at(0, c) += va.at(r, c);
  }
  for (double& v : out.data) v /= va.rows;
  return push(std::move(out), nodes_[a].requires_grad, [a](Tape& t) {
    int self = t.current_node_;
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& va = t.nodes_[a].value;
    if (!t.nodes_[a].requires_grad) return;
    Tensor& ga = t.grad_ref(a);
    double inv = 1.0 / va.rows;
    for (int r = 0; r < va.rows; ++r) {
      for (int c = 0; c < va.cols; ++c) ga.at(r, c) += g.at(0, c) * inv;
    }
  });
}

int Tape::embedding(int table, const std::vector<int>& ids) {
  const Tensor& tab = nodes_[table].value;
  if (ids.empty()) throw ShapeError("tape.embedding: empty index list");
  Tensor out(static_cast<int>(ids.size()), tab.cols);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tab.rows) {
      throw ShapeError("tape.embedding: index " + std::to_string(ids[i]) +
                       " out of range for table " + tab.shape_str());
    }
    for (int c = 0; c < tab.cols; ++c) {
      out.at(static_cast<int>(i), c) = tab.at(ids[i], c);
    }
  }
  return push(std::move(out), nodes_[table].requires_grad,
              [table, ids](Tape& t) {
                int self = t.current_node_;
                const Tensor& g = t.nodes_[self].grad;
                if (!t.nodes_[table].requires_grad) return;
                Tensor& gt = t.grad_ref(table);
                for (size_t i = 0; i < ids.size(); ++i) {
                  for (int c = 0; c < g.cols; ++c) {
                    gt.at(ids[i], c) += g.at(static_cast<int>(i), c);
                  }
                }
              });
}

int Tape::lstm_cell(int zx, int h, int c, int wh, int b, int hidden) {
  const Tensor& vzx = nodes_[zx].value;
  const Tensor& vh = nodes_[h].value;
  const Tensor& vc = nodes_[c].value;
  const Tensor& vwh = nodes_[wh].value;
  const Tensor& vb = nodes_[b].value;
  if (vzx.rows != 1 || vzx.cols != 4 * hidden || vh.cols != hidden ||
      vc.cols != hidden || vwh.rows != hidden || vwh.cols != 4 * hidden ||
      vb.cols != 4 * hidden) {
    shape_fail("lstm_cell", vzx, vwh);
  }

  // z = zx + h * Wh + b, gates [i f g o]
  std::vector<double> z(vzx.data.begin(), vzx.data.end());
  for (int k = 0; k < hidden; ++k) {
    double hv = vh.data[k];
    if (hv == 0.0) continue;
    const double* wrow = &vwh.data[static_cast<size_t>(k) * vwh.cols];
    for (int j = 0; j < 4 * hidden; ++j) z[j] += hv * wrow[j];
  }
  for (int j = 0; j < 4 * hidden; ++j) z[j] += vb.data[j];

  std::vector<double> gates(4 * hidden);
  for (int j = 0; j < hidden; ++j) {
    gates[j] = 1.0 / (1.0 + std::exp(-z[j]));                        // i
    gates[hidden + j] = 1.0 / (1.0 + std::exp(-z[hidden + j]));      // f
    gates[2 * hidden + j] = std::tanh(z[2 * hidden + j]);            // g
    gates[3 * hidden + j] = 1.0 / (1.0 + std::exp(-z[3 * hidden + j]));  // o
  }
  Tensor out(2, hidden);
  for (int j = 0; j < hidden; ++j) {
    double c_new = gates[hidden + j] * vc.data[j] + gates[j] * gates[2 * hidden + j];
    out.at(1, j) = c_new;
    out.at(0, j) = gates[3 * hidden + j] * std::tanh(c_new);
  }

  bool rg = nodes_[zx].requires_grad || nodes_[h].requires_grad ||
            nodes_[c].requires_grad || nodes_[wh].requires_grad ||
            nodes_[b].requires_grad;
  return push(std::move(out), rg,
              [zx, h, c, wh, b, hidden, gates = std::move(gates)](Tape& t) {
    int self = t.current_node_;
    const Tensor& g_out = t.nodes_[self].grad;   // row 0: dh', row 1: dc'
    const Tensor& v_out = t.nodes_[self].value;  // row 0: h',  row 1: c'
    const Tensor& vh = t.nodes_[h].value;
    const Tensor& vc = t.nodes_[c].value;
    const Tensor& vwh = t.nodes_[wh].value;
    const Tensor& vzx_g = t.nodes_[zx].value;
    (void)vzx_g;

    std::vector<double> dz(4 * static_cast<size_t>(hidden));
    std::vector<double> dc_prev(hidden);
    for (int j = 0; j < hidden; ++j) {
      double dh_new = g_out.at(0, j);
      double dc_new = g_out.at(1, j);
      double c_new = v_out.at(1, j);
      double tc = std::tanh(c_new);
      double gi = gates[j];
      double gf = gates[hidden + j];
      double gg = gates[2 * hidden + j];
      double go = gates[3 * hidden + j];
      double dc_total = dc_new + dh_new * go * (1.0 - tc * tc);
      double d_o = dh_new * tc;
      dz[j] = dc_total * gg * gi * (1.0 - gi);
      dz[hidden + j] = dc_total * vc.data[j] * gf * (1.0 - gf);
      dz[2 * hidden + j] = dc_total * gi * (1.0 - gg * gg);
      dz[3 * hidden + j] = d_o * go * (1.0 - go);
      dc_prev[j] = dc_total * gf;
    }

    if (t.nodes_[zx].requires_grad) {
      Tensor& gzx = t.grad_ref(zx);
      for (int j = 0; j < 4 * hidden; ++j) gzx.data[j] += dz[j];
    }
    if (t.nodes_[b].requires_grad) {
      Tensor& gb = t.grad_ref(b);
      for (int j = 0; j < 4 * hidden; ++j) gb.data[j] += dz[j];
    }
    if (t.nodes_[c].requires_grad) {
      Tensor& gc = t.grad_ref(c);
      for (int j = 0; j < hidden; ++j) gc.data[j] += dc_prev[j];
    }
    if (t.nodes_[h].requires_grad) {
      Tensor& gh = t.grad_ref(h);
      for (int k = 0; k < hidden; ++k) {
        const double* wrow = &vwh.data[static_cast<size_t>(k) * vwh.cols];
        double acc = 0.0;
        for (int j = 0; j < 4 * hidden; ++j) acc += dz[j] * wrow[j];
        gh.data[k] += acc;
      }
    }
    if (t.nodes_[wh].requires_grad) {
      Tensor& gwh = t.grad_ref(wh);
      for (int k = 0; k < hidden; ++k) {
        double hv = vh.data[k];
        if (hv == 0.0) continue;
        double* grow = &gwh.data[static_cast<size_t>(k) * gwh.cols];
        for (int j = 0; j < 4 * hidden; ++j) grow[j] += hv * dz[j];
      }
    }
  });
}

void Tape::backward(int root, Tensor seed) {
  std::vector<std::pair<int, Tensor>> seeds;
  seeds.emplace_back(root, std::move(seed));
  backward(std::move(seeds));
}

void Tape::backward(std::vector<std::pair<int, Tensor>> seeds) {
  int highest = -1;
  for (auto& [id, seed] : seeds) {
    if (!nodes_[id].value.same_shape(seed)) {
      throw ShapeError("tape.backward: seed shape " + seed.shape_str() +
                       " does not match node " + nodes_[id].value.shape_str());
    }
    add_grad(id, seed);
    highest = std::max(highest, id);
  }
  run_backward_from(highest);
}

void Tape::run_backward_from(int highest) {
  for (int id = highest; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    current_node_ = id;
    n.backward(*this);
  }
}

void Tape::reset_gradients() {
  for (Node& n : nodes_) n.grad = Tensor();
}

}  // namespace nn
}  // namespace ensdist
