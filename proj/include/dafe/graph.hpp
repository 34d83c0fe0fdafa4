#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "dafe/errors.hpp"
#include "dafe/parameter.hpp"
#include "dafe/tensor.hpp"

namespace dafe {

// Reverse-mode autodiff tape over dense 2-D tensors. A Graph is built
// per forward pass (define-by-run), single-threaded, and discarded after
// backward(). Nodes are created in topological order, so backward is one
// reverse sweep over the tape.
//
// Leaves bound to a Parameter flush their accumulated gradient into
// Parameter::grad at the end of backward() -- unless the parameter is
// marked non-trainable, in which case its grad array is never touched.
class Graph {
 public:
  struct Var {
    std::uint32_t id = 0;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // ---- leaves ----------------------------------------------------------

  Var constant(Tensor t) {
    return push(std::move(t), nullptr, {});
  }

  // Binds a parameter; repeated calls with the same parameter share one
  // node so its gradient accumulates in a single place.
  Var leaf(Parameter& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var{it->second};
    Var v = push(p.value, nullptr, {});
    nodes_[v.id].param = &p;
    param_nodes_[&p] = v.id;
    return v;
  }

  // Differentiable leaf not bound to a parameter; grad readable via
  // grad() after backward.
  Var input(Tensor t) { return push(std::move(t), nullptr, {}); }

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }

  // ---- ops -------------------------------------------------------------

  // C = A * B, (n x k)(k x m) -> (n x m)
  Var matmul(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require_rank2(ta, "matmul lhs");
    require_rank2(tb, "matmul rhs");
    if (ta.cols() != tb.rows()) {
      throw ShapeError("matmul: inner dimensions disagree " +
                       ta.shape_string() + " vs " + tb.shape_string());
    }
    Tensor out({ta.rows(), tb.cols()});
    mm_nn(ta, tb, out);
    Var c = push(std::move(out), [this, a, b](const Tensor& g) {
      // dA += G * B^T ; dB += A^T * G
      mm_nt_acc(g, val(b), mut_grad(a));
      mm_tn_acc(val(a), g, mut_grad(b));
    }, {a.id, b.id});
    return c;
  }

  // C = A * B^T, (n x k)(m x k) -> (n x m)
  Var matmul_nt(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require_rank2(ta, "matmul_nt lhs");
    require_rank2(tb, "matmul_nt rhs");
    if (ta.cols() != tb.cols()) {
      throw ShapeError("matmul_nt: inner dimensions disagree " +
                       ta.shape_string() + " vs " + tb.shape_string());
    }
    Tensor out({ta.rows(), tb.rows()});
    mm_nt(ta, tb, out);
    return push(std::move(out), [this, a, b](const Tensor& g) {
      // dA += G * B ; dB += G^T * A
      mm_nn_acc(g, val(b), mut_grad(a));
      mm_tn_acc(g, val(a), mut_grad(b));
    }, {a.id, b.id});
  }

  Var add(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    check_same_shape(ta, tb, "add");
    Tensor out = ta;
    const double* pb = tb.data();
    double* po = out.data();
    for (std::size_t i = 0; i < out.numel(); ++i) po[i] += pb[i];
    return push(std::move(out), [this, a, b](const Tensor& g) {
      acc(mut_grad(a), g);
      acc(mut_grad(b), g);
    }, {a.id, b.id});
  }

  // Adds a length-d vector to every row of an (n x d) matrix.
  Var add_rowvec(Var a, Var row) {
    const Tensor& ta = val(a);
    const Tensor& tr = val(row);
    if (tr.numel() != ta.cols()) {
      throw ShapeError("add_rowvec: row length " + tr.shape_string() +
                       " does not match matrix " + ta.shape_string());
    }
    Tensor out = ta;
    const double* pr = tr.data();
    for (std::size_t r = 0; r < out.rows(); ++r) {
      double* po = out.data() + r * out.cols();
      for (std::size_t c = 0; c < out.cols(); ++c) po[c] += pr[c];
    }
    return push(std::move(out), [this, a, row](const Tensor& g) {
      acc(mut_grad(a), g);
      Tensor& gr = mut_grad(row);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const double* pg = g.data() + r * g.cols();
        for (std::size_t c = 0; c < g.cols(); ++c) gr[c] += pg[c];
      }
    }, {a.id, row.id});
  }

  Var scale(Var a, double s) {
    Tensor out = val(a);
    for (double& x : out.values()) x *= s;
    return push(std::move(out), [this, a, s](const Tensor& g) {
      Tensor& ga = mut_grad(a);
      for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += s * g[i];
    }, {a.id});
  }

  Var mul(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    check_same_shape(ta, tb, "mul");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= tb[i];
    return push(std::move(out), [this, a, b](const Tensor& g) {
      Tensor& ga = mut_grad(a);
      Tensor& gb = mut_grad(b);
      const Tensor& va = val(a);
      const Tensor& vb = val(b);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        ga[i] += g[i] * vb[i];
        gb[i] += g[i] * va[i];
      }
    }, {a.id, b.id});
  }

  Var relu(Var a) {
    Tensor out = val(a);
    for (double& x : out.values()) x = x > 0.0 ? x : 0.0;
    return push(std::move(out), [this, a](const Tensor& g) {
      Tensor& ga = mut_grad(a);
      const Tensor& va = val(a);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        if (va[i] > 0.0) ga[i] += g[i];
      }
    }, {a.id});
  }

  // Scalar (shape {1}) sum of all entries.
  Var sum_all(Var a) {
    double s = 0.0;
    for (double x : val(a).values()) s += x;
    return push(Tensor({1}, {s}), [this, a](const Tensor& g) {
      Tensor& ga = mut_grad(a);
      for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g[0];
    }, {a.id});
  }

  // out = x * w + b with w (d_in x d_out) and b length d_out.
  Var affine(Var x, Var w, Var b) { return add_rowvec(matmul(x, w), b); }

  // Per-row normalization to zero mean / unit variance (population
  // variance, stabilized by eps), then elementwise gain and bias.
  Var layer_norm(Var x, Var gain, Var bias, double eps) {
    const Tensor& tx = val(x);
    require_rank2(tx, "layer_norm input");
    const std::size_t n = tx.rows(), d = tx.cols();
    if (val(gain).numel() != d || val(bias).numel() != d) {
      throw ShapeError("layer_norm: gain/bias length does not match " +
                       tx.shape_string());
    }
    Tensor out({n, d});
    Tensor xhat({n, d});
    std::vector<double> inv_std(n);
    const double* pg = val(gain).data();
    const double* pb = val(bias).data();
    for (std::size_t r = 0; r < n; ++r) {
      const double* px = tx.data() + r * d;
      double mean = 0.0;
      for (std::size_t c = 0; c < d; ++c) mean += px[c];
      mean /= static_cast<double>(d);
      double var = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double dv = px[c] - mean;
        var += dv * dv;
      }
      var /= static_cast<double>(d);
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std[r] = is;
      double* ph = xhat.data() + r * d;
      double* po = out.data() + r * d;
      for (std::size_t c = 0; c < d; ++c) {
        ph[c] = (px[c] - mean) * is;
        po[c] = pg[c] * ph[c] + pb[c];
      }
    }
    auto xh = std::make_shared<Tensor>(std::move(xhat));
    auto istd = std::make_shared<std::vector<double>>(std::move(inv_std));
    return push(std::move(out),
                [this, x, gain, bias, xh, istd](const Tensor& g) {
      const std::size_t n = g.rows(), d = g.cols();
      Tensor& gx = mut_grad(x);
      Tensor& gg = mut_grad(gain);
      Tensor& gb = mut_grad(bias);
      const double* pgain = val(gain).data();
      for (std::size_t r = 0; r < n; ++r) {
        const double* pG = g.data() + r * d;
        const double* ph = xh->data() + r * d;
        double* pgx = gx.data() + r * d;
        double sum_gh = 0.0, sum_gh_h = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double gh = pG[c] * pgain[c];
          sum_gh += gh;
          sum_gh_h += gh * ph[c];
          gg[c] += pG[c] * ph[c];
          gb[c] += pG[c];
        }
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t c = 0; c < d; ++c) {
          const double gh = pG[c] * pgain[c];
          pgx[c] += (gh - sum_gh * inv_d - ph[c] * sum_gh_h * inv_d) *
                    (*istd)[r];
        }
      }
    }, {x.id, gain.id, bias.id});
  }

  // Row-wise softmax with max-subtraction; masked entries are exactly
  // zero in the output and receive exactly zero gradient. Every row must
  // have at least one unmasked entry.
  Var softmax_masked(Var scores, const BoolMat& mask) {
    const Tensor& ts = val(scores);
    require_rank2(ts, "softmax_masked input");
    const std::size_t n = ts.rows(), m = ts.cols();
    if (mask.rows != n || mask.cols != m) {
      throw ShapeError("softmax_masked: mask " +
                       Tensor::shape_string({mask.rows, mask.cols}) +
                       " does not match scores " + ts.shape_string());
    }
    Tensor out({n, m});
    for (std::size_t r = 0; r < n; ++r) {
      const double* ps = ts.data() + r * m;
      double* po = out.data() + r * m;
      double mx = -1.0;
      bool any = false;
      for (std::size_t c = 0; c < m; ++c) {
        if (mask.at(r, c) && (!any || ps[c] > mx)) {
          mx = ps[c];
          any = true;
        }
      }
      if (!any) {
        throw MaskError("softmax_masked: row " + std::to_string(r) +
                        " is fully masked");
      }
      double z = 0.0;
      for (std::size_t c = 0; c < m; ++c) {
        if (mask.at(r, c)) {
          po[c] = std::exp(ps[c] - mx);
          z += po[c];
        } else {
          po[c] = 0.0;
        }
      }
      const double inv_z = 1.0 / z;
      for (std::size_t c = 0; c < m; ++c) po[c] *= inv_z;
    }
    auto mk = std::make_shared<BoolMat>(mask);
    Var sm = push(std::move(out), nullptr, {scores.id});
    nodes_[sm.id].backward = [this, scores, sm, mk](const Tensor& g) {
      const Tensor& p = val(sm);
      const std::size_t n = p.rows(), m = p.cols();
      Tensor& gs = mut_grad(scores);
      for (std::size_t r = 0; r < n; ++r) {
        const double* pp = p.data() + r * m;
        const double* pG = g.data() + r * m;
        double* pgs = gs.data() + r * m;
        double dot = 0.0;
        for (std::size_t c = 0; c < m; ++c) dot += pG[c] * pp[c];
        for (std::size_t c = 0; c < m; ++c) {
          if (mk->at(r, c)) pgs[c] += pp[c] * (pG[c] - dot);
        }
      }
    };
    return sm;
  }

  // Mean negative log-likelihood over positions whose target is not
  // ignore_index. Scalar output.
  Var cross_entropy(Var logits, const std::vector<int>& targets,
                    int ignore_index) {
    const Tensor& tl = val(logits);
    require_rank2(tl, "cross_entropy logits");
    const std::size_t n = tl.rows(), vsz = tl.cols();
    if (targets.size() != n) {
      throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                       " targets for " + std::to_string(n) + " logit rows");
    }
    auto probs = std::make_shared<Tensor>(Tensor({n, vsz}));
    std::size_t count = 0;
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const int t = targets[r];
      if (t == ignore_index) continue;
      if (t < 0 || static_cast<std::size_t>(t) >= vsz) {
        throw LookupError("cross_entropy: target id " + std::to_string(t) +
                          " outside vocabulary of size " +
                          std::to_string(vsz));
      }
      const double* pl = tl.data() + r * vsz;
      double mx = pl[0];
      for (std::size_t c = 1; c < vsz; ++c) mx = std::max(mx, pl[c]);
      double z = 0.0;
      double* pp = probs->data() + r * vsz;
      for (std::size_t c = 0; c < vsz; ++c) {
        pp[c] = std::exp(pl[c] - mx);
        z += pp[c];
      }
      const double inv_z = 1.0 / z;
      for (std::size_t c = 0; c < vsz; ++c) pp[c] *= inv_z;
      loss += -(pl[t] - mx - std::log(z));
      ++count;
    }
    if (count == 0) {
      throw EmptyLossError("cross_entropy: every position is ignored");
    }
    loss /= static_cast<double>(count);
    auto tgt = std::make_shared<std::vector<int>>(targets);
    return push(Tensor({1}, {loss}),
                [this, logits, probs, tgt, ignore_index, count](
                    const Tensor& g) {
      Tensor& gl = mut_grad(logits);
      const std::size_t vsz = gl.cols();
      const double w = g[0] / static_cast<double>(count);
      for (std::size_t r = 0; r < gl.rows(); ++r) {
        const int t = (*tgt)[r];
        if (t == ignore_index) continue;
        const double* pp = probs->data() + r * vsz;
        double* pg = gl.data() + r * vsz;
        for (std::size_t c = 0; c < vsz; ++c) pg[c] += w * pp[c];
        pg[t] -= w;
      }
    }, {logits.id});
  }

  // Rows of an embedding matrix selected by id; backward scatter-adds.
  Var gather_rows(Var table, const std::vector<int>& ids) {
    const Tensor& tt = val(table);
    require_rank2(tt, "gather_rows table");
    const std::size_t d = tt.cols();
    Tensor out({ids.size(), d});
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const int id = ids[i];
      if (id < 0 || static_cast<std::size_t>(id) >= tt.rows()) {
        throw LookupError("gather_rows: id " + std::to_string(id) +
                          " outside table with " + std::to_string(tt.rows()) +
                          " rows");
      }
      const double* src = tt.data() + static_cast<std::size_t>(id) * d;
      std::copy(src, src + d, out.data() + i * d);
    }
    auto idv = std::make_shared<std::vector<int>>(ids);
    return push(std::move(out), [this, table, idv](const Tensor& g) {
      Tensor& gt = mut_grad(table);
      const std::size_t d = gt.cols();
      for (std::size_t i = 0; i < idv->size(); ++i) {
        const double* pg = g.data() + i * d;
        double* pt = gt.data() + static_cast<std::size_t>((*idv)[i]) * d;
        for (std::size_t c = 0; c < d; ++c) pt[c] += pg[c];
      }
    }, {table.id});
  }

  Var slice_cols(Var a, std::size_t start, std::size_t len) {
    const Tensor& ta = val(a);
    require_rank2(ta, "slice_cols input");
    if (start + len > ta.cols()) {
      throw ShapeError("slice_cols: [" + std::to_string(start) + "," +
                       std::to_string(start + len) + ") exceeds " +
                       ta.shape_string());
    }
    Tensor out({ta.rows(), len});
    for (std::size_t r = 0; r < ta.rows(); ++r) {
      const double* src = ta.data() + r * ta.cols() + start;
      std::copy(src, src + len, out.data() + r * len);
    }
    return push(std::move(out), [this, a, start, len](const Tensor& g) {
      Tensor& ga = mut_grad(a);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const double* pg = g.data() + r * len;
        double* pa = ga.data() + r * ga.cols() + start;
        for (std::size_t c = 0; c < len; ++c) pa[c] += pg[c];
      }
    }, {a.id});
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t n = val(parts[0]).rows();
    std::size_t total = 0;
    for (Var p : parts) {
      require_rank2(val(p), "concat_cols input");
      if (val(p).rows() != n) {
        throw ShapeError("concat_cols: row counts differ");
      }
      total += val(p).cols();
    }
    Tensor out({n, total});
    std::size_t off = 0;
    for (Var p : parts) {
      const Tensor& tp = val(p);
      for (std::size_t r = 0; r < n; ++r) {
        std::copy(tp.data() + r * tp.cols(), tp.data() + (r + 1) * tp.cols(),
                  out.data() + r * total + off);
      }
      off += tp.cols();
    }
    auto ps = std::make_shared<std::vector<Var>>(parts);
    std::vector<std::uint32_t> parent_ids;
    for (Var p : parts) parent_ids.push_back(p.id);
    return push(std::move(out), [this, ps, total](const Tensor& g) {
      std::size_t off = 0;
      for (Var p : *ps) {
        Tensor& gp = mut_grad(p);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          const double* pg = g.data() + r * total + off;
          double* pp = gp.data() + r * gp.cols();
          for (std::size_t c = 0; c < gp.cols(); ++c) pp[c] += pg[c];
        }
        off += gp.cols();
      }
    }, std::move(parent_ids));
  }

  // Inverted-scale dropout. rate == 0 is the identity (no node added);
  // the keep mask is drawn from the supplied engine.
  Var dropout(Var a, double rate, std::mt19937_64& rng) {
    if (rate == 0.0) return a;
    if (rate < 0.0 || rate >= 1.0) {
      throw ConfigError("dropout rate must lie in [0,1)");
    }
    const Tensor& ta = val(a);
    const double keep_scale = 1.0 / (1.0 - rate);
    auto mask = std::make_shared<std::vector<std::uint8_t>>(ta.numel());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) {
      const bool keep = u(rng) >= rate;
      (*mask)[i] = keep ? 1 : 0;
      out[i] = keep ? out[i] * keep_scale : 0.0;
    }
    return push(std::move(out), [this, a, mask, keep_scale](const Tensor& g) {
      Tensor& ga = mut_grad(a);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        if ((*mask)[i]) ga[i] += g[i] * keep_scale;
      }
    }, {a.id});
  }

  // ---- backward --------------------------------------------------------

  // Seeds d(root)/d(root) = 1 and sweeps the tape in reverse creation
  // order. Gradients of parameter-bound leaves are flushed into
  // Parameter::grad (trainable parameters only).
  void backward(Var root) {
    if (val(root).numel() != 1) {
      throw ShapeError("backward: root must be scalar, got " +
                       val(root).shape_string());
    }
    for (Node& n : nodes_) {
      if (n.grad.numel() == 0) n.grad = Tensor(n.value.shape());
    }
    nodes_[root.id].grad[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && has_signal(n.grad)) n.backward(n.grad);
    }
    for (Node& n : nodes_) {
      if (n.param && n.param->trainable) {
        Tensor& pg = n.param->grad;
        for (std::size_t i = 0; i < pg.numel(); ++i) pg[i] += n.grad[i];
      }
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily in backward()
    std::function<void(const Tensor&)> backward;
    Parameter* param = nullptr;
  };

  Var push(Tensor value, std::function<void(const Tensor&)> bw,
           std::vector<std::uint32_t> parents) {
    (void)parents;  // creation order already is a topological order
    Node n;
    n.value = std::move(value);
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  const Tensor& val(Var v) const { return nodes_[v.id].value; }
  Tensor& mut_grad(Var v) { return nodes_[v.id].grad; }

  static bool has_signal(const Tensor& g) {
    for (double x : g.values()) {
      if (x != 0.0) return true;
    }
    return false;
  }

  static void require_rank2(const Tensor& t, const char* what) {
    if (t.rank() != 2) {
      throw ShapeError(std::string(what) + " must be 2-D, got " +
                       t.shape_string());
    }
  }

  static void acc(Tensor& dst, const Tensor& src) {
    for (std::size_t i = 0; i < dst.numel(); ++i) dst[i] += src[i];
  }

  // C += / = A * B variants, i-k-j loops for locality.
  static void mm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
      double* pc = c.data() + i * m;
      const double* pa = a.data() + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = pa[p];
        if (av == 0.0) continue;
        const double* pb = b.data() + p * m;
        for (std::size_t j = 0; j < m; ++j) pc[j] += av * pb[j];
      }
    }
  }
  static void mm_nn_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    mm_nn(a, b, c);
  }
  static void mm_nt(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    for (std::size_t i = 0; i < n; ++i) {
      const double* pa = a.data() + i * k;
      double* pc = c.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) {
        const double* pb = b.data() + j * k;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += pa[p] * pb[p];
        pc[j] += s;
      }
    }
  }
  static void mm_nt_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    mm_nt(a, b, c);
  }
  // C += A^T * B, A (k x n), B (k x m) -> C (n x m)
  static void mm_tn_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t k = a.rows(), n = a.cols(), m = b.cols();
    for (std::size_t p = 0; p < k; ++p) {
      const double* pa = a.data() + p * n;
      const double* pb = b.data() + p * m;
      for (std::size_t i = 0; i < n; ++i) {
        const double av = pa[i];
        if (av == 0.0) continue;
        double* pc = c.data() + i * m;
        for (std::size_t j = 0; j < m; ++j) pc[j] += av * pb[j];
      }
    }
  }

  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, std::uint32_t> param_nodes_;
};

using Var = Graph::Var;

}  // namespace dafe
