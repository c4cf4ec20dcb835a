#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sargtr/tensor.hpp"

namespace sargtr::ad {

// Groups directed edges by their center node so softmax and sums can be
// restricted to one node's neighborhood.
struct SegmentIndex {
  std::vector<int> segment_of;  // per row: owning segment id
  int segment_count = 0;

  void validate(std::size_t row_count) const {
    if (segment_of.size() != row_count)
      throw std::invalid_argument("SegmentIndex: row count mismatch");
    for (int s : segment_of)
      if (s < 0 || s >= segment_count)
        throw std::invalid_argument("SegmentIndex: segment id out of range");
  }
};

class Tape;

// Handle to a node on a tape. Cheap to copy; invalidated when the tape dies.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Records tensor operations in execution order and replays them in reverse to
// accumulate gradients. Single-threaded per tape; inputs always precede the
// nodes that consume them, so reverse iteration is a topological order.
class Tape {
 public:
  Var leaf(Tensor value) {
    nodes_.push_back(Node{std::move(value), Tensor(), nullptr});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor& value(Var v) const { return node(v).value; }

  const Tensor& grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.empty())
      throw std::logic_error("Tape::grad: backward has not run over this node");
    return n.grad;
  }

  void backward(Var loss) {
    const Node& ln = node(loss);
    if (ln.value.size() != 1)
      throw std::invalid_argument("Tape::backward: loss must be scalar");
    if (!ln.value.all_finite())
      throw std::runtime_error("Tape::backward: non-finite loss");
    for (int i = 0; i <= loss.id; ++i)
      nodes_[i].grad = zeros_like(nodes_[i].value);
    nodes_[loss.id].grad[0] = 1.0;
    for (int i = loss.id; i >= 0; --i)
      if (nodes_[i].pull) nodes_[i].pull(*this, i);
  }

  std::size_t size() const { return nodes_.size(); }

  // --- recording interface used by the op implementations ---

  using PullFn = std::function<void(Tape&, int)>;  // (tape, own node id)

  Var record(Tensor value, PullFn pull) {
    nodes_.push_back(Node{std::move(value), Tensor(), std::move(pull)});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor& val(int id) const { return nodes_[id].value; }
  Tensor& grad_buf(int id) { return nodes_[id].grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    PullFn pull;  // accumulates this node's grad into its inputs' grads
  };

  const Node& node(Var v) const {
    if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
      throw std::invalid_argument("Tape: foreign or invalid Var");
    return nodes_[v.id];
  }

  std::vector<Node> nodes_;
};

namespace detail {
inline Tape& tape_of(Var a) {
  if (!a.valid()) throw std::invalid_argument("op on invalid Var");
  return *a.tape;
}
inline void same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("op on Vars from different tapes");
}
}  // namespace detail

// C = A·B for A m×k, B k×n.
inline Var matmul(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  detail::same_tape(a, b);
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (A.cols() != B.rows()) throw std::invalid_argument("matmul: inner dims differ");
  Tensor C(A.rows(), B.cols());
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A(i, p);
      const double* brow = B.row_ptr(p);
      double* crow = C.row_ptr(i);
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  return t.record(std::move(C), [ai = a.id, bi = b.id](Tape& tp, int self) {
    const Tensor& G = tp.grad_buf(self);
    const Tensor& A = tp.val(ai);
    const Tensor& B = tp.val(bi);
    Tensor& dA = tp.grad_buf(ai);
    Tensor& dB = tp.grad_buf(bi);
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    // dA += G·Bᵀ
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        double acc = 0.0;
        const double* grow = G.row_ptr(i);
        const double* brow = B.row_ptr(p);
        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
        dA(i, p) += acc;
      }
    // dB += Aᵀ·G
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t i = 0; i < m; ++i) {
        const double aip = A(i, p);
        const double* grow = G.row_ptr(i);
        double* dbrow = dB.row_ptr(p);
        for (std::size_t j = 0; j < n; ++j) dbrow[j] += aip * grow[j];
      }
  });
}

inline Var add(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  detail::same_tape(a, b);
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (!A.same_shape(B)) throw std::invalid_argument("add: shape mismatch");
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] += B[i];
  return t.record(std::move(C), [ai = a.id, bi = b.id](Tape& tp, int self) {
    const Tensor& G = tp.grad_buf(self);
    Tensor& dA = tp.grad_buf(ai);
    Tensor& dB = tp.grad_buf(bi);
    for (std::size_t i = 0; i < G.size(); ++i) {
      dA[i] += G[i];
      dB[i] += G[i];
    }
  });
}

// M n×d plus a 1×d row broadcast over all rows (bias add).
inline Var add_rowvec(Var m, Var row) {
  Tape& t = detail::tape_of(m);
  detail::same_tape(m, row);
  const Tensor& M = t.value(m);
  const Tensor& R = t.value(row);
  if (R.rows() != 1 || R.cols() != M.cols())
    throw std::invalid_argument("add_rowvec: row must be 1×cols(m)");
  Tensor C = M;
  for (std::size_t r = 0; r < C.rows(); ++r)
    for (std::size_t c = 0; c < C.cols(); ++c) C(r, c) += R(0, c);
  return t.record(std::move(C), [mi = m.id, ri = row.id](Tape& tp, int self) {
    const Tensor& G = tp.grad_buf(self);
    Tensor& dM = tp.grad_buf(mi);
    Tensor& dR = tp.grad_buf(ri);
    for (std::size_t r = 0; r < G.rows(); ++r)
      for (std::size_t c = 0; c < G.cols(); ++c) {
        dM(r, c) += G(r, c);
        dR(0, c) += G(r, c);
      }
  });
}

inline Var scalar_mul(double c, Var a) {
  Tape& t = detail::tape_of(a);
  Tensor C = t.value(a);
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= c;
  return t.record(std::move(C), [ai = a.id, c](Tape& tp, int self) {
    const Tensor& G = tp.grad_buf(self);
    Tensor& dA = tp.grad_buf(ai);
    for (std::size_t i = 0; i < G.size(); ++i) dA[i] += c * G[i];
  });
}

inline Var mul(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  detail::same_tape(a, b);
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (!A.same_shape(B)) throw std::invalid_argument("mul: shape mismatch");
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
  return t.record(std::move(C), [ai = a.id, bi = b.id](Tape& tp, int self) {
    const Tensor& G = tp.grad_buf(self);
    const Tensor& A = tp.val(ai);
    const Tensor& B = tp.val(bi);
    Tensor& dA = tp.grad_buf(ai);
    Tensor& dB = tp.grad_buf(bi);
    for (std::size_t i = 0; i < G.size(); ++i) {
      dA[i] += G[i] * B[i];
      dB[i] += G[i] * A[i];
    }
  });
}

// Concatenate along the last axis: [n×a, n×b, …] → n×(a+b+…).
inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Tape& t = detail::tape_of(parts[0]);
  std::size_t rows = t.value(parts[0]).rows();
  std::size_t total = 0;
  for (Var p : parts) {
    detail::same_tape(parts[0], p);
    if (t.value(p).rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    total += t.value(p).cols();
  }
  Tensor C(rows, total);
  std::size_t off = 0;
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  for (Var p : parts) {
    const Tensor& P = t.value(p);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < P.cols(); ++c) C(r, off + c) = P(r, c);
    ids.push_back(p.id);
    offsets.push_back(off);
    off += P.cols();
  }
  return t.record(std::move(C),
                  [ids, offsets](Tape& tp, int self) {
                    const Tensor& G = tp.grad_buf(self);
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      Tensor& dP = tp.grad_buf(ids[k]);
                      for (std::size_t r = 0; r < dP.rows(); ++r)
                        for (std::size_t c = 0; c < dP.cols(); ++c)
                          dP(r, c) += G(r, offsets[k] + c);
                    }
                  });
}

inline Var leaky_relu(Var a, double slope) {
  Tape& t = detail::tape_of(a);
  Tensor C = t.value(a);
  for (std::size_t i = 0; i < C.size(); ++i)
    if (C[i] < 0.0) C[i] *= slope;
  return t.record(std::move(C), [ai = a.id, slope](Tape& tp, int self) {
    const Tensor& G = tp.grad_buf(self);
    const Tensor& A = tp.val(ai);
    Tensor& dA = tp.grad_buf(ai);
    for (std::size_t i = 0; i < G.size(); ++i)
      dA[i] += G[i] * (A[i] >= 0.0 ? 1.0 : slope);
  });
}

inline Var relu(Var a) { return leaky_relu(a, 0.0); }

// Rows of `m` gathered by index; also serves as the embedding-table lookup.
inline Var gather_rows(Var m, std::vector<int> idx) {
  Tape& t = detail::tape_of(m);
  const Tensor& M = t.value(m);
  for (int i : idx)
    if (i < 0 || i >= static_cast<int>(M.rows()))
      throw std::out_of_range("gather_rows: index out of range");
  Tensor C(idx.size(), M.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t c = 0; c < M.cols(); ++c) C(r, c) = M(idx[r], c);
  return t.record(std::move(C),
                  [mi = m.id, idx = std::move(idx)](Tape& tp, int self) {
                    const Tensor& G = tp.grad_buf(self);
                    Tensor& dM = tp.grad_buf(mi);
                    for (std::size_t r = 0; r < idx.size(); ++r)
                      for (std::size_t c = 0; c < G.cols(); ++c)
                        dM(idx[r], c) += G(r, c);
                  });
}

inline Var embedding_lookup(Var table, const std::vector<int>& indices) {
  return gather_rows(table, indices);
}

// Per-row normalization with learned gain/bias (both 1×cols).
inline Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5) {
  Tape& t = detail::tape_of(x);
  detail::same_tape(x, gain);
  detail::same_tape(x, bias);
  if (eps <= 0.0) throw std::invalid_argument("layer_norm: eps must be positive");
  const Tensor& X = t.value(x);
  const Tensor& Gn = t.value(gain);
  const Tensor& Bs = t.value(bias);
  if (Gn.rows() != 1 || Gn.cols() != X.cols() || !Gn.same_shape(Bs))
    throw std::invalid_argument("layer_norm: gain/bias must be 1×cols(x)");
  const std::size_t R = X.rows(), C = X.cols();
  Tensor Y(R, C);
  Tensor xhat(R, C);
  std::vector<double> inv_sd(R);
  for (std::size_t r = 0; r < R; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < C; ++c) mean += X(r, c);
    mean /= static_cast<double>(C);
    double var = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double d = X(r, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(C);
    inv_sd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < C; ++c) {
      xhat(r, c) = (X(r, c) - mean) * inv_sd[r];
      Y(r, c) = Gn(0, c) * xhat(r, c) + Bs(0, c);
    }
  }
  return t.record(
      std::move(Y),
      [xi = x.id, gi = gain.id, bi = bias.id, xhat = std::move(xhat),
       inv_sd = std::move(inv_sd)](Tape& tp, int self) {
        const Tensor& G = tp.grad_buf(self);
        const Tensor& Gn = tp.val(gi);
        Tensor& dX = tp.grad_buf(xi);
        Tensor& dGn = tp.grad_buf(gi);
        Tensor& dBs = tp.grad_buf(bi);
        const std::size_t R = G.rows(), C = G.cols();
        for (std::size_t r = 0; r < R; ++r) {
          // dxhat = dy ⊙ gain; dx = (dxhat − mean(dxhat) − xhat·mean(dxhat⊙xhat)) / sd
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t c = 0; c < C; ++c) {
            const double dxh = G(r, c) * Gn(0, c);
            m1 += dxh;
            m2 += dxh * xhat(r, c);
          }
          m1 /= static_cast<double>(C);
          m2 /= static_cast<double>(C);
          for (std::size_t c = 0; c < C; ++c) {
            const double dxh = G(r, c) * Gn(0, c);
            dX(r, c) += (dxh - m1 - xhat(r, c) * m2) * inv_sd[r];
            dGn(0, c) += G(r, c) * xhat(r, c);
            dBs(0, c) += G(r, c);
          }
        }
      });
}

// Softmax of n×1 logits restricted to each segment (numerically shifted).
inline Var segment_softmax(Var logits, const SegmentIndex& seg) {
  Tape& t = detail::tape_of(logits);
  const Tensor& L = t.value(logits);
  if (L.cols() != 1) throw std::invalid_argument("segment_softmax: logits must be n×1");
  seg.validate(L.rows());
  const std::size_t n = L.rows();
  Tensor Y(n, 1);
  std::vector<double> mx(seg.segment_count, -HUGE_VAL);
  for (std::size_t i = 0; i < n; ++i)
    mx[seg.segment_of[i]] = std::max(mx[seg.segment_of[i]], L[i]);
  std::vector<double> denom(seg.segment_count, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    Y[i] = std::exp(L[i] - mx[seg.segment_of[i]]);
    denom[seg.segment_of[i]] += Y[i];
  }
  for (std::size_t i = 0; i < n; ++i) Y[i] /= denom[seg.segment_of[i]];
  std::vector<int> owner = seg.segment_of;
  int nseg = seg.segment_count;
  return t.record(std::move(Y),
                  [li = logits.id, owner = std::move(owner), nseg](Tape& tp, int self) {
                    const Tensor& G = tp.grad_buf(self);
                    const Tensor& Y = tp.val(self);
                    Tensor& dL = tp.grad_buf(li);
                    std::vector<double> dot(nseg, 0.0);
                    for (std::size_t i = 0; i < G.size(); ++i)
                      dot[owner[i]] += G[i] * Y[i];
                    for (std::size_t i = 0; i < G.size(); ++i)
                      dL[i] += Y[i] * (G[i] - dot[owner[i]]);
                  });
}

// Sum of n×d rows into segment_count×d by segment id.
inline Var segment_sum(Var rows, const SegmentIndex& seg) {
  Tape& t = detail::tape_of(rows);
  const Tensor& R = t.value(rows);
  seg.validate(R.rows());
  Tensor Y(seg.segment_count, R.cols());
  for (std::size_t i = 0; i < R.rows(); ++i)
    for (std::size_t c = 0; c < R.cols(); ++c) Y(seg.segment_of[i], c) += R(i, c);
  std::vector<int> owner = seg.segment_of;
  return t.record(std::move(Y),
                  [ri = rows.id, owner = std::move(owner)](Tape& tp, int self) {
                    const Tensor& G = tp.grad_buf(self);
                    Tensor& dR = tp.grad_buf(ri);
                    for (std::size_t i = 0; i < dR.rows(); ++i)
                      for (std::size_t c = 0; c < dR.cols(); ++c)
                        dR(i, c) += G(owner[i], c);
                  });
}

// Each row of `rows` (n×d) scaled by the matching entry of `scale` (n×1).
inline Var scale_rows(Var rows, Var scale) {
  Tape& t = detail::tape_of(rows);
  detail::same_tape(rows, scale);
  const Tensor& R = t.value(rows);
  const Tensor& S = t.value(scale);
  if (S.cols() != 1 || S.rows() != R.rows())
    throw std::invalid_argument("scale_rows: scale must be rows(m)×1");
  Tensor Y = R;
  for (std::size_t r = 0; r < R.rows(); ++r)
    for (std::size_t c = 0; c < R.cols(); ++c) Y(r, c) *= S[r];
  return t.record(std::move(Y), [ri = rows.id, si = scale.id](Tape& tp, int self) {
    const Tensor& G = tp.grad_buf(self);
    const Tensor& R = tp.val(ri);
    const Tensor& S = tp.val(si);
    Tensor& dR = tp.grad_buf(ri);
    Tensor& dS = tp.grad_buf(si);
    for (std::size_t r = 0; r < G.rows(); ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < G.cols(); ++c) {
        dR(r, c) += G(r, c) * S[r];
        acc += G(r, c) * R(r, c);
      }
      dS[r] += acc;
    }
  });
}

// Sum along each row: n×d → n×1. Paired with mul() it gives row-wise dots.
inline Var row_sum(Var m) {
  Tape& t = detail::tape_of(m);
  const Tensor& M = t.value(m);
  Tensor Y(M.rows(), 1);
  for (std::size_t r = 0; r < M.rows(); ++r)
    for (std::size_t c = 0; c < M.cols(); ++c) Y[r] += M(r, c);
  return t.record(std::move(Y), [mi = m.id](Tape& tp, int self) {
    const Tensor& G = tp.grad_buf(self);
    Tensor& dM = tp.grad_buf(mi);
    for (std::size_t r = 0; r < dM.rows(); ++r)
      for (std::size_t c = 0; c < dM.cols(); ++c) dM(r, c) += G[r];
  });
}

inline Var mean_rows(Var m) {
  Tape& t = detail::tape_of(m);
  const Tensor& M = t.value(m);
  if (M.rows() == 0) throw std::invalid_argument("mean_rows: empty input");
  Tensor Y(1, M.cols());
  for (std::size_t r = 0; r < M.rows(); ++r)
    for (std::size_t c = 0; c < M.cols(); ++c) Y(0, c) += M(r, c);
  const double inv = 1.0 / static_cast<double>(M.rows());
  for (std::size_t c = 0; c < M.cols(); ++c) Y(0, c) *= inv;
  return t.record(std::move(Y), [mi = m.id, inv](Tape& tp, int self) {
    const Tensor& G = tp.grad_buf(self);
    Tensor& dM = tp.grad_buf(mi);
    for (std::size_t r = 0; r < dM.rows(); ++r)
      for (std::size_t c = 0; c < dM.cols(); ++c) dM(r, c) += G(0, c) * inv;
  });
}

inline Var sum_all(Var m) {
  Tape& t = detail::tape_of(m);
  const Tensor& M = t.value(m);
  double s = 0.0;
  for (std::size_t i = 0; i < M.size(); ++i) s += M[i];
  return t.record(Tensor::scalar(s), [mi = m.id](Tape& tp, int self) {
    const double g = tp.grad_buf(self)[0];
    Tensor& dM = tp.grad_buf(mi);
    for (std::size_t i = 0; i < dM.size(); ++i) dM[i] += g;
  });
}

// Softmax cross-entropy of 1×C logits against an integer label.
inline Var cross_entropy(Var logits, int label) {
  Tape& t = detail::tape_of(logits);
  const Tensor& L = t.value(logits);
  if (L.rows() != 1) throw std::invalid_argument("cross_entropy: logits must be 1×C");
  if (label < 0 || label >= static_cast<int>(L.cols()))
    throw std::out_of_range("cross_entropy: label out of range");
  double mx = L[0];
  for (std::size_t c = 1; c < L.cols(); ++c) mx = std::max(mx, L[c]);
  double lse = 0.0;
  for (std::size_t c = 0; c < L.cols(); ++c) lse += std::exp(L[c] - mx);
  lse = mx + std::log(lse);
  return t.record(Tensor::scalar(lse - L[label]),
                  [li = logits.id, label](Tape& tp, int self) {
                    const double g = tp.grad_buf(self)[0];
                    const Tensor& L = tp.val(li);
                    Tensor& dL = tp.grad_buf(li);
                    double mx = L[0];
                    for (std::size_t c = 1; c < L.cols(); ++c) mx = std::max(mx, L[c]);
                    double denom = 0.0;
                    for (std::size_t c = 0; c < L.cols(); ++c) denom += std::exp(L[c] - mx);
                    for (std::size_t c = 0; c < L.cols(); ++c) {
                      const double p = std::exp(L[c] - mx) / denom;
                      dL[c] += g * (p - (static_cast<int>(c) == label ? 1.0 : 0.0));
                    }
                  });
}

}  // namespace sargtr::ad
