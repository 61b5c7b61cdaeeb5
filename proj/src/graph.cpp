#include "sten/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace sten {
namespace {

// C[M,N] += A[M,K] * B[K,N]
void gemm_acc(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
              double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      double av = arow[kk];
      if (av == 0.0) continue;
      const double* brow = b + kk * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] += A[M,K] * B^T where B is stored [N,K]
void gemm_bt_acc(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* bt,
                 double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = bt + j * k;
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      crow[j] += acc;
    }
  }
}

// C[K,N] += A^T * B where A is [M,K], B is [M,N]
void gemm_at_acc(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                 double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      double av = arow[kk];
      if (av == 0.0) continue;
      double* crow = c + kk * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void require_mask01(const Tensor& mask, const char* op) {
  for (double x : mask.v) {
    if (x != 0.0 && x != 1.0) throw RangeError(std::string(op) + ": mask entries must be 0 or 1");
  }
}

}  // namespace

Var Graph::push(Tensor value, bool needs_grad, std::function<void(Graph&)> back) {
  Node n;
  n.store = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

Var Graph::input(Tensor t) { return push(std::move(t), false, nullptr); }

Var Graph::leaf(Tensor t) { return push(std::move(t), true, nullptr); }

Var Graph::param(Parameter& p) {
  Node n;
  n.bound = &p;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

const Tensor& Graph::grad(Var x) const {
  return nodes_[static_cast<std::size_t>(x)].grad;
}

void Graph::add_grad_range(Var x, const double* src, std::size_t offset, std::size_t n) {
  Tensor& g = grad_of(x);
  for (std::size_t i = 0; i < n; ++i) g.v[offset + i] += src[i];
}

Var Graph::add(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  require_same_shape(ta, tb, "add");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] += tb.v[i];
  bool ng = wants_grad(a) || wants_grad(b);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [a, b, self](Graph& g) {
      const Tensor& dy = g.grad(self);
      if (g.wants_grad(a)) {
        Tensor& da = g.grad_of(a);
        for (std::size_t i = 0; i < dy.size(); ++i) da.v[i] += dy.v[i];
      }
      if (g.wants_grad(b)) {
        Tensor& db = g.grad_of(b);
        for (std::size_t i = 0; i < dy.size(); ++i) db.v[i] += dy.v[i];
      }
    };
  }
  return self;
}

Var Graph::sub(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  require_same_shape(ta, tb, "sub");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] -= tb.v[i];
  bool ng = wants_grad(a) || wants_grad(b);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [a, b, self](Graph& g) {
      const Tensor& dy = g.grad(self);
      if (g.wants_grad(a)) {
        Tensor& da = g.grad_of(a);
        for (std::size_t i = 0; i < dy.size(); ++i) da.v[i] += dy.v[i];
      }
      if (g.wants_grad(b)) {
        Tensor& db = g.grad_of(b);
        for (std::size_t i = 0; i < dy.size(); ++i) db.v[i] -= dy.v[i];
      }
    };
  }
  return self;
}

Var Graph::mul(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  require_same_shape(ta, tb, "mul");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] *= tb.v[i];
  bool ng = wants_grad(a) || wants_grad(b);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [a, b, self](Graph& g) {
      const Tensor& dy = g.grad(self);
      const Tensor& va = g.val(a);
      const Tensor& vb = g.val(b);
      if (g.wants_grad(a)) {
        Tensor& da = g.grad_of(a);
        for (std::size_t i = 0; i < dy.size(); ++i) da.v[i] += dy.v[i] * vb.v[i];
      }
      if (g.wants_grad(b)) {
        Tensor& db = g.grad_of(b);
        for (std::size_t i = 0; i < dy.size(); ++i) db.v[i] += dy.v[i] * va.v[i];
      }
    };
  }
  return self;
}

Var Graph::scale_const(Var x, double c) {
  Tensor out = val(x);
  for (double& v : out.v) v *= c;
  bool ng = wants_grad(x);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [x, c, self](Graph& g) {
      const Tensor& dy = g.grad(self);
      Tensor& dx = g.grad_of(x);
      for (std::size_t i = 0; i < dy.size(); ++i) dx.v[i] += c * dy.v[i];
    };
  }
  return self;
}

Var Graph::scale_rows(Var x, Var s) {
  const Tensor& tx = val(x);
  const Tensor& ts = val(s);
  if (tx.rank() < 1) throw ShapeError("scale_rows: scalar input");
  std::size_t n = tx.dim(0);
  if (ts.size() != n) {
    throw ShapeError("scale_rows: scale shape " + shape_str(ts.shape) + " vs rows of " +
                     shape_str(tx.shape));
  }
  std::size_t stride = tx.size() / n;
  Tensor out = tx;
  for (std::size_t i = 0; i < n; ++i) {
    double sv = ts.v[i];
    double* row = out.v.data() + i * stride;
    for (std::size_t j = 0; j < stride; ++j) row[j] *= sv;
  }
  bool ng = wants_grad(x) || wants_grad(s);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [x, s, self, n, stride](Graph& g) {
      const Tensor& dy = g.grad(self);
      const Tensor& vx = g.val(x);
      const Tensor& vs = g.val(s);
      if (g.wants_grad(x)) {
        Tensor& dx = g.grad_of(x);
        for (std::size_t i = 0; i < n; ++i) {
          double sv = vs.v[i];
          const double* dyr = dy.v.data() + i * stride;
          double* dxr = dx.v.data() + i * stride;
          for (std::size_t j = 0; j < stride; ++j) dxr[j] += sv * dyr[j];
        }
      }
      if (g.wants_grad(s)) {
        Tensor& ds = g.grad_of(s);
        for (std::size_t i = 0; i < n; ++i) {
          const double* dyr = dy.v.data() + i * stride;
          const double* xr = vx.v.data() + i * stride;
          double acc = 0.0;
          for (std::size_t j = 0; j < stride; ++j) acc += dyr[j] * xr[j];
          ds.v[i] += acc;
        }
      }
    };
  }
  return self;
}

Var Graph::scale_scalar(Var x, Var s) {
  const Tensor& ts = val(s);
  if (ts.size() != 1) {
    throw ShapeError("scale_scalar: scale must have a single element, got " + shape_str(ts.shape));
  }
  Tensor out = val(x);
  double sv = ts.v[0];
  for (double& v : out.v) v *= sv;
  bool ng = wants_grad(x) || wants_grad(s);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [x, s, self](Graph& g) {
      const Tensor& dy = g.grad(self);
      const Tensor& vx = g.val(x);
      double sv2 = g.val(s).v[0];
      if (g.wants_grad(x)) {
        Tensor& dx = g.grad_of(x);
        for (std::size_t i = 0; i < dy.size(); ++i) dx.v[i] += sv2 * dy.v[i];
      }
      if (g.wants_grad(s)) {
        double acc = 0.0;
        for (std::size_t i = 0; i < dy.size(); ++i) acc += dy.v[i] * vx.v[i];
        g.grad_of(s).v[0] += acc;
      }
    };
  }
  return self;
}

Var Graph::affine(Var x, Var w, Var b) {
  const Tensor& tx = val(x);
  const Tensor& tw = val(w);
  const Tensor& tb = val(b);
  if (tw.rank() != 2) throw ShapeError("affine: weight must be rank 2, got " + shape_str(tw.shape));
  std::size_t d_in = tw.dim(0);
  std::size_t d_out = tw.dim(1);
  if (tx.last() != d_in) {
    throw ShapeError("affine: input " + shape_str(tx.shape) + " vs weight " + shape_str(tw.shape));
  }
  if (tb.size() != d_out) {
    throw ShapeError("affine: bias " + shape_str(tb.shape) + " vs weight " + shape_str(tw.shape));
  }
  std::size_t m = tx.leading();
  Shape out_shape = tx.shape;
  out_shape.back() = d_out;
  Tensor out(out_shape);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.v.data() + i * d_out;
    for (std::size_t j = 0; j < d_out; ++j) row[j] = tb.v[j];
  }
  gemm_acc(m, d_in, d_out, tx.v.data(), tw.v.data(), out.v.data());
  bool ng = wants_grad(x) || wants_grad(w) || wants_grad(b);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [x, w, b, self, m, d_in, d_out](Graph& g) {
      const Tensor& dy = g.grad(self);
      if (g.wants_grad(x)) {
        gemm_bt_acc(m, d_out, d_in, dy.v.data(), g.val(w).v.data(), g.grad_of(x).v.data());
      }
      if (g.wants_grad(w)) {
        gemm_at_acc(m, d_in, d_out, g.val(x).v.data(), dy.v.data(), g.grad_of(w).v.data());
      }
      if (g.wants_grad(b)) {
        Tensor& db = g.grad_of(b);
        for (std::size_t i = 0; i < m; ++i) {
          const double* dr = dy.v.data() + i * d_out;
          for (std::size_t j = 0; j < d_out; ++j) db.v[j] += dr[j];
        }
      }
    };
  }
  return self;
}

Var Graph::batched_affine(Var x, Var w, Var b) {
  const Tensor& tx = val(x);
  const Tensor& tw = val(w);
  const Tensor& tb = val(b);
  if (tx.rank() != 3 || tw.rank() != 3 || tb.rank() != 2) {
    throw ShapeError("batched_affine: expected x[N,L,di] w[N,di,do] b[N,do], got " +
                     shape_str(tx.shape) + " " + shape_str(tw.shape) + " " + shape_str(tb.shape));
  }
  std::size_t n = tx.dim(0), l = tx.dim(1), di = tx.dim(2);
  std::size_t dout = tw.dim(2);
  if (tw.dim(0) != n || tw.dim(1) != di || tb.dim(0) != n || tb.dim(1) != dout) {
    throw ShapeError("batched_affine: x " + shape_str(tx.shape) + " vs w " + shape_str(tw.shape) +
                     " vs b " + shape_str(tb.shape));
  }
  Tensor out({n, l, dout});
  for (std::size_t s = 0; s < n; ++s) {
    const double* xs = tx.v.data() + s * l * di;
    const double* ws = tw.v.data() + s * di * dout;
    const double* bs = tb.v.data() + s * dout;
    double* os = out.v.data() + s * l * dout;
    for (std::size_t i = 0; i < l; ++i) {
      double* row = os + i * dout;
      for (std::size_t j = 0; j < dout; ++j) row[j] = bs[j];
    }
    gemm_acc(l, di, dout, xs, ws, os);
  }
  bool ng = wants_grad(x) || wants_grad(w) || wants_grad(b);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [x, w, b, self, n, l, di, dout](Graph& g) {
      const Tensor& dy = g.grad(self);
      for (std::size_t s = 0; s < n; ++s) {
        const double* dys = dy.v.data() + s * l * dout;
        if (g.wants_grad(x)) {
          gemm_bt_acc(l, dout, di, dys, g.val(w).v.data() + s * di * dout,
                      g.grad_of(x).v.data() + s * l * di);
        }
        if (g.wants_grad(w)) {
          gemm_at_acc(l, di, dout, g.val(x).v.data() + s * l * di, dys,
                      g.grad_of(w).v.data() + s * di * dout);
        }
        if (g.wants_grad(b)) {
          double* dbs = g.grad_of(b).v.data() + s * dout;
          for (std::size_t i = 0; i < l; ++i) {
            const double* dr = dys + i * dout;
            for (std::size_t j = 0; j < dout; ++j) dbs[j] += dr[j];
          }
        }
      }
    };
  }
  return self;
}

Var Graph::pointwise(Var x, Pointwise kind, double alpha) {
  const Tensor& tx = val(x);
  Tensor out = tx;
  switch (kind) {
    case Pointwise::Sigmoid:
      for (double& v : out.v) v = 1.0 / (1.0 + std::exp(-v));
      break;
    case Pointwise::LeakyRelu:
      for (double& v : out.v) v = v >= 0.0 ? v : alpha * v;
      break;
    case Pointwise::ExpNeg:
      for (double& v : out.v) v = std::exp(-v);
      break;
  }
  bool ng = wants_grad(x);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [x, self, kind, alpha](Graph& g) {
      const Tensor& dy = g.grad(self);
      const Tensor& y = g.val(self);
      const Tensor& vx = g.val(x);
      Tensor& dx = g.grad_of(x);
      switch (kind) {
        case Pointwise::Sigmoid:
          for (std::size_t i = 0; i < dy.size(); ++i) {
            dx.v[i] += dy.v[i] * y.v[i] * (1.0 - y.v[i]);
          }
          break;
        case Pointwise::LeakyRelu:
          for (std::size_t i = 0; i < dy.size(); ++i) {
            dx.v[i] += dy.v[i] * (vx.v[i] >= 0.0 ? 1.0 : alpha);
          }
          break;
        case Pointwise::ExpNeg:
          for (std::size_t i = 0; i < dy.size(); ++i) dx.v[i] -= dy.v[i] * y.v[i];
          break;
      }
    };
  }
  return self;
}

Var Graph::softmax_masked(Var logits, const Tensor& mask, MaskedRows policy) {
  const Tensor& tz = val(logits);
  require_same_shape(tz, mask, "softmax_masked");
  require_mask01(mask, "softmax_masked");
  std::size_t l = tz.last();
  std::size_t rows = tz.leading();
  if (l == 0) throw ShapeError("softmax_masked: empty last axis");
  Tensor out(tz.shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = tz.v.data() + r * l;
    const double* m = mask.v.data() + r * l;
    double* y = out.v.data() + r * l;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < l; ++j) {
      if (m[j] != 0.0 && z[j] > mx) mx = z[j];
    }
    if (!std::isfinite(mx)) {
      if (policy == MaskedRows::Error) {
        throw NumericError("softmax_masked: row " + std::to_string(r) + " has no valid position");
      }
      for (std::size_t j = 0; j < l; ++j) y[j] = 0.0;
      continue;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < l; ++j) {
      if (m[j] != 0.0) {
        y[j] = std::exp(z[j] - mx);
        sum += y[j];
      } else {
        y[j] = 0.0;
      }
    }
    for (std::size_t j = 0; j < l; ++j) {
      if (m[j] != 0.0) y[j] /= sum;
    }
  }
  bool ng = wants_grad(logits);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [logits, self, rows, l](Graph& g) {
      const Tensor& dy = g.grad(self);
      const Tensor& y = g.val(self);
      Tensor& dz = g.grad_of(logits);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* dyr = dy.v.data() + r * l;
        const double* yr = y.v.data() + r * l;
        double* dzr = dz.v.data() + r * l;
        double dot = 0.0;
        for (std::size_t j = 0; j < l; ++j) dot += dyr[j] * yr[j];
        // Masked positions have y == 0, so they receive exactly zero.
        for (std::size_t j = 0; j < l; ++j) dzr[j] += yr[j] * (dyr[j] - dot);
      }
    };
  }
  return self;
}

Var Graph::batch_norm(Var x, Var gamma, Var beta, BatchNormState& state, BnMode mode, double eps,
                      double momentum) {
  const Tensor& tx = val(x);
  if (tx.rank() != 2) {
    throw ShapeError("batch_norm: expected rank-2 input, got " + shape_str(tx.shape));
  }
  std::size_t n = tx.dim(0), d = tx.dim(1);
  const Tensor& tg = val(gamma);
  const Tensor& tb = val(beta);
  if (tg.size() != d || tb.size() != d || state.running_mean.size() != d ||
      state.running_var.size() != d) {
    throw ShapeError("batch_norm: width mismatch, input " + shape_str(tx.shape) + " gamma " +
                     shape_str(tg.shape));
  }
  if (mode == BnMode::Train && n < 2) {
    throw RangeError("batch_norm: train mode needs a batch of at least 2 rows, got " +
                     std::to_string(n));
  }
  Tensor mean({d}), var({d});
  if (mode == BnMode::Train) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = tx.v.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) mean.v[j] += row[j];
    }
    for (std::size_t j = 0; j < d; ++j) mean.v[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = tx.v.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) {
        double c = row[j] - mean.v[j];
        var.v[j] += c * c;
      }
    }
    for (std::size_t j = 0; j < d; ++j) var.v[j] /= static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j) {
      state.running_mean.v[j] = momentum * state.running_mean.v[j] + (1.0 - momentum) * mean.v[j];
      state.running_var.v[j] = momentum * state.running_var.v[j] + (1.0 - momentum) * var.v[j];
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }
  Tensor inv_std({d});
  for (std::size_t j = 0; j < d; ++j) inv_std.v[j] = 1.0 / std::sqrt(var.v[j] + eps);
  Tensor xhat({n, d});
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = tx.v.data() + i * d;
    double* xh = xhat.v.data() + i * d;
    double* o = out.v.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      xh[j] = (row[j] - mean.v[j]) * inv_std.v[j];
      o[j] = tg.v[j] * xh[j] + tb.v[j];
    }
  }
  bool ng = wants_grad(x) || wants_grad(gamma) || wants_grad(beta);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [x, gamma, beta, self, n, d, mode, xhat = std::move(xhat),
                          inv_std = std::move(inv_std)](Graph& g) {
      const Tensor& dy = g.grad(self);
      const Tensor& vg = g.val(gamma);
      if (g.wants_grad(beta)) {
        Tensor& db = g.grad_of(beta);
        for (std::size_t i = 0; i < n; ++i) {
          const double* dr = dy.v.data() + i * d;
          for (std::size_t j = 0; j < d; ++j) db.v[j] += dr[j];
        }
      }
      if (g.wants_grad(gamma)) {
        Tensor& dg = g.grad_of(gamma);
        for (std::size_t i = 0; i < n; ++i) {
          const double* dr = dy.v.data() + i * d;
          const double* xh = xhat.v.data() + i * d;
          for (std::size_t j = 0; j < d; ++j) dg.v[j] += dr[j] * xh[j];
        }
      }
      if (!g.wants_grad(x)) return;
      Tensor& dx = g.grad_of(x);
      if (mode == BnMode::Infer) {
        // Statistics are constants in infer mode.
        for (std::size_t i = 0; i < n; ++i) {
          const double* dr = dy.v.data() + i * d;
          double* dxr = dx.v.data() + i * d;
          for (std::size_t j = 0; j < d; ++j) dxr[j] += dr[j] * vg.v[j] * inv_std.v[j];
        }
        return;
      }
      // Train mode: gradients also flow through the batch statistics.
      std::vector<double> sum_dxhat(d, 0.0), sum_dxhat_xhat(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double* dr = dy.v.data() + i * d;
        const double* xh = xhat.v.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) {
          double dxh = dr[j] * vg.v[j];
          sum_dxhat[j] += dxh;
          sum_dxhat_xhat[j] += dxh * xh[j];
        }
      }
      double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double* dr = dy.v.data() + i * d;
        const double* xh = xhat.v.data() + i * d;
        double* dxr = dx.v.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) {
          double dxh = dr[j] * vg.v[j];
          dxr[j] += inv_std.v[j] * (dxh - inv_n * sum_dxhat[j] - inv_n * xh[j] * sum_dxhat_xhat[j]);
        }
      }
    };
  }
  return self;
}

Var Graph::masked_mean_pool(Var x, const Tensor& mask) {
  const Tensor& tx = val(x);
  if (tx.rank() < 2) {
    throw ShapeError("masked_mean_pool: need [.., L, d], got " + shape_str(tx.shape));
  }
  std::size_t d = tx.last();
  std::size_t l = tx.dim(-2);
  std::size_t rows = tx.size() / (l * d);
  if (mask.size() != rows * l) {
    throw ShapeError("masked_mean_pool: mask " + shape_str(mask.shape) + " vs input " +
                     shape_str(tx.shape));
  }
  require_mask01(mask, "masked_mean_pool");
  Shape out_shape(tx.shape.begin(), tx.shape.end() - 2);
  out_shape.push_back(d);
  Tensor out(out_shape);
  std::vector<double> inv_count(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* m = mask.v.data() + r * l;
    double count = 0.0;
    double* o = out.v.data() + r * d;
    for (std::size_t j = 0; j < l; ++j) {
      if (m[j] != 0.0) {
        count += 1.0;
        const double* row = tx.v.data() + (r * l + j) * d;
        for (std::size_t k = 0; k < d; ++k) o[k] += row[k];
      }
    }
    // An all-masked row pools to zero; the divisor 1 keeps that exact.
    inv_count[r] = 1.0 / (count > 0.0 ? count : 1.0);
    for (std::size_t k = 0; k < d; ++k) o[k] *= inv_count[r];
  }
  bool ng = wants_grad(x);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [x, self, rows, l, d, mask, inv_count = std::move(inv_count)](Graph& g) {
      const Tensor& dy = g.grad(self);
      Tensor& dx = g.grad_of(x);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* m = mask.v.data() + r * l;
        const double* dyr = dy.v.data() + r * d;
        for (std::size_t j = 0; j < l; ++j) {
          if (m[j] == 0.0) continue;
          double* dxr = dx.v.data() + (r * l + j) * d;
          for (std::size_t k = 0; k < d; ++k) dxr[k] += dyr[k] * inv_count[r];
        }
      }
    };
  }
  return self;
}

Var Graph::weighted_pool(Var x, Var w) {
  const Tensor& tx = val(x);
  const Tensor& tw = val(w);
  if (tx.rank() != 3) throw ShapeError("weighted_pool: need x[N,L,d], got " + shape_str(tx.shape));
  std::size_t n = tx.dim(0), l = tx.dim(1), d = tx.dim(2);
  if (tw.size() != n * l) {
    throw ShapeError("weighted_pool: weights " + shape_str(tw.shape) + " vs input " +
                     shape_str(tx.shape));
  }
  Tensor out({n, d});
  for (std::size_t s = 0; s < n; ++s) {
    double* o = out.v.data() + s * d;
    for (std::size_t j = 0; j < l; ++j) {
      double wv = tw.v[s * l + j];
      if (wv == 0.0) continue;
      const double* row = tx.v.data() + (s * l + j) * d;
      for (std::size_t k = 0; k < d; ++k) o[k] += wv * row[k];
    }
  }
  bool ng = wants_grad(x) || wants_grad(w);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [x, w, self, n, l, d](Graph& g) {
      const Tensor& dy = g.grad(self);
      const Tensor& vx = g.val(x);
      const Tensor& vw = g.val(w);
      if (g.wants_grad(x)) {
        Tensor& dx = g.grad_of(x);
        for (std::size_t s = 0; s < n; ++s) {
          const double* dyr = dy.v.data() + s * d;
          for (std::size_t j = 0; j < l; ++j) {
            double wv = vw.v[s * l + j];
            if (wv == 0.0) continue;
            double* dxr = dx.v.data() + (s * l + j) * d;
            for (std::size_t k = 0; k < d; ++k) dxr[k] += wv * dyr[k];
          }
        }
      }
      if (g.wants_grad(w)) {
        Tensor& dw = g.grad_of(w);
        for (std::size_t s = 0; s < n; ++s) {
          const double* dyr = dy.v.data() + s * d;
          for (std::size_t j = 0; j < l; ++j) {
            const double* row = vx.v.data() + (s * l + j) * d;
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) acc += dyr[k] * row[k];
            dw.v[s * l + j] += acc;
          }
        }
      }
    };
  }
  return self;
}

Var Graph::rowdot(Var k, Var q) {
  const Tensor& tk = val(k);
  const Tensor& tq = val(q);
  if (tk.rank() != 3 || tq.rank() != 2) {
    throw ShapeError("rowdot: need k[N,L,d], q[N,d], got " + shape_str(tk.shape) + " " +
                     shape_str(tq.shape));
  }
  std::size_t n = tk.dim(0), l = tk.dim(1), d = tk.dim(2);
  if (tq.dim(0) != n || tq.dim(1) != d) {
    throw ShapeError("rowdot: k " + shape_str(tk.shape) + " vs q " + shape_str(tq.shape));
  }
  Tensor out({n, l});
  for (std::size_t s = 0; s < n; ++s) {
    const double* qs = tq.v.data() + s * d;
    for (std::size_t j = 0; j < l; ++j) {
      const double* row = tk.v.data() + (s * l + j) * d;
      double acc = 0.0;
      for (std::size_t kk = 0; kk < d; ++kk) acc += row[kk] * qs[kk];
      out.v[s * l + j] = acc;
    }
  }
  bool ng = wants_grad(k) || wants_grad(q);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [k, q, self, n, l, d](Graph& g) {
      const Tensor& dy = g.grad(self);
      const Tensor& vk = g.val(k);
      const Tensor& vq = g.val(q);
      if (g.wants_grad(k)) {
        Tensor& dk = g.grad_of(k);
        for (std::size_t s = 0; s < n; ++s) {
          const double* qs = vq.v.data() + s * d;
          for (std::size_t j = 0; j < l; ++j) {
            double dyv = dy.v[s * l + j];
            if (dyv == 0.0) continue;
            double* dkr = dk.v.data() + (s * l + j) * d;
            for (std::size_t kk = 0; kk < d; ++kk) dkr[kk] += dyv * qs[kk];
          }
        }
      }
      if (g.wants_grad(q)) {
        Tensor& dq = g.grad_of(q);
        for (std::size_t s = 0; s < n; ++s) {
          double* dqs = dq.v.data() + s * d;
          for (std::size_t j = 0; j < l; ++j) {
            double dyv = dy.v[s * l + j];
            if (dyv == 0.0) continue;
            const double* row = vk.v.data() + (s * l + j) * d;
            for (std::size_t kk = 0; kk < d; ++kk) dqs[kk] += dyv * row[kk];
          }
        }
      }
    };
  }
  return self;
}

Var Graph::dot_rows(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  require_same_shape(ta, tb, "dot_rows");
  if (ta.rank() != 2) throw ShapeError("dot_rows: need [N,d], got " + shape_str(ta.shape));
  std::size_t n = ta.dim(0), d = ta.dim(1);
  Tensor out({n});
  for (std::size_t s = 0; s < n; ++s) {
    const double* ra = ta.v.data() + s * d;
    const double* rb = tb.v.data() + s * d;
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += ra[j] * rb[j];
    out.v[s] = acc;
  }
  bool ng = wants_grad(a) || wants_grad(b);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [a, b, self, n, d](Graph& g) {
      const Tensor& dy = g.grad(self);
      const Tensor& va = g.val(a);
      const Tensor& vb = g.val(b);
      if (g.wants_grad(a)) {
        Tensor& da = g.grad_of(a);
        for (std::size_t s = 0; s < n; ++s) {
          double dyv = dy.v[s];
          const double* rb = vb.v.data() + s * d;
          double* dr = da.v.data() + s * d;
          for (std::size_t j = 0; j < d; ++j) dr[j] += dyv * rb[j];
        }
      }
      if (g.wants_grad(b)) {
        Tensor& db = g.grad_of(b);
        for (std::size_t s = 0; s < n; ++s) {
          double dyv = dy.v[s];
          const double* ra = va.v.data() + s * d;
          double* dr = db.v.data() + s * d;
          for (std::size_t j = 0; j < d; ++j) dr[j] += dyv * ra[j];
        }
      }
    };
  }
  return self;
}

Var Graph::concat_last(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_last: no inputs");
  const Tensor& first = val(parts[0]);
  Shape lead(first.shape.begin(), first.shape.end() - 1);
  std::size_t total = 0;
  bool ng = false;
  for (Var p : parts) {
    const Tensor& t = val(p);
    Shape plead(t.shape.begin(), t.shape.end() - 1);
    if (plead != lead) {
      throw ShapeError("concat_last: leading dims differ, " + shape_str(first.shape) + " vs " +
                       shape_str(t.shape));
    }
    total += t.last();
    ng = ng || wants_grad(p);
  }
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor out(out_shape);
  std::size_t rows = first.leading();
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& t = val(p);
    std::size_t w = t.last();
    for (std::size_t r = 0; r < rows; ++r) {
      std::memcpy(out.v.data() + r * total + offset, t.v.data() + r * w, w * sizeof(double));
    }
    offset += w;
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [saved = std::move(saved), self, rows, total](Graph& g) {
      const Tensor& dy = g.grad(self);
      std::size_t off = 0;
      for (Var p : saved) {
        std::size_t w = g.val(p).last();
        if (g.wants_grad(p)) {
          Tensor& dp = g.grad_of(p);
          for (std::size_t r = 0; r < rows; ++r) {
            const double* src = dy.v.data() + r * total + off;
            double* dst = dp.v.data() + r * w;
            for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
          }
        }
        off += w;
      }
    };
  }
  return self;
}

Var Graph::concat_last(std::initializer_list<Var> parts) {
  std::vector<Var> v(parts);
  return concat_last(std::span<const Var>(v));
}

Var Graph::slice_last(Var x, std::size_t begin, std::size_t len) {
  const Tensor& tx = val(x);
  std::size_t w = tx.last();
  if (len == 0 || begin + len > w) {
    throw ShapeError("slice_last: [" + std::to_string(begin) + "," + std::to_string(begin + len) +
                     ") out of width " + std::to_string(w) + " of " + shape_str(tx.shape));
  }
  Shape out_shape = tx.shape;
  out_shape.back() = len;
  Tensor out(out_shape);
  std::size_t rows = tx.leading();
  for (std::size_t r = 0; r < rows; ++r) {
    std::memcpy(out.v.data() + r * len, tx.v.data() + r * w + begin, len * sizeof(double));
  }
  bool ng = wants_grad(x);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [x, self, begin, len, w, rows](Graph& g) {
      const Tensor& dy = g.grad(self);
      Tensor& dx = g.grad_of(x);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* src = dy.v.data() + r * len;
        double* dst = dx.v.data() + r * w + begin;
        for (std::size_t j = 0; j < len; ++j) dst[j] += src[j];
      }
    };
  }
  return self;
}

Var Graph::reshape(Var x, Shape shape) {
  const Tensor& tx = val(x);
  if (shape_size(shape) != tx.size()) {
    throw ShapeError("reshape: " + shape_str(tx.shape) + " to " + shape_str(shape) +
                     " changes element count");
  }
  Tensor out(shape, tx.v);
  bool ng = wants_grad(x);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [x, self](Graph& g) {
      const Tensor& dy = g.grad(self);
      Tensor& dx = g.grad_of(x);
      for (std::size_t i = 0; i < dx.size(); ++i) dx.v[i] += dy.v[i];
    };
  }
  return self;
}

Var Graph::embedding(Var table, const std::vector<std::int64_t>& ids, Shape leading) {
  const Tensor& tt = val(table);
  if (tt.rank() != 2) {
    throw ShapeError("embedding: table must be [V,E], got " + shape_str(tt.shape));
  }
  std::size_t v = tt.dim(0), e = tt.dim(1);
  if (shape_size(leading) != ids.size()) {
    throw ShapeError("embedding: " + std::to_string(ids.size()) + " ids vs leading shape " +
                     shape_str(leading));
  }
  for (std::int64_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= v) {
      throw RangeError("embedding: id " + std::to_string(id) + " out of table size " +
                       std::to_string(v));
    }
  }
  Shape out_shape = leading;
  out_shape.push_back(e);
  Tensor out(out_shape);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::memcpy(out.v.data() + i * e, tt.v.data() + static_cast<std::size_t>(ids[i]) * e,
                e * sizeof(double));
  }
  bool ng = wants_grad(table);
  Var self = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_.back().back = [table, self, ids, e](Graph& g) {
      const Tensor& dy = g.grad(self);
      Tensor& dt = g.grad_of(table);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const double* src = dy.v.data() + i * e;
        double* dst = dt.v.data() + static_cast<std::size_t>(ids[i]) * e;
        for (std::size_t j = 0; j < e; ++j) dst[j] += src[j];
      }
    };
  }
  return self;
}

Var Graph::bce_with_logits(Var logits, const Tensor& labels) {
  const Tensor& tz = val(logits);
  if (tz.size() != labels.size()) {
    throw ShapeError("bce_with_logits: logits " + shape_str(tz.shape) + " vs labels " +
                     shape_str(labels.shape));
  }
  if (tz.empty()) throw ShapeError("bce_with_logits: empty batch");
  for (double y : labels.v) {
    if (y != 0.0 && y != 1.0) throw RangeError("bce_with_logits: labels must be 0 or 1");
  }
  std::size_t n = tz.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double z = tz.v[i];
    double y = labels.v[i];
    // softplus(z) - y*z, evaluated stably for large |z|.
    loss += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y * z;
  }
  loss /= static_cast<double>(n);
  bool ng = wants_grad(logits);
  Var self = push(Tensor::scalar(loss), ng, nullptr);
  if (ng) {
    nodes_.back().back = [logits, self, labels, n](Graph& g) {
      double dy = g.grad(self).v[0];
      const Tensor& vz = g.val(logits);
      Tensor& dz = g.grad_of(logits);
      double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        double p = 1.0 / (1.0 + std::exp(-vz.v[i]));
        dz.v[i] += dy * (p - labels.v[i]) * inv_n;
      }
    };
  }
  return self;
}

Var Graph::sum(Var x) {
  const Tensor& tx = val(x);
  double s = 0.0;
  for (double v : tx.v) s += v;
  bool ng = wants_grad(x);
  Var self = push(Tensor::scalar(s), ng, nullptr);
  if (ng) {
    nodes_.back().back = [x, self](Graph& g) {
      double dy = g.grad(self).v[0];
      Tensor& dx = g.grad_of(x);
      for (double& v : dx.v) v += dy;
    };
  }
  return self;
}

void Graph::backward(Var root) {
  if (root < 0 || static_cast<std::size_t>(root) >= nodes_.size()) {
    throw RangeError("backward: invalid root node");
  }
  if (value_of(root).size() != 1) {
    throw ShapeError("backward: root must be scalar, got " + shape_str(value_of(root).shape));
  }
  if (!nodes_[static_cast<std::size_t>(root)].needs_grad) return;
  for (std::size_t i = 0; i <= static_cast<std::size_t>(root); ++i) {
    Node& n = nodes_[i];
    if (n.needs_grad) n.grad = Tensor(value_of(static_cast<Var>(i)).shape);
  }
  nodes_[static_cast<std::size_t>(root)].grad.v[0] = 1.0;
  for (std::size_t i = static_cast<std::size_t>(root) + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.needs_grad && n.back) n.back(*this);
  }
  for (std::size_t i = 0; i <= static_cast<std::size_t>(root); ++i) {
    Node& n = nodes_[i];
    if (n.bound && n.needs_grad) {
      for (std::size_t j = 0; j < n.grad.size(); ++j) n.bound->gradient.v[j] += n.grad.v[j];
    }
  }
}

}  // namespace sten
