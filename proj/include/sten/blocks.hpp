#pragma once

#include <cmath>

#include "sten/graph.hpp"

namespace sten {

/// Residual two-layer transform FC2(LeakyReLU(FC1(x))) + x over the trailing
/// axis. w1 must map d -> hidden and w2 hidden -> d; the residual forces
/// out_dim == in_dim.
inline Var ffn(Graph& g, Var x, Var w1, Var b1, Var w2, Var b2, double alpha = 0.01) {
  const Tensor& tw1 = g.val(w1);
  const Tensor& tw2 = g.val(w2);
  if (tw1.rank() != 2 || tw2.rank() != 2 || tw1.dim(1) != tw2.dim(0) ||
      tw1.dim(0) != tw2.dim(1)) {
    throw ConfigError("ffn: weights " + shape_str(tw1.shape) + " and " + shape_str(tw2.shape) +
                      " do not form d -> hidden -> d");
  }
  if (g.val(x).last() != tw1.dim(0)) {
    throw ConfigError("ffn: input " + shape_str(g.val(x).shape) + " vs first weight " +
                      shape_str(tw1.shape));
  }
  Var h = g.leaky_relu(g.affine(x, w1, b1), alpha);
  return g.add(g.affine(h, w2, b2), x);
}

/// concat(u, att, u - att, u * att) along the last axis; output width is 4d.
inline Var activation_unit(Graph& g, Var u, Var att) {
  require_same_shape(g.val(u), g.val(att), "activation_unit");
  return g.concat_last({u, att, g.sub(u, att), g.mul(u, att)});
}

/// Scalar-gate attention: gate = sigmoid(dot(FC(st), v) / sqrt(d_v)) per
/// sample, output gate * v. The gate lies in (0,1) and the output stays
/// colinear with v.
inline Var scalar_gate(Graph& g, Var st, Var v, Var fc_w, Var fc_b) {
  Var proj = g.affine(st, fc_w, fc_b);  // [N, d_v]
  require_same_shape(g.val(proj), g.val(v), "scalar_gate");
  Var dot = g.dot_rows(proj, v);        // [N]
  double scale = 1.0 / std::sqrt(static_cast<double>(g.val(v).last()));
  Var gate = g.sigmoid(g.scale_const(dot, scale));
  return g.scale_rows(v, gate);
}

}  // namespace sten
