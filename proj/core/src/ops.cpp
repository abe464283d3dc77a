/*
 * Copyright (c) 2026 The Forge Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "forge/ops.hpp"

#include <Eigen/Core>
#include <unsupported/Eigen/SpecialFunctions>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "forge/error.hpp"
#include "forge/parallel.hpp"
#include "forge/rng.hpp"

namespace forge::ops {
namespace {

using MatR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<MatR>;
using CMap = Eigen::Map<const MatR>;
using Stride = Eigen::OuterStride<>;
using StridedMap = Eigen::Map<MatR, 0, Stride>;
using CStridedMap = Eigen::Map<const MatR, 0, Stride>;

CMap view(const Tensor& t) { return CMap(t.ptr(), t.rows(), t.cols()); }
Map view(Tensor& t) { return Map(t.ptr(), t.rows(), t.cols()); }

void require_2d(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + " expects a 2-D tensor, got " + shape_str(t.shape()));
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_nonempty_axis(const Tensor& t, const char* op) {
  if (t.rank() == 0 || t.cols() == 0) throw ShapeError(std::string(op) + " on an empty axis");
}

}  // namespace

Variable matmul(const Variable& a, const Variable& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_2d(av, "matmul");
  require_2d(bv, "matmul");
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: shape mismatch " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  }
  Tensor out({av.rows(), bv.cols()});
  view(out).noalias() = view(av) * view(bv);
  return Variable::from_op(std::move(out), {a, b}, [a, b](const Tensor& g) {
    if (a.requires_grad()) {
      Tensor da(a.shape());
      view(da).noalias() = view(g) * view(b.value()).transpose();
      a.accumulate_grad(da);
    }
    if (b.requires_grad()) {
      Tensor db(b.shape());
      view(db).noalias() = view(a.value()).transpose() * view(g);
      b.accumulate_grad(db);
    }
  });
}

Variable linear(const Variable& x, const Variable& w, const Variable& bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  require_2d(xv, "linear");
  require_2d(wv, "linear");
  if (xv.cols() != wv.cols()) {
    throw ShapeError("linear: input " + shape_str(xv.shape()) + " incompatible with weight " + shape_str(wv.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.value().size() != wv.rows()) {
    throw ShapeError("linear: bias " + shape_str(bias.shape()) + " incompatible with weight " + shape_str(wv.shape()));
  }
  Tensor out({xv.rows(), wv.rows()});
  auto o = view(out);
  o.noalias() = view(xv) * view(wv).transpose();
  if (has_bias) {
    Eigen::Map<const Eigen::RowVectorXf> b(bias.value().ptr(), static_cast<Eigen::Index>(wv.rows()));
    o.rowwise() += b;
  }
  std::vector<Variable> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return Variable::from_op(std::move(out), std::move(inputs), [x, w, bias, has_bias](const Tensor& g) {
    if (x.requires_grad()) {
      Tensor dx(x.shape());
      view(dx).noalias() = view(g) * view(w.value());
      x.accumulate_grad(dx);
    }
    if (w.requires_grad()) {
      Tensor dw(w.shape());
      view(dw).noalias() = view(g).transpose() * view(x.value());
      w.accumulate_grad(dw);
    }
    if (has_bias && bias.requires_grad()) {
      Tensor db(bias.shape());
      Eigen::Map<Eigen::RowVectorXf>(db.ptr(), static_cast<Eigen::Index>(db.size())) = view(g).colwise().sum();
      bias.accumulate_grad(db);
    }
  });
}

Variable add(const Variable& a, const Variable& b) {
  require_same(a.value(), b.value(), "add");
  Tensor out = a.value();
  const float* bp = b.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bp[i];
  return Variable::from_op(std::move(out), {a, b}, [a, b](const Tensor& g) {
    if (a.requires_grad()) a.accumulate_grad(g);
    if (b.requires_grad()) b.accumulate_grad(g);
  });
}

Variable mul(const Variable& a, const Variable& b) {
  require_same(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const float* bp = b.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bp[i];
  return Variable::from_op(std::move(out), {a, b}, [a, b](const Tensor& g) {
    if (a.requires_grad()) {
      Tensor da = g;
      for (std::size_t i = 0; i < da.size(); ++i) da[i] *= b.value()[i];
      a.accumulate_grad(da);
    }
    if (b.requires_grad()) {
      Tensor db = g;
      for (std::size_t i = 0; i < db.size(); ++i) db[i] *= a.value()[i];
      b.accumulate_grad(db);
    }
  });
}

Variable scale(const Variable& x, float factor) {
  Tensor out = x.value();
  for (auto& v : out.data()) v *= factor;
  return Variable::from_op(std::move(out), {x}, [x, factor](const Tensor& g) {
    Tensor dx = g;
    for (auto& v : dx.data()) v *= factor;
    x.accumulate_grad(dx);
  });
}

Variable gelu(const Variable& x) {
  static constexpr float kInvSqrt2 = 0.70710678118654752f;
  Tensor out(x.value().shape());
  const auto n = static_cast<Eigen::Index>(out.size());
  const auto xv = Eigen::Map<const Eigen::ArrayXf>(x.value().ptr(), n);
  Eigen::Map<Eigen::ArrayXf>(out.ptr(), n) = 0.5f * xv * (1.0f + (xv * kInvSqrt2).erf());
  return Variable::from_op(std::move(out), {x}, [x](const Tensor& g) {
    constexpr float kInvSqrt2Pi = 0.39894228040143268f;
    Tensor dx = g;
    const auto n = static_cast<Eigen::Index>(dx.size());
    const auto v = Eigen::Map<const Eigen::ArrayXf>(x.value().ptr(), n);
    const Eigen::ArrayXf cdf = 0.5f * (1.0f + (v * kInvSqrt2).erf());
    const Eigen::ArrayXf pdf = kInvSqrt2Pi * (-0.5f * v.square()).exp();
    Eigen::Map<Eigen::ArrayXf>(dx.ptr(), n) *= cdf + v * pdf;
    x.accumulate_grad(dx);
  });
}

Variable tanh(const Variable& x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = std::tanh(v);
  Tensor saved = out;
  return Variable::from_op(std::move(out), {x}, [x, saved = std::move(saved)](const Tensor& g) {
    Tensor dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= 1.0f - saved[i] * saved[i];
    x.accumulate_grad(dx);
  });
}

Variable layer_norm(const Variable& x, const Variable& gamma, const Variable& beta, float eps) {
  const Tensor& xv = x.value();
  require_nonempty_axis(xv, "layer_norm");
  const std::size_t n = xv.size() / xv.cols();
  const std::size_t h = xv.cols();
  if (gamma.value().size() != h || beta.value().size() != h) {
    throw ShapeError("layer_norm: gain/bias " + shape_str(gamma.shape()) + " incompatible with input " +
                     shape_str(xv.shape()));
  }
  Tensor normed(xv.shape());
  Tensor rstd({n});
  Tensor out(xv.shape());
  const float* gp = gamma.value().ptr();
  const float* bp = beta.value().ptr();
  for (std::size_t r = 0; r < n; ++r) {
    const float* row = xv.ptr() + r * h;
    double mean = 0.0;
    for (std::size_t c = 0; c < h; ++c) mean += row[c];
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (std::size_t c = 0; c < h; ++c) {
      const double d = row[c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(h);
    const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
    rstd[r] = static_cast<float>(inv);
    for (std::size_t c = 0; c < h; ++c) {
      const float nv = static_cast<float>((row[c] - mean) * inv);
      normed[r * h + c] = nv;
      out[r * h + c] = nv * gp[c] + bp[c];
    }
  }
  return Variable::from_op(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, normed = std::move(normed), rstd = std::move(rstd), n, h](const Tensor& g) {
        if (gamma.requires_grad() || beta.requires_grad()) {
          Tensor dg(gamma.shape());
          Tensor db(beta.shape());
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < h; ++c) {
              dg[c] += g[r * h + c] * normed[r * h + c];
              db[c] += g[r * h + c];
            }
          }
          if (gamma.requires_grad()) gamma.accumulate_grad(dg);
          if (beta.requires_grad()) beta.accumulate_grad(db);
        }
        if (x.requires_grad()) {
          Tensor dx(x.shape());
          const float* gp = gamma.value().ptr();
          for (std::size_t r = 0; r < n; ++r) {
            double mean_d = 0.0;
            double mean_dn = 0.0;
            for (std::size_t c = 0; c < h; ++c) {
              const double d = static_cast<double>(g[r * h + c]) * gp[c];
              mean_d += d;
              mean_dn += d * normed[r * h + c];
            }
            mean_d /= static_cast<double>(h);
            mean_dn /= static_cast<double>(h);
            for (std::size_t c = 0; c < h; ++c) {
              const double d = static_cast<double>(g[r * h + c]) * gp[c];
              dx[r * h + c] = static_cast<float>(rstd[r] * (d - mean_d - normed[r * h + c] * mean_dn));
            }
          }
          x.accumulate_grad(dx);
        }
      });
}

namespace {

void softmax_rows(const float* in, float* out, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = in + r * cols;
    float* dst = out + r * cols;
    const float mx = *std::max_element(row, row + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      dst[c] = std::exp(row[c] - mx);
      total += dst[c];
    }
    const float inv = static_cast<float>(1.0 / total);
    for (std::size_t c = 0; c < cols; ++c) dst[c] *= inv;
  }
}

}  // namespace

Variable softmax(const Variable& x) {
  const Tensor& xv = x.value();
  require_nonempty_axis(xv, "softmax");
  const std::size_t cols = xv.cols();
  const std::size_t rows = xv.size() / cols;
  Tensor out(xv.shape());
  softmax_rows(xv.ptr(), out.ptr(), rows, cols);
  Tensor saved = out;
  return Variable::from_op(std::move(out), {x}, [x, saved = std::move(saved), rows, cols](const Tensor& g) {
    Tensor dx(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += static_cast<double>(g[r * cols + c]) * saved[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        dx[r * cols + c] = saved[r * cols + c] * static_cast<float>(g[r * cols + c] - dot);
      }
    }
    x.accumulate_grad(dx);
  });
}

Variable embedding(const Variable& table, std::span<const std::int32_t> ids) {
  const Tensor& tv = table.value();
  require_2d(tv, "embedding");
  const std::size_t vocab = tv.rows();
  const std::size_t h = tv.cols();
  Tensor out({ids.size(), h});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw InvalidArgument("embedding: id " + std::to_string(ids[i]) + " out of range for table of " +
                            std::to_string(vocab) + " rows");
    }
    std::copy_n(tv.ptr() + static_cast<std::size_t>(ids[i]) * h, h, out.ptr() + i * h);
  }
  std::vector<std::int32_t> saved(ids.begin(), ids.end());
  return Variable::from_op(std::move(out), {table}, [table, saved = std::move(saved), h](const Tensor& g) {
    Tensor dt(table.shape());
    for (std::size_t i = 0; i < saved.size(); ++i) {
      float* dst = dt.ptr() + static_cast<std::size_t>(saved[i]) * h;
      const float* src = g.ptr() + i * h;
      for (std::size_t c = 0; c < h; ++c) dst[c] += src[c];
    }
    table.accumulate_grad(dt);
  });
}

Variable gather_rows(const Variable& x, std::span<const std::size_t> rows) {
  const Tensor& xv = x.value();
  require_2d(xv, "gather_rows");
  const std::size_t h = xv.cols();
  Tensor out({rows.size(), h});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xv.rows()) {
      throw InvalidArgument("gather_rows: row " + std::to_string(rows[i]) + " out of range " + shape_str(xv.shape()));
    }
    std::copy_n(xv.ptr() + rows[i] * h, h, out.ptr() + i * h);
  }
  std::vector<std::size_t> saved(rows.begin(), rows.end());
  return Variable::from_op(std::move(out), {x}, [x, saved = std::move(saved), h](const Tensor& g) {
    Tensor dx(x.shape());
    for (std::size_t i = 0; i < saved.size(); ++i) {
      float* dst = dx.ptr() + saved[i] * h;
      const float* src = g.ptr() + i * h;
      for (std::size_t c = 0; c < h; ++c) dst[c] += src[c];
    }
    x.accumulate_grad(dx);
  });
}

Variable reshape(const Variable& x, Shape shape) {
  if (shape_numel(shape) != x.value().size()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  return Variable::from_op(x.value().reshaped(std::move(shape)), {x},
                           [x](const Tensor& g) { x.accumulate_grad(g.reshaped(x.shape())); });
}

Variable take_column(const Variable& x, std::size_t col) {
  const Tensor& xv = x.value();
  require_2d(xv, "take_column");
  if (col >= xv.cols()) throw ShapeError("take_column: column " + std::to_string(col) + " of " + shape_str(xv.shape()));
  const std::size_t n = xv.rows();
  const std::size_t c = xv.cols();
  Tensor out({n, 1});
  for (std::size_t r = 0; r < n; ++r) out[r] = xv[r * c + col];
  return Variable::from_op(std::move(out), {x}, [x, col, n, c](const Tensor& g) {
    Tensor dx(x.shape());
    for (std::size_t r = 0; r < n; ++r) dx[r * c + col] = g[r];
    x.accumulate_grad(dx);
  });
}

Variable sum(const Variable& x) {
  double total = 0.0;
  for (float v : x.value().data()) total += v;
  return Variable::from_op(Tensor::scalar(static_cast<float>(total)), {x}, [x](const Tensor& g) {
    x.accumulate_grad(Tensor(x.shape(), g[0]));
  });
}

Variable dropout(const Variable& x, float rate, bool training, Rng& rng) {
  if (!training || rate <= 0.0f) return x;
  if (rate >= 1.0f) throw InvalidArgument("dropout rate must be < 1");
  const float keep_scale = 1.0f / (1.0f - rate);
  Tensor mask(x.shape());
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0f : keep_scale;
    out[i] *= mask[i];
  }
  return Variable::from_op(std::move(out), {x}, [x, mask = std::move(mask)](const Tensor& g) {
    Tensor dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask[i];
    x.accumulate_grad(dx);
  });
}

Variable cross_entropy(const Variable& logits, std::span<const std::int32_t> targets) {
  const Tensor& lv = logits.value();
  require_2d(lv, "cross_entropy");
  require_nonempty_axis(lv, "cross_entropy");
  const std::size_t n = lv.rows();
  const std::size_t classes = lv.cols();
  if (targets.size() != n) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " + shape_str(lv.shape()));
  }
  Tensor probs(lv.shape());
  softmax_rows(lv.ptr(), probs.ptr(), n, classes);
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const std::int32_t t = targets[r];
    if (t == kIgnoreIndex) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= classes) {
      throw InvalidArgument("cross_entropy: target " + std::to_string(t) + " outside " + std::to_string(classes) +
                            " classes");
    }
    const float* row = lv.ptr() + r * classes;
    const float mx = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(static_cast<double>(row[c]) - mx);
    total += std::log(z) + mx - row[t];
    ++counted;
  }
  const float loss = counted ? static_cast<float>(total / static_cast<double>(counted)) : 0.0f;
  std::vector<std::int32_t> saved(targets.begin(), targets.end());
  return Variable::from_op(
      Tensor::scalar(loss), {logits},
      [logits, probs = std::move(probs), saved = std::move(saved), counted, classes](const Tensor& g) {
        Tensor dl(logits.shape());
        if (counted) {
          const float coef = g[0] / static_cast<float>(counted);
          for (std::size_t r = 0; r < saved.size(); ++r) {
            if (saved[r] == kIgnoreIndex) continue;
            for (std::size_t c = 0; c < classes; ++c) dl[r * classes + c] = probs[r * classes + c] * coef;
            dl[r * classes + static_cast<std::size_t>(saved[r])] -= coef;
          }
        }
        logits.accumulate_grad(dl);
      });
}

Variable binary_cross_entropy_with_logits(const Variable& logits, const Tensor& targets) {
  require_same(logits.value(), targets, "binary_cross_entropy_with_logits");
  const Tensor& lv = logits.value();
  if (lv.size() == 0) throw ShapeError("binary_cross_entropy_with_logits on an empty axis");
  double total = 0.0;
  for (std::size_t i = 0; i < lv.size(); ++i) {
    const double x = lv[i];
    total += std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::abs(x)));
  }
  const auto n = static_cast<double>(lv.size());
  return Variable::from_op(Tensor::scalar(static_cast<float>(total / n)), {logits},
                           [logits, targets, n](const Tensor& g) {
                             Tensor dl(logits.shape());
                             const float coef = g[0] / static_cast<float>(n);
                             for (std::size_t i = 0; i < dl.size(); ++i) {
                               const float s = 1.0f / (1.0f + std::exp(-logits.value()[i]));
                               dl[i] = (s - targets[i]) * coef;
                             }
                             logits.accumulate_grad(dl);
                           });
}

Variable self_attention(const Variable& q, const Variable& k, const Variable& v, std::size_t batch,
                        std::size_t seq, std::size_t heads, std::span<const std::uint8_t> key_mask) {
  const Tensor& qv = q.value();
  require_same(qv, k.value(), "self_attention");
  require_same(qv, v.value(), "self_attention");
  require_2d(qv, "self_attention");
  const std::size_t hidden = qv.cols();
  if (qv.rows() != batch * seq) {
    throw ShapeError("self_attention: " + shape_str(qv.shape()) + " is not batch*seq = " +
                     std::to_string(batch) + "*" + std::to_string(seq) + " rows");
  }
  if (heads == 0 || hidden % heads != 0) {
    throw ShapeError("self_attention: hidden " + std::to_string(hidden) + " not divisible by " +
                     std::to_string(heads) + " heads");
  }
  if (key_mask.size() != batch * seq) throw ShapeError("self_attention: key mask length mismatch");
  const std::size_t d = hidden / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(d));
  const bool record = grad_enabled() && (q.requires_grad() || k.requires_grad() || v.requires_grad());
  const auto ld = static_cast<Eigen::Index>(hidden);
  const auto S = static_cast<Eigen::Index>(seq);
  const auto D = static_cast<Eigen::Index>(d);

  Tensor out(qv.shape());
  // Per (batch, head) attention probabilities, kept for the backward pass.
  Tensor probs = record ? Tensor({batch * heads, seq, seq}) : Tensor();
  const std::uint8_t* mask = key_mask.data();

  parallel_for(batch * heads, [&](std::size_t bh) {
    const std::size_t b = bh / heads;
    const std::size_t h = bh % heads;
    const std::size_t offset = b * seq * hidden + h * d;
    CStridedMap qh(qv.ptr() + offset, S, D, Stride(ld));
    CStridedMap kh(k.value().ptr() + offset, S, D, Stride(ld));
    CStridedMap vh(v.value().ptr() + offset, S, D, Stride(ld));
    StridedMap oh(out.ptr() + offset, S, D, Stride(ld));
    MatR p = (qh * kh.transpose()) * scale;
    const std::uint8_t* m = mask + b * seq;
    if (!std::all_of(m, m + seq, [](std::uint8_t x) { return x != 0; })) {
      Eigen::RowVectorXf bias(S);
      for (Eigen::Index j = 0; j < S; ++j) bias[j] = m[j] ? 0.0f : -std::numeric_limits<float>::infinity();
      p.rowwise() += bias;
    }
    for (Eigen::Index i = 0; i < S; ++i) {
      auto row = p.row(i).array();
      const float mx = row.maxCoeff();
      if (mx == -std::numeric_limits<float>::infinity()) {
        row.setZero();
        continue;
      }
      row = (row - mx).exp();
      row *= 1.0f / row.sum();
    }
    oh.noalias() = p * vh;
    if (record) Map(probs.ptr() + bh * seq * seq, S, S) = p;
  });

  return Variable::from_op(
      std::move(out), {q, k, v},
      [q, k, v, probs = std::move(probs), batch, seq, heads, hidden, d, scale](const Tensor& g) {
        const auto ld = static_cast<Eigen::Index>(hidden);
        const auto S = static_cast<Eigen::Index>(seq);
        const auto D = static_cast<Eigen::Index>(d);
        Tensor dq(q.shape());
        Tensor dk(k.shape());
        Tensor dv(v.shape());
        parallel_for(batch * heads, [&](std::size_t bh) {
          const std::size_t b = bh / heads;
          const std::size_t h = bh % heads;
          const std::size_t offset = b * seq * hidden + h * d;
          CStridedMap qh(q.value().ptr() + offset, S, D, Stride(ld));
          CStridedMap kh(k.value().ptr() + offset, S, D, Stride(ld));
          CStridedMap vh(v.value().ptr() + offset, S, D, Stride(ld));
          CStridedMap gh(g.ptr() + offset, S, D, Stride(ld));
          CMap p(probs.ptr() + bh * seq * seq, S, S);
          MatR dp = gh * vh.transpose();
          // Softmax backward: ds = p * (dp - rowsum(dp * p)).
          for (Eigen::Index i = 0; i < S; ++i) {
            double dot = 0.0;
            for (Eigen::Index j = 0; j < S; ++j) dot += static_cast<double>(dp(i, j)) * p(i, j);
            for (Eigen::Index j = 0; j < S; ++j) dp(i, j) = p(i, j) * (dp(i, j) - static_cast<float>(dot));
          }
          dp *= scale;
          StridedMap(dq.ptr() + offset, S, D, Stride(ld)).noalias() = dp * kh;
          StridedMap(dk.ptr() + offset, S, D, Stride(ld)).noalias() = dp.transpose() * qh;
          StridedMap(dv.ptr() + offset, S, D, Stride(ld)).noalias() = p.transpose() * gh;
        });
        if (q.requires_grad()) q.accumulate_grad(dq);
        if (k.requires_grad()) k.accumulate_grad(dk);
        if (v.requires_grad()) v.accumulate_grad(dv);
      });
}

}  // namespace forge::ops
