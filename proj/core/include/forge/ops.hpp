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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "forge/autograd.hpp"

namespace forge {
class Rng;
}

/// Differentiable primitives. 2-D operands are [rows, cols] row-major.
namespace forge::ops {

/// a[m,k] x b[k,n].
Variable matmul(const Variable& a, const Variable& b);
/// x[n,in] x w[out,in]^T + bias[out]. bias may be undefined.
Variable linear(const Variable& x, const Variable& w, const Variable& bias);
Variable add(const Variable& a, const Variable& b);
Variable mul(const Variable& a, const Variable& b);
Variable scale(const Variable& x, float factor);
Variable gelu(const Variable& x);
Variable tanh(const Variable& x);
/// Normalises along the trailing axis, then applies gamma and beta.
Variable layer_norm(const Variable& x, const Variable& gamma, const Variable& beta, float eps);
/// Softmax along the trailing axis.
Variable softmax(const Variable& x);
/// Rows of table[V,H] selected by ids. Throws when an id is >= V.
Variable embedding(const Variable& table, std::span<const std::int32_t> ids);
/// Gathers rows of x[n,h].
Variable gather_rows(const Variable& x, std::span<const std::size_t> rows);
/// Same data under a new shape of equal element count.
Variable reshape(const Variable& x, Shape shape);
/// Column `col` of x[n,c] as an [n,1] tensor.
Variable take_column(const Variable& x, std::size_t col);
/// Sum of all elements as a [1] tensor.
Variable sum(const Variable& x);
/// Inverted dropout. Identity when !training or rate == 0.
Variable dropout(const Variable& x, float rate, bool training, Rng& rng);

inline constexpr std::int32_t kIgnoreIndex = -100;

/// Mean softmax cross-entropy over rows whose target is not kIgnoreIndex.
/// Returns 0 (with zero gradient) when every row is ignored.
Variable cross_entropy(const Variable& logits, std::span<const std::int32_t> targets);
/// Mean sigmoid binary cross-entropy; targets has the logits' shape with 0/1.
Variable binary_cross_entropy_with_logits(const Variable& logits, const Tensor& targets);

/// Multi-head scaled dot-product self-attention core.
/// q, k, v: [batch*seq, hidden]; key_mask: batch*seq flags, 0 = never attended.
/// Returns the concatenated per-head context, [batch*seq, hidden].
Variable self_attention(const Variable& q, const Variable& k, const Variable& v,
                        std::size_t batch, std::size_t seq, std::size_t heads,
                        std::span<const std::uint8_t> key_mask);

}  // namespace forge::ops
