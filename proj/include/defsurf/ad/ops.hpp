#pragma once

#include <vector>

#include "defsurf/ad/tensor.hpp"

namespace defsurf::ad {

// Elementwise binary ops accept equal shapes, a 1x1 scalar on either side,
// or a 1xC row broadcast against NxC.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& a);
// k * a + c, elementwise with constants.
Tensor affine(const Tensor& a, Real k, Real c);

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
// Interleaves columns of two same-shaped inputs: [a0, b0, a1, b1, ...].
Tensor interleave_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, Index start, Index count);
Tensor slice_rows(const Tensor& a, Index start, Index count);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);  // derivative at exactly 0 is 0
Tensor softplus(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);

// Row-wise geometry ops on N x 3 matrices.
Tensor cross(const Tensor& a, const Tensor& b);
// Row-wise inner product, N x C -> N x 1.
Tensor dot(const Tensor& a, const Tensor& b);
// Rows scaled to unit length; rows with norm <= guard map to zero with zero
// gradient (degenerate-face contract).
Tensor normalize_rows(const Tensor& a, Real guard = Real(1e-30));

Tensor gather_rows(const Tensor& a, std::vector<int> indices);
// out[indices[i]] += a.row(i); `out_rows` sets the output height.
Tensor scatter_add_rows(const Tensor& a, std::vector<int> indices,
                        Index out_rows);

// Value copy with no parents: upstream gradient is exactly zero.
Tensor detach(const Tensor& a);

// Throws NumericError if any entry is non-finite; returns input unchanged.
const Tensor& check_finite(const Tensor& a, const char* label);

}  // namespace defsurf::ad
