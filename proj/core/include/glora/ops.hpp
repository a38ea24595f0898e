#pragma once

#include <vector>

#include "glora/tensor.hpp"

namespace glora {

// Differentiable ops. Each records its adjoint on the active tape when the
// output requires grad. Inputs are captured by handle, so the recorded
// closures keep values alive until the tape is destroyed.

// a: [..., k] x b: [k, n] -> [..., n]; leading dims of a are flattened to rows.
Tensor matmul(const Tensor& a, const Tensor& b);

// Batched matmul: a [..., p, q] x b [..., q, r] -> [..., p, r], identical
// leading dims. transpose_b treats b as [..., r, q].
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false);

// Elementwise; b may be a trailing-suffix shape of a (e.g. bias [n] against
// [b, t, n], positional table [t, n] against [b, t, n]) — the only broadcast.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

Tensor softmax_lastdim(const Tensor& a);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// tanh approximation: 0.5x(1 + tanh(sqrt(2/pi)(x + 0.044715 x^3))).
Tensor gelu(const Tensor& x);

// Mean negative log-softmax of the true class; backward (softmax - onehot)/b.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

Tensor sum(const Tensor& a);

// Same data, new shape (numel preserved); grads pass through.
Tensor reshape(const Tensor& a, Shape s);

// [b, t, h, e] -> [b, h, t, e] (and its own inverse on the permuted layout).
Tensor permute_0213(const Tensor& a);

// Prepends a learned token: tok [d], x [b, t, d] -> [b, t+1, d].
Tensor prepend_token(const Tensor& tok, const Tensor& x);

// Selects token t: x [b, t, d] -> [b, d].
Tensor take_token(const Tensor& x, int index);

// Divides each column of w [m, n] by its L2 norm; eps is added to the
// denominator only when the norm falls below eps, so healthy columns
// normalize exactly.
Tensor col_normalize(const Tensor& w, double eps = 1e-8);

}  // namespace glora
