#pragma once

#include "asformer/tensor.hpp"

#include <random>
#include <span>

namespace asformer::ops {

/// y = x * weight + bias, bias broadcast over rows.
Tensor affine(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor matmul(Tape& tape, const Tensor& x, const Tensor& weight);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);
// Subgradient at 0 is 0.
Tensor relu(Tape& tape, const Tensor& x);
Tensor concat_cols(Tape& tape, const Tensor& left, const Tensor& right);
Tensor sum(Tape& tape, const Tensor& x);

/// Centered, zero-padded temporal convolution over the rows of x [T x d_in].
/// The kernel is stored tap-major as [(k * d_in) x d_out]; tap j covers rows
/// j*d_in .. (j+1)*d_in and reads frame t + (j - k/2) * dilation. The kernel
/// size k is inferred and must be odd.
Tensor dilated_conv1d(Tape& tape, const Tensor& x, const Tensor& kernel, int dilation);

/// Row-wise softmax over unmasked entries; masked entries are exactly 0.
Tensor masked_softmax(Tape& tape, const Tensor& scores, const BoolMatrix& mask);
Tensor softmax_rows(Tape& tape, const Tensor& x);

/// Per-column normalization over the temporal axis, no affine parameters.
Tensor instance_norm(Tape& tape, const Tensor& x, double eps = 1e-5);

/// Zeros whole columns with probability `rate` and rescales survivors by
/// 1/(1-rate) while training; identity otherwise.
Tensor channel_dropout(Tape& tape, const Tensor& x, double rate, bool training,
                       std::mt19937_64& rng);

// Banded attention layout: column c of row t holds the pair (t, t - half + c).

BoolMatrix band_mask(Index frames, Index half);

/// scores(t, c) = scale * <query_t, key_{t-half+c}> for in-range frames, 0 elsewhere.
Tensor band_scores(Tape& tape, const Tensor& query, const Tensor& key, Index half,
                   double scale);

/// out_t = sum_c weights(t, c) * value_{t-half+c}.
Tensor band_combine(Tape& tape, const Tensor& weights, const Tensor& value, Index half);

/// mean_t -log(max(probs(t, label_t), floor)).
Tensor nll_clamped(Tape& tape, const Tensor& probs, std::span<const int> labels,
                   double floor = 1e-12);

/// sum_{t>=1} sum_c (probs(t-1, c) - probs(t, c))^2 / (T * C).
Tensor adjacent_sq_diff_mean(Tape& tape, const Tensor& probs);

}  // namespace asformer::ops
