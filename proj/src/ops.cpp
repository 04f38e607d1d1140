#include "asformer/ops.hpp"

#include "asformer/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace asformer::ops {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
  }
}

// Valid column range [lo, hi) of row t in a band of the given half-width.
struct BandSpan {
  Index col_lo;
  Index frame_lo;
  Index count;
};

BandSpan band_span(Index t, Index frames, Index half) {
  const Index first = std::max<Index>(0, t - half);
  const Index last = std::min<Index>(frames - 1, t + half);
  return BandSpan{first - (t - half), first, last - first + 1};
}

}  // namespace

Tensor affine(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.cols() != weight.rows()) {
    throw DimensionError("affine_projection: input " + x.shape() + " incompatible with weight " +
                         weight.shape());
  }
  if (bias.rows() != 1 || bias.cols() != weight.cols()) {
    throw DimensionError("affine_projection: bias " + bias.shape() + " incompatible with weight " +
                         weight.shape());
  }
  Matrix out = x.value() * weight.value();
  out.rowwise() += bias.value().row(0);
  const bool rec = tape.wants({&x, &weight, &bias});
  Tensor y = Tensor::make(std::move(out), rec);
  if (rec) {
    tape.record({x, weight, bias}, y, [x, weight, bias, y]() mutable {
      const Matrix& g = y.grad();
      if (x.requires_grad()) x.grad_buffer().noalias() += g * weight.value().transpose();
      if (weight.requires_grad()) weight.grad_buffer().noalias() += x.value().transpose() * g;
      if (bias.requires_grad()) bias.grad_buffer() += g.colwise().sum();
    });
  }
  return y;
}

Tensor matmul(Tape& tape, const Tensor& x, const Tensor& weight) {
  if (x.cols() != weight.rows()) {
    throw DimensionError("matmul: " + x.shape() + " incompatible with " + weight.shape());
  }
  Matrix out = x.value() * weight.value();
  const bool rec = tape.wants({&x, &weight});
  Tensor y = Tensor::make(std::move(out), rec);
  if (rec) {
    tape.record({x, weight}, y, [x, weight, y]() mutable {
      const Matrix& g = y.grad();
      if (x.requires_grad()) x.grad_buffer().noalias() += g * weight.value().transpose();
      if (weight.requires_grad()) weight.grad_buffer().noalias() += x.value().transpose() * g;
    });
  }
  return y;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const bool rec = tape.wants({&a, &b});
  Tensor y = Tensor::make(a.value() + b.value(), rec);
  if (rec) {
    tape.record({a, b}, y, [a, b, y]() mutable {
      const Matrix& g = y.grad();
      if (a.requires_grad()) a.grad_buffer() += g;
      if (b.requires_grad()) b.grad_buffer() += g;
    });
  }
  return y;
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  const bool rec = tape.wants({&a});
  Tensor y = Tensor::make(factor * a.value(), rec);
  if (rec) {
    tape.record({a}, y, [a, y, factor]() mutable { a.grad_buffer() += factor * y.grad(); });
  }
  return y;
}

Tensor relu(Tape& tape, const Tensor& x) {
  const bool rec = tape.wants({&x});
  Tensor y = Tensor::make(x.value().cwiseMax(0.0), rec);
  if (rec) {
    tape.record({x}, y, [x, y]() mutable {
      x.grad_buffer().array() += (x.value().array() > 0.0).select(y.grad().array(), 0.0);
    });
  }
  return y;
}

Tensor concat_cols(Tape& tape, const Tensor& left, const Tensor& right) {
  if (left.rows() != right.rows()) {
    throw DimensionError("concat: row mismatch " + left.shape() + " vs " + right.shape());
  }
  Matrix out(left.rows(), left.cols() + right.cols());
  out.leftCols(left.cols()) = left.value();
  out.rightCols(right.cols()) = right.value();
  const bool rec = tape.wants({&left, &right});
  Tensor y = Tensor::make(std::move(out), rec);
  if (rec) {
    tape.record({left, right}, y, [left, right, y]() mutable {
      const Matrix& g = y.grad();
      if (left.requires_grad()) left.grad_buffer() += g.leftCols(left.cols());
      if (right.requires_grad()) right.grad_buffer() += g.rightCols(right.cols());
    });
  }
  return y;
}

Tensor sum(Tape& tape, const Tensor& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  const bool rec = tape.wants({&x});
  Tensor y = Tensor::make(std::move(out), rec);
  if (rec) {
    tape.record({x}, y, [x, y]() mutable { x.grad_buffer().array() += y.grad()(0, 0); });
  }
  return y;
}

Tensor dilated_conv1d(Tape& tape, const Tensor& x, const Tensor& kernel, int dilation) {
  if (dilation < 1) {
    throw ConfigError("dilated_conv1d: dilation must be >= 1, got " + std::to_string(dilation));
  }
  const Index d_in = x.cols();
  if (d_in == 0 || kernel.rows() % d_in != 0) {
    throw DimensionError("dilated_conv1d: kernel " + kernel.shape() +
                         " is not tap-major for input " + x.shape());
  }
  const Index taps = kernel.rows() / d_in;
  if (taps % 2 == 0) {
    throw ConfigError("dilated_conv1d: kernel size must be odd, got " + std::to_string(taps));
  }
  const Index frames = x.rows();
  const Index half = taps / 2;

  // Rows [lo, lo+n) of the output read rows [lo+offset, lo+offset+n) of x.
  auto tap_range = [frames](Index offset, Index& lo, Index& n) {
    lo = std::max<Index>(0, -offset);
    const Index hi = std::min<Index>(frames, frames - offset);
    n = hi - lo;
  };

  Matrix out = Matrix::Zero(frames, kernel.cols());
  for (Index j = 0; j < taps; ++j) {
    const Index offset = (j - half) * dilation;
    Index lo, n;
    tap_range(offset, lo, n);
    if (n <= 0) continue;
    out.middleRows(lo, n).noalias() +=
        x.value().middleRows(lo + offset, n) * kernel.value().middleRows(j * d_in, d_in);
  }

  const bool rec = tape.wants({&x, &kernel});
  Tensor y = Tensor::make(std::move(out), rec);
  if (rec) {
    tape.record({x, kernel}, y, [x, kernel, y, taps, half, d_in, dilation, tap_range]() mutable {
      const Matrix& g = y.grad();
      for (Index j = 0; j < taps; ++j) {
        const Index offset = (j - half) * dilation;
        Index lo, n;
        tap_range(offset, lo, n);
        if (n <= 0) continue;
        if (x.requires_grad()) {
          x.grad_buffer().middleRows(lo + offset, n).noalias() +=
              g.middleRows(lo, n) * kernel.value().middleRows(j * d_in, d_in).transpose();
        }
        if (kernel.requires_grad()) {
          kernel.grad_buffer().middleRows(j * d_in, d_in).noalias() +=
              x.value().middleRows(lo + offset, n).transpose() * g.middleRows(lo, n);
        }
      }
    });
  }
  return y;
}

Tensor masked_softmax(Tape& tape, const Tensor& scores, const BoolMatrix& mask) {
  if (mask.rows() != scores.rows() || mask.cols() != scores.cols()) {
    throw DimensionError("masked_softmax: mask " + shape_string(mask.rows(), mask.cols()) +
                         " does not match scores " + scores.shape());
  }
  const Matrix& s = scores.value();
  Matrix out = Matrix::Zero(s.rows(), s.cols());
  for (Index t = 0; t < s.rows(); ++t) {
    double peak = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (Index c = 0; c < s.cols(); ++c) {
      if (mask(t, c)) {
        peak = std::max(peak, s(t, c));
        any = true;
      }
    }
    if (!any) {
      throw InternalError("masked_softmax: row " + std::to_string(t) + " is fully masked");
    }
    double total = 0.0;
    for (Index c = 0; c < s.cols(); ++c) {
      if (mask(t, c)) {
        out(t, c) = std::exp(s(t, c) - peak);
        total += out(t, c);
      }
    }
    out.row(t) /= total;
  }

  const bool rec = tape.wants({&scores});
  Tensor y = Tensor::make(std::move(out), rec);
  if (rec) {
    tape.record({scores}, y, [scores, y]() mutable {
      // Masked entries have p = 0, so they receive no gradient.
      const Matrix& p = y.value();
      const Matrix& g = y.grad();
      Matrix& gs = scores.grad_buffer();
      for (Index t = 0; t < p.rows(); ++t) {
        const double inner = p.row(t).dot(g.row(t));
        gs.row(t).array() += p.row(t).array() * (g.row(t).array() - inner);
      }
    });
  }
  return y;
}

Tensor softmax_rows(Tape& tape, const Tensor& x) {
  return masked_softmax(tape, x, BoolMatrix::Constant(x.rows(), x.cols(), true));
}

Tensor instance_norm(Tape& tape, const Tensor& x, double eps) {
  const Index frames = x.rows();
  if (frames < 1) throw DataError("instance_norm: empty sequence");
  const Eigen::RowVectorXd mean = x.value().colwise().mean();
  Matrix centered = x.value().rowwise() - mean;
  const Eigen::RowVectorXd var = centered.array().square().colwise().mean();
  const Eigen::RowVectorXd inv_std = (var.array() + eps).rsqrt();
  Matrix out = centered.array().rowwise() * inv_std.array();

  const bool rec = tape.wants({&x});
  Tensor y = Tensor::make(std::move(out), rec);
  if (rec) {
    tape.record({x}, y, [x, y, inv_std, frames]() mutable {
      const Matrix& g = y.grad();
      const Matrix& yn = y.value();
      const Eigen::RowVectorXd g_sum = g.colwise().sum();
      const Eigen::RowVectorXd gy_sum = g.cwiseProduct(yn).colwise().sum();
      const double n = static_cast<double>(frames);
      Matrix dx = (n * g).rowwise() - g_sum;
      dx -= Matrix(yn.array().rowwise() * gy_sum.array());
      dx = dx.array().rowwise() * (inv_std.array() / n);
      x.grad_buffer() += dx;
    });
  }
  return y;
}

Tensor channel_dropout(Tape& tape, const Tensor& x, double rate, bool training,
                       std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("channel_dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;

  std::bernoulli_distribution drop(rate);
  Eigen::RowVectorXd keep(x.cols());
  const double survivor = 1.0 / (1.0 - rate);
  for (Index c = 0; c < x.cols(); ++c) keep(c) = drop(rng) ? 0.0 : survivor;

  Matrix out = x.value().array().rowwise() * keep.array();
  const bool rec = tape.wants({&x});
  Tensor y = Tensor::make(std::move(out), rec);
  if (rec) {
    tape.record({x}, y, [x, y, keep]() mutable {
      x.grad_buffer().array() += y.grad().array().rowwise() * keep.array();
    });
  }
  return y;
}

BoolMatrix band_mask(Index frames, Index half) {
  BoolMatrix mask = BoolMatrix::Constant(frames, 2 * half + 1, false);
  for (Index t = 0; t < frames; ++t) {
    const BandSpan span = band_span(t, frames, half);
    mask.row(t).segment(span.col_lo, span.count).setConstant(true);
  }
  return mask;
}

Tensor band_scores(Tape& tape, const Tensor& query, const Tensor& key, Index half,
                   double scale) {
  require_same_shape(query, key, "band_scores");
  if (half < 0) throw ConfigError("band_scores: negative half-width");
  const Index frames = query.rows();
  const Matrix& q = query.value();
  const Matrix& k = key.value();
  Matrix out = Matrix::Zero(frames, 2 * half + 1);
  for (Index t = 0; t < frames; ++t) {
    const BandSpan s = band_span(t, frames, half);
    out.row(t).segment(s.col_lo, s.count).noalias() =
        scale * (k.middleRows(s.frame_lo, s.count) * q.row(t).transpose()).transpose();
  }

  const bool rec = tape.wants({&query, &key});
  Tensor y = Tensor::make(std::move(out), rec);
  if (rec) {
    tape.record({query, key}, y, [query, key, y, half, scale, frames]() mutable {
      const Matrix& g = y.grad();
      const Matrix& q = query.value();
      const Matrix& k = key.value();
      for (Index t = 0; t < frames; ++t) {
        const BandSpan s = band_span(t, frames, half);
        const auto gs = g.row(t).segment(s.col_lo, s.count);
        if (query.requires_grad()) {
          query.grad_buffer().row(t).noalias() += scale * (gs * k.middleRows(s.frame_lo, s.count));
        }
        if (key.requires_grad()) {
          key.grad_buffer().middleRows(s.frame_lo, s.count).noalias() +=
              scale * (gs.transpose() * q.row(t));
        }
      }
    });
  }
  return y;
}

Tensor band_combine(Tape& tape, const Tensor& weights, const Tensor& value, Index half) {
  const Index frames = value.rows();
  if (weights.rows() != frames || weights.cols() != 2 * half + 1) {
    throw DimensionError("band_combine: weights " + weights.shape() + " do not match value " +
                         value.shape() + " with half-width " + std::to_string(half));
  }
  const Matrix& w = weights.value();
  const Matrix& v = value.value();
  Matrix out(frames, v.cols());
  for (Index t = 0; t < frames; ++t) {
    const BandSpan s = band_span(t, frames, half);
    out.row(t).noalias() = w.row(t).segment(s.col_lo, s.count) * v.middleRows(s.frame_lo, s.count);
  }

  const bool rec = tape.wants({&weights, &value});
  Tensor y = Tensor::make(std::move(out), rec);
  if (rec) {
    tape.record({weights, value}, y, [weights, value, y, half, frames]() mutable {
      const Matrix& g = y.grad();
      const Matrix& w = weights.value();
      const Matrix& v = value.value();
      for (Index t = 0; t < frames; ++t) {
        const BandSpan s = band_span(t, frames, half);
        if (weights.requires_grad()) {
          weights.grad_buffer().row(t).segment(s.col_lo, s.count).noalias() +=
              (v.middleRows(s.frame_lo, s.count) * g.row(t).transpose()).transpose();
        }
        if (value.requires_grad()) {
          value.grad_buffer().middleRows(s.frame_lo, s.count).noalias() +=
              w.row(t).segment(s.col_lo, s.count).transpose() * g.row(t);
        }
      }
    });
  }
  return y;
}

Tensor nll_clamped(Tape& tape, const Tensor& probs, std::span<const int> labels, double floor) {
  const Index frames = probs.rows();
  if (static_cast<Index>(labels.size()) != frames) {
    throw DataError("classification loss: " + std::to_string(labels.size()) +
                    " labels for " + std::to_string(frames) + " frames");
  }
  const Matrix& p = probs.value();
  double total = 0.0;
  for (Index t = 0; t < frames; ++t) {
    const int c = labels[static_cast<std::size_t>(t)];
    if (c < 0 || c >= p.cols()) {
      throw DataError("classification loss: label " + std::to_string(c) + " at frame " +
                      std::to_string(t) + " outside [0, " + std::to_string(p.cols()) + ")");
    }
    total -= std::log(std::max(p(t, c), floor));
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(frames);

  const bool rec = tape.wants({&probs});
  Tensor y = Tensor::make(std::move(out), rec);
  if (rec) {
    std::vector<int> kept(labels.begin(), labels.end());
    tape.record({probs}, y, [probs, y, kept = std::move(kept), floor, frames]() mutable {
      const double g = y.grad()(0, 0) / static_cast<double>(frames);
      const Matrix& p = probs.value();
      Matrix& gp = probs.grad_buffer();
      for (Index t = 0; t < frames; ++t) {
        const int c = kept[static_cast<std::size_t>(t)];
        if (p(t, c) >= floor) gp(t, c) -= g / p(t, c);
      }
    });
  }
  return y;
}

Tensor adjacent_sq_diff_mean(Tape& tape, const Tensor& probs) {
  const Index frames = probs.rows();
  const double norm = static_cast<double>(frames * probs.cols());
  Matrix out = Matrix::Zero(1, 1);
  if (frames > 1) {
    const Matrix& p = probs.value();
    out(0, 0) = (p.bottomRows(frames - 1) - p.topRows(frames - 1)).squaredNorm() / norm;
  }
  const bool rec = tape.wants({&probs});
  Tensor y = Tensor::make(std::move(out), rec);
  if (rec && frames > 1) {
    tape.record({probs}, y, [probs, y, frames, norm]() mutable {
      const Matrix& p = probs.value();
      const Matrix diff = p.bottomRows(frames - 1) - p.topRows(frames - 1);
      const double g = 2.0 * y.grad()(0, 0) / norm;
      Matrix& gp = probs.grad_buffer();
      gp.bottomRows(frames - 1) += g * diff;
      gp.topRows(frames - 1) -= g * diff;
    });
  }
  return y;
}

}  // namespace asformer::ops
