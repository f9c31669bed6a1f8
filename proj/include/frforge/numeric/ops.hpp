#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "frforge/numeric/losses.hpp"
#include "frforge/numeric/tape.hpp"

// Differentiable operations over Tape<T>. Each forward computes the value and
// registers a closure that accumulates input gradients from the output gradient.
namespace frforge::numeric::ops {

namespace detail {

inline void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw ContractError(std::string(op) + ": " + what);
}

template <typename T>
std::string shape_of(const Mat<T>& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace detail

template <typename T>
Var matmul(Tape<T>& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  detail::require(av.cols() == bv.rows(), "matmul",
                  "shape mismatch " + detail::shape_of(av) + " * " + detail::shape_of(bv));
  const Var out{t.size()};
  return t.record(av * bv, "matmul", [a, b, out](Tape<T>& tp) {
    const auto& g = tp.grad(out);
    tp.grad(a).noalias() += g * tp.value(b).transpose();
    tp.grad(b).noalias() += tp.value(a).transpose() * g;
  });
}

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  detail::require(av.rows() == bv.rows() && av.cols() == bv.cols(), "add",
                  "shape mismatch " + detail::shape_of(av) + " + " + detail::shape_of(bv));
  const Var out{t.size()};
  return t.record(av + bv, "add", [a, b, out](Tape<T>& tp) {
    const auto g = tp.grad(out);
    tp.grad(a) += g;
    tp.grad(b) += g;
  });
}

// Elementwise product.
template <typename T>
Var mul(Tape<T>& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  detail::require(av.rows() == bv.rows() && av.cols() == bv.cols(), "mul", "shape mismatch");
  const Var out{t.size()};
  return t.record(av.cwiseProduct(bv), "mul", [a, b, out](Tape<T>& tp) {
    const auto g = tp.grad(out);
    tp.grad(a) += g.cwiseProduct(tp.value(b));
    tp.grad(b) += g.cwiseProduct(tp.value(a));
  });
}

// a (n x c) + row (1 x c) broadcast over rows.
template <typename T>
Var add_row(Tape<T>& t, Var a, Var row) {
  const auto& av = t.value(a);
  const auto& rv = t.value(row);
  detail::require(rv.rows() == 1 && rv.cols() == av.cols(), "add_row",
                  "bias " + detail::shape_of(rv) + " does not match " + detail::shape_of(av));
  Mat<T> v = av;
  v.rowwise() += rv.row(0);
  const Var out{t.size()};
  return t.record(std::move(v), "add_row", [a, row, out](Tape<T>& tp) {
    const auto g = tp.grad(out);
    tp.grad(a) += g;
    tp.grad(row) += g.colwise().sum();
  });
}

template <typename T>
Var scale(Tape<T>& t, Var a, T s) {
  const Var out{t.size()};
  return t.record(t.value(a) * s, "scale", [a, s, out](Tape<T>& tp) { tp.grad(a) += tp.grad(out) * s; });
}

// x W + b.
template <typename T>
Var linear(Tape<T>& t, Var x, Var w, Var b) {
  return add_row(t, matmul(t, x, w), b);
}

// Gaussian error linear unit, exact erf form.
template <typename T>
Var gelu(Tape<T>& t, Var a) {
  const auto& av = t.value(a);
  Mat<T> v = av.unaryExpr([](T x) { return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>)); });
  const Var out{t.size()};
  return t.record(std::move(v), "gelu", [a, out](Tape<T>& tp) {
    const auto& x = tp.value(a);
    const T inv_sqrt_2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
    Mat<T> d = x.unaryExpr([inv_sqrt_2pi](T z) {
      const T cdf = T(0.5) * (T(1) + std::erf(z / std::numbers::sqrt2_v<T>));
      return cdf + z * inv_sqrt_2pi * std::exp(T(-0.5) * z * z);
    });
    tp.grad(a) += tp.grad(out).cwiseProduct(d);
  });
}

template <typename T>
Var tanh(Tape<T>& t, Var a) {
  Mat<T> v = t.value(a).array().tanh().matrix();
  const Var out{t.size()};
  return t.record(std::move(v), "tanh", [a, out](Tape<T>& tp) {
    const auto& y = tp.value(out);
    tp.grad(a) += tp.grad(out).cwiseProduct((Mat<T>::Ones(y.rows(), y.cols()) - y.cwiseProduct(y)));
  });
}

// Row-wise layer normalization with learned gain and bias (both 1 x c).
template <typename T>
Var layer_norm(Tape<T>& t, Var x, Var gain, Var bias, T eps = T(1e-5)) {
  const auto& xv = t.value(x);
  const auto& gv = t.value(gain);
  const auto& bv = t.value(bias);
  detail::require(gv.cols() == xv.cols() && bv.cols() == xv.cols() && gv.rows() == 1 && bv.rows() == 1,
                  "layer_norm", "gain/bias width mismatch");
  const auto n = xv.rows();
  const auto c = xv.cols();
  auto xhat = std::make_shared<Mat<T>>(n, c);
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(n));
  Mat<T> y(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mean = xv.row(i).mean();
    const T var = (xv.row(i).array() - mean).square().mean();
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(i)] = is;
    xhat->row(i) = (xv.row(i).array() - mean) * is;
    y.row(i) = xhat->row(i).cwiseProduct(gv.row(0)) + bv.row(0);
  }
  const Var out{t.size()};
  return t.record(std::move(y), "layer_norm", [x, gain, bias, out, xhat, inv_std](Tape<T>& tp) {
    const auto g = tp.grad(out);
    const auto& gv2 = tp.value(gain);
    tp.grad(gain) += g.cwiseProduct(*xhat).colwise().sum();
    tp.grad(bias) += g.colwise().sum();
    auto& gx = tp.grad(x);
    const T c2 = static_cast<T>(g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const auto dxhat = g.row(i).cwiseProduct(gv2.row(0));
      const T s1 = dxhat.sum();
      const T s2 = dxhat.cwiseProduct(xhat->row(i)).sum();
      gx.row(i).array() += (*inv_std)[static_cast<std::size_t>(i)] / c2 *
                           (c2 * dxhat.array() - s1 - xhat->row(i).array() * s2);
    }
  });
}

// Rows of `table` selected by `indices`; gradients scatter-add back.
template <typename T>
Var gather_rows(Tape<T>& t, Var table, std::span<const int> indices) {
  const auto& tv = t.value(table);
  Mat<T> v(static_cast<Eigen::Index>(indices.size()), tv.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    detail::require(indices[i] >= 0 && indices[i] < tv.rows(), "gather_rows",
                    "index " + std::to_string(indices[i]) + " out of range " + std::to_string(tv.rows()));
    v.row(static_cast<Eigen::Index>(i)) = tv.row(indices[i]);
  }
  const Var out{t.size()};
  return t.record(std::move(v), "gather_rows",
                  [table, out, idx = std::vector<int>(indices.begin(), indices.end())](Tape<T>& tp) {
                    const auto& g = tp.grad(out);
                    auto& gt = tp.grad(table);
                    for (std::size_t i = 0; i < idx.size(); ++i) gt.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
                  });
}

template <typename T>
Var concat_cols(Tape<T>& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  detail::require(av.rows() == bv.rows(), "concat_cols", "row count mismatch");
  Mat<T> v(av.rows(), av.cols() + bv.cols());
  v << av, bv;
  const Var out{t.size()};
  const auto ac = av.cols();
  const auto bc = bv.cols();
  return t.record(std::move(v), "concat_cols", [a, b, out, ac, bc](Tape<T>& tp) {
    const auto& g = tp.grad(out);
    tp.grad(a) += g.leftCols(ac);
    tp.grad(b) += g.rightCols(bc);
  });
}

// Row-major reinterpretation with the same element count.
template <typename T>
Var reshape(Tape<T>& t, Var a, Eigen::Index rows, Eigen::Index cols) {
  const auto& av = t.value(a);
  detail::require(av.size() == rows * cols, "reshape", "element count mismatch");
  Mat<T> v = Eigen::Map<const Mat<T>>(av.data(), rows, cols);
  const Var out{t.size()};
  const auto ar = av.rows();
  const auto ac = av.cols();
  return t.record(std::move(v), "reshape", [a, out, ar, ac](Tape<T>& tp) {
    const auto& g = tp.grad(out);
    tp.grad(a) += Eigen::Map<const Mat<T>>(g.data(), ar, ac);
  });
}

// Inverted dropout; identity outside training mode.
template <typename T>
Var dropout(Tape<T>& t, Var a, double rate) {
  if (!t.training() || rate <= 0.0) return a;
  const auto& av = t.value(a);
  auto mask = std::make_shared<Mat<T>>(av.rows(), av.cols());
  const T keep_scale = T(1) / static_cast<T>(1.0 - rate);
  for (Eigen::Index i = 0; i < mask->size(); ++i) {
    mask->data()[i] = t.rng().uniform() < rate ? T(0) : keep_scale;
  }
  const Var out{t.size()};
  return t.record(av.cwiseProduct(*mask), "dropout",
                  [a, out, mask](Tape<T>& tp) { tp.grad(a) += tp.grad(out).cwiseProduct(*mask); });
}

// Multi-head scaled dot-product self-attention within each segment.
// q, k, v are (tokens x H); H must be divisible by `heads`. If `probs` is
// non-null it receives one (length x length) row-stochastic matrix per
// (segment, head), segment-major.
template <typename T>
Var self_attention(Tape<T>& t, Var q, Var k, Var v, std::span<const Segment> segments, int heads,
                   std::vector<Mat<T>>* probs = nullptr) {
  const auto& qv = t.value(q);
  const auto& kv = t.value(k);
  const auto& vv = t.value(v);
  const auto hidden = qv.cols();
  detail::require(heads > 0 && hidden % heads == 0, "self_attention", "hidden size not divisible by heads");
  detail::require(kv.rows() == qv.rows() && vv.rows() == qv.rows() && kv.cols() == hidden && vv.cols() == hidden,
                  "self_attention", "q/k/v shape mismatch");
  const Eigen::Index dh = hidden / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  auto saved = std::make_shared<std::vector<Mat<T>>>();
  saved->reserve(segments.size() * static_cast<std::size_t>(heads));
  Mat<T> out_v = Mat<T>::Zero(qv.rows(), hidden);
  for (const auto& s : segments) {
    const auto off = static_cast<Eigen::Index>(s.offset);
    const auto len = static_cast<Eigen::Index>(s.length);
    detail::require(off + len <= qv.rows(), "self_attention", "segment exceeds token rows");
    for (int h = 0; h < heads; ++h) {
      const auto col = h * dh;
      Mat<T> p = (qv.block(off, col, len, dh) * kv.block(off, col, len, dh).transpose()) * scale;
      for (Eigen::Index r = 0; r < len; ++r) {
        const T m = p.row(r).maxCoeff();
        p.row(r) = (p.row(r).array() - m).exp();
        p.row(r) /= p.row(r).sum();
      }
      out_v.block(off, col, len, dh).noalias() = p * vv.block(off, col, len, dh);
      if (probs != nullptr) probs->push_back(p);
      saved->push_back(std::move(p));
    }
  }
  const Var out{t.size()};
  return t.record(std::move(out_v), "self_attention",
                  [q, k, v, out, saved, heads, dh, scale,
                   segs = std::vector<Segment>(segments.begin(), segments.end())](Tape<T>& tp) {
                    const auto& g = tp.grad(out);
                    const auto& qv2 = tp.value(q);
                    const auto& kv2 = tp.value(k);
                    const auto& vv2 = tp.value(v);
                    auto& gq = tp.grad(q);
                    auto& gk = tp.grad(k);
                    auto& gv = tp.grad(v);
                    std::size_t idx = 0;
                    for (const auto& s : segs) {
                      const auto off = static_cast<Eigen::Index>(s.offset);
                      const auto len = static_cast<Eigen::Index>(s.length);
                      for (int h = 0; h < heads; ++h, ++idx) {
                        const auto col = h * dh;
                        const auto& p = (*saved)[idx];
                        const auto go = g.block(off, col, len, dh);
                        gv.block(off, col, len, dh).noalias() += p.transpose() * go;
                        Mat<T> dp = go * vv2.block(off, col, len, dh).transpose();
                        for (Eigen::Index r = 0; r < len; ++r) {
                          const T dot = dp.row(r).dot(p.row(r));
                          dp.row(r) = p.row(r).cwiseProduct((dp.row(r).array() - dot).matrix());
                        }
                        dp *= scale;
                        gq.block(off, col, len, dh).noalias() += dp * kv2.block(off, col, len, dh);
                        gk.block(off, col, len, dh).noalias() += dp.transpose() * qv2.block(off, col, len, dh);
                      }
                    }
                  });
}

// Unidirectional LSTM over each segment; returns the final hidden state per
// segment (segments x h). Gate column blocks are [input | forget | cell | output].
// With `reverse`, each segment is consumed from its last row to its first.
template <typename T>
Var lstm_final_state(Tape<T>& t, Var x, std::span<const Segment> segments, Var w_input, Var w_hidden,
                     Var bias, bool reverse) {
  const auto& xv = t.value(x);
  const auto& wx = t.value(w_input);
  const auto& wh = t.value(w_hidden);
  const auto& bv = t.value(bias);
  const Eigen::Index h = wh.rows();
  detail::require(wx.rows() == xv.cols() && wx.cols() == 4 * h && wh.cols() == 4 * h && bv.cols() == 4 * h &&
                      bv.rows() == 1,
                  "lstm", "weight shapes inconsistent with hidden size");

  struct Step {
    Eigen::Index row;
    Mat<T> gates;  // 1 x 4h, post-activation
    Mat<T> c;      // 1 x h
    Mat<T> tanh_c;
  };
  auto steps = std::make_shared<std::vector<std::vector<Step>>>();
  Mat<T> pre = xv * wx;
  pre.rowwise() += bv.row(0);
  Mat<T> out_v(static_cast<Eigen::Index>(segments.size()), h);
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    detail::require(seg.length > 0, "lstm", "empty segment");
    std::vector<Step> seq;
    seq.reserve(seg.length);
    Mat<T> hs = Mat<T>::Zero(1, h);
    Mat<T> cs = Mat<T>::Zero(1, h);
    for (std::size_t i = 0; i < seg.length; ++i) {
      const auto row = static_cast<Eigen::Index>(seg.offset + (reverse ? seg.length - 1 - i : i));
      Mat<T> z = pre.row(row) + hs * wh;
      auto sig = [](T a) { return a >= 0 ? T(1) / (T(1) + std::exp(-a)) : std::exp(a) / (T(1) + std::exp(a)); };
      Mat<T> gates(1, 4 * h);
      gates.leftCols(2 * h) = z.leftCols(2 * h).unaryExpr(sig);
      gates.middleCols(2 * h, h) = z.middleCols(2 * h, h).array().tanh().matrix();
      gates.rightCols(h) = z.rightCols(h).unaryExpr(sig);
      cs = gates.middleCols(h, h).cwiseProduct(cs) + gates.leftCols(h).cwiseProduct(gates.middleCols(2 * h, h));
      Mat<T> tc = cs.array().tanh().matrix();
      hs = gates.rightCols(h).cwiseProduct(tc);
      seq.push_back({row, std::move(gates), cs, std::move(tc)});
    }
    out_v.row(static_cast<Eigen::Index>(s)) = hs.row(0);
    steps->push_back(std::move(seq));
  }

  const Var out{t.size()};
  return t.record(std::move(out_v), "lstm", [x, w_input, w_hidden, bias, out, steps, h](Tape<T>& tp) {
    const auto& g = tp.grad(out);
    const auto& xv2 = tp.value(x);
    const auto& wx2 = tp.value(w_input);
    const auto& wh2 = tp.value(w_hidden);
    Mat<T> dpre = Mat<T>::Zero(xv2.rows(), 4 * h);
    Mat<T> dwh = Mat<T>::Zero(h, 4 * h);
    for (std::size_t s = 0; s < steps->size(); ++s) {
      const auto& seq = (*steps)[s];
      Mat<T> dh = g.row(static_cast<Eigen::Index>(s));
      Mat<T> dc = Mat<T>::Zero(1, h);
      for (std::size_t i = seq.size(); i-- > 0;) {
        const auto& st = seq[i];
        const auto ig = st.gates.leftCols(h).array();
        const auto fg = st.gates.middleCols(h, h).array();
        const auto gg = st.gates.middleCols(2 * h, h).array();
        const auto og = st.gates.rightCols(h).array();
        const auto tc = st.tanh_c.array();
        dc.array() += dh.array() * og * (T(1) - tc * tc);
        const Mat<T> c_prev = i > 0 ? seq[i - 1].c : Mat<T>::Zero(1, h);
        Mat<T> dz(1, 4 * h);
        dz.leftCols(h) = (dc.array() * gg * ig * (T(1) - ig)).matrix();
        dz.middleCols(h, h) = (dc.array() * c_prev.array() * fg * (T(1) - fg)).matrix();
        dz.middleCols(2 * h, h) = (dc.array() * ig * (T(1) - gg * gg)).matrix();
        dz.rightCols(h) = (dh.array() * tc * og * (T(1) - og)).matrix();
        dpre.row(st.row) += dz.row(0);
        if (i > 0) {
          const Mat<T> h_prev = seq[i - 1].gates.rightCols(h).cwiseProduct(seq[i - 1].tanh_c);
          dwh.noalias() += h_prev.transpose() * dz;
          dh = dz * wh2.transpose();
        }
        dc = (dc.array() * fg).matrix();
      }
    }
    tp.grad(x).noalias() += dpre * wx2.transpose();
    tp.grad(w_input).noalias() += xv2.transpose() * dpre;
    tp.grad(w_hidden) += dwh;
    tp.grad(bias) += dpre.colwise().sum();
  });
}

// Mean binary cross-entropy over rows of `logits` (n x 1), with probabilities
// clamped to [kBceClamp, 1 - kBceClamp]. The clamp zeroes the gradient where active.
template <typename T>
Var bce_with_logits(Tape<T>& t, Var logits, std::span<const T> labels) {
  const auto& lv = t.value(logits);
  detail::require(lv.cols() == 1 && static_cast<std::size_t>(lv.rows()) == labels.size(), "bce",
                  "logits must be n x 1 matching labels");
  const auto n = lv.rows();
  Mat<T> loss = Mat<T>::Zero(1, 1);
  auto dlogit = std::make_shared<Mat<T>>(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T p1 = binary_class_probs<T>(lv(i, 0)).second;
    const T y = labels[static_cast<std::size_t>(i)];
    loss(0, 0) += bce_loss<T>(p1, y);
    const bool clamped = p1 < T(kBceClamp) || p1 > T(1) - T(kBceClamp);
    (*dlogit)(i, 0) = clamped ? T(0) : (p1 - y) / static_cast<T>(n);
  }
  loss(0, 0) /= static_cast<T>(n);
  const Var out{t.size()};
  return t.record(std::move(loss), "bce", [logits, out, dlogit](Tape<T>& tp) {
    tp.grad(logits) += *dlogit * tp.grad(out)(0, 0);
  });
}

// Mean softmax cross-entropy of rows of `logits` (n x V) against class ids.
template <typename T>
Var softmax_cross_entropy(Tape<T>& t, Var logits, std::span<const int> targets) {
  const auto& lv = t.value(logits);
  detail::require(static_cast<std::size_t>(lv.rows()) == targets.size() && !targets.empty(), "softmax_xent",
                  "row count must match targets");
  const auto n = lv.rows();
  auto probs = std::make_shared<Mat<T>>(n, lv.cols());
  Mat<T> loss = Mat<T>::Zero(1, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = targets[static_cast<std::size_t>(i)];
    detail::require(y >= 0 && y < lv.cols(), "softmax_xent", "target out of range");
    const T m = lv.row(i).maxCoeff();
    probs->row(i) = (lv.row(i).array() - m).exp();
    const T z = probs->row(i).sum();
    probs->row(i) /= z;
    loss(0, 0) += -(lv(i, y) - m - std::log(z));
  }
  loss(0, 0) /= static_cast<T>(n);
  const Var out{t.size()};
  return t.record(std::move(loss), "softmax_xent",
                  [logits, out, probs, tg = std::vector<int>(targets.begin(), targets.end())](Tape<T>& tp) {
                    Mat<T> d = *probs;
                    for (std::size_t i = 0; i < tg.size(); ++i) d(static_cast<Eigen::Index>(i), tg[i]) -= T(1);
                    tp.grad(logits) += d * (tp.grad(out)(0, 0) / static_cast<T>(tg.size()));
                  });
}

template <typename T>
Var sum(Tape<T>& t, Var a) {
  Mat<T> v(1, 1);
  v(0, 0) = t.value(a).sum();
  const Var out{t.size()};
  return t.record(std::move(v), "sum", [a, out](Tape<T>& tp) {
    tp.grad(a).array() += tp.grad(out)(0, 0);
  });
}

}  // namespace frforge::numeric::ops
