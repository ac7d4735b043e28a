#include "fd/ops.hpp"

#include <algorithm>
#include <cmath>

#include "fd/errors.hpp"
#include "fd/kernels.hpp"

namespace fd::ops {

double softplus(double x) {
  // log1p(exp(x)) with overflow guard for large x.
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

SamePad same_padding(std::size_t in_len, std::size_t kernel, std::size_t stride) {
  const std::size_t out_len = ceil_div(in_len, stride);
  const std::ptrdiff_t needed = static_cast<std::ptrdiff_t>((out_len - 1) * stride + kernel) -
                                static_cast<std::ptrdiff_t>(in_len);
  const std::size_t total = needed > 0 ? static_cast<std::size_t>(needed) : 0;
  return SamePad{out_len, total / 2, total - total / 2};
}

Tensor conv1d(const Tensor& x, const Tensor& w, std::size_t stride, Conv1dCtx* ctx) {
  if (x.shape.size() != 3 || w.shape.size() != 3 || x.dim(2) != w.dim(1))
    throw ShapeMismatch("conv1d expects x [N,L,Cin], w [k,Cin,Cout]");
  if (stride < 1 || w.dim(0) < 1) throw ShapeMismatch("conv1d: kernel and stride must be >= 1");
  const SamePad pad = same_padding(x.dim(1), w.dim(0), stride);
  Tensor y({x.dim(0), pad.out_len, w.dim(2)});
  kernels::conv1d_forward(x, w, stride, pad.pad_left, pad.out_len, y);
  if (ctx) *ctx = Conv1dCtx{x, w, stride, pad.pad_left};
  return y;
}

Tensor conv1d_backward(const Conv1dCtx& ctx, const Tensor& gy, Tensor& gw) {
  Tensor gx(ctx.x.shape);
  gw = Tensor(ctx.w.shape);
  kernels::conv1d_backward(ctx.x, ctx.w, ctx.stride, ctx.pad_left, gy, gx, gw);
  return gx;
}

Tensor maxpool1d(const Tensor& x, std::size_t kernel, std::size_t stride, MaxPoolCtx* ctx) {
  if (x.shape.size() != 3) throw ShapeMismatch("maxpool1d expects [N,L,C]");
  const std::size_t n = x.dim(0), len = x.dim(1), c = x.dim(2);
  const std::size_t out_len = ceil_div(len, stride);
  Tensor y({n, out_len, c});
  if (ctx) {
    ctx->in_shape = x.shape;
    ctx->argmax.assign(y.size(), 0);
  }
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t o = 0; o < out_len; ++o) {
      const std::size_t lo = o * stride;
      const std::size_t hi = std::min(lo + kernel, len);  // trailing partial window
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = lo;
        double v = x.at3(b, lo, ch);
        for (std::size_t p = lo + 1; p < hi; ++p) {
          if (x.at3(b, p, ch) > v) {
            v = x.at3(b, p, ch);
            best = p;
          }
        }
        y.at3(b, o, ch) = v;
        if (ctx) ctx->argmax[(b * out_len + o) * c + ch] = (b * len + best) * c + ch;
      }
    }
  }
  return y;
}

Tensor maxpool1d_backward(const MaxPoolCtx& ctx, const Tensor& gy) {
  Tensor gx(ctx.in_shape);
  for (std::size_t i = 0; i < gy.size(); ++i) gx.data[ctx.argmax[i]] += gy.data[i];
  return gx;
}

Tensor batchnorm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   BnMode mode, BatchNormState& state, BatchNormCtx* ctx) {
  if (x.shape.size() != 3) throw ShapeMismatch("batchnorm1d expects [N,L,C]");
  const std::size_t n = x.dim(0), len = x.dim(1), c = x.dim(2);
  if (gamma.size() != c || beta.size() != c)
    throw ShapeMismatch("batchnorm1d: gamma/beta must be [C]");
  if (mode == BnMode::Train && n < 2)
    throw DegenerateBatch("batchnorm1d training requires batch size >= 2");

  Tensor mean({c}), var({c});
  if (mode == BnMode::Train) {
    const double m = static_cast<double>(n * len);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t p = 0; p < len; ++p)
        for (std::size_t ch = 0; ch < c; ++ch) mean.data[ch] += x.at3(b, p, ch);
    for (std::size_t ch = 0; ch < c; ++ch) mean.data[ch] /= m;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t p = 0; p < len; ++p)
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double d = x.at3(b, p, ch) - mean.data[ch];
          var.data[ch] += d * d;
        }
    for (std::size_t ch = 0; ch < c; ++ch) var.data[ch] /= m;
    for (std::size_t ch = 0; ch < c; ++ch) {
      state.running_mean.data[ch] =
          kBnMomentum * state.running_mean.data[ch] + (1.0 - kBnMomentum) * mean.data[ch];
      state.running_var.data[ch] =
          kBnMomentum * state.running_var.data[ch] + (1.0 - kBnMomentum) * var.data[ch];
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }

  Tensor inv_std({c});
  for (std::size_t ch = 0; ch < c; ++ch) inv_std.data[ch] = 1.0 / std::sqrt(var.data[ch] + kBnEps);

  Tensor y(x.shape);
  Tensor x_hat(x.shape);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t p = 0; p < len; ++p)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double xh = (x.at3(b, p, ch) - mean.data[ch]) * inv_std.data[ch];
        x_hat.at3(b, p, ch) = xh;
        y.at3(b, p, ch) = gamma.data[ch] * xh + beta.data[ch];
      }
  if (ctx) {
    ctx->x_hat = std::move(x_hat);
    ctx->inv_std = std::move(inv_std);
    ctx->gamma = gamma;
    ctx->count = n * len;
  }
  return y;
}

Tensor batchnorm1d_backward(const BatchNormCtx& ctx, const Tensor& gy,
                            Tensor& ggamma, Tensor& gbeta) {
  const std::size_t n = gy.dim(0), len = gy.dim(1), c = gy.dim(2);
  ggamma = Tensor({c});
  gbeta = Tensor({c});
  Tensor sum_gy({c}), sum_gy_xhat({c});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t p = 0; p < len; ++p)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double g = gy.at3(b, p, ch);
        sum_gy.data[ch] += g;
        sum_gy_xhat.data[ch] += g * ctx.x_hat.at3(b, p, ch);
      }
  ggamma = sum_gy_xhat;
  gbeta = sum_gy;
  const double m = static_cast<double>(ctx.count);
  Tensor gx(gy.shape);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t p = 0; p < len; ++p)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double g = gy.at3(b, p, ch);
        gx.at3(b, p, ch) =
            ctx.gamma.data[ch] * ctx.inv_std.data[ch] *
            (g - sum_gy.data[ch] / m - ctx.x_hat.at3(b, p, ch) * sum_gy_xhat.data[ch] / m);
      }
  return gx;
}

Tensor relu(const Tensor& x, ActCtx* ctx) {
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
  if (ctx) ctx->y = y;
  return y;
}

Tensor relu_backward(const ActCtx& ctx, const Tensor& gy) {
  Tensor gx(gy.shape);
  for (std::size_t i = 0; i < gy.size(); ++i)
    gx.data[i] = ctx.y.data[i] > 0.0 ? gy.data[i] : 0.0;
  return gx;
}

Tensor sigmoid(const Tensor& x, ActCtx* ctx) {
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = 1.0 / (1.0 + std::exp(-x.data[i]));
  if (ctx) ctx->y = y;
  return y;
}

Tensor sigmoid_backward(const ActCtx& ctx, const Tensor& gy) {
  Tensor gx(gy.shape);
  for (std::size_t i = 0; i < gy.size(); ++i) {
    const double s = ctx.y.data[i];
    gx.data[i] = gy.data[i] * s * (1.0 - s);
  }
  return gx;
}

Tensor softmax_rows(const Tensor& x, ActCtx* ctx) {
  if (x.shape.size() != 2) throw ShapeMismatch("softmax_rows expects [N,C]");
  const std::size_t n = x.dim(0), c = x.dim(1);
  Tensor y(x.shape);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = x.at2(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x.at2(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = std::exp(x.at2(i, j) - mx);
      y.at2(i, j) = e;
      z += e;
    }
    for (std::size_t j = 0; j < c; ++j) y.at2(i, j) /= z;
  }
  if (ctx) ctx->y = y;
  return y;
}

Tensor softmax_rows_backward(const ActCtx& ctx, const Tensor& gy) {
  const std::size_t n = gy.dim(0), c = gy.dim(1);
  Tensor gx(gy.shape);
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < c; ++j) dot += gy.at2(i, j) * ctx.y.at2(i, j);
    for (std::size_t j = 0; j < c; ++j)
      gx.at2(i, j) = ctx.y.at2(i, j) * (gy.at2(i, j) - dot);
  }
  return gx;
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b, AffineCtx* ctx) {
  if (x.shape.size() != 2 || w.shape.size() != 2 || x.dim(1) != w.dim(0) ||
      b.size() != w.dim(1))
    throw ShapeMismatch("affine expects x [N,F], w [F,M], b [M]");
  Tensor y({x.dim(0), w.dim(1)});
  kernels::matmul(x, w, y);
  for (std::size_t i = 0; i < y.dim(0); ++i)
    for (std::size_t j = 0; j < y.dim(1); ++j) y.at2(i, j) += b.data[j];
  if (ctx) *ctx = AffineCtx{x, w};
  return y;
}

Tensor affine_backward(const AffineCtx& ctx, const Tensor& gy, Tensor& gw, Tensor& gb) {
  Tensor gx(ctx.x.shape);
  gw = Tensor(ctx.w.shape);
  kernels::matmul_backward(ctx.x, ctx.w, gy, gx, gw);
  gb = Tensor({gy.dim(1)});
  for (std::size_t i = 0; i < gy.dim(0); ++i)
    for (std::size_t j = 0; j < gy.dim(1); ++j) gb.data[j] += gy.at2(i, j);
  return gx;
}

Tensor lstm_forward(const Tensor& x, const LstmWeights& w, std::size_t hidden,
                    LstmCtx* ctx) {
  if (x.shape.size() != 3) throw ShapeMismatch("lstm expects [N,T,F]");
  const std::size_t n = x.dim(0), t_len = x.dim(1), f = x.dim(2);
  if (t_len == 0) throw EmptySequence("lstm requires at least one timestep");
  if (w.wx.dim(0) != f || w.wx.dim(1) != 4 * hidden || w.wh.dim(0) != hidden ||
      w.wh.dim(1) != 4 * hidden || w.b.size() != 4 * hidden)
    throw ShapeMismatch("lstm weight shapes inconsistent with input/hidden size");

  Tensor h({n, hidden}), c({n, hidden});
  if (ctx) {
    ctx->x = x;
    ctx->weights = &w;
    ctx->gates.clear();
    ctx->c.clear();
    ctx->h.clear();
  }
  for (std::size_t t = 0; t < t_len; ++t) {
    // pre = x_t * Wx + h_{t-1} * Wh + b
    Tensor xt({n, f});
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t j = 0; j < f; ++j) xt.at2(b, j) = x.at3(b, t, j);
    Tensor pre({n, 4 * hidden});
    kernels::matmul(xt, w.wx, pre);
    Tensor pre_h({n, 4 * hidden});
    kernels::matmul(h, w.wh, pre_h);
    Tensor gates({n, 4 * hidden});
    Tensor c_new({n, hidden}), h_new({n, hidden});
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t u = 0; u < hidden; ++u) {
        const auto pre_at = [&](std::size_t g) {
          const std::size_t j = g * hidden + u;
          return pre.at2(b, j) + pre_h.at2(b, j) + w.b.data[j];
        };
        const double i_g = 1.0 / (1.0 + std::exp(-pre_at(0)));
        const double f_g = 1.0 / (1.0 + std::exp(-pre_at(1)));
        const double g_g = std::tanh(pre_at(2));
        const double o_g = 1.0 / (1.0 + std::exp(-pre_at(3)));
        gates.at2(b, 0 * hidden + u) = i_g;
        gates.at2(b, 1 * hidden + u) = f_g;
        gates.at2(b, 2 * hidden + u) = g_g;
        gates.at2(b, 3 * hidden + u) = o_g;
        const double c_t = f_g * c.at2(b, u) + i_g * g_g;
        c_new.at2(b, u) = c_t;
        h_new.at2(b, u) = o_g * std::tanh(c_t);
      }
    }
    c = c_new;
    h = h_new;
    if (ctx) {
      ctx->gates.push_back(std::move(gates));
      ctx->c.push_back(c);
      ctx->h.push_back(h);
    }
  }
  return h;
}

Tensor lstm_backward(const LstmCtx& ctx, const Tensor& gh_last, LstmWeights& grads) {
  const LstmWeights& w = *ctx.weights;
  const std::size_t n = ctx.x.dim(0), t_len = ctx.x.dim(1), f = ctx.x.dim(2);
  const std::size_t hidden = gh_last.dim(1);
  grads.wx = Tensor(w.wx.shape);
  grads.wh = Tensor(w.wh.shape);
  grads.b = Tensor(w.b.shape);
  Tensor gx(ctx.x.shape);

  Tensor dh = gh_last;
  Tensor dc({n, hidden});
  for (std::size_t t = t_len; t-- > 0;) {
    const Tensor& gates = ctx.gates[t];
    const Tensor& c_t = ctx.c[t];
    Tensor dgates({n, 4 * hidden});  // pre-activation gradients
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t u = 0; u < hidden; ++u) {
        const double i_g = gates.at2(b, 0 * hidden + u);
        const double f_g = gates.at2(b, 1 * hidden + u);
        const double g_g = gates.at2(b, 2 * hidden + u);
        const double o_g = gates.at2(b, 3 * hidden + u);
        const double tc = std::tanh(c_t.at2(b, u));
        const double dh_v = dh.at2(b, u);
        const double dct = dc.at2(b, u) + dh_v * o_g * (1.0 - tc * tc);
        const double c_prev = t > 0 ? ctx.c[t - 1].at2(b, u) : 0.0;
        dgates.at2(b, 0 * hidden + u) = dct * g_g * i_g * (1.0 - i_g);
        dgates.at2(b, 1 * hidden + u) = dct * c_prev * f_g * (1.0 - f_g);
        dgates.at2(b, 2 * hidden + u) = dct * i_g * (1.0 - g_g * g_g);
        dgates.at2(b, 3 * hidden + u) = dh_v * tc * o_g * (1.0 - o_g);
        dc.at2(b, u) = dct * f_g;
      }
    }
    // Parameter gradients.
    Tensor xt({n, f});
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t j = 0; j < f; ++j) xt.at2(b, j) = ctx.x.at3(b, t, j);
    Tensor gxt({n, f}), gwx_t(w.wx.shape);
    kernels::matmul_backward(xt, w.wx, dgates, gxt, gwx_t);
    for (std::size_t i = 0; i < gwx_t.size(); ++i) grads.wx.data[i] += gwx_t.data[i];
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t j = 0; j < f; ++j) gx.at3(b, t, j) = gxt.at2(b, j);

    Tensor h_prev = t > 0 ? ctx.h[t - 1] : Tensor({n, hidden});
    Tensor dh_prev({n, hidden}), gwh_t(w.wh.shape);
    kernels::matmul_backward(h_prev, w.wh, dgates, dh_prev, gwh_t);
    for (std::size_t i = 0; i < gwh_t.size(); ++i) grads.wh.data[i] += gwh_t.data[i];
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t j = 0; j < 4 * hidden; ++j) grads.b.data[j] += dgates.at2(b, j);
    dh = dh_prev;
  }
  return gx;
}

Tensor dropout_apply(const Tensor& x, double rate, Rng& rng, DropoutMode mode,
                     DropoutCtx* ctx) {
  if (rate < 0.0 || rate >= 1.0) throw InvalidRate("dropout rate must lie in [0,1)");
  if (mode == DropoutMode::Off || rate == 0.0) {
    if (ctx) {
      ctx->mask = Tensor(x.shape);
      ctx->mask.fill(1.0);
    }
    return x;
  }
  const double keep = 1.0 - rate;
  Tensor mask(x.shape);
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask.data[i] = rng.uniform() < rate ? 0.0 : 1.0 / keep;
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] * mask.data[i];
  if (ctx) ctx->mask = std::move(mask);
  return y;
}

Tensor dropout_backward(const DropoutCtx& ctx, const Tensor& gy) {
  Tensor gx(gy.shape);
  for (std::size_t i = 0; i < gy.size(); ++i) gx.data[i] = gy.data[i] * ctx.mask.data[i];
  return gx;
}

Tensor bayesian_affine(const Tensor& x, const GaussianWeight& w,
                       const GaussianWeight& b, Rng& rng, BayesCtx* ctx) {
  if (!w.mu.same_shape(w.rho) || !b.mu.same_shape(b.rho))
    throw ShapeMismatch("GaussianWeight mu/rho shapes differ");
  Tensor w_sample(w.mu.shape), eps_w(w.mu.shape);
  for (std::size_t i = 0; i < w_sample.size(); ++i) {
    eps_w.data[i] = rng.normal();
    w_sample.data[i] = w.mu.data[i] + softplus(w.rho.data[i]) * eps_w.data[i];
  }
  Tensor b_sample(b.mu.shape), eps_b(b.mu.shape);
  for (std::size_t i = 0; i < b_sample.size(); ++i) {
    eps_b.data[i] = rng.normal();
    b_sample.data[i] = b.mu.data[i] + softplus(b.rho.data[i]) * eps_b.data[i];
  }
  AffineCtx affine_ctx;
  Tensor y = affine(x, w_sample, b_sample, &affine_ctx);
  if (ctx) {
    ctx->x = x;
    ctx->w_sample = std::move(w_sample);
    ctx->b_sample = std::move(b_sample);
    ctx->eps_w = std::move(eps_w);
    ctx->eps_b = std::move(eps_b);
    ctx->w = &w;
    ctx->b = &b;
  }
  return y;
}

Tensor bayesian_affine_backward(const BayesCtx& ctx, const Tensor& gy,
                                GaussianWeight& gw, GaussianWeight& gb) {
  AffineCtx affine_ctx{ctx.x, ctx.w_sample};
  Tensor gw_sample, gb_sample;
  Tensor gx = affine_backward(affine_ctx, gy, gw_sample, gb_sample);
  // d softplus(rho)/d rho = sigmoid(rho)
  gw.mu = gw_sample;
  gw.rho = Tensor(gw_sample.shape);
  for (std::size_t i = 0; i < gw_sample.size(); ++i) {
    const double sig = 1.0 / (1.0 + std::exp(-ctx.w->rho.data[i]));
    gw.rho.data[i] = gw_sample.data[i] * ctx.eps_w.data[i] * sig;
  }
  gb.mu = gb_sample;
  gb.rho = Tensor(gb_sample.shape);
  for (std::size_t i = 0; i < gb_sample.size(); ++i) {
    const double sig = 1.0 / (1.0 + std::exp(-ctx.b->rho.data[i]));
    gb.rho.data[i] = gb_sample.data[i] * ctx.eps_b.data[i] * sig;
  }
  return gx;
}

double kl_gaussian(const GaussianWeight& w, double prior_sigma) {
  const double sp2 = prior_sigma * prior_sigma;
  double kl = 0.0;
  for (std::size_t i = 0; i < w.mu.size(); ++i) {
    const double sigma = softplus(w.rho.data[i]);
    const double s2 = sigma * sigma;
    const double mu = w.mu.data[i];
    kl += 0.5 * (s2 / sp2 + mu * mu / sp2 - 1.0 - std::log(s2 / sp2));
  }
  return kl;
}

void kl_gaussian_backward(const GaussianWeight& w, double prior_sigma, double coeff,
                          GaussianWeight& grads) {
  const double sp2 = prior_sigma * prior_sigma;
  for (std::size_t i = 0; i < w.mu.size(); ++i) {
    const double sigma = softplus(w.rho.data[i]);
    const double dkl_dsigma = sigma / sp2 - 1.0 / sigma;
    const double sig = 1.0 / (1.0 + std::exp(-w.rho.data[i]));
    grads.mu.data[i] += coeff * w.mu.data[i] / sp2;
    grads.rho.data[i] += coeff * dkl_dsigma * sig;
  }
}

double cross_entropy(const std::vector<double>& probabilities, std::size_t label) {
  if (label >= probabilities.size())
    throw ShapeMismatch("cross_entropy: label out of range");
  return -std::log(std::max(probabilities[label], kProbClamp));
}

double cross_entropy_batch(const Tensor& probs, const std::vector<std::size_t>& labels,
                           Tensor* gprobs) {
  const std::size_t n = probs.dim(0);
  if (labels.size() != n) throw LengthMismatch("cross_entropy_batch: labels vs rows");
  if (gprobs) *gprobs = Tensor(probs.shape);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::max(probs.at2(i, labels[i]), kProbClamp);
    loss += -std::log(p);
    if (gprobs) gprobs->at2(i, labels[i]) = -1.0 / (p * static_cast<double>(n));
  }
  return loss / static_cast<double>(n);
}

}  // namespace fd::ops
