#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "shellsift/util.hpp"

// Minimal layer library for the detector. Every layer owns its parameters and
// gradient buffers and implements an explicit forward/backward pair; there is
// no tape. Templated on the scalar so the gradient-check tests can run the
// exact same code in double precision that production runs in float.

namespace shellsift::nn {

template <typename T>
struct ParamRef {
  std::vector<T>* value;
  std::vector<T>* grad;
  std::string name;
};

template <typename T>
inline void xavier_uniform(std::vector<T>& w, size_t fan_in, size_t fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  for (auto& x : w) x = T((rng.real01() * 2.0 - 1.0) * limit);
}

// ---- embedding ----

template <typename T>
struct Embedding {
  size_t vocab = 0, dim = 0;
  std::vector<T> w, gw;

  void build(size_t vocab_, size_t dim_, Rng& rng) {
    vocab = vocab_;
    dim = dim_;
    w.resize(vocab * dim);
    gw.assign(vocab * dim, T(0));
    for (auto& x : w) x = T(rng.normal(0.0, 0.02));
  }

  void forward(const std::vector<int>& ids, std::vector<T>& out) const {
    out.resize(ids.size() * dim);
    for (size_t i = 0; i < ids.size(); ++i) {
      int id = ids[i];
      if (id < 0 || size_t(id) >= vocab) throw HardError("embedding id out of range");
      for (size_t d = 0; d < dim; ++d) out[i * dim + d] = w[size_t(id) * dim + d];
    }
  }

  void backward(const std::vector<int>& ids, const std::vector<T>& dout) {
    for (size_t i = 0; i < ids.size(); ++i)
      for (size_t d = 0; d < dim; ++d) gw[size_t(ids[i]) * dim + d] += dout[i * dim + d];
  }

  void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
    out.push_back({&w, &gw, prefix + ".w"});
  }
};

// ---- convolution bank: one kernel width, rectifier, global max pool ----

template <typename T>
struct ConvPool {
  size_t width = 0, filters = 0, dim = 0;
  std::vector<T> w, b, gw, gb;  // w laid out filters x (width*dim)

  struct Cache {
    std::vector<size_t> argmax;   // per filter, winning window start
    std::vector<uint8_t> active;  // per filter, rectifier open at the winner
  };

  void build(size_t width_, size_t filters_, size_t dim_, Rng& rng) {
    width = width_;
    filters = filters_;
    dim = dim_;
    w.resize(filters * width * dim);
    gw.assign(w.size(), T(0));
    b.assign(filters, T(0));
    gb.assign(filters, T(0));
    xavier_uniform(w, width * dim, filters, rng);
  }

  // x is len rows of dim columns; out gets one value per filter.
  void forward(const std::vector<T>& x, size_t len, std::vector<T>& out, Cache* cache) const {
    if (len < width) throw HardError("conv input shorter than kernel width");
    out.assign(filters, T(0));
    if (cache) {
      cache->argmax.assign(filters, 0);
      cache->active.assign(filters, 0);
    }
    size_t windows = len - width + 1;
    for (size_t f = 0; f < filters; ++f) {
      const T* wf = &w[f * width * dim];
      T best = T(0);
      size_t best_t = 0;
      bool open = false;
      for (size_t t = 0; t < windows; ++t) {
        T acc = b[f];
        const T* xt = &x[t * dim];
        for (size_t k = 0; k < width * dim; ++k) acc += wf[k] * xt[k];
        T r = acc > T(0) ? acc : T(0);
        if (r > best) {
          best = r;
          best_t = t;
          open = acc > T(0);
        }
      }
      out[f] = best;
      if (cache) {
        cache->argmax[f] = best_t;
        cache->active[f] = open ? 1 : 0;
      }
    }
  }

  void backward(const std::vector<T>& x, size_t len, const Cache& cache,
                const std::vector<T>& dout, std::vector<T>& dx) {
    (void)len;
    for (size_t f = 0; f < filters; ++f) {
      if (!cache.active[f]) continue;
      T g = dout[f];
      if (g == T(0)) continue;
      gb[f] += g;
      const T* xt = &x[cache.argmax[f] * dim];
      T* gwf = &gw[f * width * dim];
      const T* wf = &w[f * width * dim];
      T* dxt = &dx[cache.argmax[f] * dim];
      for (size_t k = 0; k < width * dim; ++k) {
        gwf[k] += g * xt[k];
        dxt[k] += g * wf[k];
      }
    }
  }

  void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
    out.push_back({&w, &gw, prefix + ".w"});
    out.push_back({&b, &gb, prefix + ".b"});
  }
};

// ---- linear ----

template <typename T>
struct Linear {
  size_t in = 0, out = 0;
  std::vector<T> w, b, gw, gb;  // w laid out out x in

  void build(size_t in_, size_t out_, Rng& rng) {
    in = in_;
    out = out_;
    w.resize(out * in);
    gw.assign(w.size(), T(0));
    b.assign(out, T(0));
    gb.assign(out, T(0));
    xavier_uniform(w, in, out, rng);
  }

  void forward(const std::vector<T>& x, size_t batch, std::vector<T>& y) const {
    y.assign(batch * out, T(0));
    for (size_t i = 0; i < batch; ++i)
      for (size_t o = 0; o < out; ++o) {
        T acc = b[o];
        const T* wo = &w[o * in];
        const T* xi = &x[i * in];
        for (size_t k = 0; k < in; ++k) acc += wo[k] * xi[k];
        y[i * out + o] = acc;
      }
  }

  void backward(const std::vector<T>& x, size_t batch, const std::vector<T>& dy,
                std::vector<T>& dx) {
    dx.assign(batch * in, T(0));
    for (size_t i = 0; i < batch; ++i)
      for (size_t o = 0; o < out; ++o) {
        T g = dy[i * out + o];
        if (g == T(0)) continue;
        gb[o] += g;
        T* gwo = &gw[o * in];
        const T* wo = &w[o * in];
        const T* xi = &x[i * in];
        T* dxi = &dx[i * in];
        for (size_t k = 0; k < in; ++k) {
          gwo[k] += g * xi[k];
          dxi[k] += g * wo[k];
        }
      }
  }

  void collect(std::vector<ParamRef<T>>& out_refs, const std::string& prefix) {
    out_refs.push_back({&w, &gw, prefix + ".w"});
    out_refs.push_back({&b, &gb, prefix + ".b"});
  }
};

// ---- rectifier ----

template <typename T>
struct Relu {
  std::vector<uint8_t> open;

  void forward(const std::vector<T>& x, std::vector<T>& y) {
    y.resize(x.size());
    open.resize(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
      open[i] = x[i] > T(0);
      y[i] = open[i] ? x[i] : T(0);
    }
  }

  void backward(const std::vector<T>& dy, std::vector<T>& dx) const {
    dx.resize(dy.size());
    for (size_t i = 0; i < dy.size(); ++i) dx[i] = open[i] ? dy[i] : T(0);
  }
};

// ---- inverted dropout ----

template <typename T>
struct Dropout {
  T rate = T(0.3);
  std::vector<uint8_t> keep;

  void forward_train(const std::vector<T>& x, std::vector<T>& y, Rng& rng) {
    y.resize(x.size());
    keep.resize(x.size());
    T scale = T(1) / (T(1) - rate);
    for (size_t i = 0; i < x.size(); ++i) {
      keep[i] = rng.real01() >= double(rate);
      y[i] = keep[i] ? x[i] * scale : T(0);
    }
  }

  void forward_eval(const std::vector<T>& x, std::vector<T>& y) const { y = x; }

  void backward(const std::vector<T>& dy, std::vector<T>& dx) const {
    dx.resize(dy.size());
    T scale = T(1) / (T(1) - rate);
    for (size_t i = 0; i < dy.size(); ++i) dx[i] = keep[i] ? dy[i] * scale : T(0);
  }
};

// ---- batch normalization over feature dimension ----

template <typename T>
struct BatchNorm {
  size_t dim = 0;
  T eps = T(1e-5), momentum = T(0.1);
  std::vector<T> gamma, beta, ggamma, gbeta;
  std::vector<T> run_mean, run_var;

  struct Cache {
    std::vector<T> xhat;     // batch x dim
    std::vector<T> inv_std;  // per dim
    size_t batch = 0;
  };

  void build(size_t dim_) {
    dim = dim_;
    gamma.assign(dim, T(1));
    beta.assign(dim, T(0));
    ggamma.assign(dim, T(0));
    gbeta.assign(dim, T(0));
    run_mean.assign(dim, T(0));
    run_var.assign(dim, T(1));
  }

  void forward_train(const std::vector<T>& x, size_t batch, std::vector<T>& y, Cache& cache) {
    if (batch < 2) throw HardError("batch normalization needs batch size >= 2 in training");
    y.resize(batch * dim);
    cache.xhat.resize(batch * dim);
    cache.inv_std.resize(dim);
    cache.batch = batch;
    for (size_t d = 0; d < dim; ++d) {
      T mean = T(0);
      for (size_t i = 0; i < batch; ++i) mean += x[i * dim + d];
      mean /= T(batch);
      T var = T(0);
      for (size_t i = 0; i < batch; ++i) {
        T c = x[i * dim + d] - mean;
        var += c * c;
      }
      var /= T(batch);
      T inv = T(1) / std::sqrt(var + eps);
      cache.inv_std[d] = inv;
      for (size_t i = 0; i < batch; ++i) {
        T xh = (x[i * dim + d] - mean) * inv;
        cache.xhat[i * dim + d] = xh;
        y[i * dim + d] = gamma[d] * xh + beta[d];
      }
      T unbiased = var * T(batch) / T(batch - 1);
      run_mean[d] = (T(1) - momentum) * run_mean[d] + momentum * mean;
      run_var[d] = (T(1) - momentum) * run_var[d] + momentum * unbiased;
    }
  }

  void forward_eval(const std::vector<T>& x, size_t batch, std::vector<T>& y) const {
    y.resize(batch * dim);
    for (size_t d = 0; d < dim; ++d) {
      T inv = T(1) / std::sqrt(run_var[d] + eps);
      for (size_t i = 0; i < batch; ++i)
        y[i * dim + d] = gamma[d] * (x[i * dim + d] - run_mean[d]) * inv + beta[d];
    }
  }

  // Exact gradient through the batch statistics.
  void backward(const Cache& cache, const std::vector<T>& dy, std::vector<T>& dx) {
    size_t batch = cache.batch;
    dx.resize(batch * dim);
    for (size_t d = 0; d < dim; ++d) {
      T sum_dy = T(0), sum_dy_xhat = T(0);
      for (size_t i = 0; i < batch; ++i) {
        T g = dy[i * dim + d];
        sum_dy += g;
        sum_dy_xhat += g * cache.xhat[i * dim + d];
      }
      ggamma[d] += sum_dy_xhat;
      gbeta[d] += sum_dy;
      T inv = cache.inv_std[d];
      for (size_t i = 0; i < batch; ++i) {
        T g = dy[i * dim + d];
        T xh = cache.xhat[i * dim + d];
        dx[i * dim + d] =
            gamma[d] * inv * (g - sum_dy / T(batch) - xh * sum_dy_xhat / T(batch));
      }
    }
  }

  void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
    out.push_back({&gamma, &ggamma, prefix + ".gamma"});
    out.push_back({&beta, &gbeta, prefix + ".beta"});
  }
};

// ---- softmax cross-entropy ----

// Stable softmax over k classes for one row.
template <typename T>
inline void softmax_row(const T* logits, size_t k, T* p) {
  T mx = logits[0];
  for (size_t i = 1; i < k; ++i) mx = logits[i] > mx ? logits[i] : mx;
  T sum = T(0);
  for (size_t i = 0; i < k; ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (size_t i = 0; i < k; ++i) p[i] /= sum;
}

// Mean cross-entropy over the batch; fills p (batch x k) and dlogits.
template <typename T>
inline T softmax_cross_entropy(const std::vector<T>& logits, const std::vector<int>& labels,
                               size_t k, std::vector<T>& p, std::vector<T>& dlogits) {
  size_t batch = labels.size();
  p.resize(batch * k);
  dlogits.assign(batch * k, T(0));
  T loss = T(0);
  for (size_t i = 0; i < batch; ++i) {
    softmax_row(&logits[i * k], k, &p[i * k]);
    T py = p[i * k + size_t(labels[i])];
    loss -= std::log(py > T(1e-300) ? py : T(1e-300));
    for (size_t j = 0; j < k; ++j)
      dlogits[i * k + j] = (p[i * k + j] - (int(j) == labels[i] ? T(1) : T(0))) / T(batch);
  }
  return loss / T(batch);
}

// ---- decoupled weight decay Adam ----

template <typename T>
struct AdamW {
  T lr = T(1e-3), beta1 = T(0.9), beta2 = T(0.999), eps = T(1e-8), weight_decay = T(0.01);
  size_t t = 0;
  std::vector<std::vector<T>> m, v;

  void attach(const std::vector<ParamRef<T>>& blocks) {
    m.clear();
    v.clear();
    for (const auto& blk : blocks) {
      m.emplace_back(blk.value->size(), T(0));
      v.emplace_back(blk.value->size(), T(0));
    }
    t = 0;
  }

  void zero_grad(std::vector<ParamRef<T>>& blocks) {
    for (auto& blk : blocks)
      for (auto& g : *blk.grad) g = T(0);
  }

  void step(std::vector<ParamRef<T>>& blocks) {
    if (m.size() != blocks.size()) throw HardError("optimizer not attached to these parameters");
    ++t;
    T bc1 = T(1) - std::pow(beta1, T(t));
    T bc2 = T(1) - std::pow(beta2, T(t));
    for (size_t bi = 0; bi < blocks.size(); ++bi) {
      auto& w = *blocks[bi].value;
      auto& g = *blocks[bi].grad;
      auto& mb = m[bi];
      auto& vb = v[bi];
      for (size_t i = 0; i < w.size(); ++i) {
        mb[i] = beta1 * mb[i] + (T(1) - beta1) * g[i];
        vb[i] = beta2 * vb[i] + (T(1) - beta2) * g[i] * g[i];
        T mhat = mb[i] / bc1;
        T vhat = vb[i] / bc2;
        w[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * w[i]);
      }
    }
  }
};

}  // namespace shellsift::nn
