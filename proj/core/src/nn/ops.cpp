#include "divrec/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "divrec/errors.hpp"

namespace divrec::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_mat(const std::vector<double>& v, std::size_t r, std::size_t c) {
  return ConstMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

MutMap grad_mat(detail::Node& n, std::size_t r, std::size_t c) {
  return MutMap(n.grad_data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

void require_2d(const Tensor& t, const char* op) {
  if (t.ndim() != 2) {
    throw ShapeError(std::string(op) + ": expected 2-D tensor, got " + shape_str(t.shape()));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.numel() != b.numel()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <typename Fwd, typename Dfn>
Tensor unary(const Tensor& a, Fwd fwd, Dfn dfn) {
  std::vector<double> out(a.numel());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  return make_result(a.shape(), std::move(out), {a}, [dfn](detail::Node& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = p.grad_data();
    for (std::size_t i = 0; i < o.value.size(); ++i) g[i] += o.grad[i] * dfn(p.value[i], o.value[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = as_mat(a.node()->value, m, k) * as_mat(b.node()->value, k, n);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& o) {
    auto& pa = *o.parents[0];
    auto& pb = *o.parents[1];
    auto go = as_mat(o.grad, m, n);
    if (pa.requires_grad) grad_mat(pa, m, k).noalias() += go * as_mat(pb.value, k, n).transpose();
    if (pb.requires_grad) grad_mat(pb, k, n).noalias() += as_mat(pa.value, m, k).transpose() * go;
  });
}

Tensor matmul_bt(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul_bt");
  require_2d(b, "matmul_bt");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw ShapeError("matmul_bt: inner dimensions differ, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() =
      as_mat(a.node()->value, m, k) * as_mat(b.node()->value, n, k).transpose();
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& o) {
    auto& pa = *o.parents[0];
    auto& pb = *o.parents[1];
    auto go = as_mat(o.grad, m, n);
    if (pa.requires_grad) grad_mat(pa, m, k).noalias() += go * as_mat(pb.value, n, k);
    if (pb.requires_grad) grad_mat(pb, n, k).noalias() += go.transpose() * as_mat(pa.value, m, k);
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_2d(x, "linear");
  require_2d(weight, "linear");
  const std::size_t m = x.dim(0), k = x.dim(1), n = weight.dim(1);
  if (weight.dim(0) != k) {
    throw ShapeError("linear: input dimension " + std::to_string(k) +
                     " does not match weight input dimension " + std::to_string(weight.dim(0)));
  }
  if (bias.numel() != n) {
    throw ShapeError("linear: bias length " + std::to_string(bias.numel()) +
                     " does not match output dimension " + std::to_string(n));
  }
  std::vector<double> out(m * n);
  MutMap om(out.data(), m, n);
  om.noalias() = as_mat(x.node()->value, m, k) * as_mat(weight.node()->value, k, n);
  om.rowwise() += as_mat(bias.node()->value, 1, n).row(0);
  return make_result({m, n}, std::move(out), {x, weight, bias}, [m, k, n](detail::Node& o) {
    auto& px = *o.parents[0];
    auto& pw = *o.parents[1];
    auto& pb = *o.parents[2];
    auto go = as_mat(o.grad, m, n);
    if (px.requires_grad) grad_mat(px, m, k).noalias() += go * as_mat(pw.value, k, n).transpose();
    if (pw.requires_grad) grad_mat(pw, k, n).noalias() += as_mat(px.value, m, k).transpose() * go;
    if (pb.requires_grad) grad_mat(pb, 1, n) += go.colwise().sum();
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> out(a.numel());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& o) {
    for (auto& p : o.parents) {
      if (!p->requires_grad) continue;
      double* g = p->grad_data();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<double> out(a.numel());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& o) {
    auto& pa = *o.parents[0];
    auto& pb = *o.parents[1];
    if (pa.requires_grad) {
      double* g = pa.grad_data();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
    if (pb.requires_grad) {
      double* g = pb.grad_data();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<double> out(a.numel());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& o) {
    auto& pa = *o.parents[0];
    auto& pb = *o.parents[1];
    if (pa.requires_grad) {
      double* g = pa.grad_data();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      double* g = pb.grad_data();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * pa.value[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same(a, b, "div");
  std::vector<double> out(a.numel());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] / bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& o) {
    auto& pa = *o.parents[0];
    auto& pb = *o.parents[1];
    if (pa.requires_grad) {
      double* g = pa.grad_data();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] / pb.value[i];
    }
    if (pb.requires_grad) {
      double* g = pb.grad_data();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] -= o.grad[i] * o.value[i] / pb.value[i];
    }
  });
}

Tensor add_rowwise(const Tensor& a, const Tensor& row) {
  const std::size_t m = a.rows(), n = a.cols();
  if (row.numel() != n) {
    throw ShapeError("add_rowwise: row length " + std::to_string(row.numel()) +
                     " does not match column count " + std::to_string(n));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  auto rv = row.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += rv[j];
  return make_result(a.shape(), std::move(out), {a, row}, [m, n](detail::Node& o) {
    auto& pa = *o.parents[0];
    auto& pr = *o.parents[1];
    if (pa.requires_grad) {
      double* g = pa.grad_data();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
    if (pr.requires_grad) {
      double* g = pr.grad_data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[i * n + j];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return x * factor; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  return unary(a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return 0.5 / y; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_result({1}, {s}, {a}, [](detail::Node& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = p.grad_data();
    for (std::size_t i = 0; i < p.value.size(); ++i) g[i] += o.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor mean_rows(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  if (m == 0) throw ShapeError("mean_rows of empty tensor");
  std::vector<double> out(n, 0.0);
  auto av = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += av[i * n + j];
  const double inv = 1.0 / static_cast<double>(m);
  for (auto& v : out) v *= inv;
  return make_result({1, n}, std::move(out), {a}, [m, n, inv](detail::Node& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = p.grad_data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += o.grad[j] * inv;
  });
}

Tensor softmax_rows(const Tensor& a, bool causal) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n, 0.0);
  auto av = a.values();
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t width = causal ? std::min(n, i + 1) : n;
    const double* row = av.data() + i * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < width; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < width; ++j) z += (out[i * n + j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < width; ++j) out[i * n + j] /= z;
  }
  return make_result(a.shape(), std::move(out), {a}, [m, n](detail::Node& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = p.grad_data();
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = o.value.data() + i * n;
      const double* gy = o.grad.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  auto av = a.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = av.data() + i * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = row[j] - lse;
  }
  return make_result(a.shape(), std::move(out), {a}, [m, n](detail::Node& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = p.grad_data();
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = o.value.data() + i * n;
      const double* gy = o.grad.data() + i * n;
      double gs = 0.0;
      for (std::size_t j = 0; j < n; ++j) gs += gy[j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += gy[j] - std::exp(y[j]) * gs;
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.numel() != n || bias.numel() != n) {
    throw ShapeError("layer_norm: feature dimension " + std::to_string(n) +
                     " does not match gain/bias length " + std::to_string(gain.numel()));
  }
  std::vector<double> out(m * n);
  auto xn = std::make_shared<std::vector<double>>(m * n);
  auto inv_std = std::make_shared<std::vector<double>>(m);
  auto xv = x.values(), gv = gain.values(), bv = bias.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mu) * is;
      (*xn)[i * n + j] = h;
      out[i * n + j] = h * gv[j] + bv[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gain, bias}, [m, n, xn, inv_std](detail::Node& o) {
    auto& px = *o.parents[0];
    auto& pg = *o.parents[1];
    auto& pb = *o.parents[2];
    const auto& h = *xn;
    if (pg.requires_grad || pb.requires_grad) {
      double* gg = pg.requires_grad ? pg.grad_data() : nullptr;
      double* gb = pb.requires_grad ? pb.grad_data() : nullptr;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          if (gg) gg[j] += o.grad[i * n + j] * h[i * n + j];
          if (gb) gb[j] += o.grad[i * n + j];
        }
    }
    if (!px.requires_grad) return;
    double* gx = px.grad_data();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < m; ++i) {
      double mean_dh = 0.0, mean_dh_h = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double dh = o.grad[i * n + j] * pg.value[j];
        mean_dh += dh;
        mean_dh_h += dh * h[i * n + j];
      }
      mean_dh *= inv_n;
      mean_dh_h *= inv_n;
      for (std::size_t j = 0; j < n; ++j) {
        const double dh = o.grad[i * n + j] * pg.value[j];
        gx[i * n + j] += (*inv_std)[i] * (dh - mean_dh - h[i * n + j] * mean_dh_h);
      }
    }
  });
}

Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids) {
  require_2d(table, "embedding");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  std::vector<double> out(ids.size() * d);
  auto tv = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw IndexError("embedding: token id " + std::to_string(ids[i]) +
                       " outside vocabulary of size " + std::to_string(vocab));
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  return make_result({ids.size(), d}, std::move(out), {table}, [idv, d](detail::Node& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = p.grad_data();
    for (std::size_t i = 0; i < idv.size(); ++i) {
      double* row = g + static_cast<std::size_t>(idv[i]) * d;
      for (std::size_t j = 0; j < d; ++j) row[j] += o.grad[i * d + j];
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows of no tensors");
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    if (p.cols() != n) {
      throw ShapeError("concat_rows: column mismatch " + shape_str(parts.front().shape()) + " vs " +
                       shape_str(p.shape()));
    }
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(out.size());
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  return make_result({m, n}, std::move(out), parts, [offsets](detail::Node& o) {
    for (std::size_t k = 0; k < o.parents.size(); ++k) {
      auto& p = *o.parents[k];
      if (!p.requires_grad) continue;
      double* g = p.grad_data();
      for (std::size_t i = 0; i < p.value.size(); ++i) g[i] += o.grad[offsets[k] + i];
    }
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  const std::size_t m = a.rows(), n = a.cols();
  if (begin > end || end > m) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside " + std::to_string(m) + " rows");
  }
  auto av = a.values();
  std::vector<double> out(av.begin() + begin * n, av.begin() + end * n);
  return make_result({end - begin, n}, std::move(out), {a}, [begin, n](detail::Node& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = p.grad_data() + begin * n;
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor select_cols(const Tensor& a, std::span<const std::size_t> cols) {
  const std::size_t m = a.rows(), n = a.cols();
  for (auto c : cols) {
    if (c >= n) {
      throw IndexError("select_cols: column " + std::to_string(c) + " outside " + std::to_string(n));
    }
  }
  const std::size_t w = cols.size();
  std::vector<double> out(m * w);
  auto av = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = av[i * n + cols[j]];
  std::vector<std::size_t> cv(cols.begin(), cols.end());
  return make_result({m, w}, std::move(out), {a}, [cv, m, n, w](detail::Node& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = p.grad_data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * n + cv[j]] += o.grad[i * w + j];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel_of(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result(std::move(shape), std::move(out), {a}, [](detail::Node& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = p.grad_data();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets) {
  const std::size_t m = logits.rows(), n = logits.cols();
  if (targets.size() != m) {
    throw ShapeError("cross_entropy: " + std::to_string(m) + " logit rows vs " +
                     std::to_string(targets.size()) + " targets");
  }
  if (m == 0) throw ShapeError("cross_entropy of empty sequence");
  for (auto t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= n) {
      throw IndexError("cross_entropy: target id " + std::to_string(t) +
                       " outside vocabulary of size " + std::to_string(n));
    }
  }
  auto probs = std::make_shared<std::vector<double>>(m * n);
  auto lv = logits.values();
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = lv.data() + i * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += ((*probs)[i * n + j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < n; ++j) (*probs)[i * n + j] /= z;
    loss += mx + std::log(z) - row[targets[i]];
  }
  loss /= static_cast<double>(m);
  std::vector<std::int32_t> tv(targets.begin(), targets.end());
  return make_result({1}, {loss}, {logits}, [probs, tv, m, n](detail::Node& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = p.grad_data();
    const double s = o.grad[0] / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += s * (*probs)[i * n + j];
      g[i * n + static_cast<std::size_t>(tv[i])] -= s;
    }
  });
}

Tensor bce(const Tensor& p, std::span<const double> labels) {
  if (p.numel() != labels.size()) {
    throw ShapeError("bce: " + std::to_string(p.numel()) + " probabilities vs " +
                     std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw ShapeError("bce of empty batch");
  const double lo = kProbClamp, hi = 1.0 - kProbClamp;
  auto pv = p.values();
  const double n = static_cast<double>(labels.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double q = std::clamp(pv[i], lo, hi);
    loss -= labels[i] * std::log(q) + (1.0 - labels[i]) * std::log(1.0 - q);
  }
  loss /= n;
  std::vector<double> lv(labels.begin(), labels.end());
  return make_result({1}, {loss}, {p}, [lv, lo, hi, n](detail::Node& o) {
    auto& pp = *o.parents[0];
    if (!pp.requires_grad) return;
    double* g = pp.grad_data();
    for (std::size_t i = 0; i < lv.size(); ++i) {
      const double q = pp.value[i];
      if (q < lo || q > hi) continue;
      g[i] += o.grad[0] * (-(lv[i] / q) + (1.0 - lv[i]) / (1.0 - q)) / n;
    }
  });
}

}  // namespace divrec::nn
