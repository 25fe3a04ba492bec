#include "dasl/ops.hpp"

#include <cmath>
#include <string>

#include "dasl/error.hpp"

namespace dasl::ad {

namespace {

constexpr double kBceClamp = 1e-7;

std::string shape_str(const Tensor& t) {
  return "[" + std::to_string(t.rows()) + " x " + std::to_string(t.cols()) + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) +
                         " vs " + shape_str(b));
  }
}

bool want_record(const Tensor& out, const Tape* tape) {
  return tape != nullptr && out.requires_grad();
}

bool any_grad(const Tensor& a) { return a.requires_grad(); }
bool any_grad(const Tensor& a, const Tensor& b) {
  return a.requires_grad() || b.requires_grad();
}

enum class EwOp { Add, Sub, Mul };

Tensor elementwise(EwOp op, const Tensor& a, const Tensor& b, Tape* tape,
                   const char* name) {
  require_same_shape(a, b, name);
  Tensor out(a.rows(), a.cols(), any_grad(a, b));
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  switch (op) {
    case EwOp::Add:
      for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
      break;
    case EwOp::Sub:
      for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
      break;
    case EwOp::Mul:
      for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
      break;
  }
  if (want_record(out, tape)) {
    tape->record(out, [op, a, b, out]() {
      const auto& g = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.grad();
        switch (op) {
          case EwOp::Add:
          case EwOp::Sub:
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            break;
          case EwOp::Mul: {
            const auto& bv = b.values();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
            break;
          }
        }
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        switch (op) {
          case EwOp::Add:
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            break;
          case EwOp::Sub:
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            break;
          case EwOp::Mul: {
            const auto& av = a.values();
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
            break;
          }
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a) +
                         " * " + shape_str(b));
  }
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out(m, n, any_grad(a, b));
  {
    const double* av = a.values().data();
    const double* bv = b.values().data();
    double* ov = out.values().data();
    for (int i = 0; i < m; ++i) {
      double* orow = ov + static_cast<std::size_t>(i) * n;
      const double* arow = av + static_cast<std::size_t>(i) * k;
      for (int kk = 0; kk < k; ++kk) {
        const double aik = arow[kk];
        const double* brow = bv + static_cast<std::size_t>(kk) * n;
        for (int j = 0; j < n; ++j) orow[j] += aik * brow[j];
      }
    }
  }
  if (want_record(out, tape)) {
    tape->record(out, [a, b, out, m, k, n]() {
      const double* g = out.grad().data();
      if (a.requires_grad()) {
        // dA = dOut * B^T
        double* ga = a.grad().data();
        const double* bv = b.values().data();
        for (int i = 0; i < m; ++i) {
          const double* grow = g + static_cast<std::size_t>(i) * n;
          double* garow = ga + static_cast<std::size_t>(i) * k;
          for (int kk = 0; kk < k; ++kk) {
            const double* brow = bv + static_cast<std::size_t>(kk) * n;
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
            garow[kk] += acc;
          }
        }
      }
      if (b.requires_grad()) {
        // dB = A^T * dOut
        double* gb = b.grad().data();
        const double* av = a.values().data();
        for (int i = 0; i < m; ++i) {
          const double* grow = g + static_cast<std::size_t>(i) * n;
          const double* arow = av + static_cast<std::size_t>(i) * k;
          for (int kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            double* gbrow = gb + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) gbrow[j] += aik * grow[j];
          }
        }
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& a, Tape* tape) {
  const int m = a.rows(), n = a.cols();
  Tensor out(n, m, any_grad(a));
  const auto& av = a.values();
  auto& ov = out.values();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      ov[static_cast<std::size_t>(j) * m + i] = av[static_cast<std::size_t>(i) * n + j];
    }
  }
  if (want_record(out, tape)) {
    tape->record(out, [a, out, m, n]() {
      const auto& g = out.grad();
      auto& ga = a.grad();
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          ga[static_cast<std::size_t>(i) * n + j] += g[static_cast<std::size_t>(j) * m + i];
        }
      }
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x, Tape* tape) {
  Tensor out(x.rows(), x.cols(), any_grad(x));
  const auto& xv = x.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    double v = xv[i];
    // Split on sign so exp never overflows.
    ov[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                     : std::exp(v) / (1.0 + std::exp(v));
  }
  if (want_record(out, tape)) {
    tape->record(out, [x, out]() {
      const auto& g = out.grad();
      const auto& ov = out.values();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * ov[i] * (1.0 - ov[i]);
    });
  }
  return out;
}

Tensor tanh(const Tensor& x, Tape* tape) {
  Tensor out(x.rows(), x.cols(), any_grad(x));
  const auto& xv = x.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = std::tanh(xv[i]);
  if (want_record(out, tape)) {
    tape->record(out, [x, out]() {
      const auto& g = out.grad();
      const auto& ov = out.values();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - ov[i] * ov[i]);
    });
  }
  return out;
}

Tensor softmax_rows(const Tensor& x, Tape* tape) {
  const int m = x.rows(), n = x.cols();
  Tensor out(m, n, any_grad(x));
  const auto& xv = x.values();
  auto& ov = out.values();
  for (int i = 0; i < m; ++i) {
    const double* row = xv.data() + static_cast<std::size_t>(i) * n;
    double* orow = ov.data() + static_cast<std::size_t>(i) * n;
    double mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      s += orow[j];
    }
    double inv = 1.0 / s;
    for (int j = 0; j < n; ++j) orow[j] *= inv;
  }
  if (want_record(out, tape)) {
    tape->record(out, [x, out, m, n]() {
      const auto& g = out.grad();
      const auto& ov = out.values();
      auto& gx = x.grad();
      for (int i = 0; i < m; ++i) {
        const double* grow = g.data() + static_cast<std::size_t>(i) * n;
        const double* orow = ov.data() + static_cast<std::size_t>(i) * n;
        double* gxrow = gx.data() + static_cast<std::size_t>(i) * n;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += grow[j] * orow[j];
        for (int j = 0; j < n; ++j) gxrow[j] += orow[j] * (grow[j] - dot);
      }
    });
  }
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b, Tape* tape) {
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_cols: row counts disagree, " + shape_str(a) +
                         " vs " + shape_str(b));
  }
  const int m = a.rows(), p = a.cols(), q = b.cols();
  Tensor out(m, p + q, any_grad(a, b));
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (int i = 0; i < m; ++i) {
    double* orow = ov.data() + static_cast<std::size_t>(i) * (p + q);
    const double* arow = av.data() + static_cast<std::size_t>(i) * p;
    const double* brow = bv.data() + static_cast<std::size_t>(i) * q;
    for (int j = 0; j < p; ++j) orow[j] = arow[j];
    for (int j = 0; j < q; ++j) orow[p + j] = brow[j];
  }
  if (want_record(out, tape)) {
    tape->record(out, [a, b, out, m, p, q]() {
      const auto& g = out.grad();
      for (int i = 0; i < m; ++i) {
        const double* grow = g.data() + static_cast<std::size_t>(i) * (p + q);
        if (a.requires_grad()) {
          double* ga = a.grad().data() + static_cast<std::size_t>(i) * p;
          for (int j = 0; j < p; ++j) ga[j] += grow[j];
        }
        if (b.requires_grad()) {
          double* gb = b.grad().data() + static_cast<std::size_t>(i) * q;
          for (int j = 0; j < q; ++j) gb[j] += grow[p + j];
        }
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
  return elementwise(EwOp::Add, a, b, tape, "add");
}
Tensor sub(const Tensor& a, const Tensor& b, Tape* tape) {
  return elementwise(EwOp::Sub, a, b, tape, "sub");
}
Tensor mul(const Tensor& a, const Tensor& b, Tape* tape) {
  return elementwise(EwOp::Mul, a, b, tape, "mul");
}

Tensor scale(const Tensor& x, double c, Tape* tape) {
  Tensor out(x.rows(), x.cols(), any_grad(x));
  const auto& xv = x.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] * c;
  if (want_record(out, tape)) {
    tape->record(out, [x, out, c]() {
      const auto& g = out.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * c;
    });
  }
  return out;
}

Tensor add_const(const Tensor& x, double c, Tape* tape) {
  Tensor out(x.rows(), x.cols(), any_grad(x));
  const auto& xv = x.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] + c;
  if (want_record(out, tape)) {
    tape->record(out, [x, out]() {
      const auto& g = out.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

Tensor one_minus(const Tensor& x, Tape* tape) {
  Tensor out(x.rows(), x.cols(), any_grad(x));
  const auto& xv = x.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = 1.0 - xv[i];
  if (want_record(out, tape)) {
    tape->record(out, [x, out]() {
      const auto& g = out.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= g[i];
    });
  }
  return out;
}

Tensor add_rowvec(const Tensor& x, const Tensor& row, Tape* tape) {
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw DimensionError("add_rowvec: expected [1 x " + std::to_string(x.cols()) +
                         "] row, got " + shape_str(row));
  }
  const int m = x.rows(), n = x.cols();
  Tensor out(m, n, any_grad(x, row));
  const auto& xv = x.values();
  const auto& rv = row.values();
  auto& ov = out.values();
  for (int i = 0; i < m; ++i) {
    const double* xrow = xv.data() + static_cast<std::size_t>(i) * n;
    double* orow = ov.data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) orow[j] = xrow[j] + rv[j];
  }
  if (want_record(out, tape)) {
    tape->record(out, [x, row, out, m, n]() {
      const auto& g = out.grad();
      if (x.requires_grad()) {
        auto& gx = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (row.requires_grad()) {
        auto& gr = row.grad();
        for (int i = 0; i < m; ++i) {
          const double* grow = g.data() + static_cast<std::size_t>(i) * n;
          for (int j = 0; j < n; ++j) gr[j] += grow[j];
        }
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& x, Tape* tape) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  Tensor out = Tensor::scalar(s, any_grad(x));
  if (want_record(out, tape)) {
    tape->record(out, [x, out]() {
      const double g = out.grad()[0];
      auto& gx = x.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }
  return out;
}

Tensor mean_rows(const Tensor& x, Tape* tape) {
  const int m = x.rows(), n = x.cols();
  Tensor out(1, n, any_grad(x));
  const auto& xv = x.values();
  auto& ov = out.values();
  for (int i = 0; i < m; ++i) {
    const double* xrow = xv.data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) ov[j] += xrow[j];
  }
  const double inv = 1.0 / m;
  for (int j = 0; j < n; ++j) ov[j] *= inv;
  if (want_record(out, tape)) {
    tape->record(out, [x, out, m, n, inv]() {
      const auto& g = out.grad();
      auto& gx = x.grad();
      for (int i = 0; i < m; ++i) {
        double* gxrow = gx.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) gxrow[j] += g[j] * inv;
      }
    });
  }
  return out;
}

Tensor sum_squared_error(const Tensor& a, const Tensor& b, Tape* tape) {
  require_same_shape(a, b, "sum_squared_error");
  const auto& av = a.values();
  const auto& bv = b.values();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    double d = av[i] - bv[i];
    s += d * d;
  }
  Tensor out = Tensor::scalar(s, any_grad(a, b));
  if (want_record(out, tape)) {
    tape->record(out, [a, b, out]() {
      const double g = out.grad()[0];
      const auto& av = a.values();
      const auto& bv = b.values();
      if (a.requires_grad()) {
        auto& ga = a.grad();
        for (std::size_t i = 0; i < av.size(); ++i) ga[i] += g * 2.0 * (av[i] - bv[i]);
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        for (std::size_t i = 0; i < av.size(); ++i) gb[i] -= g * 2.0 * (av[i] - bv[i]);
      }
    });
  }
  return out;
}

Tensor binary_cross_entropy(const Tensor& p, const Tensor& y, Tape* tape) {
  require_same_shape(p, y, "binary_cross_entropy");
  const auto& pv = p.values();
  const auto& yv = y.values();
  const std::size_t n = pv.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pc = std::min(std::max(pv[i], kBceClamp), 1.0 - kBceClamp);
    s -= yv[i] * std::log(pc) + (1.0 - yv[i]) * std::log(1.0 - pc);
  }
  Tensor out = Tensor::scalar(s / static_cast<double>(n), any_grad(p));
  if (want_record(out, tape)) {
    tape->record(out, [p, y, out, n]() {
      const double g = out.grad()[0] / static_cast<double>(n);
      const auto& pv = p.values();
      const auto& yv = y.values();
      auto& gp = p.grad();
      for (std::size_t i = 0; i < n; ++i) {
        // Zero slope where the clamp is active.
        if (pv[i] <= kBceClamp || pv[i] >= 1.0 - kBceClamp) continue;
        gp[i] += g * (pv[i] - yv[i]) / (pv[i] * (1.0 - pv[i]));
      }
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& rows,
                   Tape* tape) {
  const int n = table.cols();
  if (rows.empty()) {
    throw DimensionError("gather_rows: empty row list");
  }
  for (int r : rows) {
    if (r < 0 || r >= table.rows()) {
      throw DimensionError("gather_rows: row " + std::to_string(r) +
                           " outside table " + shape_str(table));
    }
  }
  Tensor out(static_cast<int>(rows.size()), n, any_grad(table));
  const auto& tv = table.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* src = tv.data() + static_cast<std::size_t>(rows[i]) * n;
    double* dst = ov.data() + i * n;
    for (int j = 0; j < n; ++j) dst[j] = src[j];
  }
  if (want_record(out, tape)) {
    tape->record(out, [table, out, rows, n]() {
      const auto& g = out.grad();
      auto& gt = table.grad();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double* grow = g.data() + i * n;
        double* dst = gt.data() + static_cast<std::size_t>(rows[i]) * n;
        for (int j = 0; j < n; ++j) dst[j] += grow[j];
      }
    });
  }
  return out;
}

}  // namespace dasl::ad
