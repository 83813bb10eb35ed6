#include "motionprior/diff/ops.hpp"

#include "motionprior/error.hpp"

#include <cmath>

namespace motionprior::diff {

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::DimensionMismatch,
          std::string(op) + ": shape mismatch");
}

Tape& tape_of(const Var& a) { return *a.tape(); }

}  // namespace

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), ErrorKind::DimensionMismatch, "matmul: inner dimension");
  Mat out = a.value() * b.value();
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g) {
    if (a.requires_grad()) t.accumulate_expr(a, g * b.value().transpose());
    if (b.requires_grad()) t.accumulate_expr(b, a.value().transpose() * g);
  });
}

Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  return tape_of(a).record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  return tape_of(a).record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    t.accumulate_expr(b, -g);
  });
}

Var mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  Mat out = a.value().cwiseProduct(b.value());
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g) {
    if (a.requires_grad()) t.accumulate_expr(a, g.cwiseProduct(b.value()));
    if (b.requires_grad()) t.accumulate_expr(b, g.cwiseProduct(a.value()));
  });
}

Var add_row(Var a, Var row) {
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorKind::DimensionMismatch,
          "add_row: broadcast shape");
  Mat out = a.value().rowwise() + row.value().row(0);
  return tape_of(a).record(std::move(out), {a, row}, [a, row](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    if (row.requires_grad()) t.accumulate_expr(row, g.colwise().sum());
  });
}

Var mul_row(Var a, Var row) {
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorKind::DimensionMismatch,
          "mul_row: broadcast shape");
  Mat out = a.value().array().rowwise() * row.value().row(0).array();
  return tape_of(a).record(std::move(out), {a, row}, [a, row](Tape& t, const Mat& g) {
    if (a.requires_grad()) {
      Mat ga = g.array().rowwise() * row.value().row(0).array();
      t.accumulate(a, ga);
    }
    if (row.requires_grad()) t.accumulate_expr(row, g.cwiseProduct(a.value()).colwise().sum());
  });
}

Var scale(Var a, double s) {
  return tape_of(a).record(a.value() * s, {a},
                           [a, s](Tape& t, const Mat& g) { t.accumulate_expr(a, g * s); });
}

Var add_scalar(Var a, double s) {
  Mat out = a.value().array() + s;
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Mat& g) { t.accumulate(a, g); });
}

Var linear(Var x, Var weight, Var bias) { return add_row(matmul(x, weight), bias); }

Var relu(Var a) {
  Mat out = a.value().cwiseMax(0.0);
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Mat& g) {
    Mat ga = (a.value().array() > 0.0).select(g, 0.0);
    t.accumulate(a, ga);
  });
}

Var sigmoid(Var a) {
  Mat out = a.value().unaryExpr([](double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  return tape_of(a).record(out, {a}, [a, out](Tape& t, const Mat& g) {
    t.accumulate_expr(a, g.cwiseProduct(out.cwiseProduct((1.0 - out.array()).matrix())));
  });
}

Var exp(Var a) {
  Mat out = a.value().array().exp();
  return tape_of(a).record(out, {a}, [a, out](Tape& t, const Mat& g) {
    t.accumulate_expr(a, g.cwiseProduct(out));
  });
}

Var log(Var a) {
  Mat out = a.value().array().log();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Mat& g) {
    t.accumulate_expr(a, g.cwiseQuotient(a.value()));
  });
}

Var square(Var a) {
  Mat out = a.value().array().square();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Mat& g) {
    t.accumulate_expr(a, 2.0 * g.cwiseProduct(a.value()));
  });
}

Var abs(Var a) {
  Mat out = a.value().cwiseAbs();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Mat& g) {
    Mat ga = g.array() * a.value().array().unaryExpr([](double x) {
      return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    });
    t.accumulate(a, ga);
  });
}

Var clamp(Var a, double lo, double hi) {
  Mat out = a.value().cwiseMax(lo).cwiseMin(hi);
  return tape_of(a).record(std::move(out), {a}, [a, lo, hi](Tape& t, const Mat& g) {
    Mat ga = (a.value().array() >= lo && a.value().array() <= hi).select(g, 0.0);
    t.accumulate(a, ga);
  });
}

Var sum(Var a) {
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  const Eigen::Index r = a.rows(), c = a.cols();
  return tape_of(a).record(std::move(out), {a}, [a, r, c](Tape& t, const Mat& g) {
    t.accumulate_expr(a, Mat::Constant(r, c, g(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  require(n > 0, ErrorKind::DimensionMismatch, "mean of empty matrix");
  return scale(sum(a), 1.0 / n);
}

Var sum_rows(Var a) {
  Mat out = a.value().colwise().sum();
  const Eigen::Index r = a.rows();
  return tape_of(a).record(std::move(out), {a}, [a, r](Tape& t, const Mat& g) {
    t.accumulate_expr(a, g.replicate(r, 1));
  });
}

Var sum_cols(Var a) {
  Mat out = a.value().rowwise().sum();
  const Eigen::Index c = a.cols();
  return tape_of(a).record(std::move(out), {a}, [a, c](Tape& t, const Mat& g) {
    t.accumulate_expr(a, g.replicate(1, c));
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorKind::DimensionMismatch, "concat_cols: no parts");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows, ErrorKind::DimensionMismatch, "concat_cols: row mismatch");
    cols += p.cols();
  }
  Mat out(rows, cols);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return tape_of(parts.front()).record(std::move(out), parts, [parts](Tape& t, const Mat& g) {
    Eigen::Index o = 0;
    for (const Var& p : parts) {
      if (p.requires_grad()) t.accumulate_expr(p, g.middleCols(o, p.cols()));
      o += p.cols();
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorKind::DimensionMismatch, "concat_rows: no parts");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols, ErrorKind::DimensionMismatch, "concat_rows: column mismatch");
    rows += p.rows();
  }
  Mat out(rows, cols);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  return tape_of(parts.front()).record(std::move(out), parts, [parts](Tape& t, const Mat& g) {
    Eigen::Index o = 0;
    for (const Var& p : parts) {
      if (p.requires_grad()) t.accumulate_expr(p, g.middleRows(o, p.rows()));
      o += p.rows();
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), ErrorKind::DimensionMismatch,
          "slice_cols: out of range");
  Mat out = a.value().middleCols(start, count);
  return tape_of(a).record(std::move(out), {a}, [a, start, count](Tape& t, const Mat& g) {
    t.grad_buffer(a).middleCols(start, count) += g;
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(), ErrorKind::DimensionMismatch,
          "slice_rows: out of range");
  Mat out = a.value().middleRows(start, count);
  return tape_of(a).record(std::move(out), {a}, [a, start, count](Tape& t, const Mat& g) {
    t.grad_buffer(a).middleRows(start, count) += g;
  });
}

Var gather_cols(Var a, const std::vector<int>& cols) {
  Mat out(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    require(cols[k] >= 0 && cols[k] < a.cols(), ErrorKind::DimensionMismatch,
            "gather_cols: index out of range");
    out.col(static_cast<Eigen::Index>(k)) = a.value().col(cols[k]);
  }
  return tape_of(a).record(std::move(out), {a}, [a, cols](Tape& t, const Mat& g) {
    Mat& ga = t.grad_buffer(a);
    for (std::size_t k = 0; k < cols.size(); ++k) ga.col(cols[k]) += g.col(static_cast<Eigen::Index>(k));
  });
}

Var repeat_rows(Var row, Eigen::Index n) {
  require(row.rows() == 1, ErrorKind::DimensionMismatch, "repeat_rows: expects a single row");
  Mat out = row.value().replicate(n, 1);
  return tape_of(row).record(std::move(out), {row}, [row](Tape& t, const Mat& g) {
    t.accumulate_expr(row, g.colwise().sum());
  });
}

Var detach(Var a) { return tape_of(a).constant(a.value()); }

Var group_norm(Var x, Var gamma, Var beta, int groups, double eps) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  require(groups > 0 && cols % groups == 0, ErrorKind::DimensionMismatch,
          "group_norm: groups must divide feature width");
  require(gamma.cols() == cols && beta.cols() == cols && gamma.rows() == 1 && beta.rows() == 1,
          ErrorKind::DimensionMismatch, "group_norm: affine shape");
  const Eigen::Index gs = cols / groups;
  Mat xhat(rows, cols);
  Mat inv_std(rows, groups);
  const Mat& xv = x.value();
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int k = 0; k < groups; ++k) {
      auto seg = xv.row(r).segment(k * gs, gs);
      const double mu = seg.mean();
      const double var = (seg.array() - mu).square().mean();
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std(r, k) = is;
      xhat.row(r).segment(k * gs, gs) = (seg.array() - mu) * is;
    }
  }
  Mat out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
            beta.value().row(0).array();
  return x.tape()->record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std, groups, gs](Tape& t, const Mat& g) {
        if (gamma.requires_grad()) t.accumulate_expr(gamma, g.cwiseProduct(xhat).colwise().sum());
        if (beta.requires_grad()) t.accumulate_expr(beta, g.colwise().sum());
        if (!x.requires_grad()) return;
        Mat dxhat = g.array().rowwise() * gamma.value().row(0).array();
        Mat dx(g.rows(), g.cols());
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          for (int k = 0; k < groups; ++k) {
            auto dh = dxhat.row(r).segment(k * gs, gs);
            auto xh = xhat.row(r).segment(k * gs, gs);
            const double m1 = dh.mean();
            const double m2 = dh.cwiseProduct(xh).mean();
            dx.row(r).segment(k * gs, gs) =
                inv_std(r, k) * (dh.array() - m1 - xh.array() * m2);
          }
        }
        t.accumulate(x, dx);
      });
}

Var bce_with_logits(Var logits, const Mat& targets) {
  require(logits.rows() == targets.rows() && logits.cols() == targets.cols(),
          ErrorKind::DimensionMismatch, "bce_with_logits: shape mismatch");
  const Mat& l = logits.value();
  // loss = max(l,0) - l*y + log(1 + exp(-|l|))
  const double n = static_cast<double>(l.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i)
    for (Eigen::Index j = 0; j < l.cols(); ++j) {
      const double v = l(i, j);
      total += std::max(v, 0.0) - v * targets(i, j) + std::log1p(std::exp(-std::abs(v)));
    }
  Mat out(1, 1);
  out(0, 0) = total / n;
  return logits.tape()->record(std::move(out), {logits}, [logits, targets, n](Tape& t, const Mat& g) {
    Mat p = logits.value().unaryExpr([](double x) {
      return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    });
    t.accumulate_expr(logits, (p - targets) * (g(0, 0) / n));
  });
}

Var weighted_sq_error(Var a, const Mat& target, const Mat& weight) {
  require(a.rows() == target.rows() && a.cols() == target.cols() && weight.rows() == a.rows() &&
              weight.cols() == a.cols(),
          ErrorKind::DimensionMismatch, "weighted_sq_error: shape mismatch");
  Mat diff = a.value() - target;
  Mat out(1, 1);
  out(0, 0) = (weight.array() * diff.array().square()).sum();
  return a.tape()->record(std::move(out), {a}, [a, diff, weight](Tape& t, const Mat& g) {
    t.accumulate_expr(a, (2.0 * g(0, 0)) * weight.cwiseProduct(diff));
  });
}

}  // namespace motionprior::diff
