#include "defsurf/ad/ops.hpp"

#include <cmath>
#include <string>

namespace defsurf::ad {

namespace {

enum class Broadcast { None, ScalarLeft, ScalarRight, RowLeft, RowRight };

Broadcast classify(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::None;
  if (a.rows() == 1 && a.cols() == 1) return Broadcast::ScalarLeft;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::ScalarRight;
  if (a.rows() == 1 && a.cols() == b.cols()) return Broadcast::RowLeft;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::RowRight;
  throw ArgumentError(std::string(op) + ": incompatible shapes (" +
                      std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                      " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()) + ")");
}

Mat broadcast_left(const Mat& a, Broadcast mode, Index rows, Index cols) {
  switch (mode) {
    case Broadcast::ScalarLeft:
      return Mat::Constant(rows, cols, a(0, 0));
    case Broadcast::RowLeft:
      return a.replicate(rows, 1);
    default:
      return a;
  }
}

Mat broadcast_right(const Mat& b, Broadcast mode, Index rows, Index cols) {
  switch (mode) {
    case Broadcast::ScalarRight:
      return Mat::Constant(rows, cols, b(0, 0));
    case Broadcast::RowRight:
      return b.replicate(rows, 1);
    default:
      return b;
  }
}

// Reduce a full-shaped gradient back to the broadcast operand's shape.
Mat reduce_for(const Mat& g, Index rows, Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) {
    Mat out(1, 1);
    out(0, 0) = g.sum();
    return out;
  }
  // row broadcast
  return g.colwise().sum();
}

Tensor elementwise_binary(const Tensor& a, const Tensor& b, const char* name,
                          Mat value,
                          // dval/da and dval/db as elementwise factors over
                          // the broadcast shape (empty => factor of 1).
                          Mat da_factor, Mat db_factor) {
  auto da = std::make_shared<const Mat>(std::move(da_factor));
  auto db = std::make_shared<const Mat>(std::move(db_factor));
  return make_op(
      std::move(value), {a, b},
      [&da, &db](Node* self) {
        return [self, da, db]() {
          Node* pa = self->parents[0].get();
          Node* pb = self->parents[1].get();
          if (pa->requires_grad) {
            const Mat g =
                da->size() ? Mat(self->grad.cwiseProduct(*da)) : self->grad;
            pa->accumulate_grad(reduce_for(g, pa->value.rows(), pa->value.cols()));
          }
          if (pb->requires_grad) {
            const Mat g =
                db->size() ? Mat(self->grad.cwiseProduct(*db)) : self->grad;
            pb->accumulate_grad(reduce_for(g, pb->value.rows(), pb->value.cols()));
          }
        };
      },
      name);
}

Tensor elementwise_unary(const Tensor& a, const char* name, Mat value,
                         Mat dfactor) {
  auto df = std::make_shared<const Mat>(std::move(dfactor));
  return make_op(
      std::move(value), {a},
      [&df](Node* self) {
        return [self, df]() {
          self->parents[0]->accumulate_grad(self->grad.cwiseProduct(*df));
        };
      },
      name);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast mode = classify(a, b, "add");
  const Index rows = std::max(a.rows(), b.rows());
  const Index cols = std::max(a.cols(), b.cols());
  Mat value = broadcast_left(a.value(), mode, rows, cols) +
              broadcast_right(b.value(), mode, rows, cols);
  return elementwise_binary(a, b, "add", std::move(value), Mat(), Mat());
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const Broadcast mode = classify(a, b, "sub");
  const Index rows = std::max(a.rows(), b.rows());
  const Index cols = std::max(a.cols(), b.cols());
  Mat value = broadcast_left(a.value(), mode, rows, cols) -
              broadcast_right(b.value(), mode, rows, cols);
  Mat db = Mat::Constant(rows, cols, Real(-1));
  return elementwise_binary(a, b, "sub", std::move(value), Mat(), std::move(db));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast mode = classify(a, b, "mul");
  const Index rows = std::max(a.rows(), b.rows());
  const Index cols = std::max(a.cols(), b.cols());
  Mat lhs = broadcast_left(a.value(), mode, rows, cols);
  Mat rhs = broadcast_right(b.value(), mode, rows, cols);
  Mat value = lhs.cwiseProduct(rhs);
  return elementwise_binary(a, b, "mul", std::move(value), std::move(rhs),
                            std::move(lhs));
}

Tensor div(const Tensor& a, const Tensor& b) {
  const Broadcast mode = classify(a, b, "div");
  const Index rows = std::max(a.rows(), b.rows());
  const Index cols = std::max(a.cols(), b.cols());
  Mat lhs = broadcast_left(a.value(), mode, rows, cols);
  Mat rhs = broadcast_right(b.value(), mode, rows, cols);
  Mat value = lhs.cwiseQuotient(rhs);
  Mat da = rhs.cwiseInverse();
  Mat db = -value.cwiseProduct(da);  // -a / b^2
  return elementwise_binary(a, b, "div", std::move(value), std::move(da),
                            std::move(db));
}

Tensor neg(const Tensor& a) {
  return elementwise_unary(a, "neg", -a.value(),
                           Mat::Constant(a.rows(), a.cols(), Real(-1)));
}

Tensor affine(const Tensor& a, Real k, Real c) {
  Mat value = (a.value().array() * k + c).matrix();
  return elementwise_unary(a, "affine", std::move(value),
                           Mat::Constant(a.rows(), a.cols(), k));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw ArgumentError("matmul: inner dimensions differ (" +
                        std::to_string(a.cols()) + " vs " +
                        std::to_string(b.rows()) + ")");
  Mat value = a.value() * b.value();
  return make_op(
      std::move(value), {a, b},
      [](Node* self) {
        return [self]() {
          Node* pa = self->parents[0].get();
          Node* pb = self->parents[1].get();
          if (pa->requires_grad)
            pa->accumulate_grad(self->grad * pb->value.transpose());
          if (pb->requires_grad)
            pb->accumulate_grad(pa->value.transpose() * self->grad);
        };
      },
      "matmul");
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ArgumentError("concat_cols: no inputs");
  const Index rows = parts[0].rows();
  Index cols = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != rows) throw ArgumentError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Mat value(rows, cols);
  Index at = 0;
  for (const Tensor& p : parts) {
    value.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_op(
      std::move(value), parts,
      [](Node* self) {
        return [self]() {
          Index at = 0;
          for (auto& parent : self->parents) {
            const Index c = parent->value.cols();
            if (parent->requires_grad)
              parent->accumulate_grad(self->grad.middleCols(at, c));
            at += c;
          }
        };
      },
      "concat_cols");
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ArgumentError("concat_rows: no inputs");
  const Index cols = parts[0].cols();
  Index rows = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != cols) throw ArgumentError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Mat value(rows, cols);
  Index at = 0;
  for (const Tensor& p : parts) {
    value.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make_op(
      std::move(value), parts,
      [](Node* self) {
        return [self]() {
          Index at = 0;
          for (auto& parent : self->parents) {
            const Index r = parent->value.rows();
            if (parent->requires_grad)
              parent->accumulate_grad(self->grad.middleRows(at, r));
            at += r;
          }
        };
      },
      "concat_rows");
}

Tensor interleave_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ArgumentError("interleave_cols: shape mismatch");
  Mat value(a.rows(), a.cols() * 2);
  for (Index c = 0; c < a.cols(); ++c) {
    value.col(2 * c) = a.value().col(c);
    value.col(2 * c + 1) = b.value().col(c);
  }
  return make_op(
      std::move(value), {a, b},
      [](Node* self) {
        return [self]() {
          Node* pa = self->parents[0].get();
          Node* pb = self->parents[1].get();
          const Index half = pa->value.cols();
          if (pa->requires_grad) {
            Mat g(pa->value.rows(), half);
            for (Index c = 0; c < half; ++c) g.col(c) = self->grad.col(2 * c);
            pa->accumulate_grad(g);
          }
          if (pb->requires_grad) {
            Mat g(pb->value.rows(), half);
            for (Index c = 0; c < half; ++c)
              g.col(c) = self->grad.col(2 * c + 1);
            pb->accumulate_grad(g);
          }
        };
      },
      "interleave_cols");
}

Tensor slice_cols(const Tensor& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw ArgumentError("slice_cols: range out of bounds");
  Mat value = a.value().middleCols(start, count);
  return make_op(
      std::move(value), {a},
      [start, count](Node* self) {
        return [self, start, count]() {
          Node* pa = self->parents[0].get();
          Mat g = Mat::Zero(pa->value.rows(), pa->value.cols());
          g.middleCols(start, count) = self->grad;
          pa->accumulate_grad(g);
        };
      },
      "slice_cols");
}

Tensor slice_rows(const Tensor& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows())
    throw ArgumentError("slice_rows: range out of bounds");
  Mat value = a.value().middleRows(start, count);
  return make_op(
      std::move(value), {a},
      [start, count](Node* self) {
        return [self, start, count]() {
          Node* pa = self->parents[0].get();
          Mat g = Mat::Zero(pa->value.rows(), pa->value.cols());
          g.middleRows(start, count) = self->grad;
          pa->accumulate_grad(g);
        };
      },
      "slice_rows");
}

Tensor sum(const Tensor& a) {
  Mat value(1, 1);
  value(0, 0) = a.value().sum();
  return make_op(
      std::move(value), {a},
      [](Node* self) {
        return [self]() {
          Node* pa = self->parents[0].get();
          pa->accumulate_grad(Mat::Constant(pa->value.rows(), pa->value.cols(),
                                            self->grad(0, 0)));
        };
      },
      "sum");
}

Tensor mean(const Tensor& a) {
  if (a.value().size() == 0) throw ArgumentError("mean: empty tensor");
  Mat value(1, 1);
  value(0, 0) = a.value().mean();
  const Real scale = Real(1) / static_cast<Real>(a.value().size());
  return make_op(
      std::move(value), {a},
      [scale](Node* self) {
        return [self, scale]() {
          Node* pa = self->parents[0].get();
          pa->accumulate_grad(Mat::Constant(pa->value.rows(), pa->value.cols(),
                                            self->grad(0, 0) * scale));
        };
      },
      "mean");
}

Tensor abs(const Tensor& a) {
  Mat value = a.value().cwiseAbs();
  Mat d;
  if (a.requires_grad()) d = a.value().array().sign().matrix();  // sign(0) = 0
  return elementwise_unary(a, "abs", std::move(value), std::move(d));
}

Tensor square(const Tensor& a) {
  Mat value = a.value().array().square().matrix();
  Mat d;
  if (a.requires_grad()) d = Real(2) * a.value();
  return elementwise_unary(a, "square", std::move(value), std::move(d));
}

Tensor sqrt(const Tensor& a) {
  Mat value = a.value().array().sqrt().matrix();
  Mat d;
  if (a.requires_grad()) d = (Real(0.5) * value.array().inverse()).matrix();
  return elementwise_unary(a, "sqrt", std::move(value), std::move(d));
}

Tensor sigmoid(const Tensor& a) {
  // Stable: sigma(x) = exp(-softplus(-x)) without large exponentials.
  Mat value(a.rows(), a.cols());
  const Mat& x = a.value();
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < x.rows(); ++i) {
      const Real v = x(i, j);
      value(i, j) = v >= Real(0) ? Real(1) / (Real(1) + std::exp(-v))
                                 : std::exp(v) / (Real(1) + std::exp(v));
    }
  Mat d;
  if (a.requires_grad())
    d = value.cwiseProduct((Real(1) - value.array()).matrix());
  return elementwise_unary(a, "sigmoid", std::move(value), std::move(d));
}

Tensor relu(const Tensor& a) {
  Mat value = a.value().cwiseMax(Real(0));
  Mat d;
  if (a.requires_grad())
    d = (a.value().array() > Real(0)).cast<Real>().matrix();
  return elementwise_unary(a, "relu", std::move(value), std::move(d));
}

Tensor softplus(const Tensor& a) {
  // log(1 + exp(x)) = max(x, 0) + log1p(exp(-|x|)); derivative sigmoid(x).
  const Mat& x = a.value();
  const bool want_grad = a.requires_grad();
  Mat value(x.rows(), x.cols());
  Mat d;
  if (want_grad) d.resize(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < x.rows(); ++i) {
      const Real v = x(i, j);
      const Real e = std::exp(-std::abs(v));
      value(i, j) = std::max(v, Real(0)) + std::log1p(e);
      if (want_grad)
        d(i, j) = v >= Real(0) ? Real(1) / (Real(1) + e)
                               : Real(1) - Real(1) / (Real(1) + e);
    }
  return elementwise_unary(a, "softplus", std::move(value), std::move(d));
}

Tensor sin(const Tensor& a) {
  Mat value = a.value().array().sin().matrix();
  Mat d;
  if (a.requires_grad()) d = a.value().array().cos().matrix();
  return elementwise_unary(a, "sin", std::move(value), std::move(d));
}

Tensor cos(const Tensor& a) {
  Mat value = a.value().array().cos().matrix();
  Mat d;
  if (a.requires_grad()) d = (-a.value().array().sin()).matrix();
  return elementwise_unary(a, "cos", std::move(value), std::move(d));
}

namespace {

inline void require_n3(const Tensor& t, const char* op) {
  if (t.cols() != 3)
    throw ArgumentError(std::string(op) + ": expected an N x 3 matrix");
}

}  // namespace

Tensor cross(const Tensor& a, const Tensor& b) {
  require_n3(a, "cross");
  require_n3(b, "cross");
  if (a.rows() != b.rows()) throw ArgumentError("cross: row count mismatch");
  const Mat& av = a.value();
  const Mat& bv = b.value();
  Mat value(a.rows(), 3);
  value.col(0) = av.col(1).cwiseProduct(bv.col(2)) - av.col(2).cwiseProduct(bv.col(1));
  value.col(1) = av.col(2).cwiseProduct(bv.col(0)) - av.col(0).cwiseProduct(bv.col(2));
  value.col(2) = av.col(0).cwiseProduct(bv.col(1)) - av.col(1).cwiseProduct(bv.col(0));
  return make_op(
      std::move(value), {a, b},
      [](Node* self) {
        return [self]() {
          Node* pa = self->parents[0].get();
          Node* pb = self->parents[1].get();
          const Mat& g = self->grad;
          auto cross_cols = [](const Mat& u, const Mat& v) {
            Mat out(u.rows(), 3);
            out.col(0) = u.col(1).cwiseProduct(v.col(2)) - u.col(2).cwiseProduct(v.col(1));
            out.col(1) = u.col(2).cwiseProduct(v.col(0)) - u.col(0).cwiseProduct(v.col(2));
            out.col(2) = u.col(0).cwiseProduct(v.col(1)) - u.col(1).cwiseProduct(v.col(0));
            return out;
          };
          // d/da (a x b) pulled back: b x g ; d/db: g x a.
          if (pa->requires_grad) pa->accumulate_grad(cross_cols(pb->value, g));
          if (pb->requires_grad) pb->accumulate_grad(cross_cols(g, pa->value));
        };
      },
      "cross");
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ArgumentError("dot: shape mismatch");
  Mat value = a.value().cwiseProduct(b.value()).rowwise().sum();
  return make_op(
      std::move(value), {a, b},
      [](Node* self) {
        return [self]() {
          Node* pa = self->parents[0].get();
          Node* pb = self->parents[1].get();
          const Index cols = pa->value.cols();
          const Mat g = self->grad.replicate(1, cols);
          if (pa->requires_grad)
            pa->accumulate_grad(g.cwiseProduct(pb->value));
          if (pb->requires_grad)
            pb->accumulate_grad(g.cwiseProduct(pa->value));
        };
      },
      "dot");
}

Tensor normalize_rows(const Tensor& a, Real guard) {
  const Mat& x = a.value();
  Vec norms = x.rowwise().norm();
  Mat value = Mat::Zero(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i)
    if (norms[i] > guard) value.row(i) = x.row(i) / norms[i];
  return make_op(
      std::move(value), {a},
      [norms = std::move(norms), guard](Node* self) {
        return [self, norms, guard]() {
          Node* pa = self->parents[0].get();
          const Mat& x = pa->value;
          const Mat& g = self->grad;
          Mat out = Mat::Zero(x.rows(), x.cols());
          for (Index i = 0; i < x.rows(); ++i) {
            const Real n = norms[i];
            if (!(n > guard)) continue;  // degenerate rows get zero gradient
            const Real inv = Real(1) / n;
            const Real proj = x.row(i).dot(g.row(i)) * inv * inv * inv;
            out.row(i) = g.row(i) * inv - x.row(i) * proj;
          }
          pa->accumulate_grad(out);
        };
      },
      "normalize_rows");
}

Tensor gather_rows(const Tensor& a, std::vector<int> indices) {
  Mat value(static_cast<Index>(indices.size()), a.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int r = indices[i];
    if (r < 0 || r >= a.rows())
      throw ArgumentError("gather_rows: index out of range");
    value.row(static_cast<Index>(i)) = a.value().row(r);
  }
  return make_op(
      std::move(value), {a},
      [idx = std::move(indices)](Node* self) {
        return [self, idx]() {
          Node* pa = self->parents[0].get();
          Mat g = Mat::Zero(pa->value.rows(), pa->value.cols());
          for (std::size_t i = 0; i < idx.size(); ++i)
            g.row(idx[i]) += self->grad.row(static_cast<Index>(i));
          pa->accumulate_grad(g);
        };
      },
      "gather_rows");
}

Tensor scatter_add_rows(const Tensor& a, std::vector<int> indices,
                        Index out_rows) {
  if (static_cast<Index>(indices.size()) != a.rows())
    throw ArgumentError("scatter_add_rows: one index per input row required");
  Mat value = Mat::Zero(out_rows, a.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int r = indices[i];
    if (r < 0 || r >= out_rows)
      throw ArgumentError("scatter_add_rows: index out of range");
    value.row(r) += a.value().row(static_cast<Index>(i));
  }
  return make_op(
      std::move(value), {a},
      [idx = std::move(indices)](Node* self) {
        return [self, idx]() {
          Node* pa = self->parents[0].get();
          Mat g(pa->value.rows(), pa->value.cols());
          for (std::size_t i = 0; i < idx.size(); ++i)
            g.row(static_cast<Index>(i)) = self->grad.row(idx[i]);
          pa->accumulate_grad(g);
        };
      },
      "scatter_add_rows");
}

Tensor detach(const Tensor& a) {
  Tensor t = Tensor::constant(a.value());
  return t;
}

const Tensor& check_finite(const Tensor& a, const char* label) {
  if (!a.value().allFinite())
    throw NumericError(std::string("non-finite values in ") + label);
  return a;
}

}  // namespace defsurf::ad
