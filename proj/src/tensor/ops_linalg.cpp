#include <algorithm>

#include "ssagan/error.hpp"
#include "ssagan/ops.hpp"

namespace ssagan::ops {

namespace {

struct MatDims {
  std::int64_t batch, rows, cols;
};

MatDims mat_dims(const Tensor& t) {
  if (t.rank() == 2) return {1, t.shape()[0], t.shape()[1]};
  if (t.rank() == 3) return {t.shape()[0], t.shape()[1], t.shape()[2]};
  throw ContractError("matmul expects rank 2 or 3, got " + shape_str(t.shape()));
}

/// Row-major transpose of a (rows, cols) block.
void transpose_block(const Real* src, std::int64_t rows, std::int64_t cols, Real* dst) {
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

/// C(M,N) = A(M,K) B(K,N). Each output row depends only on its own row of A,
/// so results are independent of a sample's position in the batch.
void gemm_rows(const Real* a, const Real* b, Real* c, std::int64_t m, std::int64_t k, std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) {
    Real* crow = c + i * n;
    std::fill_n(crow, n, 0.0);
    const Real* arow = a + i * k;
    for (std::int64_t p = 0; p < k; ++p) {
      const Real av = arow[p];
      const Real* brow = b + p * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
  if (a.rank() != b.rank()) throw ContractError("matmul rank mismatch");
  MatDims da = mat_dims(a), db = mat_dims(b);
  if (da.batch != db.batch) throw InputError("matmul batch mismatch");
  const std::int64_t m = transpose_a ? da.cols : da.rows;
  const std::int64_t ka = transpose_a ? da.rows : da.cols;
  const std::int64_t kb = transpose_b ? db.cols : db.rows;
  const std::int64_t n = transpose_b ? db.rows : db.cols;
  if (ka != kb)
    throw InputError("matmul inner dimension mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));

  std::vector<Real> out(static_cast<std::size_t>(da.batch * m * n));
  std::vector<Real> ta, tb;
  if (transpose_a) ta.resize(static_cast<std::size_t>(m * ka));
  if (transpose_b) tb.resize(static_cast<std::size_t>(kb * n));
  for (std::int64_t s = 0; s < da.batch; ++s) {
    const Real* pa = a.ptr() + s * da.rows * da.cols;
    const Real* pb = b.ptr() + s * db.rows * db.cols;
    if (transpose_a) {
      transpose_block(pa, da.rows, da.cols, ta.data());
      pa = ta.data();
    }
    if (transpose_b) {
      transpose_block(pb, db.rows, db.cols, tb.data());
      pb = tb.data();
    }
    gemm_rows(pa, pb, out.data() + s * m * n, m, ka, n);
  }
  Shape shape = a.rank() == 2 ? Shape{m, n} : Shape{da.batch, m, n};
  return Tensor::make(shape, std::move(out), "matmul", {a, b},
                      [a, b, transpose_a, transpose_b](const Tensor& g) -> std::vector<Tensor> {
                        Tensor ga, gb;
                        if (a.requires_grad())
                          ga = transpose_a ? matmul(b, g, transpose_b, true) : matmul(g, b, false, !transpose_b);
                        if (b.requires_grad())
                          gb = transpose_b ? matmul(g, a, true, transpose_a) : matmul(a, g, !transpose_a, false);
                        return {ga, gb};
                      });
}

Tensor gather_rows(const Tensor& table, const std::vector<std::int64_t>& ids) {
  if (table.rank() != 2) throw ContractError("gather_rows expects a (V, D) table");
  const std::int64_t rows = table.shape()[0], width = table.shape()[1];
  std::vector<Real> out(ids.size() * static_cast<std::size_t>(width));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= rows) throw InputError("row id " + std::to_string(ids[i]) + " out of range");
    std::copy_n(table.ptr() + ids[i] * width, width, out.data() + i * width);
  }
  return Tensor::make(Shape{static_cast<std::int64_t>(ids.size()), width}, std::move(out), "gather_rows", {table},
                      [ids, rows](const Tensor& g) -> std::vector<Tensor> { return {scatter_add_rows(g, ids, rows)}; });
}

Tensor scatter_add_rows(const Tensor& src, const std::vector<std::int64_t>& ids, std::int64_t rows) {
  if (src.rank() != 2 || src.shape()[0] != static_cast<std::int64_t>(ids.size()))
    throw ContractError("scatter_add_rows shape mismatch");
  const std::int64_t width = src.shape()[1];
  std::vector<Real> out(static_cast<std::size_t>(rows * width), 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Real* dst = out.data() + ids[i] * width;
    const Real* row = src.ptr() + i * width;
    for (std::int64_t j = 0; j < width; ++j) dst[j] += row[j];
  }
  return Tensor::make(Shape{rows, width}, std::move(out), "scatter_add_rows", {src},
                      [ids](const Tensor& g) -> std::vector<Tensor> { return {gather_rows(g, ids)}; });
}

}  // namespace ssagan::ops
