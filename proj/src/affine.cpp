#include "lkfkit/affine.hpp"

#include <Eigen/Sparse>
#include <cassert>
#include <stdexcept>

namespace lkfkit {

namespace {

Eigen::VectorXd padded(const Eigen::VectorXd& u, int new_dim, int offset) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(new_dim);
  out.segment(offset, static_cast<int>(u.size())) = u;
  return out;
}

}  // namespace

int VariableRegistry::add_symmetric(const std::string& name, int n, bool positive) {
  VariableBlock b;
  b.id = count();
  b.name = name;
  b.kind = BlockKind::Symmetric;
  b.rows = b.cols = n;
  b.positive = positive;
  blocks_.push_back(std::move(b));
  return blocks_.back().id;
}

int VariableRegistry::add_full(const std::string& name, int rows, int cols) {
  VariableBlock b;
  b.id = count();
  b.name = name;
  b.kind = BlockKind::Full;
  b.rows = rows;
  b.cols = cols;
  b.positive = false;
  blocks_.push_back(std::move(b));
  return blocks_.back().id;
}

int VariableRegistry::total_scalars() const {
  int total = 0;
  for (const auto& b : blocks_) total += b.scalar_count();
  return total;
}

int VariableRegistry::offset(int id) const {
  int off = 0;
  for (int i = 0; i < id; ++i) off += blocks_[static_cast<std::size_t>(i)].scalar_count();
  return off;
}

int VariableRegistry::find(const std::string& name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b.id;
  return -1;
}

std::pair<int, int> VariableRegistry::entry_rc(int id, int e) const {
  const VariableBlock& b = block(id);
  if (b.kind == BlockKind::Full) return {e / b.cols, e % b.cols};
  int r = 0;
  int row_len = b.rows;  // entries remaining in row r
  while (e >= row_len) {
    e -= row_len;
    ++r;
    --row_len;
  }
  return {r, r + e};
}

int VariableRegistry::entry_index(int id, int r, int c) const {
  const VariableBlock& b = block(id);
  if (b.kind == BlockKind::Full) return r * b.cols + c;
  if (r > c) std::swap(r, c);
  return r * b.rows - r * (r + 1) / 2 + c;
}

void SymCoeff::accumulate(Eigen::MatrixXd& M, double scale) const {
  for (const auto& t : tri) {
    M(t.r, t.c) += scale * t.v;
    if (t.r != t.c) M(t.c, t.r) += scale * t.v;
  }
  for (const auto& o : outer) {
    M.noalias() += (scale * o.s) * (o.u * o.v.transpose());
    M.noalias() += (scale * o.s) * (o.v * o.u.transpose());
  }
}

double SymCoeff::inner(const Eigen::MatrixXd& M) const {
  double acc = 0.0;
  for (const auto& t : tri) acc += (t.r == t.c ? 1.0 : 2.0) * t.v * M(t.r, t.c);
  for (const auto& o : outer) acc += o.s * (o.u.dot(M * o.v) + o.v.dot(M * o.u));
  return acc;
}

Eigen::MatrixXd SymCoeff::dense(int dim) const {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dim, dim);
  accumulate(M, 1.0);
  return M;
}

void RectCoeff::accumulate(Eigen::MatrixXd& M, double scale) const {
  for (const auto& t : tri) M(t.r, t.c) += scale * t.v;
  for (const auto& o : outer) M.noalias() += (scale * o.s) * (o.u * o.v.transpose());
}

const Eigen::MatrixXd& Assignment::get(int block_id) const {
  auto it = values_.find(block_id);
  if (it == values_.end()) throw std::out_of_range("assignment: missing block value");
  return it->second;
}

double Assignment::scalar(const VariableRegistry& reg, const ScalarRef& ref) const {
  auto [r, c] = reg.entry_rc(ref.block, ref.entry);
  return get(ref.block)(r, c);
}

Eigen::VectorXd Assignment::to_vector(const VariableRegistry& reg) const {
  Eigen::VectorXd x(reg.total_scalars());
  for (const auto& b : reg.blocks()) {
    const int off = reg.offset(b.id);
    const Eigen::MatrixXd& V = get(b.id);
    for (int e = 0; e < b.scalar_count(); ++e) {
      auto [r, c] = reg.entry_rc(b.id, e);
      x(off + e) = V(r, c);
    }
  }
  return x;
}

Assignment Assignment::from_vector(const VariableRegistry& reg, const Eigen::VectorXd& x) {
  Assignment a;
  for (const auto& b : reg.blocks()) {
    const int off = reg.offset(b.id);
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(b.rows, b.cols);
    for (int e = 0; e < b.scalar_count(); ++e) {
      auto [r, c] = reg.entry_rc(b.id, e);
      V(r, c) = x(off + e);
      if (b.kind == BlockKind::Symmetric) V(c, r) = x(off + e);
    }
    a.set(b.id, std::move(V));
  }
  return a;
}

AffineMatrixExpr AffineMatrixExpr::from_constant(const Eigen::MatrixXd& M) {
  AffineMatrixExpr e(static_cast<int>(M.rows()));
  e.constant_ = 0.5 * (M + M.transpose());
  return e;
}

void AffineMatrixExpr::add_constant(const Eigen::MatrixXd& M, double s) {
  assert(M.rows() == dim_ && M.cols() == dim_);
  constant_ += s * M;
}

void AffineMatrixExpr::add_scaled(const AffineMatrixExpr& other, double s) {
  assert(other.dim_ == dim_);
  constant_ += s * other.constant_;
  for (const auto& [ref, co] : other.terms_) {
    SymCoeff& dst = terms_[ref];
    for (auto t : co.tri) {
      t.v *= s;
      dst.tri.push_back(t);
    }
    for (auto o : co.outer) {
      o.s *= s;
      dst.outer.push_back(std::move(o));
    }
  }
}

void AffineMatrixExpr::add_embedded(const AffineMatrixExpr& other, int offset, double s) {
  assert(offset + other.dim_ <= dim_);
  constant_.block(offset, offset, other.dim_, other.dim_) += s * other.constant_;
  for (const auto& [ref, co] : other.terms_) {
    SymCoeff& dst = terms_[ref];
    for (auto t : co.tri)
      dst.tri.push_back({t.r + offset, t.c + offset, s * t.v});
    for (const auto& o : co.outer)
      dst.outer.push_back({s * o.s, padded(o.u, dim_, offset), padded(o.v, dim_, offset)});
  }
}

void AffineMatrixExpr::add_sym_block(const VariableRegistry& reg, int blk, int row0, double s) {
  const VariableBlock& b = reg.block(blk);
  assert(b.kind == BlockKind::Symmetric);
  for (int e = 0; e < b.scalar_count(); ++e) {
    auto [r, c] = reg.entry_rc(blk, e);
    terms_[{blk, e}].tri.push_back({row0 + r, row0 + c, s});
  }
}

void AffineMatrixExpr::add_full_block_mirror(const VariableRegistry& reg, int blk, int row0,
                                             int col0, double s) {
  const VariableBlock& b = reg.block(blk);
  // the mirrored placement must not collide with the direct one
  assert(row0 + b.rows <= col0 || col0 + b.cols <= row0);
  for (int e = 0; e < b.scalar_count(); ++e) {
    auto [r, c] = reg.entry_rc(blk, e);
    int i = row0 + r, j = col0 + c;
    if (i > j) std::swap(i, j);
    terms_[{blk, e}].tri.push_back({i, j, s});
  }
}

void AffineMatrixExpr::add_quad_form(const VariableRegistry& reg, int blk,
                                     const Eigen::MatrixXd& W, double s) {
  const VariableBlock& b = reg.block(blk);
  assert(b.kind == BlockKind::Symmetric);
  assert(W.rows() == b.rows && W.cols() == dim_);
  for (int e = 0; e < b.scalar_count(); ++e) {
    auto [r, c] = reg.entry_rc(blk, e);
    const Eigen::VectorXd wr = W.row(r).transpose();
    if (r == c) {
      terms_[{blk, e}].outer.push_back({0.5 * s, wr, wr});
    } else {
      terms_[{blk, e}].outer.push_back({s, wr, W.row(c).transpose()});
    }
  }
}

void AffineMatrixExpr::add_he_sandwich(const VariableRegistry& reg, int blk,
                                       const Eigen::MatrixXd& Wl, const Eigen::MatrixXd& Wr,
                                       double s) {
  const VariableBlock& b = reg.block(blk);
  assert(Wl.rows() == b.rows && Wl.cols() == dim_);
  assert(Wr.rows() == b.cols && Wr.cols() == dim_);
  for (int e = 0; e < b.scalar_count(); ++e) {
    auto [r, c] = reg.entry_rc(blk, e);
    SymCoeff& dst = terms_[{blk, e}];
    // He{Wl' E_rc Wr}, plus the mirrored entry for symmetric blocks
    dst.outer.push_back({s, Wl.row(r).transpose(), Wr.row(c).transpose()});
    if (b.kind == BlockKind::Symmetric && r != c)
      dst.outer.push_back({s, Wl.row(c).transpose(), Wr.row(r).transpose()});
  }
}

void AffineMatrixExpr::add_he_rect(const AffineRectExpr& R, int row0, int col0, double s) {
  assert(row0 + R.rows() <= dim_ && col0 + R.cols() <= dim_);
  {
    const Eigen::MatrixXd& C = R.constant_part();
    constant_.block(row0, col0, R.rows(), R.cols()) += s * C;
    constant_.block(col0, row0, R.cols(), R.rows()) += s * C.transpose();
  }
  for (const auto& [ref, co] : R.terms()) {
    SymCoeff& dst = terms_[ref];
    for (const auto& t : co.tri) {
      int i = row0 + t.r, j = col0 + t.c;
      if (i == j) {
        dst.tri.push_back({i, i, 2.0 * s * t.v});
      } else {
        if (i > j) std::swap(i, j);
        dst.tri.push_back({i, j, s * t.v});
      }
    }
    for (const auto& o : co.outer)
      dst.outer.push_back({s * o.s, padded(o.u, dim_, row0), padded(o.v, dim_, col0)});
  }
}

AffineMatrixExpr AffineMatrixExpr::congruence(const Eigen::MatrixXd& W) const {
  assert(W.rows() == dim_);
  const int p = static_cast<int>(W.cols());
  AffineMatrixExpr out(p);
  out.constant_ = W.transpose() * constant_ * W;
  for (const auto& [ref, co] : terms_) {
    SymCoeff& dst = out.terms_[ref];
    for (const auto& o : co.outer)
      dst.outer.push_back({o.s, W.transpose() * o.u, W.transpose() * o.v});
    if (co.tri.empty()) continue;
    if (co.tri.size() <= 2) {
      for (const auto& t : co.tri) {
        const Eigen::VectorXd wr = W.row(t.r).transpose();
        if (t.r == t.c) {
          dst.outer.push_back({0.5 * t.v, wr, wr});
        } else {
          dst.outer.push_back({t.v, wr, W.row(t.c).transpose()});
        }
      }
    } else {
      Eigen::MatrixXd B = Eigen::MatrixXd::Zero(dim_, dim_);
      for (const auto& t : co.tri) {
        B(t.r, t.c) += t.v;
        if (t.r != t.c) B(t.c, t.r) += t.v;
      }
      const Eigen::MatrixXd R = W.transpose() * B * W;
      for (int i = 0; i < p; ++i)
        for (int j = i; j < p; ++j)
          if (R(i, j) != 0.0) dst.tri.push_back({i, j, 0.5 * (R(i, j) + R(j, i))});
    }
  }
  return out;
}

void AffineMatrixExpr::scale(double s) {
  constant_ *= s;
  for (auto& [ref, co] : terms_) {
    for (auto& t : co.tri) t.v *= s;
    for (auto& o : co.outer) o.s *= s;
  }
}

Eigen::MatrixXd AffineMatrixExpr::eval(const VariableRegistry& reg, const Assignment& a) const {
  Eigen::MatrixXd M = constant_;
  for (const auto& [ref, co] : terms_) co.accumulate(M, a.scalar(reg, ref));
  return M;
}

AffineRectExpr AffineRectExpr::left_mul(const Eigen::MatrixXd& M) const {
  assert(M.cols() == rows_);
  AffineRectExpr out(static_cast<int>(M.rows()), cols_);
  out.constant_ = M * constant_;
  for (const auto& [ref, co] : terms_) {
    RectCoeff& dst = out.terms_[ref];
    for (const auto& t : co.tri) {
      for (int i = 0; i < M.rows(); ++i) {
        const double v = M(i, t.r) * t.v;
        if (v != 0.0) dst.tri.push_back({i, t.c, v});
      }
    }
    for (const auto& o : co.outer) dst.outer.push_back({o.s, M * o.u, o.v});
  }
  return out;
}

void AffineRectExpr::add_constant(const Eigen::MatrixXd& M, double s) {
  assert(M.rows() == rows_ && M.cols() == cols_);
  constant_ += s * M;
}

void AffineRectExpr::add_product(const VariableRegistry& reg, int blk, bool transposed,
                                 const Eigen::MatrixXd& L, const Eigen::MatrixXd& R, int row0,
                                 int col0, double s) {
  const VariableBlock& b = reg.block(blk);
  const bool has_l = L.size() > 0;
  const bool has_r = R.size() > 0;
  for (int e = 0; e < b.scalar_count(); ++e) {
    auto [r, c] = reg.entry_rc(blk, e);
    RectCoeff& dst = terms_[{blk, e}];
    auto emit = [&](int br, int bc) {
      // contribution of entry value at (br, bc) of the (possibly transposed) block
      const int pr = transposed ? bc : br;
      const int pc = transposed ? br : bc;
      const int lw = has_l ? static_cast<int>(L.rows()) : 1;
      const int rw = has_r ? static_cast<int>(R.cols()) : 1;
      for (int i = 0; i < lw; ++i) {
        const double lv = has_l ? L(i, pr) : 1.0;
        if (lv == 0.0) continue;
        for (int j = 0; j < rw; ++j) {
          const double rv = has_r ? R(pc, j) : 1.0;
          if (rv == 0.0) continue;
          const int gr = row0 + (has_l ? i : pr);
          const int gc = col0 + (has_r ? j : pc);
          dst.tri.push_back({gr, gc, s * lv * rv});
        }
      }
    };
    emit(r, c);
    if (b.kind == BlockKind::Symmetric && r != c) emit(c, r);
  }
}

void AffineRectExpr::add_placed(const VariableRegistry& reg, int blk, bool transposed, int row0,
                                int col0, double s) {
  add_product(reg, blk, transposed, Eigen::MatrixXd(), Eigen::MatrixXd(), row0, col0, s);
}

void AffineRectExpr::add_scaled(const AffineRectExpr& other, double s) {
  assert(other.rows_ == rows_ && other.cols_ == cols_);
  constant_ += s * other.constant_;
  for (const auto& [ref, co] : other.terms_) {
    RectCoeff& dst = terms_[ref];
    for (auto t : co.tri) {
      t.v *= s;
      dst.tri.push_back(t);
    }
    for (auto o : co.outer) {
      o.s *= s;
      dst.outer.push_back(std::move(o));
    }
  }
}

void AffineRectExpr::add_embedded(const AffineRectExpr& other, int row0, int col0, double s) {
  assert(row0 + other.rows_ <= rows_ && col0 + other.cols_ <= cols_);
  constant_.block(row0, col0, other.rows_, other.cols_) += s * other.constant_;
  for (const auto& [ref, co] : other.terms_) {
    RectCoeff& dst = terms_[ref];
    for (auto t : co.tri) dst.tri.push_back({t.r + row0, t.c + col0, s * t.v});
    for (const auto& o : co.outer)
      dst.outer.push_back({s * o.s, padded(o.u, rows_, row0), padded(o.v, cols_, col0)});
  }
}

AffineMatrixExpr AffineRectExpr::he() const {
  if (rows_ != cols_) throw std::invalid_argument("he: expression must be square");
  AffineMatrixExpr out(rows_);
  out.add_constant(constant_ + constant_.transpose());
  for (const auto& [ref, co] : terms_) {
    SymCoeff& dst = out.coeff(ref);
    for (const auto& t : co.tri) {
      if (t.r == t.c) {
        dst.tri.push_back({t.r, t.r, 2.0 * t.v});
      } else {
        dst.tri.push_back({std::min(t.r, t.c), std::max(t.r, t.c), t.v});
      }
    }
    for (const auto& o : co.outer) dst.outer.push_back(o);
  }
  return out;
}

Eigen::MatrixXd AffineRectExpr::eval(const VariableRegistry& reg, const Assignment& a) const {
  Eigen::MatrixXd M = constant_;
  for (const auto& [ref, co] : terms_) co.accumulate(M, a.scalar(reg, ref));
  return M;
}

AffineMatrixExpr affine_in_d(const AffineMatrixExpr& E0, const AffineMatrixExpr& E1, double d) {
  AffineMatrixExpr out = E0;
  out.add_scaled(E1, d);
  return out;
}

AffineMatrixExpr block_diag(const std::vector<AffineMatrixExpr>& parts) {
  int dim = 0;
  for (const auto& p : parts) dim += p.dim();
  AffineMatrixExpr out(dim);
  int off = 0;
  for (const auto& p : parts) {
    out.add_embedded(p, off);
    off += p.dim();
  }
  return out;
}

}  // namespace lkfkit
