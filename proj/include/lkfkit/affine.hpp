#pragma once

#include <Eigen/Dense>
#include <compare>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace lkfkit {

enum class BlockKind { Symmetric, Full };

/// One named decision-variable block. Symmetric blocks are scalarized in
/// upper-triangular row-major order; an off-diagonal scalar stands for the
/// symmetric entry pair. Full blocks are scalarized row-major.
struct VariableBlock {
  int id = -1;
  std::string name;
  BlockKind kind = BlockKind::Symmetric;
  int rows = 0;
  int cols = 0;
  bool positive = false;  // block must be positive definite in any certificate

  int scalar_count() const {
    return kind == BlockKind::Symmetric ? rows * (rows + 1) / 2 : rows * cols;
  }
};

class VariableRegistry {
 public:
  int add_symmetric(const std::string& name, int n, bool positive);
  int add_full(const std::string& name, int rows, int cols);

  const VariableBlock& block(int id) const { return blocks_.at(static_cast<std::size_t>(id)); }
  const std::vector<VariableBlock>& blocks() const { return blocks_; }
  int count() const { return static_cast<int>(blocks_.size()); }
  int total_scalars() const;
  /// Global scalar index of the first entry of a block.
  int offset(int id) const;
  int find(const std::string& name) const;  // -1 when absent

  /// (row, col) of scalar entry e of a block.
  std::pair<int, int> entry_rc(int id, int e) const;
  int entry_index(int id, int r, int c) const;

 private:
  std::vector<VariableBlock> blocks_;
};

struct ScalarRef {
  int block = -1;
  int entry = -1;
  auto operator<=>(const ScalarRef&) const = default;
};

struct CoeffTriplet {
  int r = 0, c = 0;
  double v = 0.0;
};

/// s * (u v' + v u'); equals 2s*u*u' when u == v.
struct CoeffOuter {
  double s = 0.0;
  Eigen::VectorXd u, v;
};

/// Sparse symmetric coefficient matrix. Triplets carry r <= c and stand for
/// both (r, c) and (c, r); outer terms are kept factored so congruence
/// transforms of variable blocks stay low-rank.
struct SymCoeff {
  std::vector<CoeffTriplet> tri;
  std::vector<CoeffOuter> outer;

  bool empty() const { return tri.empty() && outer.empty(); }
  void accumulate(Eigen::MatrixXd& M, double scale) const;
  /// <coeff, M> for symmetric M.
  double inner(const Eigen::MatrixXd& M) const;
  Eigen::MatrixXd dense(int dim) const;
};

/// Plain (non-symmetric) sparse coefficient; outer terms mean s * u * v'.
struct RectCoeff {
  std::vector<CoeffTriplet> tri;
  std::vector<CoeffOuter> outer;

  void accumulate(Eigen::MatrixXd& M, double scale) const;
};

class Assignment {
 public:
  void set(int block_id, Eigen::MatrixXd value) { values_[block_id] = std::move(value); }
  bool has(int block_id) const { return values_.count(block_id) != 0; }
  const Eigen::MatrixXd& get(int block_id) const;
  double scalar(const VariableRegistry& reg, const ScalarRef& ref) const;

  Eigen::VectorXd to_vector(const VariableRegistry& reg) const;
  static Assignment from_vector(const VariableRegistry& reg, const Eigen::VectorXd& x);

  const std::unordered_map<int, Eigen::MatrixXd>& values() const { return values_; }

 private:
  std::unordered_map<int, Eigen::MatrixXd> values_;
};

class AffineRectExpr;

/// Symmetric matrix expression affine in the scalarized decision variables:
///   E(x) = constant + sum_k x_k * C_k
/// with every C_k symmetric by construction.
class AffineMatrixExpr {
 public:
  AffineMatrixExpr() = default;
  explicit AffineMatrixExpr(int dim) : dim_(dim), constant_(Eigen::MatrixXd::Zero(dim, dim)) {}
  static AffineMatrixExpr from_constant(const Eigen::MatrixXd& M);

  int dim() const { return dim_; }
  const Eigen::MatrixXd& constant_part() const { return constant_; }
  const std::map<ScalarRef, SymCoeff>& terms() const { return terms_; }

  void add_constant(const Eigen::MatrixXd& M, double s = 1.0);
  void add_scaled(const AffineMatrixExpr& other, double s = 1.0);
  /// Places `other` on the diagonal at (offset, offset).
  void add_embedded(const AffineMatrixExpr& other, int offset, double s = 1.0);

  /// Symmetric block placed on the diagonal at (row0, row0).
  void add_sym_block(const VariableRegistry& reg, int blk, int row0, double s = 1.0);
  /// Full block B at (row0, col0) together with B' at (col0, row0).
  /// The two placements must not overlap.
  void add_full_block_mirror(const VariableRegistry& reg, int blk, int row0, int col0,
                             double s = 1.0);
  /// s * W' B W for a symmetric block B; W has B's dimension rows.
  void add_quad_form(const VariableRegistry& reg, int blk, const Eigen::MatrixXd& W,
                     double s = 1.0);
  /// s * He{Wl' B Wr} for a symmetric block B.
  void add_he_sandwich(const VariableRegistry& reg, int blk, const Eigen::MatrixXd& Wl,
                       const Eigen::MatrixXd& Wr, double s = 1.0);
  /// s * He{R placed at (row0, col0)}.
  void add_he_rect(const AffineRectExpr& R, int row0, int col0, double s = 1.0);

  /// W' E W with W of shape (dim x p); result has dimension p.
  AffineMatrixExpr congruence(const Eigen::MatrixXd& W) const;

  void scale(double s);
  Eigen::MatrixXd eval(const VariableRegistry& reg, const Assignment& a) const;

  SymCoeff& coeff(const ScalarRef& ref) { return terms_[ref]; }

 private:
  int dim_ = 0;
  Eigen::MatrixXd constant_;
  std::map<ScalarRef, SymCoeff> terms_;
};

/// Rectangular affine expression; no symmetry maintained.
class AffineRectExpr {
 public:
  AffineRectExpr() = default;
  AffineRectExpr(int rows, int cols)
      : rows_(rows), cols_(cols), constant_(Eigen::MatrixXd::Zero(rows, cols)) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const Eigen::MatrixXd& constant_part() const { return constant_; }
  const std::map<ScalarRef, RectCoeff>& terms() const { return terms_; }

  void add_constant(const Eigen::MatrixXd& M, double s = 1.0);
  /// s * L * B * R (or L * B' * R when transposed) placed at (row0, col0).
  /// L and R may be empty to mean identity.
  void add_product(const VariableRegistry& reg, int blk, bool transposed,
                   const Eigen::MatrixXd& L, const Eigen::MatrixXd& R, int row0, int col0,
                   double s = 1.0);
  /// Block entries copied verbatim (optionally transposed) at (row0, col0).
  void add_placed(const VariableRegistry& reg, int blk, bool transposed, int row0, int col0,
                  double s = 1.0);
  void add_scaled(const AffineRectExpr& other, double s = 1.0);
  /// Places `other` at (row0, col0).
  void add_embedded(const AffineRectExpr& other, int row0, int col0, double s = 1.0);

  /// M * E; M has `rows()` columns.
  AffineRectExpr left_mul(const Eigen::MatrixXd& M) const;

  /// E + E' as a symmetric expression; requires rows() == cols().
  AffineMatrixExpr he() const;

  Eigen::MatrixXd eval(const VariableRegistry& reg, const Assignment& a) const;

 private:
  int rows_ = 0, cols_ = 0;
  Eigen::MatrixXd constant_;
  std::map<ScalarRef, RectCoeff> terms_;
};

/// E0 + d * E1, the delay-vertex form used when a bound enters affinely.
AffineMatrixExpr affine_in_d(const AffineMatrixExpr& E0, const AffineMatrixExpr& E1, double d);

/// diag(E1, ..., Ek).
AffineMatrixExpr block_diag(const std::vector<AffineMatrixExpr>& parts);

}  // namespace lkfkit
