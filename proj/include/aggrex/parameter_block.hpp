#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace aggrex {

enum class Constraint {
  None,
  Positive,      // sampled on the log scale
  UnitInterval,  // logistic map to (0, 1)
  Bounded,       // logistic map to (lo, hi)
  Simplex,       // stick-breaking; K values from K-1 coordinates
  Correlation    // tanh map to (-1, 1), flat over valid correlations
};

// Named slice of the parameter vector. `shape` is the constrained shape;
// entries tile the flat vectors in row-major order.
struct ParameterBlock {
  std::string name;
  std::vector<int> shape;
  Constraint constraint = Constraint::None;
  double lo = 0.0, hi = 0.0;  // Bounded only

  int u_offset = 0, u_size = 0;  // unconstrained coordinates
  int c_offset = 0, c_size = 0;  // constrained values

  int size() const { return c_size; }
};

// Block inventory plus the unconstrained <-> constrained maps. Constrained
// values land in the front of the evaluation buffer shared with derived
// quantities.
class BlockLayout {
 public:
  // Returns the block index. Shapes are constrained shapes; a Simplex block
  // must be one-dimensional ({K}) and uses K-1 unconstrained coordinates.
  int add(const std::string& name, std::vector<int> shape, Constraint constraint,
          double lo = 0.0, double hi = 0.0);

  const std::vector<ParameterBlock>& blocks() const { return blocks_; }
  const ParameterBlock& block(int idx) const { return blocks_[static_cast<std::size_t>(idx)]; }
  const ParameterBlock& block(const std::string& name) const;
  bool has_block(const std::string& name) const;

  int u_dim() const { return u_dim_; }
  int c_dim() const { return c_dim_; }

  // Fills constrained values and returns the total log Jacobian.
  double constrain(const Eigen::Ref<const Eigen::VectorXd>& u,
                   Eigen::Ref<Eigen::VectorXd> c) const;

  // grad_u = J^T grad_c + d(log Jacobian)/du.
  void chain_grad(const Eigen::Ref<const Eigen::VectorXd>& u,
                  const Eigen::Ref<const Eigen::VectorXd>& c,
                  const Eigen::Ref<const Eigen::VectorXd>& grad_c,
                  Eigen::Ref<Eigen::VectorXd> grad_u) const;

  // True when every block's constraint holds for these constrained values.
  bool satisfies_constraints(const Eigen::Ref<const Eigen::VectorXd>& c,
                             std::string* violation = nullptr) const;

 private:
  std::vector<ParameterBlock> blocks_;
  int u_dim_ = 0;
  int c_dim_ = 0;
};

}  // namespace aggrex
