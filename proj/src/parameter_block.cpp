#include "aggrex/parameter_block.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "aggrex/errors.hpp"
#include "aggrex/transforms.hpp"

namespace aggrex {

int BlockLayout::add(const std::string& name, std::vector<int> shape, Constraint constraint,
                     double lo, double hi) {
  for (const auto& b : blocks_)
    if (b.name == name) throw_config("InvalidConfig", "duplicate parameter block '" + name + "'");
  ParameterBlock b;
  b.name = name;
  b.shape = std::move(shape);
  b.constraint = constraint;
  b.lo = lo;
  b.hi = hi;
  int n = 1;
  for (int d : b.shape) {
    if (d <= 0) throw_config("InvalidConfig", "block '" + name + "' has a non-positive dimension");
    n *= d;
  }
  if (constraint == Constraint::Simplex && b.shape.size() != 1)
    throw_config("InvalidConfig", "simplex block '" + name + "' must be one-dimensional");
  if (constraint == Constraint::Bounded && !(lo < hi))
    throw_config("InvalidConfig", "bounded block '" + name + "' needs lo < hi");
  b.c_size = n;
  b.u_size = (constraint == Constraint::Simplex) ? n - 1 : n;
  b.u_offset = u_dim_;
  b.c_offset = c_dim_;
  u_dim_ += b.u_size;
  c_dim_ += b.c_size;
  blocks_.push_back(std::move(b));
  return static_cast<int>(blocks_.size()) - 1;
}

const ParameterBlock& BlockLayout::block(const std::string& name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b;
  throw_config("InvalidConfig", "no parameter block named '" + name + "'");
}

bool BlockLayout::has_block(const std::string& name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return true;
  return false;
}

double BlockLayout::constrain(const Eigen::Ref<const Eigen::VectorXd>& u,
                              Eigen::Ref<Eigen::VectorXd> c) const {
  double log_jac = 0.0;
  for (const auto& b : blocks_) {
    switch (b.constraint) {
      case Constraint::None:
        c.segment(b.c_offset, b.c_size) = u.segment(b.u_offset, b.u_size);
        break;
      case Constraint::Positive:
        for (int i = 0; i < b.c_size; ++i)
          c[b.c_offset + i] = positive_constrain(u[b.u_offset + i], &log_jac);
        break;
      case Constraint::UnitInterval:
        for (int i = 0; i < b.c_size; ++i)
          c[b.c_offset + i] = bounded_constrain(u[b.u_offset + i], 0.0, 1.0, &log_jac);
        break;
      case Constraint::Bounded:
        for (int i = 0; i < b.c_size; ++i)
          c[b.c_offset + i] = bounded_constrain(u[b.u_offset + i], b.lo, b.hi, &log_jac);
        break;
      case Constraint::Simplex:
        simplex_constrain(u.segment(b.u_offset, b.u_size), c.segment(b.c_offset, b.c_size),
                          &log_jac);
        break;
      case Constraint::Correlation:
        for (int i = 0; i < b.c_size; ++i)
          c[b.c_offset + i] = correlation_constrain(u[b.u_offset + i], &log_jac);
        break;
    }
  }
  return log_jac;
}

void BlockLayout::chain_grad(const Eigen::Ref<const Eigen::VectorXd>& u,
                             const Eigen::Ref<const Eigen::VectorXd>& c,
                             const Eigen::Ref<const Eigen::VectorXd>& grad_c,
                             Eigen::Ref<Eigen::VectorXd> grad_u) const {
  for (const auto& b : blocks_) {
    switch (b.constraint) {
      case Constraint::None:
        grad_u.segment(b.u_offset, b.u_size) = grad_c.segment(b.c_offset, b.c_size);
        break;
      case Constraint::Positive:
        for (int i = 0; i < b.c_size; ++i)
          grad_u[b.u_offset + i] = positive_chain(c[b.c_offset + i], grad_c[b.c_offset + i]);
        break;
      case Constraint::UnitInterval:
        for (int i = 0; i < b.c_size; ++i)
          grad_u[b.u_offset + i] = bounded_chain(u[b.u_offset + i], 0.0, 1.0, grad_c[b.c_offset + i]);
        break;
      case Constraint::Bounded:
        for (int i = 0; i < b.c_size; ++i)
          grad_u[b.u_offset + i] =
              bounded_chain(u[b.u_offset + i], b.lo, b.hi, grad_c[b.c_offset + i]);
        break;
      case Constraint::Simplex:
        simplex_chain(u.segment(b.u_offset, b.u_size), grad_c.segment(b.c_offset, b.c_size),
                      grad_u.segment(b.u_offset, b.u_size));
        break;
      case Constraint::Correlation:
        for (int i = 0; i < b.c_size; ++i)
          grad_u[b.u_offset + i] = correlation_chain(c[b.c_offset + i], grad_c[b.c_offset + i]);
        break;
    }
  }
}

bool BlockLayout::satisfies_constraints(const Eigen::Ref<const Eigen::VectorXd>& c,
                                        std::string* violation) const {
  auto fail = [&](const ParameterBlock& b, const char* what) {
    if (violation) {
      std::ostringstream os;
      os << "block '" << b.name << "': " << what;
      *violation = os.str();
    }
    return false;
  };
  for (const auto& b : blocks_) {
    switch (b.constraint) {
      case Constraint::None:
        break;
      case Constraint::Positive:
        for (int i = 0; i < b.c_size; ++i)
          if (!(c[b.c_offset + i] > 0.0)) return fail(b, "value not positive");
        break;
      case Constraint::UnitInterval:
        for (int i = 0; i < b.c_size; ++i)
          if (!(c[b.c_offset + i] > 0.0 && c[b.c_offset + i] < 1.0))
            return fail(b, "value outside (0, 1)");
        break;
      case Constraint::Bounded:
        for (int i = 0; i < b.c_size; ++i)
          if (!(c[b.c_offset + i] > b.lo && c[b.c_offset + i] < b.hi))
            return fail(b, "value outside bounds");
        break;
      case Constraint::Simplex: {
        double sum = 0.0;
        for (int i = 0; i < b.c_size; ++i) {
          if (!(c[b.c_offset + i] > 0.0)) return fail(b, "simplex entry not positive");
          sum += c[b.c_offset + i];
        }
        if (std::fabs(sum - 1.0) > 1e-10) return fail(b, "simplex does not sum to 1");
        break;
      }
      case Constraint::Correlation:
        for (int i = 0; i < b.c_size; ++i)
          if (!(c[b.c_offset + i] > -1.0 && c[b.c_offset + i] < 1.0))
            return fail(b, "correlation outside (-1, 1)");
        break;
    }
  }
  return true;
}

}  // namespace aggrex
