#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loopcert/errors.hpp"

namespace loopcert {

/// A named group of scalar variables (e.g. the state block "x" of dimension 3).
struct VariableBlock {
  std::string name;
  int dimension = 0;
};

/// An ordered collection of uniquely named variable blocks. Spaces are
/// immutable once shared; polynomials hold a shared_ptr to theirs.
class VariableSpace {
 public:
  VariableSpace() = default;

  /// Adds a block and returns its index. Throws on duplicate names or
  /// non-positive dimensions.
  int add_block(const std::string& name, int dimension);

  std::optional<int> find_block(const std::string& name) const;
  int block_index(const std::string& name) const;  // throws StructuralError
  bool has_block(const std::string& name) const { return find_block(name).has_value(); }

  const VariableBlock& block(int index) const { return blocks_.at(index); }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  int total_dimension() const;
  const std::vector<VariableBlock>& blocks() const { return blocks_; }

  bool same_content(const VariableSpace& other) const;

 private:
  std::vector<VariableBlock> blocks_;
};

using SpacePtr = std::shared_ptr<const VariableSpace>;

/// Builds a space from (name, dimension) pairs; zero-dimension entries are
/// skipped so callers can pass optional blocks unconditionally.
SpacePtr make_space(const std::vector<std::pair<std::string, int>>& blocks);

/// A scalar variable: block index within a space plus coordinate index.
struct VarRef {
  int32_t block = 0;
  int32_t index = 0;

  friend bool operator==(const VarRef&, const VarRef&) = default;
  friend auto operator<=>(const VarRef&, const VarRef&) = default;

  uint64_t key() const {
    return (static_cast<uint64_t>(static_cast<uint32_t>(block)) << 32) |
           static_cast<uint32_t>(index);
  }
  static VarRef from_key(uint64_t k) {
    return VarRef{static_cast<int32_t>(k >> 32), static_cast<int32_t>(k & 0xffffffffu)};
  }
};

/// Checks that `v` is a valid variable of `space`, throwing otherwise.
void check_var(const VariableSpace& space, VarRef v);

/// Human-readable variable name, e.g. "x[2]" (1-based in printed form).
std::string var_name(const VariableSpace& space, VarRef v);

/// A numeric assignment of per-block vectors, used for evaluation and
/// set-membership tests. Blocks may be assigned independently.
class Point {
 public:
  Point() = default;
  explicit Point(SpacePtr space) : space_(std::move(space)) {}

  const SpacePtr& space() const { return space_; }

  void set(const std::string& block, Eigen::VectorXd values);
  void set(int block_index, Eigen::VectorXd values);
  bool has(int block_index) const;
  const Eigen::VectorXd& get(int block_index) const;

  double value(VarRef v) const;  // throws StructuralError if unassigned

  /// Merge other's assignments into this one (same space required).
  void merge(const Point& other);

 private:
  SpacePtr space_;
  std::map<int, Eigen::VectorXd> values_;
};

}  // namespace loopcert
